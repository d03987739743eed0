"""Drift models and curvature profiles.

Everything downstream (bounds, simulation, case studies) consumes the types
defined here: a radial curvature profile ``KappaSpec``, the two-regime step
profile ``LKRProfile``, and a pair of drifts with a uniform difference bound
``DriftPair``.  Drifts are affine-plus-radial coefficient tables so that
models stay serializable in scenario config files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class KappaSpec:
    """Radial curvature profile: piecewise linear, constant negative tail.

    ``breakpoints`` is an ordered tuple of (radius, value) pairs defining a
    piecewise-linear function on [0, tail_start]; beyond ``tail_start`` the
    profile equals ``tail_value`` (< 0).  A terminal breakpoint at
    (tail_start, tail_value) is appended if missing so the profile is
    continuous, hence Lipschitz on compacts.
    """

    breakpoints: tuple = ()
    tail_value: float = -1.0
    tail_start: float = 0.0

    def __post_init__(self):
        if not self.tail_value < 0.0:
            raise ModelError("kappa tail_value must be strictly negative")
        if self.tail_start < 0.0:
            raise ModelError("tail_start must be nonnegative")
        bps = [(float(r), float(v)) for r, v in self.breakpoints]
        for (r0, _), (r1, _) in zip(bps, bps[1:]):
            if r1 <= r0:
                raise ModelError("breakpoint radii must be strictly increasing")
        if bps:
            if bps[0][0] < 0.0:
                raise ModelError("breakpoint radii must be nonnegative")
            if bps[-1][0] > self.tail_start:
                raise ModelError("breakpoints must not extend past tail_start")
            if bps[-1][0] < self.tail_start or bps[-1][1] != self.tail_value:
                bps.append((self.tail_start, self.tail_value))
        else:
            bps = [(self.tail_start, self.tail_value)]
        object.__setattr__(self, "breakpoints", tuple(bps))

    @classmethod
    def constant(cls, value: float) -> "KappaSpec":
        return cls(breakpoints=(), tail_value=value, tail_start=0.0)

    @property
    def radii(self) -> np.ndarray:
        return np.array([r for r, _ in self.breakpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.breakpoints])

    def __call__(self, r):
        """Evaluate kappa(r); constant before the first breakpoint and
        beyond tail_start."""
        return np.interp(r, self.radii, self.values)

    def lipschitz_bound(self) -> float:
        """Max breakpoint slope (Lipschitz constant on compacts)."""
        rs, vs = self.radii, self.values
        if len(rs) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(vs) / np.diff(rs))))


@dataclass(frozen=True)
class LKRProfile:
    """Two-regime curvature bound: kappa(r) = L for r < R_script, -K beyond.

    The step profile is used exactly by the closed-form bounds; simulation
    needs a Lipschitz profile, provided by :meth:`mollified`.
    """

    L: float
    K: float
    R_script: float

    def __post_init__(self):
        if self.L < 0.0:
            raise ModelError("L must be nonnegative")
        if self.K <= 0.0:
            raise ModelError("K must be positive")
        if self.R_script < 0.0:
            raise ModelError("R_script must be nonnegative")

    def step(self, r):
        """Exact step profile L*1(r < R_script) - K*1(r >= R_script)."""
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R_script, self.L, -self.K)

    def mollified(self, width: Optional[float] = None) -> KappaSpec:
        """Lipschitz profile dominating the step pointwise.

        The ramp from L down to -K runs over [R_script, R_script + width]
        (default width R_script/100); the step jumps down at R_script, so any
        continuous majorant must place its ramp after the jump.  Outside the
        ramp the two profiles agree.
        """
        if self.R_script == 0.0:
            return KappaSpec.constant(-self.K)
        w = self.R_script / 100.0 if width is None else float(width)
        if w <= 0.0:
            raise ModelError("mollification width must be positive")
        return KappaSpec(
            breakpoints=((0.0, self.L), (self.R_script, self.L)),
            tail_value=-self.K,
            tail_start=self.R_script + w,
        )


@dataclass(frozen=True)
class PLTable:
    """Piecewise-linear scalar profile with linear extension past the ends."""

    xs: tuple
    vs: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.vs) or len(self.xs) < 1:
            raise ModelError("PLTable needs matching, nonempty xs/vs")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ModelError("PLTable abscissae must increase")

    def __call__(self, r):
        xs = np.asarray(self.xs)
        vs = np.asarray(self.vs)
        r = np.asarray(r, dtype=float)
        out = np.interp(r, xs, vs)
        if len(xs) >= 2:
            slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
            out = np.where(r > xs[-1], vs[-1] + slope * (r - xs[-1]), out)
        return out


@dataclass(frozen=True)
class DriftSpec:
    """Affine-plus-radial drift b(x) = A x + c + rho(|x|) x + sigma(|x|) x/|x|.

    ``rho`` multiplies the position, ``sigma`` acts along the unit radial
    direction (zero at the origin); both are piecewise-linear tables.
    """

    dim: int
    linear: Optional[np.ndarray] = None
    constant: Optional[np.ndarray] = None
    radial_mult: Optional[PLTable] = None
    radial_unit: Optional[PLTable] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError("dimension must be positive")
        if self.linear is not None:
            A = np.asarray(self.linear, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise ModelError("linear part must be a (d, d) matrix")
            object.__setattr__(self, "linear", A)
        c = (np.zeros(self.dim) if self.constant is None
             else np.asarray(self.constant, dtype=float).reshape(self.dim))
        object.__setattr__(self, "constant", c)

    def __call__(self, t, x):
        """Evaluate at points ``x`` of shape (..., dim); ``t`` is unused for
        these autonomous forms but kept for the drift signature."""
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(self.constant, x.shape).copy()
        if self.linear is not None:
            out = out + x @ self.linear.T
        if self.radial_mult is not None or self.radial_unit is not None:
            r = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
            if self.radial_mult is not None:
                out = out + self.radial_mult(r) * x
            if self.radial_unit is not None:
                with np.errstate(invalid="ignore", divide="ignore"):
                    unit = np.where(r > 0.0, x / r, 0.0)
                out = out + self.radial_unit(r) * unit
        return out


@dataclass(frozen=True)
class DriftPair:
    """Two drifts on R^d with uniform difference bound M and the curvature
    profile / step profile they satisfy."""

    dimension: int
    b: Callable
    b_tilde: Callable
    M: float
    kappa: Optional[KappaSpec] = None
    lkr: Optional[LKRProfile] = None
    name: str = "custom"

    def __post_init__(self):
        if self.M < 0.0:
            raise ModelError("M must be nonnegative")
        if self.dimension < 1:
            raise ModelError("dimension must be positive")


@dataclass(frozen=True)
class TimeDependentRadialDrift:
    """Radial drift alpha(t, r) = m0 * exp(-decay_rate * t) + kappa(r) r.

    Non-increasing in t (decay_rate >= 0, m0 >= 0) with alpha(t, 0) > 0 for
    m0 > 0.  ``majorant_a`` defaults to alpha(0, .); an override callable can
    be supplied when a different majorant is more convenient.
    """

    m0: float
    decay_rate: float
    kappa: KappaSpec
    majorant_override: Optional[Callable] = None

    def __post_init__(self):
        if self.m0 < 0.0:
            raise ModelError("m0 must be nonnegative")
        if self.decay_rate < 0.0:
            raise ModelError("decay_rate must be nonnegative")

    def m_at(self, t):
        return self.m0 * np.exp(-self.decay_rate * np.asarray(t, dtype=float))

    def alpha(self, t, r):
        return self.m_at(t) + self.kappa(r) * np.asarray(r, dtype=float)

    def majorant_a(self, r):
        if self.majorant_override is not None:
            return self.majorant_override(r)
        return self.m0 + self.kappa(r) * np.asarray(r, dtype=float)


@dataclass
class ValidationReport:
    """Sampled check of the drift-difference and curvature inequalities."""

    max_drift_gap: float          # max ||b - b_tilde|| - M over samples
    max_curvature_excess: float   # max <x-y, b(x)-b(y)> - kappa(|x-y|)|x-y|^2
    samples: int
    passed: bool = field(init=False)
    tol: float = 1e-9

    def __post_init__(self):
        self.passed = (self.max_drift_gap <= self.tol
                       and self.max_curvature_excess <= self.tol)


def builtin_models(name: str, params: dict) -> DriftPair:
    """Construct one of the bundled drift pairs.

    * ``ou``: b(x) = -x/2 and b(x) + m/2; M = |m|/2, kappa = -1/2.
    * ``confined_bm``: flat inside [-R, R], restoring -k(x - R sgn x)/2
      outside, shifted by m/2; M = m/2, step profile (L=0, K=k/6, 3R).
    * ``custom``: explicit coefficient tables for both drifts.
    """
    if name == "ou":
        m = np.atleast_1d(np.asarray(params["m"], dtype=float))
        d = len(m)
        A = -0.5 * np.eye(d)
        b = DriftSpec(dim=d, linear=A)
        bt = DriftSpec(dim=d, linear=A, constant=m / 2.0)
        return DriftPair(dimension=d, b=b, b_tilde=bt,
                         M=float(np.linalg.norm(m)) / 2.0,
                         kappa=KappaSpec.constant(-0.5), name="ou")
    if name == "confined_bm":
        R = float(params["R"])
        k = float(params["k"])
        m = float(params["m"])
        if R <= 0.0 or k <= 0.0:
            raise ModelError("confined_bm requires positive R and k")
        # radial magnitude -k max(r - R, 0)/2 along x/|x| (d = 1)
        sigma = PLTable(xs=(0.0, R, R + 1.0), vs=(0.0, 0.0, -k / 2.0))
        b = DriftSpec(dim=1, radial_unit=sigma)
        bt = DriftSpec(dim=1, radial_unit=sigma, constant=[m / 2.0])
        lkr = LKRProfile(L=0.0, K=k / 6.0, R_script=3.0 * R)
        return DriftPair(dimension=1, b=b, b_tilde=bt, M=m / 2.0,
                         kappa=lkr.mollified(), lkr=lkr, name="confined_bm")
    if name == "custom":
        b = _drift_from_tables(params["b"])
        bt = _drift_from_tables(params["b_tilde"])
        if b.dim != bt.dim:
            raise ModelError("custom drifts must share a dimension")
        M = params.get("M")
        if M is None:
            M = _constant_difference_bound(b, bt)
        kappa = params.get("kappa")
        if isinstance(kappa, dict):
            kappa = KappaSpec(**kappa)
        return DriftPair(dimension=b.dim, b=b, b_tilde=bt, M=float(M),
                         kappa=kappa, name="custom")
    raise ModelError(f"unknown builtin model {name!r}")


def _drift_from_tables(spec: dict) -> DriftSpec:
    dim = int(spec["dim"])
    lin = spec.get("linear")
    rho = spec.get("radial_mult")
    sig = spec.get("radial_unit")
    return DriftSpec(
        dim=dim,
        linear=None if lin is None else np.asarray(lin, dtype=float),
        constant=spec.get("constant"),
        radial_mult=None if rho is None else PLTable(tuple(rho["xs"]), tuple(rho["vs"])),
        radial_unit=None if sig is None else PLTable(tuple(sig["xs"]), tuple(sig["vs"])),
    )


def _constant_difference_bound(b: DriftSpec, bt: DriftSpec) -> float:
    """M for drifts differing by a constant; error out otherwise."""
    same_shape = (
        (b.linear is None) == (bt.linear is None)
        and (b.linear is None or np.array_equal(b.linear, bt.linear))
        and b.radial_mult == bt.radial_mult
        and b.radial_unit == bt.radial_unit
    )
    if not same_shape:
        raise ModelError("cannot infer M: drifts do not differ by a constant; "
                         "declare M explicitly")
    return float(np.linalg.norm(b.constant - bt.constant))


def validate_model(pair: DriftPair, kappa: KappaSpec, samples: int = 1000,
                   seed: int = 0, box: float = 10.0,
                   horizon: float = 10.0) -> ValidationReport:
    """Randomized check of the declared M and kappa.

    Draws (t, x, y) uniformly from [0, horizon] x [-box, box]^d and records
    the worst observed violation of the two defining inequalities.  Both
    gaps must be <= tol for a pass; the report carries the raw values.
    """
    if samples < 1:
        raise ModelError("samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x76616c]))
    d = pair.dimension
    t = rng.uniform(0.0, horizon, size=samples)
    x = rng.uniform(-box, box, size=(samples, d))
    y = rng.uniform(-box, box, size=(samples, d))

    diff = pair.b(t[:, None], x) - pair.b_tilde(t[:, None], y * 0 + x)
    drift_gap = float(np.max(np.sqrt(np.sum(diff * diff, axis=-1))) - pair.M)

    bx = pair.b(t[:, None], x)
    by = pair.b(t[:, None], y)
    z = x - y
    r = np.sqrt(np.sum(z * z, axis=-1))
    inner = np.sum(z * (bx - by), axis=-1)
    excess = float(np.max(inner - kappa(r) * r * r))
    return ValidationReport(max_drift_gap=drift_gap,
                            max_curvature_excess=excess, samples=samples)
