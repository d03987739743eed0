"""Simulation engine: Euler discretizations of the interpolated coupling,
the one-dimensional sticky radial SDE, and mean-field particle systems.

Two interchangeable kernel backends exist: a Cython extension (compiled at
install time) and a pure-NumPy reference.  The compiled one is selected at
import when available; set ``STICKYSIM_BACKEND=python`` or ``compiled`` to
force a choice.  Both backends consume identical pregenerated increment
streams and perform identical arithmetic, so trajectories agree bitwise
(mean-field summation order excepted).

Randomness contract: path ``p`` of a run with seed ``s`` draws from
``Philox(key=(s, p))`` - a counter-based generator keyed per path, so results
are independent of chunking, scheduling, and thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..model import DriftPair, DriftSpec, KappaSpec, TimeDependentRadialDrift
from . import _reference

_env = os.environ.get("STICKYSIM_BACKEND", "").strip().lower()
if _env == "python":
    _kernels = _reference
else:
    try:
        from . import _speedups as _kernels  # type: ignore
    except ImportError:
        if _env == "compiled":
            raise ImportError(
                "STICKYSIM_BACKEND=compiled but stickysim.engine._speedups "
                "is not built; run pip install -e . with a C compiler")
        _kernels = _reference

BACKEND = _kernels.BACKEND_NAME
RNG_ALGORITHM = "philox4x64 keyed (seed, path); normals then uniforms per path"

#: stream index offset for auxiliary (non-path) draws, e.g. projection
#: directions; keeps them disjoint from path streams at any realistic count
AUX_STREAM = 2 ** 62

# increment-memory budget per chunk, in float64 values
_CHUNK_BUDGET = 2 ** 24


class EngineError(ValueError):
    pass


def rng_stream(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream for one path: identical (seed, path_index) gives
    identical draws regardless of chunking, ordering, or worker count."""
    if not 0 <= seed < 2 ** 64:
        raise EngineError("seed must be a 64-bit unsigned integer")
    if not 0 <= path_index < 2 ** 64:
        raise EngineError("path_index must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=[seed, path_index]))


@dataclass(frozen=True)
class SimConfig:
    """Discretization and ensemble parameters.

    ``step_h < delta**2 / 4`` is enforced: it is the relaxation time of the
    coupling's interpolation zone, and with larger steps the discrete zone
    dynamics are multiplicatively unstable (the comparison ordering and the
    near-meeting occupation are both destroyed).
    """

    step_h: float
    horizon_T: float
    delta: float = 0.05
    reg_n: int = 100
    paths: int = 1
    seed: int = 0
    dimension: int = 1

    def __post_init__(self):
        if self.step_h <= 0.0:
            raise EngineError("step_h must be positive")
        if self.horizon_T <= 0.0 or self.step_h >= self.horizon_T:
            raise EngineError("need 0 < step_h < horizon_T")
        if self.delta <= 0.0:
            raise EngineError("delta must be positive")
        if not self.step_h < self.delta ** 2 / 4.0:
            raise EngineError(
                f"step_h={self.step_h} must be < delta^2/4={self.delta**2/4}: "
                "the interpolation zone is unresolved otherwise")
        if self.reg_n < 1:
            raise EngineError("reg_n must be a positive integer")
        if self.paths < 1:
            raise EngineError("paths must be positive")
        if self.dimension < 1:
            raise EngineError("dimension must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.step_h))


def _record_indices(cfg: SimConfig, record_times, full: bool) -> np.ndarray:
    if full:
        return np.arange(cfg.n_steps + 1, dtype=np.int64)
    if record_times is None:
        return np.array([0, cfg.n_steps], dtype=np.int64)
    idx = []
    for t in record_times:
        j = int(round(t / cfg.step_h))
        if abs(j * cfg.step_h - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= j <= cfg.n_steps:
            raise EngineError(f"record time {t} is not on the step grid")
        idx.append(j)
    out = np.unique(np.asarray(idx, dtype=np.int64))
    return out


def _drift_params(spec) -> dict:
    """Pack a DriftSpec (or compatible callable carrier) for the kernels."""
    if not isinstance(spec, DriftSpec):
        raise EngineError("engine drifts must be DriftSpec coefficient tables")
    d = spec.dim
    A = np.zeros((d, d)) if spec.linear is None else np.asarray(spec.linear, float)
    p = {
        "has_A": spec.linear is not None,
        "A": np.ascontiguousarray(A),
        "c": np.ascontiguousarray(spec.constant, dtype=float),
        "has_rho": spec.radial_mult is not None,
        "rho_xs": np.asarray(spec.radial_mult.xs, float) if spec.radial_mult else np.zeros(1),
        "rho_vs": np.asarray(spec.radial_mult.vs, float) if spec.radial_mult else np.zeros(1),
        "has_sig": spec.radial_unit is not None,
        "sig_xs": np.asarray(spec.radial_unit.xs, float) if spec.radial_unit else np.zeros(1),
        "sig_vs": np.asarray(spec.radial_unit.vs, float) if spec.radial_unit else np.zeros(1),
    }
    return p


def _kappa_tables(kappa: KappaSpec):
    return (np.ascontiguousarray(kappa.radii, dtype=float),
            np.ascontiguousarray(kappa.values, dtype=float))


# ---------------------------------------------------------------------------
# result containers

@dataclass(frozen=True)
class CouplingPath:
    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    r_tilde: np.ndarray
    r_comp: np.ndarray
    w_increments: Optional[np.ndarray]


@dataclass(frozen=True)
class CouplingEnsemble:
    """Recorded states of an interpolated-coupling ensemble.

    ``viol_counts[p, j]`` counts grid points of path p violating
    r_tilde <= r_comp + slack_j with slack_j = a_j + b_j sqrt(h)(1 + r_comp).
    """

    times: np.ndarray
    X: np.ndarray           # (paths, n_rec, d)
    Y: np.ndarray
    r_tilde: np.ndarray     # (paths, n_rec)
    r_comp: np.ndarray
    slack_specs: tuple      # ((a, b), ...)
    viol_counts: np.ndarray
    worst_excess: np.ndarray
    diverged: np.ndarray
    w_increments: Optional[np.ndarray]
    cfg: SimConfig
    M: float
    backend: str = BACKEND
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def paths(self) -> int:
        return self.r_tilde.shape[0]

    def path(self, i: int) -> CouplingPath:
        return CouplingPath(
            times=self.times, X=self.X[i], Y=self.Y[i],
            r_tilde=self.r_tilde[i], r_comp=self.r_comp[i],
            w_increments=None if self.w_increments is None else self.w_increments[i])

    def time_index(self, t: float) -> int:
        j = np.nonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-9))[0]
        if len(j) == 0:
            raise EngineError(f"time {t} was not recorded")
        return int(j[0])


@dataclass(frozen=True)
class StickyPath1D:
    times: np.ndarray
    r: np.ndarray
    zero_time: float
    band_time: dict
    local_time_estimate: float


@dataclass(frozen=True)
class StickyEnsemble:
    """Recorded sticky-SDE paths with boundary-occupation statistics.

    ``band_time[eps][p]`` is path p's occupation of the open band (0, eps);
    ``zero_time`` the occupation of the exact boundary state; the local-time
    estimate is the band formula 4 band_time(1/n) n.
    """

    times: np.ndarray
    r: np.ndarray            # (paths, n_rec)
    zero_time: np.ndarray    # (paths,)
    band_time: dict          # {eps: (paths,)}
    local_time_estimate: np.ndarray
    reg_n: int
    boundary: str
    cfg: SimConfig
    drift_m0: float
    backend: str = BACKEND
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def paths(self) -> int:
        return self.r.shape[0]

    def path(self, i: int) -> StickyPath1D:
        return StickyPath1D(
            times=self.times, r=self.r[i], zero_time=float(self.zero_time[i]),
            band_time={b: float(v[i]) for b, v in self.band_time.items()},
            local_time_estimate=float(self.local_time_estimate[i]))

    def time_index(self, t: float) -> int:
        j = np.nonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-9))[0]
        if len(j) == 0:
            raise EngineError(f"time {t} was not recorded")
        return int(j[0])


@dataclass(frozen=True)
class MeanFieldResult:
    times: np.ndarray
    X: np.ndarray  # (n_rec, N, d)
    Y: np.ndarray
    cfg: SimConfig
    backend: str = BACKEND
    rng_algorithm: str = RNG_ALGORITHM


# ---------------------------------------------------------------------------
# front ends

DEFAULT_SLACKS = ((0.0, 5.0), ("half_sqrt_h", 0.0))


def _resolve_slacks(slack_specs, h):
    out = []
    for a, b in slack_specs:
        if a == "half_sqrt_h":
            a = 0.5 * math.sqrt(h)
        out.append((float(a), float(b)))
    return tuple(out)


def _chunks(paths: int, per_path: int):
    size = max(1, min(paths, _CHUNK_BUDGET // max(per_path, 1)))
    return [(s, min(s + size, paths)) for s in range(0, paths, size)]


def _run_chunked(worker, paths, per_path, threads):
    spans = _chunks(paths, per_path)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(worker, spans))
    else:
        for span in spans:
            worker(span)


def simulate_delta_coupling(pair: DriftPair, kappa: KappaSpec, x, y,
                            cfg: SimConfig, *, record_times=None,
                            full_record: bool = False,
                            slack_specs=DEFAULT_SLACKS,
                            threads: int = 1) -> CouplingEnsemble:
    """Euler scheme for the coupled pair plus the scalar comparison process.

    Reflection coupling acts at separation >= delta, synchronous coupling at
    zero separation, with the unit-coefficient interpolation in between; the
    comparison process is driven by the projected scalar increments and is
    folded at the origin (it never reaches zero in continuous time).
    """
    d = pair.dimension
    if cfg.dimension != d:
        raise EngineError("cfg.dimension does not match the model dimension")
    x = np.asarray(x, dtype=float).reshape(d)
    y = np.asarray(y, dtype=float).reshape(d)
    rec_idx = _record_indices(cfg, record_times, full_record)
    slacks = _resolve_slacks(slack_specs, cfg.step_h)
    pb = _drift_params(pair.b)
    pbt = _drift_params(pair.b_tilde)
    kxs, kvs = _kappa_tables(kappa)
    steps = cfg.n_steps
    n_rec = len(rec_idx)

    Xr = np.empty((cfg.paths, n_rec, d))
    Yr = np.empty((cfg.paths, n_rec, d))
    rtr = np.empty((cfg.paths, n_rec))
    rcr = np.empty((cfg.paths, n_rec))
    viol = np.empty((cfg.paths, len(slacks)), dtype=np.int64)
    worst = np.empty((cfg.paths, len(slacks)))
    w_out = np.empty((cfg.paths, steps)) if full_record else None

    slack_a = np.array([a for a, _ in slacks])
    slack_b = np.array([b for _, b in slacks])

    def worker(span):
        lo, hi = span
        xi = np.empty((hi - lo, steps, 2, d))
        for p in range(lo, hi):
            xi[p - lo] = rng_stream(cfg.seed, p).standard_normal(
                steps * 2 * d).reshape(steps, 2, d)
        out = _kernels.coupling_chunk(pb, pbt, pair.M, kxs, kvs, x, y,
                                      cfg.step_h, cfg.delta, xi, rec_idx,
                                      slack_a, slack_b, full_record)
        Xr[lo:hi], Yr[lo:hi], rtr[lo:hi], rcr[lo:hi] = out[0], out[1], out[2], out[3]
        viol[lo:hi], worst[lo:hi] = out[4], out[5]
        if full_record:
            w_out[lo:hi] = out[6]

    _run_chunked(worker, cfg.paths, steps * 2 * d, threads)
    diverged = ~np.isfinite(rtr[:, -1])
    return CouplingEnsemble(
        times=rec_idx * cfg.step_h, X=Xr, Y=Yr, r_tilde=rtr, r_comp=rcr,
        slack_specs=slacks, viol_counts=viol, worst_excess=worst,
        diverged=diverged, w_increments=w_out, cfg=cfg, M=pair.M)


StickyDrift = Union[tuple, TimeDependentRadialDrift]


def simulate_sticky_1d(drift: StickyDrift, cfg: SimConfig, *, r0=0.0,
                       record_times=None, full_record: bool = False,
                       boundary: str = "sticky",
                       threads: int = 1) -> StickyEnsemble:
    """Simulate the sticky radial SDE dr = alpha(t, r) dt + 2 1(r>0) dW.

    ``drift`` is an ``(M, kappa)`` pair (time-homogeneous) or a
    :class:`TimeDependentRadialDrift`.

    boundary="sticky" (default): reflected steps via the exact Brownian
    bridge-minimum regulator; each Skorokhod local-time increment dL is
    converted into dL/(alpha(t,0) h) holding steps at zero, which is the
    sticky time change.  Occupation of the boundary and of the bands
    (0, j/reg_n) is accumulated exactly on the step grid.

    boundary="regularized": literal Euler scheme for the Lipschitz
    regularization with diffusion 2 min(reg_n r, 1) and clamping; kept for
    refinement diagnostics.  It needs step_h well below 1/(4 reg_n^2) to
    resolve the boundary layer.
    """
    if boundary not in ("sticky", "regularized"):
        raise EngineError("boundary must be 'sticky' or 'regularized'")
    steps = cfg.n_steps
    if isinstance(drift, TimeDependentRadialDrift):
        kappa = drift.kappa
        m_t = np.ascontiguousarray(drift.m_at(np.arange(steps) * cfg.step_h))
        m0 = drift.m0
    else:
        M, kappa = drift
        if M < 0.0:
            raise EngineError("M must be nonnegative")
        m_t = np.full(steps, float(M))
        m0 = float(M)
    kxs, kvs = _kappa_tables(kappa)
    rec_idx = _record_indices(cfg, record_times, full_record)
    n_rec = len(rec_idx)
    r0s = np.broadcast_to(np.asarray(r0, dtype=float), (cfg.paths,)).copy()
    mode = 0 if boundary == "sticky" else 1

    rec = np.empty((cfg.paths, n_rec))
    zero_t = np.empty(cfg.paths)
    t1 = np.empty(cfg.paths)
    t2 = np.empty(cfg.paths)
    t4 = np.empty(cfg.paths)

    def worker(span):
        lo, hi = span
        n = hi - lo
        xi = np.empty((n, steps))
        expo = np.empty((n, steps))
        for p in range(lo, hi):
            g = rng_stream(cfg.seed, p)
            xi[p - lo] = g.standard_normal(steps)
            expo[p - lo] = -np.log(g.random(steps))
        out = _kernels.sticky_chunk(m_t, kxs, kvs, cfg.step_h, cfg.reg_n,
                                    r0s[lo:hi], xi, expo, rec_idx, mode)
        rec[lo:hi], zero_t[lo:hi], t1[lo:hi], t2[lo:hi], t4[lo:hi] = out

    _run_chunked(worker, cfg.paths, 2 * steps, threads)
    n = cfg.reg_n
    band = {1.0 / n: t1, 2.0 / n: t2, 4.0 / n: t4}
    return StickyEnsemble(
        times=rec_idx * cfg.step_h, r=rec, zero_time=zero_t, band_time=band,
        local_time_estimate=4.0 * n * t1, reg_n=n, boundary=boundary, cfg=cfg,
        drift_m0=m0)


def simulate_mean_field(eta: DriftSpec, interaction: np.ndarray, tau: float,
                        X0: np.ndarray, Y0: np.ndarray, cfg: SimConfig, *,
                        record_times=None) -> MeanFieldResult:
    """Two N-particle mean-field systems driven by identical noise.

    The interaction kernel is linear, theta(x, y) = G (y - x), so the
    empirical mean-field force is tau G (cloud mean - x).  Streams are keyed
    by particle index; the clouds share them (synchronous coupling).
    """
    N, d = np.asarray(X0).shape
    if d != cfg.dimension:
        raise EngineError("cfg.dimension does not match particle dimension")
    G = np.ascontiguousarray(interaction, dtype=float).reshape(d, d)
    steps = cfg.n_steps
    rec_idx = _record_indices(cfg, record_times, False)
    xi = np.empty((N, steps, d))
    for p in range(N):
        xi[p] = rng_stream(cfg.seed, p).standard_normal(steps * d).reshape(steps, d)
    Xr, Yr = _kernels.meanfield_chunk(_drift_params(eta), G, tau, cfg.step_h,
                                      np.asarray(X0, float), np.asarray(Y0, float),
                                      xi, rec_idx)
    return MeanFieldResult(times=rec_idx * cfg.step_h, X=Xr, Y=Yr, cfg=cfg)
