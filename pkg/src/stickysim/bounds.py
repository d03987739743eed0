"""Contraction constants, invariant measures, and total-variation bounds.

The radial drift r -> M + kappa(r) r induced by a piecewise-linear curvature
profile is piecewise quadratic, so its running integral and positive part are
exact piecewise polynomials.  Everything analytic is built on that: the
comparison radii (R0, R1), the concave Lyapunov transform f with constants
(c, epsilon), the sticky invariant measure, and the closed-form bounds for
two-regime profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model import KappaSpec, LKRProfile, TimeDependentRadialDrift
from .quadrature import (adaptive_simpson, composite_simpson_cumulative,
                         gaussian_tail_cutoff)


class InfeasibleDriftError(RuntimeError):
    """The radial drift never becomes (and stays) nonpositive."""


# ---------------------------------------------------------------------------
# exact piecewise-quadratic radial drifts

@dataclass(frozen=True)
class PiecewiseQuadratic:
    """r -> c0 + c1 r + c2 r^2 on [knots[j], knots[j+1]); last piece to inf.

    Jumps between pieces are allowed (two-regime step profiles use them).
    The final piece must not grow: c2 = 0 and c1 < 0, which every valid
    curvature profile guarantees.
    """

    knots: np.ndarray   # (k,) increasing, knots[0] == 0
    coeffs: np.ndarray  # (k, 3)

    @classmethod
    def from_m_kappa(cls, M: float, kappa: KappaSpec) -> "PiecewiseQuadratic":
        """Radial drift a(r) = M + kappa(r) r."""
        rs = kappa.radii
        vs = kappa.values
        knots = [0.0]
        coeffs = []
        if rs[0] > 0.0:
            coeffs.append((M, vs[0], 0.0))
            knots.append(rs[0])
        for i in range(len(rs) - 1):
            s = (vs[i + 1] - vs[i]) / (rs[i + 1] - rs[i])
            coeffs.append((M, vs[i] - s * rs[i], s))
            knots.append(rs[i + 1])
        coeffs.append((M, vs[-1], 0.0))  # constant tail_value beyond
        return cls(np.asarray(knots[:len(coeffs)]), np.asarray(coeffs))

    @classmethod
    def from_lkr_step(cls, M: float, profile: LKRProfile) -> "PiecewiseQuadratic":
        """Exact step drift a(r) = M + (L 1(r<R) - K 1(r>=R)) r."""
        if profile.R_script == 0.0:
            return cls(np.array([0.0]), np.array([[M, -profile.K, 0.0]]))
        return cls(np.array([0.0, profile.R_script]),
                   np.array([[M, profile.L, 0.0], [M, -profile.K, 0.0]]))

    def _piece_index(self, r):
        return np.clip(np.searchsorted(self.knots, r, side="right") - 1,
                       0, len(self.knots) - 1)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        j = self._piece_index(r)
        c = self.coeffs[j]
        return c[..., 0] + r * (c[..., 1] + r * c[..., 2])

    @property
    def tail_slope(self) -> float:
        return float(self.coeffs[-1, 1])

    def _piece_candidates(self, lo, hi, c0, c1, c2):
        """Supremum of one quadratic piece over [lo, hi] (hi may be inf)."""
        vals = [c0 + lo * (c1 + lo * c2)]
        if math.isinf(hi):
            if c2 > 0.0 or (c2 == 0.0 and c1 > 0.0):
                return math.inf
            if c2 == 0.0:
                vals.append(c0 if c1 == 0.0 else -math.inf)
        else:
            vals.append(c0 + hi * (c1 + hi * c2))
        if c2 < 0.0:
            v = -c1 / (2.0 * c2)
            if lo < v < hi:
                vals.append(c0 + v * (c1 + v * c2))
        return max(vals)

    def sup_from(self, R: float) -> float:
        """sup of the drift over [R, inf)."""
        out = -math.inf
        k = len(self.knots)
        for j in range(k):
            lo = self.knots[j]
            hi = self.knots[j + 1] if j + 1 < k else math.inf
            if hi <= R:
                continue
            lo = max(lo, R)
            out = max(out, self._piece_candidates(lo, hi, *self.coeffs[j]))
        return out

    def ratio_sup_from(self, R: float) -> float:
        """sup of drift(r)/r over [R, inf), R > 0.

        Each piece gives c0/r + c1 + c2 r, convex for c0 >= 0 (true for
        drifts M + kappa(r) r with M >= 0), so endpoint values suffice.
        """
        out = -math.inf
        k = len(self.knots)
        for j in range(k):
            lo = self.knots[j]
            hi = self.knots[j + 1] if j + 1 < k else math.inf
            if hi <= R:
                continue
            lo = max(lo, R)
            c0, c1, c2 = self.coeffs[j]
            if lo > 0.0:
                out = max(out, c0 / lo + c1 + c2 * lo)
            if math.isinf(hi):
                if c2 > 0.0:
                    return math.inf
                out = max(out, c1)  # r -> inf limit of c0/r + c1
            else:
                out = max(out, c0 / hi + c1 + c2 * hi)
        return out

    def integral(self) -> Callable:
        """Exact cumulative integral r -> int_0^r drift(s) ds (vectorized)."""
        knots = self.knots
        coeffs = self.coeffs
        k = len(knots)
        prim = np.zeros(k)
        for j in range(k - 1):
            c0, c1, c2 = coeffs[j]
            lo, hi = knots[j], knots[j + 1]
            F = lambda x, c0=c0, c1=c1, c2=c2: x * (c0 + x * (c1 / 2.0 + x * c2 / 3.0))
            prim[j + 1] = prim[j] + F(hi) - F(lo)

        def cumint(r):
            r = np.asarray(r, dtype=float)
            j = np.clip(np.searchsorted(knots, r, side="right") - 1, 0, k - 1)
            c = coeffs[j]
            lo = knots[j]
            Fr = r * (c[..., 0] + r * (c[..., 1] / 2.0 + r * c[..., 2] / 3.0))
            Fl = lo * (c[..., 0] + lo * (c[..., 1] / 2.0 + lo * c[..., 2] / 3.0))
            return prim[j] + Fr - Fl

        return cumint

    def positive_part(self) -> "PiecewiseQuadratic":
        """max(drift, 0) as a piecewise quadratic with roots as extra knots."""
        knots = list(self.knots)
        k = len(knots)
        new_knots = []
        new_coeffs = []
        for j in range(k):
            lo = knots[j]
            hi = knots[j + 1] if j + 1 < k else math.inf
            c0, c1, c2 = self.coeffs[j]
            cuts = [lo]
            for r in _quad_roots(c0, c1, c2):
                if lo < r < hi:
                    cuts.append(r)
            cuts.sort()
            for i, start in enumerate(cuts):
                end = cuts[i + 1] if i + 1 < len(cuts) else hi
                probe = start + (min(end, start + 1.0) - start) / 2.0 \
                    if not math.isinf(end) else start + 1.0
                val = c0 + probe * (c1 + probe * c2)
                new_knots.append(start)
                if val > 0.0:
                    new_coeffs.append((c0, c1, c2))
                else:
                    new_coeffs.append((0.0, 0.0, 0.0))
        return PiecewiseQuadratic(np.asarray(new_knots), np.asarray(new_coeffs))


def _quad_roots(c0, c1, c2):
    if c2 == 0.0:
        if c1 == 0.0:
            return []
        return [-c0 / c1]
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (c1 + math.copysign(s, c1))
    roots = []
    if c2 != 0.0:
        roots.append(q / c2)
    if q != 0.0:
        roots.append(c0 / q)
    return sorted(set(roots))


def radial_drift(M: float, kappa: KappaSpec) -> PiecewiseQuadratic:
    """The radial drift r -> M + kappa(r) r as an exact piecewise object."""
    if M < 0.0:
        raise ValueError("M must be nonnegative")
    return PiecewiseQuadratic.from_m_kappa(M, kappa)


# ---------------------------------------------------------------------------
# comparison radii

def effective_radii(drift, *, r_max: Optional[float] = None,
                    bisect_tol: float = 1e-10) -> tuple:
    """Smallest R0 with drift <= 0 on [R0, inf) and smallest R1 >= R0 with
    R1 (R1 - R0) drift(r)/r <= -4 for all r >= R1.

    ``drift`` is a :class:`PiecewiseQuadratic` (exact suprema) or a plain
    callable, in which case ``r_max`` must be given and the suprema are taken
    over a 10^4-point grid followed by bisection.
    """
    if isinstance(drift, PiecewiseQuadratic):
        return _radii_exact(drift, bisect_tol)
    if r_max is None:
        raise ValueError("r_max is required for callable drifts")
    return _radii_from_grid(drift, float(r_max), bisect_tol)


def _radii_exact(drift: PiecewiseQuadratic, tol: float) -> tuple:
    if drift.tail_slope >= 0.0:
        raise InfeasibleDriftError("drift tail does not decay linearly")
    base = float(drift.knots[-1]) + 1.0

    # R0: boundary of sup_from(R) <= 0, monotone in R
    if drift.sup_from(0.0) <= 0.0:
        R0 = 0.0
    else:
        hi = base
        for _ in range(200):
            if drift.sup_from(hi) <= 0.0:
                break
            hi *= 2.0
        else:
            raise InfeasibleDriftError("drift never becomes nonpositive")
        lo = 0.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if drift.sup_from(mid) <= 0.0:
                hi = mid
            else:
                lo = mid
        R0 = hi

    def cond(R):
        return R * (R - R0) * drift.ratio_sup_from(R) <= -4.0

    hi = max(base, R0 + 1.0)
    for _ in range(200):
        if cond(hi):
            break
        hi *= 2.0
    else:
        raise InfeasibleDriftError("R1 condition never satisfied")
    lo = R0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cond(mid):
            hi = mid
        else:
            lo = mid
    return R0, hi


def _radii_from_grid(a: Callable, r_max: float, tol: float) -> tuple:
    grid = np.linspace(0.0, r_max, 10_000)
    vals = np.asarray(a(grid), dtype=float)
    suffix = np.maximum.accumulate(vals[::-1])[::-1]
    if suffix[0] <= 0.0:
        R0 = 0.0
    else:
        idx = np.argmax(suffix <= 0.0)
        if suffix[idx] > 0.0:
            raise InfeasibleDriftError(
                f"no sign change of the radial drift within r_max={r_max}")
        lo, hi = grid[idx - 1], grid[idx]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            j = np.searchsorted(grid, mid)
            s = max(float(a(mid)), float(suffix[j]) if j < len(grid) else -np.inf)
            if s <= 0.0:
                hi = mid
            else:
                lo = mid
        R0 = hi

    pos = grid > 0.0
    ratio = np.full_like(vals, -np.inf)
    ratio[pos] = vals[pos] / grid[pos]
    rsuffix = np.maximum.accumulate(ratio[::-1])[::-1]

    def cond(R):
        j = np.searchsorted(grid, R)
        s = float(a(R)) / R if R > 0 else np.inf
        if j < len(grid):
            s = max(s, float(rsuffix[j]))
        return R * (R - R0) * s <= -4.0

    sat = [g for g in grid[1:] if cond(g)]
    if not sat:
        raise InfeasibleDriftError(
            f"contraction radius R1 not found within r_max={r_max}")
    hi = sat[0]
    lo = R0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cond(mid):
            hi = mid
        else:
            lo = mid
    return R0, hi


# ---------------------------------------------------------------------------
# Lyapunov kit

@dataclass(frozen=True)
class LyapunovKit:
    """Concave distance transform f with decay constants.

    phi(r) = exp(-1/2 int_0^r drift^+), Phi = int phi, g blends the two
    normalizing integrals, f = int phi g.  c and epsilon give
    E[f(r_t)] <= exp(-c t) E[f(r_0)] + const and the meeting-probability
    transient, per the contraction machinery this package implements.
    """

    R0: float
    R1: float
    c: float
    epsilon: float
    grid: np.ndarray
    phi_table: np.ndarray
    Phi_table: np.ndarray
    g_table: np.ndarray
    f_table: np.ndarray
    drift_used: Callable
    _iplus: Callable
    _Phi_spline: object
    _A_spline: object
    _B_spline: object
    _f_spline: object
    _A_R1: float
    _B_R1: float

    @property
    def phi_R0(self) -> float:
        return float(np.exp(-0.5 * self._iplus(self.R0)))

    def phi(self, r):
        return np.exp(-0.5 * self._iplus(np.asarray(r, dtype=float)))

    def Phi(self, r):
        r = np.asarray(r, dtype=float)
        gmax = self.grid[-1]
        inside = np.minimum(r, gmax)
        out = self._Phi_spline(inside)
        return out + self.phi_R0 * np.maximum(r - gmax, 0.0)

    def g(self, r):
        r = np.minimum(np.asarray(r, dtype=float), self.R1)
        return (1.0 - 0.25 * self._A_spline(r) / self._A_R1
                - 0.25 * self._B_spline(r) / self._B_R1)

    def f(self, r):
        r = np.asarray(r, dtype=float)
        gmax = self.grid[-1]
        inside = np.minimum(r, gmax)
        out = self._f_spline(inside)
        # beyond the table f is exactly affine: g = 1/2 and phi = phi(R0)
        return out + 0.5 * self.phi_R0 * np.maximum(r - gmax, 0.0)


def lyapunov_kit(drift, *, grid_points: int = 10_001,
                 table_max: Optional[float] = None) -> LyapunovKit:
    """Build the Lyapunov kit for a radial drift.

    ``drift`` is a :class:`PiecewiseQuadratic` (use :func:`radial_drift` to
    make one from (M, kappa)) or an (M, kappa) tuple.
    """
    if isinstance(drift, tuple):
        drift = radial_drift(*drift)
    if not isinstance(drift, PiecewiseQuadratic):
        raise TypeError("drift must be PiecewiseQuadratic or (M, kappa)")
    R0, R1 = effective_radii(drift)

    aplus = drift.positive_part()
    iplus = aplus.integral()

    if table_max is None:
        exponent = drift.integral()
        table_max = max(2.0 * R1, gaussian_tail_cutoff(
            lambda x: 0.5 * float(exponent(x)),
            lambda x: 0.5 * float(drift(x)),
            start=float(drift.knots[-1]) + 1.0))
    nodes = np.unique(np.concatenate([
        np.linspace(0.0, table_max, grid_points),
        aplus.knots[aplus.knots <= table_max],
        drift.knots[drift.knots <= table_max],
        [R0, R1],
    ]))

    def phi_of(x):
        return np.exp(-0.5 * iplus(x))

    phi_nodes = phi_of(nodes)
    Phi_nodes = composite_simpson_cumulative(phi_of, nodes)
    Phi_spline = CubicHermiteSpline(nodes, Phi_nodes, phi_nodes)

    A_nodes = composite_simpson_cumulative(
        lambda x: Phi_spline(x) / phi_of(x), nodes)
    B_nodes = composite_simpson_cumulative(lambda x: 1.0 / phi_of(x), nodes)
    A_spline = CubicHermiteSpline(nodes, A_nodes, Phi_nodes / phi_nodes)
    B_spline = CubicHermiteSpline(nodes, B_nodes, 1.0 / phi_nodes)

    i1 = int(np.searchsorted(nodes, R1))
    A_R1 = float(A_nodes[i1])
    B_R1 = float(B_nodes[i1])
    c = 1.0 / (2.0 * A_R1)
    epsilon = min(1.0 / (2.0 * B_R1), c * float(Phi_nodes[i1]))

    def g_of(x):
        xc = np.minimum(x, R1)
        return 1.0 - 0.25 * A_spline(xc) / A_R1 - 0.25 * B_spline(xc) / B_R1

    g_nodes = g_of(nodes)
    f_nodes = composite_simpson_cumulative(lambda x: phi_of(x) * g_of(x), nodes)
    f_spline = CubicHermiteSpline(nodes, f_nodes, phi_nodes * g_nodes)

    return LyapunovKit(
        R0=R0, R1=R1, c=c, epsilon=epsilon, grid=nodes,
        phi_table=phi_nodes, Phi_table=Phi_nodes, g_table=g_nodes,
        f_table=f_nodes, drift_used=drift, _iplus=iplus,
        _Phi_spline=Phi_spline, _A_spline=A_spline, _B_spline=B_spline,
        _f_spline=f_spline, _A_R1=A_R1, _B_R1=B_R1)


@lru_cache(maxsize=64)
def modified_kit(kappa: KappaSpec) -> LyapunovKit:
    """Lyapunov kit with the drift-difference term dropped (M = 0)."""
    return lyapunov_kit(radial_drift(0.0, kappa))


# ---------------------------------------------------------------------------
# sticky invariant measure

@dataclass(frozen=True)
class StickyInvariantMeasure:
    """Invariant law of the sticky radial SDE: an atom at 0 plus an explicit
    density on (0, inf).

    The atom has unnormalized weight 2/M (all mass for M = 0); the density is
    exp(E(x)) with E(x) = 1/2 int_0^x (M + kappa(y) y) dy, normalized by Z.
    """

    atom_mass: float
    Z: float
    truncation_radius: float
    M: float
    kappa: KappaSpec
    _exponent: Callable
    _drift: PiecewiseQuadratic

    @property
    def tail_mass(self) -> float:
        return 1.0 - self.atom_mass

    def log_density(self, x):
        """log of the invariant density on (0, inf)."""
        if self.M == 0.0:
            return np.full_like(np.asarray(x, dtype=float), -np.inf)
        return self._exponent(x) - math.log(self.Z)

    def density(self, x):
        if self.M == 0.0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.exp(self.log_density(x))

    def expectation(self, f: Callable, *, linear_growth: float = 1.0) -> float:
        """int f dpi for f with f(0) = 0 and at most linear growth."""
        if self.M == 0.0:
            return 0.0
        T = gaussian_tail_cutoff(
            lambda x: float(self._exponent(x)),
            lambda x: 0.5 * float(self._drift(x)),
            start=self.truncation_radius, growth=linear_growth)
        val = adaptive_simpson(
            lambda x: np.asarray(f(x)) * np.exp(self._exponent(x)),
            0.0, T, breakpoints=self._drift.knots)
        return val / self.Z


def sticky_invariant_measure(M: float, kappa: KappaSpec,
                             *, tail_tol: float = 1e-12) -> StickyInvariantMeasure:
    """Invariant measure of dr = (M + kappa(r) r) dt + 2 1(r>0) dW."""
    if M < 0.0:
        raise ValueError("M must be nonnegative")
    drift = radial_drift(M, kappa)
    cumint = drift.integral()
    exponent = lambda x: 0.5 * cumint(x)
    T = gaussian_tail_cutoff(
        lambda x: float(exponent(x)), lambda x: 0.5 * float(drift(x)),
        start=float(drift.knots[-1]) + 1.0, tail_tol=tail_tol)
    if M == 0.0:
        return StickyInvariantMeasure(
            atom_mass=1.0, Z=math.inf, truncation_radius=T, M=0.0,
            kappa=kappa, _exponent=exponent, _drift=drift)
    dens_int = adaptive_simpson(lambda x: np.exp(exponent(x)), 0.0, T,
                                breakpoints=drift.knots)
    Z = 2.0 / M + dens_int
    return StickyInvariantMeasure(
        atom_mass=(2.0 / M) / Z, Z=Z, truncation_radius=T, M=M,
        kappa=kappa, _exponent=exponent, _drift=drift)


# ---------------------------------------------------------------------------
# bounds

@dataclass(frozen=True)
class CouplingBound:
    """Upper bound on P[X_t != Y_t]; ``meet_lower`` carries the complementary
    stationary lower bound P[X_t = Y_t] >= atom when the starts coincide."""

    value: float
    transient_term: float
    tail_term: float
    meet_lower: Optional[float] = None


def _transient(c: float, epsilon: float, t: float, r0: float) -> float:
    # c/(e^{ct}-1) written overflow-safe for large ct
    decay = math.exp(-c * t)
    return (1.0 / epsilon) * c * decay / -math.expm1(-c * t) * r0


def coupling_upper_bound(kit: LyapunovKit, pi: StickyInvariantMeasure,
                         t: float, r0: float) -> CouplingBound:
    """min(1, (1/eps) c/(e^{ct}-1) r0 + pi[(0,inf)]) for the sticky coupling."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    trans = _transient(kit.c, kit.epsilon, t, r0)
    return CouplingBound(
        value=min(1.0, trans + pi.tail_mass),
        transient_term=trans, tail_term=pi.tail_mass,
        meet_lower=pi.atom_mass if r0 == 0.0 else None)


def modified_upper_bound(kappa: KappaSpec, pi: StickyInvariantMeasure,
                         t: float, r0: float) -> CouplingBound:
    """Same shape with rate constants rebuilt at M = 0 (two-stage coupling);
    the stationary tail keeps the true M through ``pi``."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    kit = modified_kit(kappa)
    trans = _transient(kit.c, kit.epsilon, t, r0)
    return CouplingBound(
        value=min(1.0, trans + pi.tail_mass),
        transient_term=trans, tail_term=pi.tail_mass,
        meet_lower=pi.atom_mass if r0 == 0.0 else None)


def alpha_closed_form(profile: LKRProfile, M: float) -> tuple:
    """Closed-form upper bound on alpha = (M/2) int_0^inf exp(E) and on the
    stationary tail mass alpha/(1+alpha), for two-regime profiles.

    Both branch formulas are proved bounds; at M = K R_script exactly the
    minimum of the two is returned.
    """
    if M < 0.0:
        raise ValueError("M must be nonnegative")
    if M == 0.0:
        return 0.0, 0.0
    L, K, R = profile.L, profile.K, profile.R_script

    def low_branch():  # M <= K R
        return ((math.sqrt(math.pi) * math.sqrt(math.e) / math.sqrt(K)
                 + 2.0 * R / max(4.0, L * R * R + 2.0 * M * R))
                * M * math.exp(M * R / 2.0 + L * R * R / 4.0))

    def high_branch():  # M >= K R
        return ((math.sqrt(math.pi / K)
                 + 2.0 * R / max(4.0, 2.0 * M * R + L * R * R))
                * M * math.exp(M * M / (4.0 * K) + (L + K) * R * R / 4.0))

    if M < K * R:
        alpha = low_branch()
    elif M > K * R:
        alpha = high_branch()
    else:
        alpha = min(low_branch(), high_branch())
    return alpha, alpha / (1.0 + alpha)


def ctilde_inverse_bound(profile: LKRProfile) -> float:
    """Case-matched upper bound on 1/c for the M = 0 rate constant of a
    two-regime profile (ties at L R^2 = 4 take the middle branch)."""
    L, K, R = profile.L, profile.K, profile.R_script
    if L == 0.0:
        return 4.0 * max(R * R, 1.0 / K)
    if L * R * R <= 4.0:
        return 3.0 * math.e * max(R * R, 4.0 / K)
    return (8.0 * math.sqrt(math.pi) / math.sqrt(L) * (1.0 / L + 1.0 / K)
            / R * math.exp(L * R * R / 4.0) + 16.0 / (K * K * R * R))


def quadrature_alpha(profile: LKRProfile, M: float) -> float:
    """Independent route to alpha: direct quadrature against the exact step
    profile (oracle side of the closed-form dominance checks)."""
    if M == 0.0:
        return 0.0
    drift = PiecewiseQuadratic.from_lkr_step(M, profile)
    cumint = drift.integral()
    T = gaussian_tail_cutoff(lambda x: 0.5 * float(cumint(x)),
                             lambda x: 0.5 * float(drift(x)),
                             start=float(drift.knots[-1]) + 1.0)
    val = adaptive_simpson(lambda x: np.exp(0.5 * cumint(x)), 0.0, T,
                           breakpoints=drift.knots)
    return M / 2.0 * val


def lkr_step_kit(profile: LKRProfile, M: float = 0.0) -> LyapunovKit:
    """Lyapunov kit built on the exact two-regime step drift."""
    return lyapunov_kit(PiecewiseQuadratic.from_lkr_step(M, profile))


@dataclass(frozen=True)
class MomentBounds:
    ef_bound: float
    er_bound: float
    ppos_bound: float
    f_pi: float


def moment_bounds(kit: LyapunovKit, pi: StickyInvariantMeasure, t: float,
                  Ef_r0: float) -> MomentBounds:
    """E[f(r_t)], E[r_t] and P[r_t > 0] bounds from the contraction kit."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    f_pi = pi.expectation(kit.f, linear_growth=0.5 * kit.phi_R0)
    ef = math.exp(-kit.c * t) * Ef_r0 + f_pi
    er = 2.0 / kit.phi_R0 * ef
    ppos = min(1.0, _transient(kit.c, kit.epsilon, t, Ef_r0) + pi.tail_mass)
    return MomentBounds(ef_bound=ef, er_bound=er, ppos_bound=ppos, f_pi=f_pi)


@dataclass(frozen=True)
class TimeDependentBounds:
    """The two bound pairs for non-increasing time-dependent drifts.

    The base pair uses the kit of the majorant drift; the refreshed pair
    rebuilds (f, c, epsilon) from the drift frozen at time s and pays the
    conversion factor 2/phi(R0).  The pairs are not comparable; both are
    reported.
    """

    ef_base: float
    p_base: float
    ef_refreshed: float
    p_refreshed: float
    c: float
    epsilon: float
    c_s: float
    epsilon_s: float
    pi0_tail: float
    pis_tail: float


def time_dependent_bounds(drift: TimeDependentRadialDrift, s: float, t: float,
                          Ef_r0: float) -> TimeDependentBounds:
    """Bounds at time t after refreshing the stationary comparison at time s.

    At s = 0 no refresh bound is applied over the empty interval, so the base
    pair reduces exactly to the time-homogeneous bounds.
    """
    if not 0.0 <= s < t:
        raise ValueError("need 0 <= s < t")
    if drift.majorant_override is None:
        major = radial_drift(drift.m0, drift.kappa)
    else:
        major = drift.majorant_override
        if not isinstance(major, PiecewiseQuadratic):
            raise TypeError("majorant override must be a PiecewiseQuadratic")
    kit0 = lyapunov_kit(major)
    pi0 = sticky_invariant_measure(drift.m0, drift.kappa)
    m_s = float(drift.m_at(s))
    pis = sticky_invariant_measure(m_s, drift.kappa)
    kits = lyapunov_kit(radial_drift(m_s, drift.kappa))

    f_pi0 = pi0.expectation(kit0.f, linear_growth=0.5 * kit0.phi_R0)
    f_pis = pis.expectation(kit0.f, linear_growth=0.5 * kit0.phi_R0)
    fs_pis = pis.expectation(kits.f, linear_growth=0.5 * kits.phi_R0)

    inner = Ef_r0 if s == 0.0 else math.exp(-kit0.c * s) * Ef_r0 + f_pi0
    dt = t - s
    ef_base = math.exp(-kit0.c * dt) * inner + (f_pis if s > 0.0 else f_pi0)
    p_base = min(1.0, _transient(kit0.c, kit0.epsilon, dt, inner) + pis.tail_mass)

    conv = 2.0 / kit0.phi_R0
    ef_ref = conv * math.exp(-kits.c * dt) * inner + fs_pis
    p_ref = min(1.0, conv * _transient(kits.c, kits.epsilon, dt, inner)
                + pis.tail_mass)
    return TimeDependentBounds(
        ef_base=ef_base, p_base=p_base, ef_refreshed=ef_ref, p_refreshed=p_ref,
        c=kit0.c, epsilon=kit0.epsilon, c_s=kits.c, epsilon_s=kits.epsilon,
        pi0_tail=pi0.tail_mass, pis_tail=pis.tail_mass)


@dataclass(frozen=True)
class MkvBoundCurve:
    times: np.ndarray
    values: np.ndarray
    fitted_amplitude: float
    fitted_rate: float


def mkv_bound_curve(*, L_theta: float, A: float, lam: float, tau: float,
                    r0: float, kappa: KappaSpec,
                    t_grid: Sequence[float]) -> MkvBoundCurve:
    """Total-variation bound curve for a mean-field drift perturbation.

    The drift-difference level decays like |tau| L_theta A e^{-lam t} r0; the
    refresh time is s = t/2.  The reported (amplitude, rate) are a fit to the
    decaying part of the curve (the theory's constants are existential), with
    the amplitude inflated so the fitted envelope dominates the curve.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    m0 = abs(tau) * L_theta * A * r0
    drift = TimeDependentRadialDrift(m0=m0, decay_rate=lam, kappa=kappa)
    kit0 = lyapunov_kit(radial_drift(m0, kappa))
    ef0 = float(kit0.f(r0))
    ts = np.asarray(list(t_grid), dtype=float)
    vals = np.empty_like(ts)
    for i, t in enumerate(ts):
        if t <= 0.0:
            vals[i] = 1.0
            continue
        b = time_dependent_bounds(drift, t / 2.0, t, ef0)
        vals[i] = min(1.0, b.p_base)
    mask = (vals < 1.0) & (vals > 0.0) & (ts >= 0.5 * ts[-1])
    if np.sum(mask) >= 2:
        slope, icpt = np.polyfit(ts[mask], np.log(vals[mask]), 1)
        rate = -float(slope)
        amp = float(np.max(vals[mask] * np.exp(rate * ts[mask])))
    else:
        rate, amp = 0.0, 1.0
    return MkvBoundCurve(times=ts, values=vals, fitted_amplitude=amp,
                         fitted_rate=rate)
