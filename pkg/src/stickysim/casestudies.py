"""Worked examples with closed forms.

* Ornstein-Uhlenbeck pair with shifted drift: exact total-variation curve,
  exact stationary tail of the sticky radial measure, and its small- and
  large-shift asymptotics.
* Confined Brownian motion: two-regime upper bound and the explicit lower
  bounds obtained from the invariant densities.
* Mean-field interacting particles: property-based verification that the
  synchronous particle clouds contract and that the analytic bound curve
  decays (the theory's constants are existential, so only shapes are
  asserted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erf

from . import bounds as bnd
from . import engine as eng
from . import estimators as est
from .model import DriftSpec, KappaSpec, LKRProfile, builtin_models
from .quadrature import adaptive_simpson


def phi1(r) -> float:
    """sqrt(2/pi) int_0^r exp(-x^2/2) dx, via the error function."""
    return erf(np.asarray(r, dtype=float) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck

@dataclass(frozen=True)
class OUCase:
    m: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.atleast_1d(np.asarray(self.m, float)))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, float)))
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, float)))

    @property
    def d(self) -> int:
        return len(self.m)


def ou_exact_tv(case: OUCase, t: float) -> float:
    """Total variation between the two Gaussian laws at time t."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    num = np.linalg.norm(case.m + math.exp(-t / 2.0) * (case.y - case.m - case.x))
    return float(phi1(num / (2.0 * math.sqrt(1.0 - math.exp(-t)))))


def ou_pi_tail(m_norm: float) -> float:
    """Stationary tail mass of the sticky radial measure for the shifted
    Ornstein-Uhlenbeck pair (closed form)."""
    if m_norm == 0.0:
        return 0.0
    a = math.sqrt(math.pi / 8.0) * m_norm * math.exp(m_norm ** 2 / 8.0) \
        * (1.0 + float(phi1(m_norm / 2.0)))
    return 1.0 - 1.0 / (1.0 + a)


# ---------------------------------------------------------------------------
# confined Brownian motion

@dataclass(frozen=True)
class ConfinedBMCase:
    R: float
    k: float
    m: float
    Z_f: float = field(init=False)
    Z_g: float = field(init=False)

    def __post_init__(self):
        if self.R <= 0.0 or self.k <= 0.0 or self.m < 0.0:
            raise ValueError("need R > 0, k > 0, m >= 0")
        object.__setattr__(self, "Z_f", 2.0 * self.R + math.sqrt(2.0 * math.pi / self.k))
        object.__setattr__(self, "Z_g", self._zg_quadrature())

    def _zg_quadrature(self) -> float:
        R, k, m = self.R, self.k, self.m

        def g(x):
            x = np.asarray(x, dtype=float)
            return np.exp(m * x - k * np.maximum(np.abs(x) - R, 0.0) ** 2 / 2.0)

        lo = -(R + (m / k + 10.0 / math.sqrt(k)))
        hi = R + (m / k + 10.0 / math.sqrt(k))
        return adaptive_simpson(g, lo, hi, breakpoints=(-R, R))


def cbm_tv_lower_bounds(case: ConfinedBMCase) -> tuple:
    """Lower bounds on the TV distance of the two stationary laws.

    The first bound is (e^{-mR} - 1 + mR)/(mR); the second, valid for
    R sqrt(k) <= 1, improves it for small k.  Returns (bound1, bound2_or_None).
    """
    R, k, m = case.R, case.k, case.m
    if case.Z_g < case.Z_f - 1e-12:
        raise AssertionError("normalizer inequality Z_g >= Z_f failed")
    x = m * R
    if x == 0.0:
        bound1 = 0.0
    elif x < 1e-6:
        bound1 = x / 2.0 - x * x / 6.0  # series of (e^-x - 1 + x)/x
    else:
        bound1 = (math.exp(-x) - 1.0 + x) / x
    bound2 = None
    if R * math.sqrt(k) <= 1.0:
        bound2 = (1.0 - math.exp(-m * R + m * m / (2.0 * k))
                  + math.sqrt(2.0 / (math.pi * k)) * m * math.exp(-m * R)) / 4.0
    return bound1, bound2


@dataclass(frozen=True)
class CbmSummary:
    case: ConfinedBMCase
    tv8_applicable: bool
    tv8_value: Optional[float]
    closed_form_alpha: float
    closed_form_tail: float
    closed_form_branch: str
    lower1: float
    lower2: Optional[float]
    upper_dominates: bool


def cbm_summary(case: ConfinedBMCase) -> CbmSummary:
    """Upper/lower bound summary for the confined Brownian pair.

    The explicit long-time upper value ((3e/4) R + (3 pi e^3 / 2)^{1/2}
    k^{-1/2}) m requires m <= kR and mR <= 4/3; outside that branch only the
    two-regime closed form (high branch) applies and the report says so.
    """
    R, k, m = case.R, case.k, case.m
    M = m / 2.0
    profile = LKRProfile(L=0.0, K=k / 6.0, R_script=3.0 * R)
    applicable = (m <= k * R) and (m * R <= 4.0 / 3.0)
    tv8 = None
    if applicable:
        tv8 = min(1.0, (0.75 * math.e * R
                        + math.sqrt(1.5 * math.pi * math.e ** 3) / math.sqrt(k)) * m)
    alpha, tail = bnd.alpha_closed_form(profile, M)
    branch = ("low" if M < profile.K * profile.R_script else
              "high" if M > profile.K * profile.R_script else "tie")
    lower1, lower2 = cbm_tv_lower_bounds(case)
    upper = tv8 if tv8 is not None else min(1.0, tail)
    dominates = upper >= lower1 and (lower2 is None or upper >= lower2)
    return CbmSummary(case=case, tv8_applicable=applicable, tv8_value=tv8,
                      closed_form_alpha=alpha, closed_form_tail=tail, closed_form_branch=branch,
                      lower1=lower1, lower2=lower2, upper_dominates=dominates)


# ---------------------------------------------------------------------------
# mean-field particles

@dataclass(frozen=True)
class MKVCase:
    """Mean-field model dX = eta(X) dt + tau mean_j theta(X, X_j) dt + dB with
    the linear interaction theta(x, y) = G (y - x)."""

    eta: DriftSpec
    interaction: np.ndarray
    tau: float
    L_theta: float
    A: float
    lam: float
    x0: np.ndarray
    y0: np.ndarray
    N: int
    kappa: KappaSpec

    def __post_init__(self):
        object.__setattr__(self, "interaction",
                           np.asarray(self.interaction, float))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, float)))
        object.__setattr__(self, "y0", np.atleast_1d(np.asarray(self.y0, float)))
        if self.N < 2:
            raise ValueError("need at least two particles")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def r0(self) -> float:
        return float(np.linalg.norm(self.x0 - self.y0))


@dataclass(frozen=True)
class MkvSimulation:
    times: np.ndarray
    w1_curve: np.ndarray
    bound_curve: bnd.MkvBoundCurve
    fitted_rate: float
    fitted_amplitude: float
    w1_exact: bool
    small_tau: bool


def mkv_simulate(case: MKVCase, cfg: eng.SimConfig, *, record_times=None,
                 n_directions: int = 32) -> MkvSimulation:
    """Run the two synchronously coupled particle systems and compare the
    empirical W1 curve with the analytic bound curve.

    d = 1 uses the exact sorted-coordinate W1; higher d uses sliced W1 over
    ``n_directions`` fixed random directions (approximate, flagged).  The
    fitted decay (amplitude, rate) is a least-squares fit to the positive
    tail of the empirical curve; the small-tau flag marks |tau| below the
    working proxy threshold 0.1 |kappa tail| / L_theta (the theory's true
    threshold is not explicit).
    """
    if record_times is None:
        record_times = np.linspace(0.0, cfg.horizon_T, 21)
    X0 = np.tile(case.x0, (case.N, 1))
    Y0 = np.tile(case.y0, (case.N, 1))
    res = eng.simulate_mean_field(case.eta, case.interaction, case.tau,
                                  X0, Y0, cfg, record_times=record_times)
    exact = case.d == 1
    if exact:
        w1 = np.array([est.wasserstein1_1d(res.X[j][:, 0], res.Y[j][:, 0])
                       for j in range(len(res.times))])
    else:
        g = eng.rng_stream(cfg.seed, eng.AUX_STREAM)
        dirs = g.standard_normal((n_directions, case.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        w1 = np.array([est.sliced_wasserstein1(res.X[j], res.Y[j], dirs)
                       for j in range(len(res.times))])

    bound = bnd.mkv_bound_curve(L_theta=case.L_theta, A=case.A, lam=case.lam,
                                tau=case.tau, r0=case.r0, kappa=case.kappa,
                                t_grid=res.times)
    mask = (w1 > 0.0) & (res.times >= 0.5 * res.times[-1])
    if np.sum(mask) >= 2:
        slope, _ = np.polyfit(res.times[mask], np.log(w1[mask]), 1)
        rate = -float(slope)
        amp = float(np.max(w1[mask] * np.exp(rate * res.times[mask])))
    else:
        rate, amp = math.inf, 0.0  # curve vanished identically
    small_tau = abs(case.tau) <= 0.1 * abs(case.kappa.tail_value) / case.L_theta
    return MkvSimulation(times=res.times, w1_curve=w1, bound_curve=bound,
                         fitted_rate=rate, fitted_amplitude=amp,
                         w1_exact=exact, small_tau=small_tau)


def ou_demo_pair(m):
    """Convenience constructor used by scenarios and tests."""
    return builtin_models("ou", {"m": m})
