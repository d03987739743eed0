"""Monte Carlo functionals over simulation ensembles.

All estimators are deterministic reductions of ensemble arrays (pairwise
summation keeps the floating-point drift bounded), so a given (seed, config)
reproduces every estimate bitwise.  Diverged paths are excluded and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import LyapunovKit
from .engine import CouplingEnsemble, StickyEnsemble


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    paths_used: int
    tolerance_used: Optional[float] = None


def _mean_se(values: np.ndarray) -> tuple:
    n = len(values)
    if n == 0:
        raise EstimatorError("no usable paths")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se, n


def meet_probability(ensemble: CouplingEnsemble, t: float, tol: float) -> McEstimate:
    """Fraction of paths with ||X_t - Y_t|| <= tol.

    Meeting is only resolvable at the interpolation scale, so tol must be at
    least the coupling's delta.
    """
    if tol < ensemble.cfg.delta:
        raise EstimatorError("tol must be >= the coupling delta")
    j = ensemble.time_index(t)
    ok = ~ensemble.diverged
    ind = (ensemble.r_tilde[ok, j] <= tol).astype(float)
    mean, se, n = _mean_se(ind)
    return McEstimate(value=mean, std_error=se, paths_used=n, tolerance_used=tol)


def lyapunov_moment(ensemble, kit: LyapunovKit, t: float) -> McEstimate:
    """Sample mean of f(r_t) under the kit's distance transform."""
    j = ensemble.time_index(t)
    if isinstance(ensemble, CouplingEnsemble):
        r = ensemble.r_tilde[~ensemble.diverged, j]
    else:
        r = ensemble.r[:, j]
    vals = kit.f(r)
    mean, se, n = _mean_se(vals)
    return McEstimate(value=mean, std_error=se, paths_used=n)


def radial_moment(ensemble, t: float) -> McEstimate:
    """Sample mean of r_t itself."""
    j = ensemble.time_index(t)
    if isinstance(ensemble, CouplingEnsemble):
        r = ensemble.r_tilde[~ensemble.diverged, j]
    else:
        r = ensemble.r[:, j]
    mean, se, n = _mean_se(r)
    return McEstimate(value=mean, std_error=se, paths_used=n)


@dataclass(frozen=True)
class OccupationReport:
    atom_estimate: float
    bin_edges: np.ndarray
    bin_mass: np.ndarray       # sums with atom_estimate to 1 exactly
    bin_density: np.ndarray
    post_burn_fraction: float


def ergodic_occupation(path, burn_in: float, bins: int,
                       truncation_radius: float) -> OccupationReport:
    """Occupation statistics of one long sticky path after burn-in.

    The atom estimate is the fraction of post-burn-in time in [0, 1/reg_n];
    the histogram covers (1/reg_n, truncation_radius] with values beyond the
    truncation folded into the last bin, so atom + histogram mass is exactly
    one.
    """
    if isinstance(path, StickyEnsemble):
        if path.paths != 1:
            raise EstimatorError("ergodic_occupation wants a single long path")
        band = 1.0 / path.reg_n
        times, r = path.times, path.r[0]
    else:  # a StickyPath1D view; its finest band is 1/reg_n
        band = min(path.band_time)
        times, r = path.times, path.r
    keep = times > burn_in
    if not np.any(keep):
        raise EstimatorError("burn_in leaves no samples")
    rp = r[keep]
    n = len(rp)
    atom = float(np.mean(rp <= band))
    top = max(truncation_radius, band * 2.0)
    clipped = np.minimum(rp[rp > band], np.nextafter(top, 0.0))
    hist, edges = np.histogram(clipped, bins=bins, range=(band, top))
    mass = hist / n
    widths = np.diff(edges)
    return OccupationReport(
        atom_estimate=atom, bin_edges=edges, bin_mass=mass,
        bin_density=mass / widths, post_burn_fraction=n / len(r))


@dataclass(frozen=True)
class ComparisonReport:
    violation_count: int
    worst_excess: float
    grid_points: int
    paths: int


def comparison_violations(ensemble: CouplingEnsemble, slack=None) -> ComparisonReport:
    """Count grid points violating r_tilde <= r_comp + slack.

    ``slack`` selects one of the slack specs the ensemble was simulated with
    (an ``(a, b)`` pair meaning a + b sqrt(h)(1 + r_comp)); with a callable
    the ensemble must carry a full record and the count is formed here.
    """
    ok = ~ensemble.diverged
    steps = ensemble.cfg.n_steps
    if callable(slack):
        if len(ensemble.times) != steps + 1:
            raise EstimatorError("callable slack needs a full-record ensemble")
        rt = ensemble.r_tilde[ok][:, 1:]
        rc = ensemble.r_comp[ok][:, 1:]
        ex = rt - (rc + slack(ensemble.cfg.step_h, rc))
        count = int(np.sum(ex > 0.0))
        worst = float(np.max(ex)) if ex.size else -math.inf
        return ComparisonReport(violation_count=count, worst_excess=worst,
                                grid_points=rt.size, paths=int(ok.sum()))
    if slack is None:
        slack = ensemble.slack_specs[0]
    try:
        j = ensemble.slack_specs.index(tuple(slack))
    except ValueError:
        raise EstimatorError(
            f"slack {slack} was not tracked; simulated specs: "
            f"{ensemble.slack_specs}") from None
    count = int(np.sum(ensemble.viol_counts[ok, j]))
    worst = float(np.max(ensemble.worst_excess[ok, j])) if ok.any() else -math.inf
    return ComparisonReport(violation_count=count, worst_excess=worst,
                            grid_points=int(ok.sum()) * steps, paths=int(ok.sum()))


@dataclass(frozen=True)
class StickinessBandReport:
    band: float
    mean_ratio: float
    std_error: float
    aggregate_ratio: float


def stickiness_identity_check(ensemble: StickyEnsemble, M: float) -> dict:
    """Per band eps in {1/n, 2/n, 4/n}: the ratio of twice the boundary-drift
    times the near-zero occupation (exact zeros plus the open band) to the
    band local-time estimate 4 band_time(eps)/eps.

    Reports the mean per-path ratio with its standard error and the aggregate
    (ratio of ensemble sums, which is the stabler estimate).
    """
    if M <= 0.0:
        raise EstimatorError("the stickiness identity needs M > 0")
    out = {}
    z = ensemble.zero_time
    for band, bt in sorted(ensemble.band_time.items()):
        with np.errstate(divide="ignore", invalid="ignore"):
            per_path = 2.0 * M * (z + bt) / (4.0 * bt / band)
        usable = per_path[np.isfinite(per_path)]
        mean, se, _ = _mean_se(usable)
        agg = float(2.0 * M * (np.sum(z) + np.sum(bt)) / (4.0 * np.sum(bt) / band))
        out[band] = StickinessBandReport(band=band, mean_ratio=mean,
                                         std_error=se, aggregate_ratio=agg)
    return out


def wasserstein1_1d(x: np.ndarray, y: np.ndarray) -> float:
    """Exact W1 between two equal-size empirical clouds on the line."""
    if x.shape != y.shape:
        raise EstimatorError("clouds must have equal size")
    return float(np.mean(np.abs(np.sort(x) - np.sort(y))))


def sliced_wasserstein1(x: np.ndarray, y: np.ndarray,
                        directions: np.ndarray) -> float:
    """Sliced W1 for d > 1: average of exact 1-d W1 over unit directions.
    Approximate by construction; labeled as such by callers."""
    vals = [wasserstein1_1d(x @ u, y @ u) for u in directions]
    return float(np.mean(vals))
