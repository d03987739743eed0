"""Adaptive composite Simpson quadrature.

All analytic bound computations in this package run through the routines
here.  Integrands are smooth except at known breakpoints, which callers pass
in so they become panel boundaries.  The adaptive driver keeps a worklist of
panels and refines every panel whose Richardson error estimate exceeds its
share of the tolerance; the integrand is evaluated on whole batches of nodes
at once, so it must accept NumPy arrays.
"""

import math

import numpy as np

MAX_PANELS = 2 ** 20


class QuadratureError(RuntimeError):
    """Raised when a quadrature fails to converge within the panel budget."""


def adaptive_simpson(f, a, b, *, tol=1e-10, breakpoints=(), max_panels=MAX_PANELS):
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    ``breakpoints`` are abscissae (kinks, jumps) inserted as initial panel
    boundaries.  Returns the integral estimate; raises
    :class:`QuadratureError` if the panel budget is exhausted first.
    """
    if b <= a:
        if b == a:
            return 0.0
        return -adaptive_simpson(f, b, a, tol=tol, breakpoints=breakpoints,
                                 max_panels=max_panels)
    pts = [a]
    for x in sorted(set(float(p) for p in breakpoints)):
        if a < x < b:
            pts.append(x)
    pts.append(b)
    edges = np.asarray(pts)

    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    total = 0.0
    n_panels = len(lo)
    while len(lo):
        if n_panels > max_panels:
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_panels} panels on [{a}, {b}]")
        mid = 0.5 * (lo + hi)
        q1 = 0.25 * (lo + 3.0 * hi)
        q3 = 0.25 * (3.0 * lo + hi)
        nodes = np.concatenate([lo, q3, mid, q1, hi])
        vals = np.asarray(f(nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand returned non-finite values")
        k = len(lo)
        flo, fq3, fmid, fq1, fhi = (vals[:k], vals[k:2 * k], vals[2 * k:3 * k],
                                    vals[3 * k:4 * k], vals[4 * k:])
        w = hi - lo
        coarse = w / 6.0 * (flo + 4.0 * fmid + fhi)
        fine = w / 12.0 * (flo + 4.0 * fq3 + 2.0 * fmid + 4.0 * fq1 + fhi)
        err = (fine - coarse) / 15.0
        # tolerance share proportional to panel width, floored at the
        # rounding level of the panel value (the absolute target is
        # unreachable for integrals many orders above 1)
        share = tol * np.maximum(w / (b - a), 1e-300)
        floor = 64.0 * np.finfo(float).eps * np.abs(fine)
        ok = np.abs(err) <= np.maximum(share, floor)
        total += np.sum(fine[ok] + err[ok])
        bad = ~ok
        if not np.any(bad):
            break
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        n_panels += int(np.sum(bad))
    return float(total)


def gaussian_tail_cutoff(log_density, slope_at, start, *, tail_tol=1e-12,
                         growth=0.0):
    """Truncation point for ``∫ exp(log_density(x)) dx`` with a decaying tail.

    ``slope_at(x)`` must return d/dx log_density(x), eventually negative and
    decreasing.  The remainder beyond T is bounded by
    ``exp(log_density(T)) * (1/|s| + growth/s**2)`` with ``s = slope_at(T)``
    (the ``growth`` term covers an extra linear factor in the integrand).
    Doubles T until the bound drops below ``tail_tol``.
    """
    T = max(start, 1.0)
    for _ in range(200):
        s = slope_at(T)
        if s < 0.0:
            bound = math.exp(log_density(T)) * (1.0 / -s + growth / s ** 2)
            if bound < tail_tol:
                return T
        T *= 1.5
    raise QuadratureError("no Gaussian-dominated tail found for truncation")


def composite_simpson_cumulative(f, nodes):
    """Cumulative integral of ``f`` at ``nodes`` (two Simpson panels per cell).

    ``f`` must be vectorized and cheap; error per cell is O(w^5 f''''), far
    below 1e-12 for the ~1e-3-wide cells used by the Lyapunov tables.
    Returns an array ``F`` with ``F[0] = 0``.
    """
    x = np.asarray(nodes, dtype=float)
    lo, hi = x[:-1], x[1:]
    q = (hi - lo) / 4.0
    p0 = lo
    p1 = lo + q
    p2 = lo + 2.0 * q
    p3 = lo + 3.0 * q
    allpts = np.concatenate([p0, p1, p2, p3, hi])
    vals = np.asarray(f(allpts), dtype=float)
    k = len(lo)
    f0, f1, f2, f3, f4 = (vals[:k], vals[k:2 * k], vals[2 * k:3 * k],
                          vals[3 * k:4 * k], vals[4 * k:])
    cell = q / 3.0 * (f0 + 4.0 * f1 + 2.0 * f2 + 4.0 * f3 + f4)
    out = np.empty(len(x))
    out[0] = 0.0
    np.cumsum(cell, out=out[1:])
    return out
