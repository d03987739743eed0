"""Pure-NumPy simulation kernels (fallback backend).

Each function mirrors a kernel in ``_speedups`` operating on one chunk of
paths.  Arithmetic is written with the exact same operation order and
grouping as the compiled kernels so that both backends produce bitwise
identical trajectories from the same increments (the compiled extension is
built with floating-point contraction disabled for the same reason).  The
mean-field kernel is the one exception: its per-step particle means use
pairwise summation here and ordered summation in C, so agreement is only to
rounding error.
"""

import math

import numpy as np

BACKEND_NAME = "python"


def _pl_eval(xs, vs, r, extend_linear):
    """Piecewise-linear table with np.interp semantics; optionally extend
    linearly with the last segment slope beyond the last knot."""
    out = np.interp(r, xs, vs)
    if extend_linear and len(xs) >= 2:
        slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
        out = np.where(r > xs[-1], slope * (r - xs[-1]) + vs[-1], out)
    return out


def _drift_eval(p, x):
    """Affine-plus-radial drift on a chunk, x of shape (n, d).

    ``p`` is the packed parameter dict from the engine front end.  Component
    sums run in ascending index order to match the C kernel.
    """
    n, d = x.shape
    out = np.empty_like(x)
    for k in range(d):
        acc = np.full(n, p["c"][k])
        if p["has_A"]:
            A = p["A"]
            for j in range(d):
                acc = acc + A[k, j] * x[:, j]
        out[:, k] = acc
    if p["has_rho"] or p["has_sig"]:
        s = x[:, 0] * x[:, 0]
        for k in range(1, d):
            s = s + x[:, k] * x[:, k]
        r = np.sqrt(s)
        if p["has_rho"]:
            rv = _pl_eval(p["rho_xs"], p["rho_vs"], r, True)
            for k in range(d):
                out[:, k] = out[:, k] + rv * x[:, k]
        if p["has_sig"]:
            sv = _pl_eval(p["sig_xs"], p["sig_vs"], r, True)
            with np.errstate(invalid="ignore", divide="ignore"):
                sv = np.where(r > 0.0, sv / r, 0.0)
            for k in range(d):
                out[:, k] = out[:, k] + sv * x[:, k]
    return out


def coupling_chunk(pb, pbt, M, kap_xs, kap_vs, x0, y0, h, delta,
                   xi, rec_idx, slack_a, slack_b, want_w):
    """Interpolated reflection/synchronous coupling plus scalar comparison.

    xi has shape (n, steps, 2, d): per step one increment pair (dB1, dB2).
    Records states after the steps listed in rec_idx (0 = initial state);
    counts grid points violating r_tilde <= r_comp + slack per slack spec
    slack_j = a_j + b_j sqrt(h) (1 + r_comp).
    """
    n, steps, _, d = xi.shape
    sqh = math.sqrt(h)
    X = np.tile(np.asarray(x0, dtype=float), (n, 1))
    Y = np.tile(np.asarray(y0, dtype=float), (n, 1))
    rcmp = np.zeros(n)
    ns = len(slack_a)
    viol = np.zeros((n, ns), dtype=np.int64)
    worst = np.full((n, ns), -np.inf)
    n_rec = len(rec_idx)
    Xr = np.empty((n, n_rec, d))
    Yr = np.empty((n, n_rec, d))
    rtr = np.empty((n, n_rec))
    rcr = np.empty((n, n_rec))
    w_out = np.empty((n, steps)) if want_w else None

    k = 0
    if n_rec and rec_idx[0] == 0:
        Xr[:, 0] = X
        Yr[:, 0] = Y
        s = (X[:, 0] - Y[:, 0]) ** 2
        for j in range(1, d):
            s = s + (X[:, j] - Y[:, j]) ** 2
        rtr[:, 0] = np.sqrt(s)
        rcr[:, 0] = rcmp
        k = 1

    for i in range(steps):
        xi1 = xi[:, i, 0, :]
        xi2 = xi[:, i, 1, :]
        diff = X - Y
        s = diff[:, 0] * diff[:, 0]
        for j in range(1, d):
            s = s + diff[:, j] * diff[:, j]
        rt = np.sqrt(s)
        pos = rt > 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            e = diff / rt[:, None]
        e[~pos] = 0.0
        e[~pos, 0] = 1.0
        rc = np.minimum(rt / delta, 1.0)
        sc = np.sqrt(1.0 - rc * rc)
        w = e[:, 0] * xi1[:, 0]
        for j in range(1, d):
            w = w + e[:, j] * xi1[:, j]

        bX = _drift_eval(pb, X)
        bY = _drift_eval(pbt, Y)
        rcn = rc[:, None]
        scn = sc[:, None]
        X = X + bX * h + rcn * (sqh * xi1) + scn * (sqh * xi2)
        Y = Y + bY * h + rcn * (sqh * (xi1 - (2.0 * w)[:, None] * e)) + scn * (sqh * xi2)

        ac = M + _pl_eval(kap_xs, kap_vs, rcmp, False) * rcmp
        rcc = np.minimum(rcmp / delta, 1.0)
        prop = rcmp + ac * h + (2.0 * rcc) * (sqh * w)
        rcmp = np.where(prop < 0.0, -prop, prop)  # fold: comparison never
        # reaches 0 in continuous time; folding tracks the norm reflection

        diff = X - Y
        s = diff[:, 0] * diff[:, 0]
        for j in range(1, d):
            s = s + diff[:, j] * diff[:, j]
        rt_new = np.sqrt(s)
        for jj in range(ns):
            slack = slack_a[jj] + slack_b[jj] * sqh * (1.0 + rcmp)
            ex = rt_new - (rcmp + slack)
            bad = ex > 0.0
            viol[:, jj] += bad
            worst[:, jj] = np.maximum(worst[:, jj], np.where(bad, ex, -np.inf))
        if want_w:
            w_out[:, i] = sqh * w
        if k < n_rec and i + 1 == rec_idx[k]:
            Xr[:, k] = X
            Yr[:, k] = Y
            rtr[:, k] = rt_new
            rcr[:, k] = rcmp
            k += 1
    return Xr, Yr, rtr, rcr, viol, worst, w_out


def sticky_chunk(m_t, kap_xs, kap_vs, h, reg_n, r0, xi, expo, rec_idx, mode):
    """One-dimensional sticky radial SDE on a chunk of paths.

    mode 0 ("sticky"): reflected step with the exact bridge-minimum regulator;
    the Skorokhod local-time increment dL is banked as dL/(M(t) h) holding
    steps at zero (the sticky time change).  Holding steps consume their
    noise slot so all paths stay aligned with the pregenerated stream.

    mode 1 ("regularized"): Euler-Maruyama for the diffusion coefficient
    2 min(reg_n r, 1) with negative proposals clamped to zero.
    """
    n, steps = xi.shape
    sqh = math.sqrt(h)
    r = np.array(r0, dtype=float).copy()
    budget = np.zeros(n)
    zero_t = np.zeros(n)
    b1 = 1.0 / reg_n
    b2 = 2.0 / reg_n
    b4 = 4.0 / reg_n
    t1 = np.zeros(n)
    t2 = np.zeros(n)
    t4 = np.zeros(n)
    n_rec = len(rec_idx)
    rec = np.empty((n, n_rec))
    k = 0
    if n_rec and rec_idx[0] == 0:
        rec[:, 0] = r
        k = 1

    for i in range(steps):
        mt = m_t[i]
        if mode == 0:
            holding = budget >= 1.0
            stuck = (~holding) & (r == 0.0) & (mt <= 0.0)
            active = ~(holding | stuck)
            budget = np.where(holding, budget - 1.0, budget)
            a = mt + _pl_eval(kap_xs, kap_vs, r, False) * r
            y = r + a * h + 2.0 * (sqh * xi[:, i])
            dr = y - r
            m = 0.5 * (r + y - np.sqrt(dr * dr + (8.0 * h) * expo[:, i]))
            refl = m < 0.0
            dL = -m
            y = np.where(refl, y + dL, y)
            with np.errstate(divide="ignore", invalid="ignore"):
                dbudget = np.where(mt > 0.0, dL / (mt * h), 1e300)
            budget = np.where(active & refl, budget + dbudget, budget)
            r = np.where(active, y, r)
        else:
            a = mt + _pl_eval(kap_xs, kap_vs, r, False) * r
            th = np.minimum(reg_n * r, 1.0)
            r = r + a * h + (2.0 * th) * (sqh * xi[:, i])
            r = np.where(r < 0.0, 0.0, r)
            holding = np.zeros(n, dtype=bool)
            stuck = np.zeros(n, dtype=bool)

        zero_now = holding | stuck | (r == 0.0)
        zero_t = zero_t + h * zero_now
        r_eff = np.where(zero_now, np.inf, r)  # held paths are at 0, not in band
        in4 = r_eff < b4
        t4 = t4 + h * in4
        in2 = r_eff < b2
        t2 = t2 + h * in2
        in1 = r_eff < b1
        t1 = t1 + h * in1
        if k < n_rec and i + 1 == rec_idx[k]:
            rec[:, k] = np.where(zero_now, 0.0, r)
            k += 1
    return rec, zero_t, t1, t2, t4


def meanfield_chunk(p_eta, G, tau, h, X0, Y0, xi, rec_idx):
    """Two synchronously coupled mean-field particle systems.

    Linear interaction kernel G (y - x): the empirical interaction reduces to
    tau G (mean - x).  Both clouds share the per-particle increments.
    """
    N, steps, d = xi.shape
    sqh = math.sqrt(h)
    X = np.asarray(X0, dtype=float).copy()
    Y = np.asarray(Y0, dtype=float).copy()
    n_rec = len(rec_idx)
    Xr = np.empty((n_rec, N, d))
    Yr = np.empty((n_rec, N, d))
    k = 0
    if n_rec and rec_idx[0] == 0:
        Xr[0] = X
        Yr[0] = Y
        k = 1
    for i in range(steps):
        mX = X.mean(axis=0)
        mY = Y.mean(axis=0)
        bX = _drift_eval(p_eta, X)
        bY = _drift_eval(p_eta, Y)
        if tau != 0.0:
            dX = mX[None, :] - X
            dY = mY[None, :] - Y
            for kk in range(d):
                accX = G[kk, 0] * dX[:, 0]
                accY = G[kk, 0] * dY[:, 0]
                for j in range(1, d):
                    accX = accX + G[kk, j] * dX[:, j]
                    accY = accY + G[kk, j] * dY[:, j]
                bX[:, kk] = bX[:, kk] + tau * accX
                bY[:, kk] = bY[:, kk] + tau * accY
        X = X + bX * h + sqh * xi[:, i, :]
        Y = Y + bY * h + sqh * xi[:, i, :]
        if k < n_rec and i + 1 == rec_idx[k]:
            Xr[k] = X
            Yr[k] = Y
            k += 1
    return Xr, Yr
