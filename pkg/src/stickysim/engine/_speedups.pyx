# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels.

Same chunk-level interface and the same operation order/grouping as
``_reference``; compiled with -ffp-contract=off so trajectories match the
NumPy backend bitwise (mean-field summation order excepted).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, isnan, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

DEF MAXDIM = 16


cdef inline double pl_eval(const double* xs, const double* vs, Py_ssize_t n,
                           double r, bint extend) nogil:
    """Piecewise-linear table, np.interp semantics; optional linear extension
    beyond the last knot with the final segment slope."""
    cdef Py_ssize_t lo, hi, mid
    cdef double slope
    if isnan(r):
        return r
    if n == 1:
        return vs[0]
    if r <= xs[0]:
        return vs[0]
    if r >= xs[n - 1]:
        if extend and r > xs[n - 1]:
            slope = (vs[n - 1] - vs[n - 2]) / (xs[n - 1] - xs[n - 2])
            return slope * (r - xs[n - 1]) + vs[n - 1]
        return vs[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= r:
            lo = mid
        else:
            hi = mid
    slope = (vs[lo + 1] - vs[lo]) / (xs[lo + 1] - xs[lo])
    return slope * (r - xs[lo]) + vs[lo]


cdef struct DriftP:
    bint has_A
    bint has_rho
    bint has_sig
    const double* A
    const double* c
    const double* rho_xs
    const double* rho_vs
    Py_ssize_t n_rho
    const double* sig_xs
    const double* sig_vs
    Py_ssize_t n_sig


cdef inline void drift_eval(const DriftP* p, const double* x, double* out,
                            Py_ssize_t d) nogil:
    cdef Py_ssize_t k, j
    cdef double s, r, rv, sv
    for k in range(d):
        s = p.c[k]
        if p.has_A:
            for j in range(d):
                s = s + p.A[k * d + j] * x[j]
        out[k] = s
    if p.has_rho or p.has_sig:
        s = x[0] * x[0]
        for k in range(1, d):
            s = s + x[k] * x[k]
        r = sqrt(s)
        if p.has_rho:
            rv = pl_eval(p.rho_xs, p.rho_vs, p.n_rho, r, True)
            for k in range(d):
                out[k] = out[k] + rv * x[k]
        if p.has_sig:
            sv = pl_eval(p.sig_xs, p.sig_vs, p.n_sig, r, True)
            if r > 0.0:
                sv = sv / r
            else:
                sv = 0.0
            for k in range(d):
                out[k] = out[k] + sv * x[k]


cdef class _Params:
    """Keeps the packed parameter arrays alive and exposes a C struct."""

    cdef DriftP p
    cdef object refs

    def __init__(self, dict src):
        A = np.ascontiguousarray(src["A"], dtype=np.float64)
        c = np.ascontiguousarray(src["c"], dtype=np.float64)
        rx = np.ascontiguousarray(src["rho_xs"], dtype=np.float64)
        rv = np.ascontiguousarray(src["rho_vs"], dtype=np.float64)
        sx = np.ascontiguousarray(src["sig_xs"], dtype=np.float64)
        sv = np.ascontiguousarray(src["sig_vs"], dtype=np.float64)
        self.refs = (A, c, rx, rv, sx, sv)
        self.p.has_A = src["has_A"]
        self.p.has_rho = src["has_rho"]
        self.p.has_sig = src["has_sig"]
        self.p.A = <const double*> cnp.PyArray_DATA(A)
        self.p.c = <const double*> cnp.PyArray_DATA(c)
        self.p.rho_xs = <const double*> cnp.PyArray_DATA(rx)
        self.p.rho_vs = <const double*> cnp.PyArray_DATA(rv)
        self.p.n_rho = len(rx)
        self.p.sig_xs = <const double*> cnp.PyArray_DATA(sx)
        self.p.sig_vs = <const double*> cnp.PyArray_DATA(sv)
        self.p.n_sig = len(sx)


def coupling_chunk(dict pb, dict pbt, double M,
                   const double[::1] kap_xs, const double[::1] kap_vs,
                   const double[::1] x0, const double[::1] y0,
                   double h, double delta,
                   const double[:, :, :, ::1] xi,
                   const long long[::1] rec_idx,
                   const double[::1] slack_a, const double[::1] slack_b,
                   bint want_w):
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t steps = xi.shape[1]
    cdef Py_ssize_t d = xi.shape[3]
    if d > MAXDIM:
        raise ValueError(f"compiled kernel supports dimension <= {MAXDIM}")
    cdef Py_ssize_t ns = slack_a.shape[0]
    cdef Py_ssize_t n_rec = rec_idx.shape[0]
    cdef double sqh = sqrt(h)

    cdef _Params P1 = _Params(pb)
    cdef _Params P2 = _Params(pbt)
    cdef const DriftP* p1 = &P1.p
    cdef const DriftP* p2 = &P2.p
    cdef const double* kxs = &kap_xs[0]
    cdef const double* kvs = &kap_vs[0]
    cdef Py_ssize_t nk = kap_xs.shape[0]

    Xr_np = np.empty((n, n_rec, d))
    Yr_np = np.empty((n, n_rec, d))
    rtr_np = np.empty((n, n_rec))
    rcr_np = np.empty((n, n_rec))
    viol_np = np.zeros((n, ns), dtype=np.int64)
    worst_np = np.full((n, ns), -np.inf)
    w_np = np.empty((n, steps)) if want_w else None
    cdef double[:, :, ::1] Xr = Xr_np
    cdef double[:, :, ::1] Yr = Yr_np
    cdef double[:, ::1] rtr = rtr_np
    cdef double[:, ::1] rcr = rcr_np
    cdef long long[:, ::1] viol = viol_np
    cdef double[:, ::1] worst = worst_np
    cdef double[:, ::1] w_out = w_np if want_w else np.empty((1, 1))

    cdef const double* xip = &xi[0, 0, 0, 0]
    cdef const double* xrow
    cdef double X[MAXDIM]
    cdef double Y[MAXDIM]
    cdef double e[MAXDIM]
    cdef double bX[MAXDIM]
    cdef double bY[MAXDIM]
    cdef Py_ssize_t p, i, j, k, jj, stride
    cdef double s, rt, rc, sc, w, ac, rcc, prop, rcmp, rt_new, slack, ex, dk
    cdef double x1, y1, xi1s, xi2s, es, bx1, by1, rr, rv

    # hoisted scalar drift parameters for the d == 1 fast path
    cdef bint a1 = p1.has_A, r1 = p1.has_rho, s1 = p1.has_sig
    cdef bint a2 = p2.has_A, r2 = p2.has_rho, s2 = p2.has_sig
    cdef double A1 = p1.A[0] if a1 else 0.0
    cdef double A2 = p2.A[0] if a2 else 0.0
    cdef double C1 = p1.c[0]
    cdef double C2 = p2.c[0]
    cdef bint kconst = nk == 1
    cdef double kval = kvs[0]

    stride = steps * 2 * d
    with nogil:
        for p in range(n):
            rcmp = 0.0
            k = 0
            if d == 1:
                # scalar fast path: identical expression order as below
                x1 = x0[0]
                y1 = y0[0]
                if n_rec > 0 and rec_idx[0] == 0:
                    Xr[p, 0, 0] = x1
                    Yr[p, 0, 0] = y1
                    dk = x1 - y1
                    rtr[p, 0] = sqrt(dk * dk)
                    rcr[p, 0] = rcmp
                    k = 1
                xrow = xip + p * stride
                for i in range(steps):
                    xi1s = xrow[2 * i]
                    xi2s = xrow[2 * i + 1]
                    dk = x1 - y1
                    rt = sqrt(dk * dk)
                    if rt > 0.0:
                        es = (x1 - y1) / rt
                    else:
                        es = 1.0
                    rc = rt / delta
                    if rc > 1.0:
                        rc = 1.0
                    sc = sqrt(1.0 - rc * rc)
                    w = es * xi1s
                    # inlined scalar drift: same order as drift_eval
                    bx1 = C1
                    if a1:
                        bx1 = bx1 + A1 * x1
                    if r1 or s1:
                        rr = sqrt(x1 * x1)
                        if r1:
                            bx1 = bx1 + pl_eval(p1.rho_xs, p1.rho_vs,
                                                p1.n_rho, rr, True) * x1
                        if s1:
                            rv = pl_eval(p1.sig_xs, p1.sig_vs, p1.n_sig, rr, True)
                            if rr > 0.0:
                                rv = rv / rr
                            else:
                                rv = 0.0
                            bx1 = bx1 + rv * x1
                    by1 = C2
                    if a2:
                        by1 = by1 + A2 * y1
                    if r2 or s2:
                        rr = sqrt(y1 * y1)
                        if r2:
                            by1 = by1 + pl_eval(p2.rho_xs, p2.rho_vs,
                                                p2.n_rho, rr, True) * y1
                        if s2:
                            rv = pl_eval(p2.sig_xs, p2.sig_vs, p2.n_sig, rr, True)
                            if rr > 0.0:
                                rv = rv / rr
                            else:
                                rv = 0.0
                            by1 = by1 + rv * y1
                    x1 = x1 + bx1 * h + rc * (sqh * xi1s) + sc * (sqh * xi2s)
                    y1 = y1 + by1 * h + rc * (sqh * (xi1s - (2.0 * w) * es)) \
                        + sc * (sqh * xi2s)
                    if kconst:
                        ac = M + kval * rcmp
                    else:
                        ac = M + pl_eval(kxs, kvs, nk, rcmp, False) * rcmp
                    rcc = rcmp / delta
                    if rcc > 1.0:
                        rcc = 1.0
                    prop = rcmp + ac * h + (2.0 * rcc) * (sqh * w)
                    if prop < 0.0:
                        rcmp = -prop
                    else:
                        rcmp = prop
                    dk = x1 - y1
                    rt_new = sqrt(dk * dk)
                    for jj in range(ns):
                        slack = slack_a[jj] + slack_b[jj] * sqh * (1.0 + rcmp)
                        ex = rt_new - (rcmp + slack)
                        if ex > 0.0:
                            viol[p, jj] += 1
                            if ex > worst[p, jj]:
                                worst[p, jj] = ex
                    if want_w:
                        w_out[p, i] = sqh * w
                    if k < n_rec and i + 1 == rec_idx[k]:
                        Xr[p, k, 0] = x1
                        Yr[p, k, 0] = y1
                        rtr[p, k] = rt_new
                        rcr[p, k] = rcmp
                        k += 1
                continue

            for j in range(d):
                X[j] = x0[j]
                Y[j] = y0[j]
            if n_rec > 0 and rec_idx[0] == 0:
                s = 0.0
                for j in range(d):
                    Xr[p, 0, j] = X[j]
                    Yr[p, 0, j] = Y[j]
                    dk = X[j] - Y[j]
                    if j == 0:
                        s = dk * dk
                    else:
                        s = s + dk * dk
                rtr[p, 0] = sqrt(s)
                rcr[p, 0] = rcmp
                k = 1
            for i in range(steps):
                xrow = xip + p * stride + i * 2 * d
                dk = X[0] - Y[0]
                s = dk * dk
                for j in range(1, d):
                    dk = X[j] - Y[j]
                    s = s + dk * dk
                rt = sqrt(s)
                if rt > 0.0:
                    for j in range(d):
                        e[j] = (X[j] - Y[j]) / rt
                else:
                    e[0] = 1.0
                    for j in range(1, d):
                        e[j] = 0.0
                rc = rt / delta
                if rc > 1.0:
                    rc = 1.0
                sc = sqrt(1.0 - rc * rc)
                w = e[0] * xrow[0]
                for j in range(1, d):
                    w = w + e[j] * xrow[j]
                drift_eval(p1, X, bX, d)
                drift_eval(p2, Y, bY, d)
                for j in range(d):
                    X[j] = X[j] + bX[j] * h + rc * (sqh * xrow[j]) \
                        + sc * (sqh * xrow[d + j])
                    Y[j] = Y[j] + bY[j] * h \
                        + rc * (sqh * (xrow[j] - (2.0 * w) * e[j])) \
                        + sc * (sqh * xrow[d + j])
                ac = M + pl_eval(kxs, kvs, nk, rcmp, False) * rcmp
                rcc = rcmp / delta
                if rcc > 1.0:
                    rcc = 1.0
                prop = rcmp + ac * h + (2.0 * rcc) * (sqh * w)
                if prop < 0.0:
                    rcmp = -prop
                else:
                    rcmp = prop
                dk = X[0] - Y[0]
                s = dk * dk
                for j in range(1, d):
                    dk = X[j] - Y[j]
                    s = s + dk * dk
                rt_new = sqrt(s)
                for jj in range(ns):
                    slack = slack_a[jj] + slack_b[jj] * sqh * (1.0 + rcmp)
                    ex = rt_new - (rcmp + slack)
                    if ex > 0.0:
                        viol[p, jj] += 1
                        if ex > worst[p, jj]:
                            worst[p, jj] = ex
                if want_w:
                    w_out[p, i] = sqh * w
                if k < n_rec and i + 1 == rec_idx[k]:
                    for j in range(d):
                        Xr[p, k, j] = X[j]
                        Yr[p, k, j] = Y[j]
                    rtr[p, k] = rt_new
                    rcr[p, k] = rcmp
                    k += 1
    return Xr_np, Yr_np, rtr_np, rcr_np, viol_np, worst_np, w_np


def sticky_chunk(const double[::1] m_t,
                 const double[::1] kap_xs, const double[::1] kap_vs,
                 double h, long reg_n, const double[::1] r0,
                 const double[:, ::1] xi, const double[:, ::1] expo,
                 const long long[::1] rec_idx, int mode):
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t steps = xi.shape[1]
    cdef Py_ssize_t n_rec = rec_idx.shape[0]
    cdef double sqh = sqrt(h)
    cdef double b1 = 1.0 / reg_n
    cdef double b2 = 2.0 / reg_n
    cdef double b4 = 4.0 / reg_n
    cdef const double* kxs = &kap_xs[0]
    cdef const double* kvs = &kap_vs[0]
    cdef Py_ssize_t nk = kap_xs.shape[0]

    rec_np = np.empty((n, n_rec))
    zt_np = np.zeros(n)
    t1_np = np.zeros(n)
    t2_np = np.zeros(n)
    t4_np = np.zeros(n)
    cdef double[:, ::1] rec = rec_np
    cdef double[::1] zt = zt_np
    cdef double[::1] t1 = t1_np
    cdef double[::1] t2 = t2_np
    cdef double[::1] t4 = t4_np

    cdef Py_ssize_t p, i, k
    cdef double r, budget, mt, a, y, dr, m, dL, th, r_eff
    cdef bint holding, stuck, zero_now

    with nogil:
        for p in range(n):
            r = r0[p]
            budget = 0.0
            k = 0
            if n_rec > 0 and rec_idx[0] == 0:
                rec[p, 0] = r
                k = 1
            for i in range(steps):
                mt = m_t[i]
                if mode == 0:
                    holding = budget >= 1.0
                    stuck = (not holding) and r == 0.0 and mt <= 0.0
                    if holding:
                        budget = budget - 1.0
                    if not (holding or stuck):
                        a = mt + pl_eval(kxs, kvs, nk, r, False) * r
                        y = r + a * h + 2.0 * (sqh * xi[p, i])
                        dr = y - r
                        m = 0.5 * (r + y - sqrt(dr * dr + (8.0 * h) * expo[p, i]))
                        if m < 0.0:
                            dL = -m
                            y = y + dL
                            if mt > 0.0:
                                budget = budget + dL / (mt * h)
                            else:
                                budget = budget + 1e300
                        r = y
                else:
                    a = mt + pl_eval(kxs, kvs, nk, r, False) * r
                    th = reg_n * r
                    if th > 1.0:
                        th = 1.0
                    r = r + a * h + (2.0 * th) * (sqh * xi[p, i])
                    if r < 0.0:
                        r = 0.0
                    holding = False
                    stuck = False
                zero_now = holding or stuck or r == 0.0
                if zero_now:
                    zt[p] = zt[p] + h
                    r_eff = INFINITY
                else:
                    r_eff = r
                if r_eff < b4:
                    t4[p] = t4[p] + h
                if r_eff < b2:
                    t2[p] = t2[p] + h
                if r_eff < b1:
                    t1[p] = t1[p] + h
                if k < n_rec and i + 1 == rec_idx[k]:
                    if zero_now:
                        rec[p, k] = 0.0
                    else:
                        rec[p, k] = r
                    k += 1
    return rec_np, zt_np, t1_np, t2_np, t4_np


def meanfield_chunk(dict p_eta, const double[:, ::1] G, double tau, double h,
                    const double[:, ::1] X0, const double[:, ::1] Y0,
                    const double[:, :, ::1] xi, const long long[::1] rec_idx):
    cdef Py_ssize_t N = xi.shape[0]
    cdef Py_ssize_t steps = xi.shape[1]
    cdef Py_ssize_t d = xi.shape[2]
    if d > MAXDIM:
        raise ValueError(f"compiled kernel supports dimension <= {MAXDIM}")
    cdef Py_ssize_t n_rec = rec_idx.shape[0]
    cdef double sqh = sqrt(h)

    cdef _Params PE = _Params(p_eta)
    cdef const DriftP* pe = &PE.p

    X_np = np.array(X0, dtype=float, copy=True)
    Y_np = np.array(Y0, dtype=float, copy=True)
    Xr_np = np.empty((n_rec, N, d))
    Yr_np = np.empty((n_rec, N, d))
    cdef double[:, ::1] X = X_np
    cdef double[:, ::1] Y = Y_np

    cdef double mX[MAXDIM]
    cdef double mY[MAXDIM]
    cdef double bx[MAXDIM]
    cdef double xbuf[MAXDIM]
    cdef Py_ssize_t i, p, j, kk, k
    cdef double accX, accY

    k = 0
    if n_rec > 0 and rec_idx[0] == 0:
        Xr_np[0] = X_np
        Yr_np[0] = Y_np
        k = 1
    for i in range(steps):
        with nogil:
            for j in range(d):
                accX = 0.0
                accY = 0.0
                for p in range(N):
                    accX = accX + X[p, j]
                    accY = accY + Y[p, j]
                mX[j] = accX / N
                mY[j] = accY / N
            for p in range(N):
                for j in range(d):
                    xbuf[j] = X[p, j]
                drift_eval(pe, xbuf, bx, d)
                if tau != 0.0:
                    for kk in range(d):
                        accX = G[kk, 0] * (mX[0] - X[p, 0])
                        for j in range(1, d):
                            accX = accX + G[kk, j] * (mX[j] - X[p, j])
                        bx[kk] = bx[kk] + tau * accX
                for j in range(d):
                    X[p, j] = X[p, j] + bx[j] * h + sqh * xi[p, i, j]
            for p in range(N):
                for j in range(d):
                    xbuf[j] = Y[p, j]
                drift_eval(pe, xbuf, bx, d)
                if tau != 0.0:
                    for kk in range(d):
                        accY = G[kk, 0] * (mY[0] - Y[p, 0])
                        for j in range(1, d):
                            accY = accY + G[kk, j] * (mY[j] - Y[p, j])
                        bx[kk] = bx[kk] + tau * accY
                for j in range(d):
                    Y[p, j] = Y[p, j] + bx[j] * h + sqh * xi[p, i, j]
        if k < n_rec and i + 1 == rec_idx[k]:
            Xr_np[k] = X_np
            Yr_np[k] = Y_np
            k += 1
    return Xr_np, Yr_np
