"""Compiled hot kernels.

Semantics match regcomplex._kernels._py; the stencil and shrinkage loops
accumulate in the same order as the numpy fallback so both backends agree
bit for bit (the build disables floating-point contraction).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef inline Py_ssize_t _mirror(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return -1 - i
    if i >= n:
        return 2 * n - 1 - i
    return i


def blur_apply(x, kern, Py_ssize_t width, Py_ssize_t height):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] kv = np.ascontiguousarray(kern, dtype=np.float64)
    cdef Py_ssize_t win = kv.shape[0]
    cdef Py_ssize_t r = win // 2
    out = np.empty(width * height)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, a, b, ri, ci
    cdef double acc, w
    with nogil:
        for i in range(height):
            for j in range(width):
                acc = 0.0
                for a in range(win):
                    ri = _mirror(i + a - r, height)
                    for b in range(win):
                        ci = _mirror(j + b - r, width)
                        acc = acc + kv[a, b] * xv[ri * width + ci]
                ov[i * width + j] = acc
    return out


def blur_adjoint(y, kern, Py_ssize_t width, Py_ssize_t height):
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[:, ::1] kv = np.ascontiguousarray(kern, dtype=np.float64)
    cdef Py_ssize_t win = kv.shape[0]
    cdef Py_ssize_t r = win // 2
    out = np.zeros(width * height)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, a, b, ri, ci
    cdef double w
    with nogil:
        # Tap-major scatter, row-major within each tap: same accumulation
        # order as the fallback's per-tap np.add.at calls.
        for a in range(win):
            for b in range(win):
                w = kv[a, b]
                for i in range(height):
                    ri = _mirror(i + a - r, height)
                    for j in range(width):
                        ci = _mirror(j + b - r, width)
                        ov[ri * width + ci] = ov[ri * width + ci] + w * yv[i * width + j]
    return out


def grad2d_apply(x, Py_ssize_t width, Py_ssize_t height):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = width * height
    out = np.zeros(2 * n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, p
    with nogil:
        for i in range(height):
            for j in range(width):
                p = i * width + j
                if j + 1 < width:
                    ov[p] = xv[p + 1] - xv[p]
                if i + 1 < height:
                    ov[n + p] = xv[p + width] - xv[p]
    return out


def grad2d_adjoint(g, Py_ssize_t width, Py_ssize_t height):
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = width * height
    out = np.zeros(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, p
    with nogil:
        for i in range(height):
            for j in range(width):
                p = i * width + j
                if j + 1 < width:
                    ov[p] = ov[p] - gv[p]
        for i in range(height):
            for j in range(width):
                p = i * width + j
                if j + 1 < width:
                    ov[p + 1] = ov[p + 1] + gv[p]
        for i in range(height):
            for j in range(width):
                p = i * width + j
                if i + 1 < height:
                    ov[p] = ov[p] - gv[n + p]
        for i in range(height):
            for j in range(width):
                p = i * width + j
                if i + 1 < height:
                    ov[p + width] = ov[p + width] + gv[n + p]
    return out


def soft_threshold(x, double t):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double v, m
    with nogil:
        for i in range(n):
            v = xv[i]
            m = fabs(v) - t
            if m < 0.0:
                m = 0.0
            ov[i] = m if v > 0.0 else (-m if v < 0.0 else 0.0)
    return out


cdef inline Py_ssize_t _gidx(Py_ssize_t g, Py_ssize_t c, Py_ssize_t n_groups,
                             Py_ssize_t group_size, bint planar) nogil:
    if planar:
        return c * n_groups + g
    return g * group_size + c


def group_l2_norms(v, Py_ssize_t n_groups, Py_ssize_t group_size, bint planar):
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(n_groups)
    cdef double[::1] ov = out
    cdef Py_ssize_t g, c
    cdef double acc, val
    with nogil:
        for g in range(n_groups):
            acc = 0.0
            for c in range(group_size):
                val = vv[_gidx(g, c, n_groups, group_size, planar)]
                acc = acc + val * val
            ov[g] = sqrt(acc)
    return out


def group_l2_norm_sum(v, Py_ssize_t n_groups, Py_ssize_t group_size, bint planar):
    norms = group_l2_norms(v, n_groups, group_size, planar)
    return float(np.sum(norms))


def group_l2_shrink(v, Py_ssize_t n_groups, Py_ssize_t group_size, double thresh, bint planar):
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(n_groups * group_size)
    cdef double[::1] ov = out
    cdef Py_ssize_t g, c, idx
    cdef double acc, val, factor
    with nogil:
        for g in range(n_groups):
            acc = 0.0
            for c in range(group_size):
                val = vv[_gidx(g, c, n_groups, group_size, planar)]
                acc = acc + val * val
            acc = sqrt(acc)
            factor = 1.0 - thresh / acc if acc > thresh else 0.0
            for c in range(group_size):
                idx = _gidx(g, c, n_groups, group_size, planar)
                ov[idx] = vv[idx] * factor
    return out


def group_l2_project(v, Py_ssize_t n_groups, Py_ssize_t group_size, double radius, bint planar):
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(n_groups * group_size)
    cdef double[::1] ov = out
    cdef Py_ssize_t g, c, idx
    cdef double acc, val, factor
    with nogil:
        for g in range(n_groups):
            acc = 0.0
            for c in range(group_size):
                val = vv[_gidx(g, c, n_groups, group_size, planar)]
                acc = acc + val * val
            acc = sqrt(acc)
            factor = radius / acc if acc > radius else 1.0
            for c in range(group_size):
                idx = _gidx(g, c, n_groups, group_size, planar)
                ov[idx] = vv[idx] * factor
    return out


cdef double _fb_objective(double[:, ::1] a, double[::1] b, double[::1] x,
                          double reg_weight) nogil:
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, fit, l1
    fit = 0.0
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc = acc + a[i, j] * x[j]
        acc = acc - b[i]
        fit = fit + acc * acc
    l1 = 0.0
    for j in range(n):
        l1 = l1 + fabs(x[j])
    return 0.5 * fit + reg_weight * l1


def fb_l1_dense(a, b, double reg_weight, double tau, x0, long n_iters,
                long record_every=1, xhat=None):
    """See regcomplex._kernels._py.fb_l1_dense for the contract."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t n = av.shape[1]
    x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] xv = x
    cdef double[::1] hv
    cdef bint have_hat = xhat is not None
    if have_hat:
        hv = np.ascontiguousarray(xhat, dtype=np.float64)

    cdef long n_rec = 0
    if record_every > 0 and n_iters > 0:
        n_rec = n_iters // record_every + 1
        if n_iters % record_every != 0:
            n_rec += 1
    ks = np.empty(n_rec, dtype=np.int64)
    objs = np.empty(n_rec, dtype=np.float64)
    dists = np.empty(n_rec if have_hat else 0, dtype=np.float64)
    cdef long[::1] kv = ks
    cdef double[::1] objv = objs
    cdef double[::1] distv = dists

    resid = np.empty(m)
    grad = np.empty(n)
    cdef double[::1] rv = resid
    cdef double[::1] gv = grad
    cdef Py_ssize_t i, j
    cdef long k, rec = 0
    cdef double acc, v, mth, thresh = tau * reg_weight

    with nogil:
        if n_rec > 0:
            kv[rec] = 0
            objv[rec] = _fb_objective(av, bv, xv, reg_weight)
            if have_hat:
                acc = 0.0
                for j in range(n):
                    v = xv[j] - hv[j]
                    acc = acc + v * v
                distv[rec] = sqrt(acc)
            rec += 1
        for k in range(1, n_iters + 1):
            for i in range(m):
                acc = 0.0
                for j in range(n):
                    acc = acc + av[i, j] * xv[j]
                rv[i] = acc - bv[i]
            for j in range(n):
                gv[j] = 0.0
            for i in range(m):
                v = rv[i]
                for j in range(n):
                    gv[j] = gv[j] + av[i, j] * v
            for j in range(n):
                v = xv[j] - tau * gv[j]
                mth = fabs(v) - thresh
                if mth < 0.0:
                    mth = 0.0
                xv[j] = mth if v > 0.0 else (-mth if v < 0.0 else 0.0)
            if record_every > 0 and (k % record_every == 0 or k == n_iters):
                kv[rec] = k
                objv[rec] = _fb_objective(av, bv, xv, reg_weight)
                if have_hat:
                    acc = 0.0
                    for j in range(n):
                        v = xv[j] - hv[j]
                        acc = acc + v * v
                    distv[rec] = sqrt(acc)
                rec += 1

    ks = ks[:rec]
    objs = objs[:rec]
    return (x, ks, objs, dists[:rec] if have_hat else None)
