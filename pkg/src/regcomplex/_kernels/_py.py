"""Pure-numpy reference implementations of the hot kernels.

This module mirrors the compiled extension ``regcomplex._kernels._core``.
For the stencil and shrinkage kernels the accumulation orders match the
compiled loops exactly, so both backends agree bit for bit (the extension
is built with floating-point contraction disabled).  The dense solver loop
uses BLAS matrix-vector products here and explicit loops in the extension,
so those agree only up to rounding.
"""

from __future__ import annotations

import numpy as np


def _mirror(n: int, shift: int) -> np.ndarray:
    """Index map i -> i+shift with symmetric (edge-repeating) reflection."""
    idx = np.arange(n, dtype=np.int64) + shift
    idx = np.where(idx < 0, -1 - idx, idx)
    idx = np.where(idx >= n, 2 * n - 1 - idx, idx)
    return idx


def blur_apply(x, kern, width, height):
    """Convolve a flat row-major image with a 2-D kernel, mirror padding."""
    img = np.asarray(x).reshape(height, width)
    win = kern.shape[0]
    r = win // 2
    out = np.zeros((height, width))
    for a in range(win):
        ri = _mirror(height, a - r)
        for b in range(win):
            ci = _mirror(width, b - r)
            out += kern[a, b] * img[ri[:, None], ci[None, :]]
    return out.ravel()


def blur_adjoint(y, kern, width, height):
    """Adjoint of ``blur_apply`` (scatter with the same mirror map)."""
    img = np.asarray(y).reshape(height, width)
    win = kern.shape[0]
    r = win // 2
    out = np.zeros((height, width))
    for a in range(win):
        ri = _mirror(height, a - r)
        for b in range(win):
            ci = _mirror(width, b - r)
            np.add.at(out, (ri[:, None], ci[None, :]), kern[a, b] * img)
    return out.ravel()


def grad2d_apply(x, width, height):
    """Forward differences, zero at the last column/row; output is all
    horizontal differences followed by all vertical ones."""
    img = np.asarray(x).reshape(height, width)
    gx = np.zeros((height, width))
    gy = np.zeros((height, width))
    gx[:, :-1] = img[:, 1:] - img[:, :-1]
    gy[:-1, :] = img[1:, :] - img[:-1, :]
    return np.concatenate([gx.ravel(), gy.ravel()])


def grad2d_adjoint(g, width, height):
    """Adjoint of ``grad2d_apply`` (negative discrete divergence)."""
    g = np.asarray(g)
    n = width * height
    gx = g[:n].reshape(height, width)
    gy = g[n:].reshape(height, width)
    out = np.zeros((height, width))
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out.ravel()


def soft_threshold(x, t):
    x = np.asarray(x)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _as_groups(v, n_groups, group_size, planar):
    v = np.asarray(v)
    if planar:
        return v.reshape(group_size, n_groups).T
    return v.reshape(n_groups, group_size)


def _from_groups(m, planar):
    if planar:
        return m.T.ravel().copy()
    return m.ravel().copy()


def group_l2_norms(v, n_groups, group_size, planar):
    m = _as_groups(v, n_groups, group_size, planar)
    return np.sqrt(np.sum(m * m, axis=1))


def group_l2_norm_sum(v, n_groups, group_size, planar):
    return float(np.sum(group_l2_norms(v, n_groups, group_size, planar)))


def group_l2_shrink(v, n_groups, group_size, thresh, planar):
    """Per-group radial shrinkage (1 - thresh/|g|)_+ g."""
    m = _as_groups(v, n_groups, group_size, planar)
    norms = np.sqrt(np.sum(m * m, axis=1))
    factor = np.zeros(n_groups)
    big = norms > thresh
    factor[big] = 1.0 - thresh / norms[big]
    return _from_groups(m * factor[:, None], planar)


def group_l2_project(v, n_groups, group_size, radius, planar):
    """Per-group projection onto the closed radius-ball."""
    m = _as_groups(v, n_groups, group_size, planar)
    norms = np.sqrt(np.sum(m * m, axis=1))
    factor = np.ones(n_groups)
    big = norms > radius
    factor[big] = radius / norms[big]
    return _from_groups(m * factor[:, None], planar)


def fb_l1_dense(a, b, reg_weight, tau, x0, n_iters, record_every=1, xhat=None):
    """Forward-backward (iterative soft-thresholding) loop for a dense
    forward matrix and a weighted 1-norm regulariser.

    Returns (x_final, recorded_ks, objectives, distances_or_None) where the
    recorded indices are 0, record_every, 2*record_every, ..., n_iters (and
    nothing at all for record_every == 0 or n_iters == 0).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    thresh = tau * reg_weight

    def objective(z):
        r = a @ z - b
        return 0.5 * float(r @ r) + reg_weight * float(np.sum(np.abs(z)))

    ks, objs, dists = [], [], []

    def record(k):
        ks.append(k)
        objs.append(objective(x))
        if xhat is not None:
            dists.append(float(np.linalg.norm(x - xhat)))

    if n_iters > 0 and record_every > 0:
        record(0)
    for k in range(1, n_iters + 1):
        g = a.T @ (a @ x - b)
        x = soft_threshold(x - tau * g, thresh)
        if record_every > 0 and (k % record_every == 0 or k == n_iters):
            record(k)
    return (
        x,
        np.asarray(ks, dtype=np.int64),
        np.asarray(objs, dtype=np.float64),
        np.asarray(dists, dtype=np.float64) if xhat is not None else None,
    )
