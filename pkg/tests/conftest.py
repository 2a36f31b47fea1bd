"""Shared test oracles, kept independent of the library code paths they
check: golden-section search for 1-D convex minimisation, a taut-string
solver for 1-D total-variation denoising, and an adjoint-identity helper."""

import numpy as np
import pytest

from regcomplex import rng


def golden_minimize(f, lo, hi, tol=1e-12, max_iter=200):
    """Golden-section minimiser of a scalar convex function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def tv1d_denoise(y, lam):
    """Exact 1-D total-variation denoising min_x (1/2)||x-y||^2 + lam TV(x)
    by Condat's direct (taut-string) algorithm.  Outputs are validated in
    the tests through the KKT certificate of this strictly convex problem,
    so the oracle never has to be taken on faith."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n == 1 or lam == 0.0:
        return y.copy()
    x = np.empty(n)
    k = k0 = km = kp = 0
    vmin = y[0] - lam
    vmax = y[0] + lam
    umin = lam
    umax = -lam
    while True:
        while k < n - 1:
            if y[k + 1] + umin < vmin - lam:
                x[k0 : km + 1] = vmin
                k = k0 = km = kp = km + 1
                vmin = y[k]
                vmax = y[k] + 2 * lam
                umin = lam
                umax = -lam
            elif y[k + 1] + umax > vmax + lam:
                x[k0 : kp + 1] = vmax
                k = k0 = km = kp = kp + 1
                vmin = y[k] - 2 * lam
                vmax = y[k]
                umin = lam
                umax = -lam
            else:
                k += 1
                umin += y[k] - vmin
                umax += y[k] - vmax
                if umin >= lam:
                    vmin += (umin - lam) / (k - k0 + 1)
                    umin = lam
                    km = k
                if umax <= -lam:
                    vmax += (umax + lam) / (k - k0 + 1)
                    umax = -lam
                    kp = k
        if umin < 0.0:
            x[k0 : km + 1] = vmin
            k = k0 = km = km + 1
            vmin = y[k]
            umin = lam
            umax = y[k] + lam - vmax
        elif umax > 0.0:
            x[k0 : kp + 1] = vmax
            k = k0 = kp = kp + 1
            vmax = y[k]
            umax = -lam
            umin = y[k] - lam - vmin
        else:
            x[k0:] = vmin + umin / (k - k0 + 1)
            return x


def tv1d_kkt_holds(y, x, lam, tol=1e-9):
    """Exact optimality certificate for 1-D TV denoising: the running sum
    of the residual must stay within [-lam, lam], vanish at the end, and
    sit on the matching boundary wherever the solution jumps."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    s = np.cumsum(y - x)
    if abs(s[-1]) > tol or np.any(np.abs(s[:-1]) > lam + tol):
        return False
    for k in range(y.size - 1):
        jump = x[k + 1] - x[k]
        if abs(jump) > tol and abs(s[k] + lam * np.sign(jump)) > tol:
            return False
    return True


def adjoint_mismatch(op, n_pairs=100, seed=1234):
    """max over random pairs of |<Ax, y> - <x, A*y>| / scale."""
    worst = 0.0
    for i in range(n_pairs):
        gen = rng.stream(seed, i)
        x = gen.normals(op.domain_dim)
        y = gen.normals(op.codomain_dim)
        ax = op.apply(x)
        aty = op.adjoint_apply(y)
        lhs = float(ax @ y)
        rhs = float(x @ aty)
        scale = max(1.0, abs(lhs), abs(rhs))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@pytest.fixture
def gen():
    return rng.Xorshift64Star(20240811)
