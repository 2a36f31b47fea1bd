"""Convex functionals with values, gradients and proximal maps.

A :class:`Functional` is an immutable description ``weight * base`` where
``base`` is one of a handful of shipped convex functions.  All proximal maps
are exact closed forms; conjugate proximal maps go through the Moreau
identity ``prox_{s f*}(y) = y - s prox_{f/s}(y/s)``.

Group layout: a ``group_l21`` functional either reads consecutive blocks of
``group_size`` entries ("contiguous", the default) or gathers entry ``i``
from each of ``group_size`` equal planes ("planar").  The planar layout
matches the gradient operator's output, pairing the horizontal and vertical
difference of each pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels

_KINDS = ("squared_norm", "l1", "group_l21", "nonneg", "squared_distance", "zero")
_NONNEG_SLACK = 1e-12


@dataclass(frozen=True)
class Functional:
    """weight * base, with optional data vector and grouping metadata."""

    kind: str
    weight: float = 1.0
    data: np.ndarray | None = None
    group_size: int | None = None
    group_layout: str = "contiguous"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.kind == "group_l21":
            if not self.group_size or self.group_size < 1:
                raise ValueError("group_l21 needs a positive group_size")
            if self.group_layout not in ("contiguous", "planar"):
                raise ValueError("group_layout must be 'contiguous' or 'planar'")
        if self.data is not None:
            object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64).ravel())

    def _groups(self, n: int) -> int:
        if n % self.group_size != 0:
            raise ValueError(
                f"input length {n} not divisible by group size {self.group_size}"
            )
        return n // self.group_size


def squared_norm(weight: float = 1.0) -> Functional:
    """weight * (1/2)||x||^2."""
    return Functional("squared_norm", weight)


def l1(weight: float = 1.0) -> Functional:
    """weight * ||x||_1."""
    return Functional("l1", weight)


def group_l21(weight: float = 1.0, group_size: int = 2,
              layout: str = "contiguous") -> Functional:
    """weight * sum of per-group Euclidean norms."""
    return Functional("group_l21", weight, group_size=group_size, group_layout=layout)


def nonneg_indicator() -> Functional:
    """0 on the nonnegative orthant (with a small floating slack), inf off it."""
    return Functional("nonneg")


def squared_distance_to_data(data, weight: float = 1.0) -> Functional:
    """weight * (1/2)||x - data||^2."""
    return Functional("squared_distance", weight, data=np.asarray(data, dtype=np.float64))


def zero_functional() -> Functional:
    return Functional("zero")


def _check_dims(f: Functional, x: np.ndarray):
    if f.data is not None and x.size != f.data.size:
        raise ValueError(f"expected length {f.data.size}, got {x.size}")


def value(f: Functional, x) -> float:
    """Evaluate f (extended real: the indicator may return inf)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    _check_dims(f, x)
    if f.kind == "squared_norm":
        return f.weight * 0.5 * float(x @ x)
    if f.kind == "l1":
        return f.weight * float(np.sum(np.abs(x)))
    if f.kind == "group_l21":
        n_groups = f._groups(x.size)
        return f.weight * kernels.group_l2_norm_sum(
            x, n_groups, f.group_size, f.group_layout == "planar")
    if f.kind == "nonneg":
        return np.inf if np.min(x, initial=0.0) < -_NONNEG_SLACK else 0.0
    if f.kind == "squared_distance":
        d = x - f.data
        return f.weight * 0.5 * float(d @ d)
    return 0.0  # zero


def prox(f: Functional, tau: float, x) -> np.ndarray:
    """Exact minimiser of (1/2)||z - x||^2 + tau f(z)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    _check_dims(f, x)
    t = tau * f.weight
    if f.kind == "squared_norm":
        return x / (1.0 + t)
    if f.kind == "l1":
        return kernels.soft_threshold(x, t)
    if f.kind == "group_l21":
        n_groups = f._groups(x.size)
        return kernels.group_l2_shrink(x, n_groups, f.group_size, t,
                                       f.group_layout == "planar")
    if f.kind == "nonneg":
        return np.maximum(x, 0.0)
    if f.kind == "squared_distance":
        return (x + t * f.data) / (1.0 + t)
    return x.copy()  # zero


def prox_conjugate(f: Functional, sigma: float, y) -> np.ndarray:
    """prox of sigma f* at y, via the Moreau identity."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = np.asarray(y, dtype=np.float64).ravel()
    return y - sigma * prox(f, 1.0 / sigma, y / sigma)


def conjugate_value(f: Functional, v, feas_tol: float = 1e-9) -> float:
    """Fenchel conjugate f*(v); inf outside the conjugate's domain.

    Domain membership is tested with relative slack ``feas_tol`` so that
    numerically computed dual points on the boundary evaluate as feasible.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    _check_dims(f, v)
    w = f.weight
    if f.kind == "squared_norm":
        if w == 0:
            return 0.0 if np.max(np.abs(v), initial=0.0) <= feas_tol else np.inf
        return 0.5 * float(v @ v) / w
    if f.kind == "l1":
        bound = w * (1.0 + feas_tol)
        return 0.0 if np.max(np.abs(v), initial=0.0) <= bound else np.inf
    if f.kind == "group_l21":
        n_groups = f._groups(v.size)
        norms = kernels.group_l2_norms(v, n_groups, f.group_size,
                                       f.group_layout == "planar")
        bound = w * (1.0 + feas_tol)
        return 0.0 if np.max(norms, initial=0.0) <= bound else np.inf
    if f.kind == "nonneg":
        return 0.0 if np.max(v, initial=0.0) <= feas_tol else np.inf
    if f.kind == "squared_distance":
        if w == 0:
            return 0.0 if np.max(np.abs(v), initial=0.0) <= feas_tol else np.inf
        return float(v @ f.data) + 0.5 * float(v @ v) / w
    # zero functional: conjugate is the indicator of the origin
    return 0.0 if np.max(np.abs(v), initial=0.0) <= feas_tol else np.inf


def gradient(f: Functional, x) -> np.ndarray:
    """Gradient of a smooth functional; raises for nonsmooth kinds."""
    x = np.asarray(x, dtype=np.float64).ravel()
    _check_dims(f, x)
    if f.kind == "squared_norm":
        return f.weight * x
    if f.kind == "squared_distance":
        return f.weight * (x - f.data)
    raise ValueError(f"functional kind {f.kind!r} is not differentiable")


def sign_set_membership(x, d, tol: float = 1e-9) -> bool:
    """Whether d lies in the subdifferential of the 1-norm at x.

    Componentwise: d_k must equal +-1 (within tol) where x_k is nonzero
    beyond tol, and satisfy |d_k| <= 1 + tol elsewhere.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    if x.size != d.size:
        raise ValueError(f"expected length {x.size}, got {d.size}")
    pos = x > tol
    neg = x < -tol
    zero = ~(pos | neg)
    if np.any(np.abs(d[pos] - 1.0) > tol):
        return False
    if np.any(np.abs(d[neg] + 1.0) > tol):
        return False
    return not np.any(np.abs(d[zero]) > 1.0 + tol)


def _check_subgradient(f: Functional, d: np.ndarray, xhat: np.ndarray, tol: float):
    if f.kind == "l1":
        scale = f.weight if f.weight > 0 else 1.0
        if not sign_set_membership(xhat, d / scale, tol):
            raise ValueError("d is not a subgradient of the weighted 1-norm at xhat")
    elif f.kind == "squared_norm":
        ref = f.weight * xhat
        if np.linalg.norm(d - ref) > tol * (1.0 + np.linalg.norm(ref)):
            raise ValueError("d is not the gradient of the weighted squared norm at xhat")
    # other kinds: membership is trusted (no cheap certificate)


def bregman_divergence(f: Functional, d, x, xhat, tol: float = 1e-9) -> float:
    """<d, xhat - x> + f(x) - f(xhat) for a subgradient d of f at xhat.

    Membership of d is verified for the 1-norm and squared-norm kinds and
    trusted otherwise.  Convexity makes the result nonnegative up to
    rounding.
    """
    d = np.asarray(d, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    _check_subgradient(f, d, xhat, tol)
    return float(d @ (xhat - x)) + value(f, x) - value(f, xhat)
