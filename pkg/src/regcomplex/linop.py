"""Linear operators acting on flat float64 vectors.

Images are stored row-major: pixel (row, col) of a width x height grid sits
at index ``row * width + col``, with unit cell width.  The gradient operator
stacks all horizontal differences first, then all vertical ones.  Operators
are immutable after construction and reentrant; apply/adjoint allocate their
outputs per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from . import rng


@dataclass
class ImageGrid:
    """A greyscale image on a regular grid, flattened row-major."""

    width: int
    height: int
    values: np.ndarray
    cell_width: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} values, got {self.values.size}"
            )

    def as_2d(self) -> np.ndarray:
        return self.values.reshape(self.height, self.width)


@dataclass
class FlatAreaCollection:
    """Disjoint pixel-index regions, each constant in the image of interest."""

    regions: list

    def __post_init__(self):
        cleaned = []
        seen = set()
        for reg in self.regions:
            idx = np.unique(np.asarray(reg, dtype=np.int64))
            if idx.size == 0:
                raise ValueError("empty region")
            if idx[0] < 0:
                raise ValueError("negative pixel index in region")
            overlap = seen.intersection(idx.tolist())
            if overlap:
                raise ValueError(f"regions overlap at indices {sorted(overlap)[:5]}")
            seen.update(idx.tolist())
            cleaned.append(idx)
        self.regions = cleaned

    @property
    def total_size(self) -> int:
        return sum(len(r) for r in self.regions)

    def check_bounds(self, n_pixels: int):
        for idx in self.regions:
            if idx[-1] >= n_pixels:
                raise ValueError(f"region index {idx[-1]} outside grid of {n_pixels} pixels")


class LinearMap:
    """Base class: a linear operator with an exact adjoint."""

    kind = "abstract"

    def __init__(self, domain_dim: int, codomain_dim: int):
        if domain_dim < 1 or codomain_dim < 1:
            raise ValueError("operator dimensions must be positive")
        self.domain_dim = int(domain_dim)
        self.codomain_dim = int(codomain_dim)

    def _check(self, v, expected: int, what: str) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.size != expected:
            raise ValueError(f"{what}: expected length {expected}, got {v.size}")
        return v

    def apply(self, x) -> np.ndarray:
        x = self._check(x, self.domain_dim, f"{self.kind}.apply")
        return self._apply(x)

    def adjoint_apply(self, y) -> np.ndarray:
        y = self._check(y, self.codomain_dim, f"{self.kind}.adjoint_apply")
        return self._adjoint(y)

    def _apply(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _adjoint(self, y):  # pragma: no cover - abstract
        raise NotImplementedError

    def as_matrix(self) -> np.ndarray:
        """Dense matrix representation (columns = images of basis vectors)."""
        cols = np.empty((self.codomain_dim, self.domain_dim))
        e = np.zeros(self.domain_dim)
        for j in range(self.domain_dim):
            e[j] = 1.0
            cols[:, j] = self._apply(e)
            e[j] = 0.0
        return cols

    def __repr__(self):
        return f"<{type(self).__name__} {self.codomain_dim}x{self.domain_dim}>"


class Identity(LinearMap):
    kind = "identity"

    def __init__(self, n: int):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


class Zero(LinearMap):
    kind = "zero"

    def __init__(self, domain_dim: int, codomain_dim: int):
        super().__init__(domain_dim, codomain_dim)

    def _apply(self, x):
        return np.zeros(self.codomain_dim)

    def _adjoint(self, y):
        return np.zeros(self.domain_dim)


class Dense(LinearMap):
    kind = "dense"

    def __init__(self, matrix):
        m = np.ascontiguousarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("dense operator needs a 2-D matrix")
        super().__init__(m.shape[1], m.shape[0])
        self.matrix = m

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def as_matrix(self):
        return self.matrix.copy()


def gaussian_kernel(std: float, window: int) -> np.ndarray:
    """Sampled Gaussian on an odd window, normalised to sum exactly handled
    by division (sum 1 up to rounding)."""
    if window % 2 != 1 or window < 1:
        raise ValueError(f"window must be odd and positive, got {window}")
    if std <= 0:
        raise ValueError("std must be positive")
    r = window // 2
    coords = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * std * std))
    return k / k.sum()


class GaussianBlur2D(LinearMap):
    """Convolution with a sampled Gaussian, mirror (symmetric) padding.

    Mirror padding plus the normalised kernel makes constant images fixed
    points, which keeps flat backgrounds exactly flat under blurring.
    """

    kind = "blur2d"

    def __init__(self, width: int, height: int, std: float, window: int):
        n = width * height
        super().__init__(n, n)
        if window // 2 > min(width, height):
            raise ValueError("window too large for the grid")
        self.width = width
        self.height = height
        self.std = float(std)
        self.window = int(window)
        self.kernel = gaussian_kernel(std, window)

    def _apply(self, x):
        return kernels.blur_apply(x, self.kernel, self.width, self.height)

    def _adjoint(self, y):
        return kernels.blur_adjoint(y, self.kernel, self.width, self.height)


class Grad2D(LinearMap):
    """Forward-difference image gradient, zero difference at the last
    column/row; codomain stacks horizontal then vertical differences."""

    kind = "grad2d"

    def __init__(self, width: int, height: int):
        if width < 1 or height < 1:
            raise ValueError("grid dimensions must be positive")
        super().__init__(width * height, 2 * width * height)
        self.width = width
        self.height = height

    def _apply(self, x):
        return kernels.grad2d_apply(x, self.width, self.height)

    def _adjoint(self, y):
        return kernels.grad2d_adjoint(y, self.width, self.height)


class Stack(LinearMap):
    """Vertical stacking x -> (A x, Q x); adjoint (y1, y2) -> A* y1 + Q* y2."""

    kind = "stack"

    def __init__(self, a: LinearMap, q: LinearMap):
        if a.domain_dim != q.domain_dim:
            raise ValueError(
                f"stacked operators disagree on the domain: {a.domain_dim} vs {q.domain_dim}"
            )
        super().__init__(a.domain_dim, a.codomain_dim + q.codomain_dim)
        self.a = a
        self.q = q

    def _apply(self, x):
        return np.concatenate([self.a._apply(x), self.q._apply(x)])

    def _adjoint(self, y):
        y1 = y[: self.a.codomain_dim]
        y2 = y[self.a.codomain_dim :]
        return self.a._adjoint(y1) + self.q._adjoint(y2)

    def split(self, y):
        """Split a codomain vector into its (A, Q) blocks."""
        y = self._check(y, self.codomain_dim, "stack.split")
        return y[: self.a.codomain_dim], y[self.a.codomain_dim :]


class Centring(LinearMap):
    """Restriction to a union of regions with the per-region mean removed.

    Vanishes exactly on inputs that are constant on every region; the output
    lists regions in collection order, pixels in ascending index order.
    """

    kind = "centring"

    def __init__(self, collection: FlatAreaCollection, width: int, height: int):
        n = width * height
        collection.check_bounds(n)
        super().__init__(n, collection.total_size)
        self.collection = collection
        self.width = width
        self.height = height
        offsets = np.cumsum([0] + [len(r) for r in collection.regions])
        self._offsets = offsets

    def _apply(self, x):
        out = np.empty(self.codomain_dim)
        for reg, lo, hi in zip(self.collection.regions, self._offsets, self._offsets[1:]):
            vals = x[reg]
            out[lo:hi] = vals - vals.mean()
        return out

    def _adjoint(self, y):
        out = np.zeros(self.domain_dim)
        for reg, lo, hi in zip(self.collection.regions, self._offsets, self._offsets[1:]):
            seg = y[lo:hi]
            out[reg] = seg - seg.mean()
        return out


@dataclass(frozen=True)
class NormEstimate:
    """Power-iteration operator-norm estimate with a convergence flag."""

    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


def estimate_norm(op: LinearMap, tol: float = 1e-6, max_iter: int = 1000,
                  seed: int = 0) -> NormEstimate:
    """Estimate ||op|| by power iteration on op* op.

    Deterministic for a given seed; converged once successive singular-value
    estimates differ by less than ``tol``.  A zero operator yields 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = rng.stream(seed, 0).normals(op.domain_dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - astronomically unlikely
        v = np.ones(op.domain_dim)
        nv = np.linalg.norm(v)
    v /= nv
    prev = np.inf
    sigma = 0.0
    for it in range(1, max_iter + 1):
        av = op.apply(v)
        sigma = float(np.linalg.norm(av))
        if sigma == 0.0:
            return NormEstimate(0.0, True, it)
        if abs(sigma - prev) < tol:
            return NormEstimate(sigma, True, it)
        prev = sigma
        w = op.adjoint_apply(av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return NormEstimate(sigma, True, it)
        v = w / nw
    return NormEstimate(sigma, False, max_iter)


def _jacobi_eigenvalues(s: np.ndarray, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(s, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return a[0].copy()
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                sgn = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - sgn * rq
                a[q, :] = sgn * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - sgn * cq
                a[:, q] = sgn * cp + c * cq
    return np.sort(np.diag(a))


def smallest_nonzero_eigenvalue(m, tol: float = 1e-9) -> float:
    """Smallest eigenvalue above ``tol * lambda_max`` of a symmetric PSD
    matrix, computed with a cyclic Jacobi iteration (dense, n up to ~500).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    sym = 0.5 * (m + m.T)
    eigs = _jacobi_eigenvalues(sym)
    lam_max = float(eigs[-1])
    if lam_max <= tol * scale:
        raise ValueError("zero operator: no eigenvalue above the threshold")
    if eigs[0] < -tol * max(1.0, lam_max):
        raise ValueError("matrix is not positive semidefinite within tolerance")
    nonzero = eigs[eigs > tol * lam_max]
    if nonzero.size == 0:  # pragma: no cover - excluded by the lam_max guard
        raise ValueError("zero operator: no eigenvalue above the threshold")
    return float(nonzero[0])
