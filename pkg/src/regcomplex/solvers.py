"""Optimisation methods for the regularised least-squares problems.

Two iterative methods with full tracing, plus direct ridge solvers:

* forward-backward splitting (iterative soft-thresholding form): gradient
  step on the quadratic fit, proximal step on the regulariser;
* primal-dual proximal splitting (PDPS) on the saddle formulation with a
  zero primal functional, the stacked operator K x = (A x, Q x) and the
  dual functional G(y, z) = (1/2)||y - b||^2 + R(z).

Traces record objectives per iterate; PDPS additionally maintains the
running (ergodic) primal average and can record a Lagrangian gap against a
fixed reference pair.  Identical inputs produce bit-identical traces for a
given kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels as kernels
from . import prox as proxmod
from .linop import Dense, Identity, LinearMap, Stack


class ConvergenceError(RuntimeError):
    """Raised when an iteration hits its budget; carries the last iterate."""

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass
class ProblemSpec:
    """min over x of (1/2)||A x - b||^2 + R(Q x).

    ``regulariser`` carries its multiplicative weight (for a weight-alpha
    1-norm pass ``prox.l1(alpha)``); ``reg_operator`` defaults to the
    identity.
    """

    forward: LinearMap
    data: np.ndarray
    regulariser: proxmod.Functional
    reg_operator: LinearMap | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).ravel()
        if self.data.size != self.forward.codomain_dim:
            raise ValueError(
                f"data: expected length {self.forward.codomain_dim}, got {self.data.size}"
            )
        if self.reg_operator is not None and (
            self.reg_operator.domain_dim != self.forward.domain_dim
        ):
            raise ValueError(
                "forward and regularisation operators disagree on the domain: "
                f"{self.forward.domain_dim} vs {self.reg_operator.domain_dim}"
            )

    def reg_op(self) -> LinearMap:
        return self.reg_operator if self.reg_operator is not None else Identity(
            self.forward.domain_dim)


@dataclass(frozen=True)
class StepParams:
    """Step lengths; ``lipschitz_or_norm`` is ||A||^2 for forward-backward
    (the gradient Lipschitz constant) and ||K|| for PDPS."""

    tau: float
    lipschitz_or_norm: float
    sigma: float | None = None

    def validate_fb(self):
        if self.tau <= 0 or self.lipschitz_or_norm <= 0:
            raise ValueError("tau and the Lipschitz constant must be positive")
        if self.tau * self.lipschitz_or_norm >= 1.0:
            raise ValueError(
                f"step too long: tau*L = {self.tau * self.lipschitz_or_norm:.6g} >= 1"
            )

    def validate_pdps(self):
        if self.sigma is None:
            raise ValueError("PDPS needs a dual step length sigma")
        if self.tau <= 0 or self.sigma <= 0 or self.lipschitz_or_norm <= 0:
            raise ValueError("tau, sigma and the operator norm must be positive")
        prod = self.tau * self.sigma * self.lipschitz_or_norm**2
        if prod >= 1.0:
            raise ValueError(f"step too long: tau*sigma*||K||^2 = {prod:.6g} >= 1")


@dataclass
class SolveTrace:
    """Per-iteration solve record.

    ``ks`` lists the recorded iterate indices (0 is the initial point and
    the final index is always included when recording is on); objectives
    and optional distances to a supplied reference align with ``ks``.
    ``gaps[k]`` is the Lagrangian gap at iterate k (PDPS, one entry per
    iteration 0..N-1, only when a gap reference was given).
    """

    ks: np.ndarray
    objectives: np.ndarray
    final: np.ndarray
    n_iters: int
    distances: np.ndarray | None = None
    final_dual: np.ndarray | None = None
    ergodic: np.ndarray | None = None
    ergodic_dual: np.ndarray | None = None
    gaps: np.ndarray | None = None
    ergodic_objectives: np.ndarray | None = None


def objective(spec: ProblemSpec, x) -> float:
    """(1/2)||A x - b||^2 + R(Q x)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    r = spec.forward.apply(x) - spec.data
    reg_in = x if spec.reg_operator is None else spec.reg_operator.apply(x)
    return 0.5 * float(r @ r) + proxmod.value(spec.regulariser, reg_in)


def _is_identity(op: LinearMap | None) -> bool:
    return op is None or op.kind == "identity"


def forward_backward(spec: ProblemSpec, params: StepParams, x0, n_iters: int,
                     xhat=None, record_every: int = 1) -> SolveTrace:
    """Run exactly ``n_iters`` steps of
    x <- prox_{tau R}(x - tau A*(A x - b)).

    Requires an identity regularisation operator (composite regularisers
    have no closed-form prox; use :func:`pdps`) and ``tau * L < 1`` with
    L = ||A||^2.  Objectives are recorded every ``record_every`` iterations
    (0 disables recording); they are non-increasing along the iterates.
    """
    if not _is_identity(spec.reg_operator):
        raise ValueError(
            "forward_backward needs an identity regularisation operator; "
            "use pdps for composite regularisers")
    params.validate_fb()
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if x0.size != spec.forward.domain_dim:
        raise ValueError(f"x0: expected length {spec.forward.domain_dim}, got {x0.size}")
    if xhat is not None:
        xhat = np.asarray(xhat, dtype=np.float64).ravel()

    a, f = spec.forward, spec.regulariser
    if a.kind == "dense" and f.kind == "l1":
        x, ks, objs, dists = kernels.fb_l1_dense(
            a.matrix, spec.data, f.weight, params.tau, x0, n_iters,
            record_every, xhat)
        return SolveTrace(ks=ks, objectives=objs, final=x, n_iters=n_iters,
                          distances=dists)

    x = x0.copy()
    ks, objs, dists = [], [], []

    def record(k):
        ks.append(k)
        objs.append(objective(spec, x))
        if xhat is not None:
            dists.append(float(np.linalg.norm(x - xhat)))

    if n_iters > 0 and record_every > 0:
        record(0)
    for k in range(1, n_iters + 1):
        g = a.adjoint_apply(a.apply(x) - spec.data)
        x = proxmod.prox(f, params.tau, x - params.tau * g)
        if record_every > 0 and (k % record_every == 0 or k == n_iters):
            record(k)
    return SolveTrace(
        ks=np.asarray(ks, dtype=np.int64),
        objectives=np.asarray(objs, dtype=np.float64),
        final=x,
        n_iters=n_iters,
        distances=np.asarray(dists) if xhat is not None else None,
    )


def fb_accuracy_bound(x0, xhat, tau: float, n: int) -> float:
    """||x0 - xhat||^2 / (2 tau n): the objective-gap guarantee of
    forward-backward splitting after n steps against comparison point xhat."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    d = np.asarray(x0, dtype=np.float64).ravel() - np.asarray(xhat, dtype=np.float64).ravel()
    return float(d @ d) / (2.0 * tau * n)


def _saddle_parts(spec: ProblemSpec):
    """K, the data-fit dual block and the regulariser block of G."""
    k = Stack(spec.forward, spec.reg_op())
    fit = proxmod.squared_distance_to_data(spec.data)
    return k, fit


def pdps(spec: ProblemSpec, params: StepParams, x0, y0=None, n_iters: int = 0,
         xhat=None, gap_reference=None, record_every: int = 1,
         record_ergodic: bool = False) -> SolveTrace:
    """Primal-dual proximal splitting on the saddle formulation.

    With K x = (A x, Q x), a zero primal functional (so the primal proximal
    step is the identity) and G(y, z) = (1/2)||y - b||^2 + R(z), iterate

        x^{k+1} = x^k - tau K* y^k
        y^{k+1} = prox_{sigma G*}(y^k + sigma K (2 x^{k+1} - x^k)).

    The trace carries the running average of x^0 .. x^{N-1} in ``ergodic``
    and, when ``gap_reference`` = (xref, yref) is given, the Lagrangian gap
    of every pre-update iterate against that reference in ``gaps``.
    """
    params.validate_pdps()
    k_op, fit = _saddle_parts(spec)
    x = np.asarray(x0, dtype=np.float64).ravel().copy()
    if x.size != k_op.domain_dim:
        raise ValueError(f"x0: expected length {k_op.domain_dim}, got {x.size}")
    if y0 is None:
        y = np.zeros(k_op.codomain_dim)
    else:
        y = np.asarray(y0, dtype=np.float64).ravel().copy()
        if y.size != k_op.codomain_dim:
            raise ValueError(f"y0: expected length {k_op.codomain_dim}, got {y.size}")
    if xhat is not None:
        xhat = np.asarray(xhat, dtype=np.float64).ravel()

    m = spec.forward.codomain_dim
    tau, sigma = params.tau, params.sigma
    erg_sum = np.zeros_like(x)
    erg_dual_sum = np.zeros_like(y)
    gaps = np.empty(n_iters) if gap_reference is not None else None

    ks, objs, dists, erg_objs = [], [], [], []

    def record(kk):
        ks.append(kk)
        objs.append(objective(spec, x))
        if xhat is not None:
            dists.append(float(np.linalg.norm(x - xhat)))
        if record_ergodic:
            erg_objs.append(objective(spec, erg_sum / kk) if kk > 0
                            else objective(spec, x))

    if n_iters > 0 and record_every > 0:
        record(0)
    for k in range(1, n_iters + 1):
        if gaps is not None:
            gaps[k - 1] = lagrangian_gap(spec, x, y, gap_reference[0], gap_reference[1])
        erg_sum += x
        erg_dual_sum += y
        x_new = x - tau * k_op.adjoint_apply(y)
        v = y + sigma * k_op.apply(2.0 * x_new - x)
        y = np.concatenate([
            proxmod.prox_conjugate(fit, sigma, v[:m]),
            proxmod.prox_conjugate(spec.regulariser, sigma, v[m:]),
        ])
        x = x_new
        if record_every > 0 and (k % record_every == 0 or k == n_iters):
            record(k)

    return SolveTrace(
        ks=np.asarray(ks, dtype=np.int64),
        objectives=np.asarray(objs, dtype=np.float64),
        final=x,
        n_iters=n_iters,
        distances=np.asarray(dists) if xhat is not None else None,
        final_dual=y,
        ergodic=erg_sum / n_iters if n_iters > 0 else x.copy(),
        ergodic_dual=erg_dual_sum / n_iters if n_iters > 0 else y.copy(),
        gaps=gaps,
        ergodic_objectives=np.asarray(erg_objs) if record_ergodic else None,
    )


def m_norm_squared(params: StepParams, k: LinearMap, du_x, du_y) -> float:
    """Squared preconditioner seminorm
    tau^{-1}||du_x||^2 - 2 <K du_x, du_y> + sigma^{-1}||du_y||^2;
    nonnegative whenever tau * sigma * ||K||^2 <= 1."""
    if params.sigma is None:
        raise ValueError("the preconditioner norm needs a dual step length sigma")
    du_x = np.asarray(du_x, dtype=np.float64).ravel()
    du_y = np.asarray(du_y, dtype=np.float64).ravel()
    kx = k.apply(du_x)
    if kx.size != du_y.size:
        raise ValueError(f"du_y: expected length {kx.size}, got {du_y.size}")
    return (
        float(du_x @ du_x) / params.tau
        - 2.0 * float(kx @ du_y)
        + float(du_y @ du_y) / params.sigma
    )


def lagrangian_gap(spec: ProblemSpec, x, y, xref, yref,
                   feas_tol: float = 1e-9) -> float:
    """Lagrangian gap of (x, y) against (xref, yref) for the saddle
    formulation used by :func:`pdps` (zero primal functional):

        (<K x, yref> - G*(yref)) - (<K xref, y> - G*(y)).

    Nonnegative for all (x, y) when (xref, yref) is a solution pair.
    Returns +-inf when G* is infinite at y or yref; dual feasibility is
    tested with relative slack ``feas_tol``.
    """
    k_op, fit = _saddle_parts(spec)
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    xref = np.asarray(xref, dtype=np.float64).ravel()
    yref = np.asarray(yref, dtype=np.float64).ravel()
    m = spec.forward.codomain_dim

    def g_conj(dual):
        return (
            proxmod.conjugate_value(fit, dual[:m], feas_tol)
            + proxmod.conjugate_value(spec.regulariser, dual[m:], feas_tol)
        )

    primal_side = float(k_op.apply(x) @ yref) - g_conj(yref)
    ref_side = float(k_op.apply(xref) @ y) - g_conj(y)
    return primal_side - ref_side


def pdps_accuracy_bound(x0, y0, xhat, y_ball_samples, params: StepParams,
                        k: LinearMap, n: int) -> float:
    """max over sampled dual points of ||(x0,y0) - (xhat, y)||_M^2 / (2 n).

    A lower approximation of the supremum over the true dual comparison
    set; supply at least the known high-accuracy dual solution.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    samples = list(y_ball_samples)
    if not samples:
        raise ValueError("need at least one dual sample point")
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    y0 = np.asarray(y0, dtype=np.float64).ravel()
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    best = -np.inf
    for ys in samples:
        ys = np.asarray(ys, dtype=np.float64).ravel()
        best = max(best, m_norm_squared(params, k, x0 - xhat, y0 - ys))
    return best / (2.0 * n)


def _as_dense(a) -> np.ndarray:
    if isinstance(a, Dense):
        return a.matrix
    if isinstance(a, LinearMap):
        return a.as_matrix()
    return np.ascontiguousarray(a, dtype=np.float64)


def tikhonov_solve(a, b, alpha: float) -> np.ndarray:
    """Minimiser of (1/2)||A x - b||^2 + (alpha/2)||x||^2 for dense A,
    i.e. the solution of (A*A + alpha I) x = A* b, via Cholesky."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    mat = _as_dense(a)
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != mat.shape[0]:
        raise ValueError(f"data: expected length {mat.shape[0]}, got {b.size}")
    normal = mat.T @ mat + alpha * np.eye(mat.shape[1])
    rhs = mat.T @ b
    c, low = scipy.linalg.cho_factor(normal)
    return scipy.linalg.cho_solve((c, low), rhs)


def tikhonov_nonneg_solve(a, b, alpha: float, tol: float = 1e-12,
                          max_iter: int = 200000) -> np.ndarray:
    """Minimiser of (1/2)||A x - b||^2 + (alpha/2)||x||^2 over x >= 0.

    Projected gradient x <- max(0, x - tau (A*(A x - b) + alpha x)) with
    tau = 1/(||A||^2 + alpha); the objective is strongly convex so the
    minimiser is unique.  Raises :class:`ConvergenceError` (carrying the
    last iterate) if successive iterates have not settled within
    ``max_iter`` steps.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    mat = _as_dense(a)
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != mat.shape[0]:
        raise ValueError(f"data: expected length {mat.shape[0]}, got {b.size}")
    norm2 = float(np.linalg.norm(mat, 2)) ** 2
    tau = 1.0 / (norm2 + alpha)
    x = np.zeros(mat.shape[1])
    for _ in range(max_iter):
        g = mat.T @ (mat @ x - b) + alpha * x
        x_new = np.maximum(x - tau * g, 0.0)
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    raise ConvergenceError(
        f"projected gradient did not settle within {max_iter} iterations", x)
