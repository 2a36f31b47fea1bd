"""Numerical verification of the regularisation theory.

Dual certificates for source conditions, strict complementarity, sampled
growth inequalities (the strong and semi-strong local subdifferentiability
conditions), ellipticity of the centring-plus-normal operator, error-bound
verifiers, and condition checkers for general data fidelities and nearly
linear forward maps.  Samplers return evidence reports, never proofs; the
bound verifiers check proved inequalities and a failure there indicates a
bug or an invalid certificate.

All reports expose ``to_json_dict`` with flat key-value content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prox as proxmod
from . import rng
from .linop import Centring, FlatAreaCollection, LinearMap, estimate_norm, \
    smallest_nonzero_eigenvalue
from .prox import Functional, sign_set_membership


# ------------------------------------------------------------- certificates

@dataclass
class SourceCertificate:
    """Dual certificate w with -A*w close to the required subdifferential.

    ``d`` is recomputed from (operator, w) on access rather than stored, so
    the pair can never drift apart.  ``residual`` is the Euclidean distance
    of d to the admissible subgradient set; the certificate counts as found
    when it is at most the search tolerance.
    """

    operator: LinearMap
    w: np.ndarray
    residual: float
    found: bool
    iterations: int
    residual_history: np.ndarray

    @property
    def d(self) -> np.ndarray:
        return -self.operator.adjoint_apply(self.w)

    def to_json_dict(self) -> dict:
        return {
            "residual": self.residual,
            "found": self.found,
            "iterations": self.iterations,
            "w_norm": float(np.linalg.norm(self.w)),
        }


def _project_onto_sign_set(v: np.ndarray, xhat: np.ndarray, tol: float) -> np.ndarray:
    """Projection onto the product set {sign(xhat_k)} x [-1, 1]^zeros."""
    out = np.clip(v, -1.0, 1.0)
    pos = xhat > tol
    neg = xhat < -tol
    out[pos] = 1.0
    out[neg] = -1.0
    return out


def find_l1_certificate(a: LinearMap, xhat, tol: float = 1e-10,
                        max_iter: int = 20000) -> SourceCertificate:
    """Search for w with -A*w in the subdifferential of the 1-norm at xhat.

    Gradient descent on w -> (1/2) dist^2(-A*w, Sign(xhat)) from w = 0 with
    the fixed step 1/||A||^2; the distance is nonincreasing along the
    iterations.  A residual above ``tol`` after ``max_iter`` steps flags the
    certificate as not found, which is evidence (not proof) that the source
    condition fails.
    """
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    norm_a = estimate_norm(a, tol=1e-9, max_iter=2000, seed=7).value
    if norm_a == 0.0:
        raise ValueError("zero forward operator has no useful certificate")
    step = 1.0 / norm_a**2
    w = np.zeros(a.codomain_dim)
    history = []
    it = 0
    residual = np.inf
    for it in range(max_iter + 1):
        d = -a.adjoint_apply(w)
        gap = d - _project_onto_sign_set(d, xhat, tol)
        residual = float(np.linalg.norm(gap))
        history.append(residual)
        if residual <= tol:
            break
        # gradient of (1/2)||(-A*w) - P(-A*w)||^2 in w
        w = w + step * a.apply(gap)
    return SourceCertificate(
        operator=a,
        w=w,
        residual=residual,
        found=residual <= tol,
        iterations=it,
        residual_history=np.asarray(history),
    )


def strict_complementarity(xhat, d, tol: float = 1e-9):
    """Zero components of xhat whose certificate entry is strictly inside
    (-1, 1); returns (all zeros are strict, that index set)."""
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    if not sign_set_membership(xhat, d, tol):
        raise ValueError("d is not a subgradient of the 1-norm at xhat")
    zero = np.abs(xhat) <= tol
    strict = zero & (np.abs(d) < 1.0 - tol)
    z_set = set(np.flatnonzero(strict).tolist())
    return bool(np.all(strict == zero)), z_set


def lasso_m_matrix(a, z_set) -> np.ndarray:
    """A*A plus a unit diagonal entry for every index in the strict zero set."""
    mat = a.matrix if isinstance(a, LinearMap) else np.asarray(a, dtype=np.float64)
    m = mat.T @ mat
    n = m.shape[0]
    for k in z_set:
        if not 0 <= k < n:
            raise ValueError(f"index {k} out of range for {n} columns")
        m[k, k] += 1.0
    return m


def lasso_admissible_gamma(a, xhat, d, radius: float, alpha: float,
                           safety: float = 0.9) -> float:
    """Growth factor for the sampled inequality on a strictly complementary
    instance: safety * min(1/2, beta * lambda_min) with
    beta = min(1, min_{k in Z}(1 - |d_k|) / sup-norm bound over the ball)
    and lambda_min the smallest nonzero eigenvalue of the augmented normal
    matrix.  Requires alpha <= 1/2 - gamma to leave room for the fit term.
    """
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    complementary, z_set = strict_complementarity(xhat, d)
    if not complementary:
        raise ValueError("instance is not strictly complementary")
    rho = float(np.max(np.abs(xhat))) + radius
    margin = min((1.0 - abs(d[k])) for k in z_set) if z_set else 1.0
    beta = min(1.0, margin / rho)
    lam = smallest_nonzero_eigenvalue(lasso_m_matrix(a, z_set))
    gamma = safety * min(0.5, beta * lam)
    if alpha > 0.5 - gamma:
        raise ValueError(
            f"alpha={alpha} too large for gamma={gamma}: need alpha <= 1/2 - gamma")
    return gamma


# ------------------------------------------------------ sampled inequalities

@dataclass
class SubregularityReport:
    """Outcome of sampling a growth inequality around a reference point."""

    gamma_tested: float
    gamma_delta: float
    alpha: float
    radius: float
    n_samples: int
    target: str
    min_slack: float
    violated_at: np.ndarray | None

    @property
    def passed(self) -> bool:
        return self.violated_at is None

    def to_json_dict(self) -> dict:
        return {
            "gamma_tested": self.gamma_tested,
            "gamma_delta": self.gamma_delta,
            "alpha": self.alpha,
            "radius": self.radius,
            "n_samples": self.n_samples,
            "target": self.target,
            "min_slack": self.min_slack,
            "passed": self.passed,
        }


def _ball_sample(center: np.ndarray, radius: float, gen: rng.Xorshift64Star) -> np.ndarray:
    n = center.size
    direction = gen.normals(n)
    norm = np.linalg.norm(direction)
    if norm == 0.0:  # pragma: no cover
        return center.copy()
    u = gen.uniforms(1)[0]
    return center + (radius * u ** (1.0 / n) / norm) * direction


def check_strong_subdiff_sampled(a: LinearMap, r: Functional, xhat, d, *,
                                 alpha: float, gamma: float, gamma_delta: float,
                                 radius: float, n_samples: int, seed: int,
                                 target: str = "strong", dist_projector=None,
                                 rho: float | None = None,
                                 extra_points=None) -> SubregularityReport:
    """Sample the growth inequality

        alpha [R(x) - R(xhat) - <d, x - xhat>] + (1/2 - gamma) ||A(x-xhat)||^2
            >= gamma * gamma_delta * target(x)^2

    at points uniform in the radius-ball around xhat (per-sample substreams
    of ``seed``, so a parallel evaluation returns the same report).

    ``target`` is "strong" for ||x - xhat|| or "semi_strong" for the
    distance to the solution set, measured through ``dist_projector`` (a
    callable returning the projection of x onto that set).  When ``rho`` is
    given, samples with R(x) > R(xhat) + rho are skipped, restricting the
    sampling to the sublevel neighbourhood where the inequality is claimed.
    A violated inequality is reported, not raised.
    """
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie strictly between 0 and 1/2")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if target not in ("strong", "semi_strong"):
        raise ValueError("target must be 'strong' or 'semi_strong'")
    if target == "semi_strong" and dist_projector is None:
        raise ValueError("semi_strong target needs a dist_projector")
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    r_hat = proxmod.value(r, xhat)

    min_slack = np.inf
    violated_at = None
    points = [] if extra_points is None else [np.asarray(p, dtype=np.float64).ravel()
                                              for p in extra_points]
    evaluated = 0
    for i in range(n_samples):
        points.append(_ball_sample(xhat, radius, rng.stream(seed, i)))
    for x in points:
        r_x = proxmod.value(r, x)
        if rho is not None and r_x > r_hat + rho:
            continue
        evaluated += 1
        growth = alpha * (r_x - r_hat - float(d @ (x - xhat)))
        ax = a.apply(x - xhat)
        lhs = growth + (0.5 - gamma) * float(ax @ ax)
        if target == "strong":
            dist_sq = float((x - xhat) @ (x - xhat))
        else:
            p = np.asarray(dist_projector(x), dtype=np.float64).ravel()
            dist_sq = float((x - p) @ (x - p))
        slack = lhs - gamma * gamma_delta * dist_sq
        if slack < min_slack:
            min_slack = slack
            if slack < -1e-14:
                violated_at = x.copy()
    return SubregularityReport(
        gamma_tested=gamma,
        gamma_delta=gamma_delta,
        alpha=alpha,
        radius=radius,
        n_samples=evaluated,
        target=target,
        min_slack=float(min_slack),
        violated_at=violated_at,
    )


# ------------------------------------------------------------- ellipticity

@dataclass
class EllipticityReport:
    passed: bool
    epsilon_estimate: float
    converged: bool
    iterations: int

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "epsilon_estimate": self.epsilon_estimate,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def check_tv_ellipticity(a: LinearMap, collection: FlatAreaCollection,
                         width: int, height: int, tol: float = 1e-8,
                         max_iter: int = 5000,
                         dense_cap: int = 1200) -> EllipticityReport:
    """Estimate the smallest eigenvalue of K_O* K_O + A* A on the grid.

    Positivity of this operator is what lets flat areas compensate for the
    kernel of the forward map.  Small grids are assembled densely and
    handled by inverse power iteration (Cholesky with a tiny shift); larger
    ones use shifted power iteration on the matrix-free operator.
    """
    import scipy.linalg

    n = width * height
    if a.domain_dim != n:
        raise ValueError(f"operator acts on {a.domain_dim} pixels, grid has {n}")
    centring = Centring(collection, width, height)

    def b_apply(v):
        return centring.adjoint_apply(centring.apply(v)) + a.adjoint_apply(a.apply(v))

    lam_max = _symmetric_norm_upper(b_apply, n)
    if lam_max == 0.0:
        return EllipticityReport(False, 0.0, True, 0)

    if n <= dense_cap:
        dense = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            dense[:, j] = b_apply(e)
            e[j] = 0.0
        mu = 1e-12 * lam_max
        c, low = scipy.linalg.cho_factor(dense + mu * np.eye(n))
        v = rng.stream(11, 0).normals(n)
        v /= np.linalg.norm(v)
        prev = np.inf
        est = lam_max
        for it in range(1, max_iter + 1):
            w = scipy.linalg.cho_solve((c, low), v)
            w_norm = np.linalg.norm(w)
            v = w / w_norm
            est = float(v @ (dense @ v))
            if abs(est - prev) < tol * max(1.0, abs(est)):
                return EllipticityReport(est > tol, max(est, 0.0), True, it)
            prev = est
        return EllipticityReport(est > tol, max(est, 0.0), False, max_iter)

    # matrix-free: power iteration on s I - B reaches s - lambda_min
    s = 1.01 * lam_max
    v = rng.stream(11, 1).normals(n)
    v /= np.linalg.norm(v)
    prev = np.inf
    est = 0.0
    for it in range(1, max_iter + 1):
        w = s * v - b_apply(v)
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return EllipticityReport(False, 0.0, True, it)
        v = w / w_norm
        est = s - float(v @ (s * v - b_apply(v)))
        if abs(est - prev) < tol * max(1.0, abs(est)):
            return EllipticityReport(est > tol, max(est, 0.0), True, it)
        prev = est
    return EllipticityReport(est > tol, max(est, 0.0), False, max_iter)


def _symmetric_norm_upper(op_apply, n: int, iters: int = 60) -> float:
    v = rng.stream(13, 0).normals(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op_apply(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def strictly_flat_check(phi, collection: FlatAreaCollection, grad_xhat,
                        tol: float = 1e-9) -> bool:
    """Whether every region is strictly flat: the reference gradient
    vanishes there and the dual field stays strictly inside the unit ball.

    ``phi`` holds two components per pixel in the gradient layout (all
    horizontal entries, then all vertical); pixel norms above 1 + tol
    anywhere make it an invalid dual field and raise.
    """
    phi = np.asarray(phi, dtype=np.float64).ravel()
    grad_xhat = np.asarray(grad_xhat, dtype=np.float64).ravel()
    if phi.size % 2 != 0 or phi.size != grad_xhat.size:
        raise ValueError("phi and grad_xhat must both hold two entries per pixel")
    n = phi.size // 2
    collection.check_bounds(n)
    pixel_norms = np.sqrt(phi[:n] ** 2 + phi[n:] ** 2)
    if np.max(pixel_norms, initial=0.0) > 1.0 + tol:
        raise ValueError("dual field has pixels outside the unit ball")
    for reg in collection.regions:
        if np.max(pixel_norms[reg]) > 1.0 - tol:
            return False
        if np.max(np.abs(grad_xhat[reg])) > tol or np.max(np.abs(grad_xhat[n + reg])) > tol:
            return False
    return True


# ------------------------------------------------------------ bound checks

@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool

    def to_json_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


def apriori_bounds(e_delta: float, delta: float, alpha: float,
                   r_xhat: float) -> tuple[float, float]:
    """A-priori ceilings implied by solving to accuracy e_delta with noise
    at most delta: on ||A(x_delta - xhat)||^2 and on R(x_delta)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    fit_bound = 4.0 * (e_delta + delta**2 + alpha * r_xhat)
    r_bound = r_xhat + (e_delta + delta**2) / alpha
    return fit_bound, r_bound


def verify_bregman_bound(r: Functional, certificate: SourceCertificate,
                         x_delta, xhat, e_delta: float, delta: float,
                         alpha: float, cert_tol: float = 1e-8) -> BoundCheck:
    """Check the certified divergence bound

        B_R^{-A*w}(x_delta, xhat) <= e/alpha + delta^2/alpha + alpha ||w||^2.
    """
    if certificate.residual > cert_tol:
        raise ValueError(
            f"certificate residual {certificate.residual:.3e} exceeds {cert_tol:.1e}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    membership_tol = max(1e-9, 10.0 * certificate.residual)
    lhs = proxmod.bregman_divergence(r, certificate.d, x_delta, xhat,
                                     tol=membership_tol)
    w_norm = float(np.linalg.norm(certificate.w))
    rhs = e_delta / alpha + delta**2 / alpha + alpha * w_norm**2
    return BoundCheck(lhs=float(lhs), rhs=float(rhs), holds=lhs <= rhs + 1e-9)


def verify_strong_estimate(x_delta, xhat, e_delta: float, delta: float,
                           alpha: float, gamma: float, gamma_delta: float,
                           w_norm: float) -> BoundCheck:
    """Check the norm-convergence estimate

        ||x_delta - xhat||^2 <= e/(g gd) + delta^2/(2 g^2 gd)
                                + alpha^2 ||w||^2 / (2 g^2 gd).
    """
    if gamma <= 0 or gamma_delta <= 0:
        raise ValueError("gamma and gamma_delta must be positive")
    diff = np.asarray(x_delta, dtype=np.float64).ravel() - np.asarray(
        xhat, dtype=np.float64).ravel()
    lhs = float(diff @ diff)
    rhs = (
        e_delta / (gamma * gamma_delta)
        + delta**2 / (2.0 * gamma**2 * gamma_delta)
        + alpha**2 * w_norm**2 / (2.0 * gamma**2 * gamma_delta)
    )
    return BoundCheck(lhs=lhs, rhs=float(rhs), holds=lhs <= rhs + 1e-9)


# -------------------------------------------- fidelity / nearly linear maps

@dataclass
class FidelityReport:
    """Sampled pseudo-Hoelder check C^{-1} E(z) <= E(w) + ||E'(z-w)||^p."""

    c: float
    p: float
    n_pairs: int
    min_slack: float
    counterexample_found: bool
    level_constant_ok: bool | None

    @property
    def passed(self) -> bool:
        return not self.counterexample_found

    def to_json_dict(self) -> dict:
        return {
            "c": self.c,
            "p": self.p,
            "n_pairs": self.n_pairs,
            "min_slack": self.min_slack,
            "counterexample_found": self.counterexample_found,
            "level_constant_ok": self.level_constant_ok,
            "passed": self.passed,
        }


def check_fidelity_conditions(e: Functional, p: float, c: float,
                              n_pairs: int, seed: int, dim: int = 8,
                              q: float | None = None,
                              c_prime: float | None = None,
                              scale: float = 3.0) -> FidelityReport:
    """Sample the pseudo-Hoelder estimate for a smooth fidelity.

    Pairs are drawn as (z, w) = (w + s u, w) with w Gaussian, u a random
    direction and s log-spaced in magnitude, so both nearby and far-apart
    pairs are probed.  The report's min_slack is
    min over pairs of [E(w) + ||E'(z-w)||^p - E(z)/C].

    For quadratic fidelities with ``q`` and ``c_prime`` given, the level
    compatibility E(v) <= c_prime * delta^q over ||v|| <= delta is also
    checked on a small grid of levels.
    """
    if c <= 0 or p <= 0:
        raise ValueError("c and p must be positive")
    gen = rng.stream(seed, 0)
    min_slack = np.inf
    found = False
    for i in range(n_pairs):
        w = scale * gen.normals(dim)
        u = gen.normals(dim)
        u_norm = np.linalg.norm(u)
        if u_norm == 0.0:  # pragma: no cover
            continue
        s = scale * 10.0 ** (-3.0 + 4.0 * gen.uniforms(1)[0])
        z = w + (s / u_norm) * u
        ez = proxmod.value(e, z)
        ew = proxmod.value(e, w)
        deriv = proxmod.gradient(e, z - w)
        slack = ew + float(np.linalg.norm(deriv)) ** p - ez / c
        if slack < min_slack:
            min_slack = slack
        if slack < -1e-14:
            found = True

    # deterministic probe along z = 2w, the classic tight direction
    w = np.ones(dim)
    z = 2.0 * w
    slack = proxmod.value(e, w) + float(
        np.linalg.norm(proxmod.gradient(e, z - w))) ** p - proxmod.value(e, z) / c
    min_slack = min(min_slack, slack)
    if slack < -1e-14:
        found = True

    level_ok = None
    if q is not None and c_prime is not None:
        level_ok = True
        for j, level in enumerate((1.0, 0.1, 0.01)):
            v = rng.stream(seed, 1000 + j).normals(dim)
            v *= level / np.linalg.norm(v)
            if proxmod.value(e, v) > c_prime * level**q + 1e-12:
                level_ok = False
    return FidelityReport(
        c=c, p=p, n_pairs=n_pairs, min_slack=float(min_slack),
        counterexample_found=found, level_constant_ok=level_ok,
    )


@dataclass
class ApproxLinearityReport:
    eta: float
    radius: float
    n_samples: int
    min_slack: float

    @property
    def passed(self) -> bool:
        return self.min_slack >= -1e-12

    def to_json_dict(self) -> dict:
        return {
            "eta": self.eta,
            "radius": self.radius,
            "n_samples": self.n_samples,
            "min_slack": self.min_slack,
            "passed": self.passed,
        }


def _check_jacobian(a_func, a_jac, xhat: np.ndarray, seed: int,
                    rel_tol: float = 1e-5):
    gen = rng.stream(seed, 999)
    h = 1e-6
    for _ in range(3):
        v = gen.normals(xhat.size)
        v /= np.linalg.norm(v)
        fd = (np.asarray(a_func(xhat + h * v)) - np.asarray(a_func(xhat - h * v))) / (2 * h)
        jv = np.asarray(a_jac(v))
        scale = max(1.0, float(np.linalg.norm(jv)))
        if np.linalg.norm(fd - jv) > rel_tol * scale:
            raise ValueError(
                "Jacobian action disagrees with finite differences at xhat")


def check_approximate_linearity(a_func, a_jac, xhat, b_delta, eta: float,
                                radius: float, n_samples: int,
                                seed: int) -> ApproxLinearityReport:
    """Sample the near-linearity condition

        (1/2)||A(x)-A(xhat)||^2 + <A(xhat)-b, A(x)-A(xhat)-A'(xhat)(x-xhat)>
            >= eta ||A'(xhat)(x-xhat)||^2

    in the radius-ball around xhat.  ``a_func`` evaluates the forward map
    and ``a_jac`` its Jacobian action at xhat; the two are cross-checked by
    finite differences before sampling.
    """
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    b_delta = np.asarray(b_delta, dtype=np.float64).ravel()
    _check_jacobian(a_func, a_jac, xhat, seed)
    a_hat = np.asarray(a_func(xhat), dtype=np.float64).ravel()
    min_slack = np.inf
    for i in range(n_samples):
        x = _ball_sample(xhat, radius, rng.stream(seed, i))
        ax = np.asarray(a_func(x), dtype=np.float64).ravel()
        jv = np.asarray(a_jac(x - xhat), dtype=np.float64).ravel()
        da = ax - a_hat
        lhs = 0.5 * float(da @ da) + float((a_hat - b_delta) @ (da - jv))
        slack = lhs - eta * float(jv @ jv)
        min_slack = min(min_slack, slack)
    return ApproxLinearityReport(eta=eta, radius=radius, n_samples=n_samples,
                                 min_slack=float(min_slack))


def largest_valid_eta(a_func, a_jac, xhat, b_delta, radius: float,
                      n_samples: int, seed: int, eta_hi: float = 4.0,
                      atol: float = 1e-4) -> float:
    """Largest eta for which the sampled near-linearity condition holds,
    located by bisection to absolute tolerance ``atol`` (the sampled slack
    is affine and decreasing in eta)."""
    lo, hi = 0.0, eta_hi
    if check_approximate_linearity(a_func, a_jac, xhat, b_delta, hi, radius,
                                   n_samples, seed).min_slack >= 0:
        return hi
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        report = check_approximate_linearity(a_func, a_jac, xhat, b_delta,
                                             mid, radius, n_samples, seed)
        if report.min_slack >= 0:
            lo = mid
        else:
            hi = mid
    return lo
