"""End-to-end sweeps at desk scale.

Noise generation, piecewise-constant phantoms, and the three experiment
families: ridge regression with the closed-form solver, Lasso with
forward-backward splitting, and total-variation deblurring with PDPS,
including the comparison of the corruption-coupled iteration budget
against fixed budgets.

Every sweep is bit-reproducible for a fixed seed: row i of a sweep draws
its noise from the substream (seed, i), so rows may run in parallel (see
``REGCOMPLEX_THREADS``) without changing the output.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, rng, schedules
from . import prox as proxmod
from . import solvers
from .linop import (FlatAreaCollection, GaussianBlur2D, Grad2D, ImageGrid,
                    LinearMap, Stack, estimate_norm)
from .pgm import read_pgm


def worker_count() -> int:
    """Row-level parallelism, capped by the REGCOMPLEX_THREADS variable."""
    raw = os.environ.get("REGCOMPLEX_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"REGCOMPLEX_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _run_rows(fn, n_rows: int):
    workers = min(worker_count(), n_rows) if n_rows else 1
    if workers <= 1:
        return [fn(i) for i in range(n_rows)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_rows)))


# ------------------------------------------------------------------- noise

@dataclass(frozen=True)
class NoiseModel:
    """How corruption enters the data.

    ``pixelwise_then_blur``: noise of standard deviation ``level`` is added
    to the image itself and the forward operator is applied afterwards.
    ``additive_on_data``: noise is added to the clean data A xhat.
    """

    kind: str
    level: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("pixelwise_then_blur", "additive_on_data"):
            raise ValueError(f"unknown noise model {self.kind!r}")
        if self.level < 0:
            raise ValueError("noise level must be nonnegative")


def gaussian_noise(n: int, std: float, seed: int) -> np.ndarray:
    """n i.i.d. N(0, std^2) samples from the documented xorshift64* +
    Box-Muller stream; scaling is exact (std * standard draws)."""
    if std <= 0:
        raise ValueError("std must be positive")
    return std * rng.Xorshift64Star(seed).normals(n)


def generate_data(xhat, a: LinearMap, model: NoiseModel):
    """Corrupted data and the measured corruption ||b - A xhat||."""
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    clean = a.apply(xhat)
    if model.level == 0.0:
        return clean, 0.0
    if model.kind == "pixelwise_then_blur":
        noisy = xhat + gaussian_noise(xhat.size, model.level, model.seed)
        b = a.apply(noisy)
    else:
        b = clean + gaussian_noise(clean.size, model.level, model.seed)
    return b, float(np.linalg.norm(b - clean))


# ----------------------------------------------------------------- phantoms

@dataclass(frozen=True)
class Phantom:
    """Piecewise-constant test image: a centred disk, a 1-D step, or an
    external PGM file."""

    kind: str
    width: int
    height: int
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("disk", "steps1d", "pgm"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")


def make_phantom(phantom: Phantom):
    """Build the image and its flat-area collection.

    The disk phantom is 1 on a centred disk of radius min(w, h)/4 on a zero
    background; its two flat areas are the disk interior and the exterior,
    both eroded by two pixels so the regions sit strictly inside the
    constant zones.  The 1-D step keeps everything left of the midpoint at
    0 and the rest at 1, with the jump pixel excluded from the regions.
    Loaded PGM images carry no flat-area collection.
    """
    w, h = phantom.width, phantom.height
    if phantom.kind == "pgm":
        return read_pgm(phantom.path), None
    if phantom.kind == "steps1d":
        if h != 1:
            raise ValueError("steps1d phantoms are one pixel tall")
        if w < 8:
            raise ValueError("steps1d phantoms need at least 8 pixels")
        values = np.zeros(w)
        values[w // 2 :] = 1.0
        left = np.arange(0, w // 2 - 1)
        right = np.arange(w // 2, w)
        return (
            ImageGrid(width=w, height=1, values=values),
            FlatAreaCollection(regions=[left, right]),
        )
    # disk
    if min(w, h) < 8:
        raise ValueError("phantom grids need at least 8 pixels per side")
    radius = min(w, h) / 4.0
    rows, cols = np.mgrid[0:h, 0:w]
    dist = np.sqrt((rows - (h - 1) / 2.0) ** 2 + (cols - (w - 1) / 2.0) ** 2)
    values = (dist <= radius).astype(np.float64)
    interior = np.flatnonzero((dist <= radius - 2.0).ravel())
    exterior = np.flatnonzero((dist >= radius + 2.0).ravel())
    if interior.size == 0 or exterior.size == 0:
        raise ValueError(
            "grid too small: eroding the disk by two pixels leaves an empty "
            "flat area (use at least 12x12)")
    return (
        ImageGrid(width=w, height=h, values=values.ravel()),
        FlatAreaCollection(regions=[interior, exterior]),
    )


# ------------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    """One experiment curve: named columns plus one dict per grid row,
    sorted by descending corruption level."""

    label: str
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([row[name] for row in self.rows], dtype=np.float64)

    @property
    def all_bounds_hold(self) -> bool:
        keys = [c for c in self.columns if c.endswith("_holds")]
        return all(bool(row[k]) for row in self.rows for k in keys)


def _check_grid(deltas) -> list:
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("empty corruption grid")
    if any(d <= 0 for d in deltas):
        raise ValueError("corruption levels must be positive")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("corruption grid must be strictly decreasing")
    return deltas


def certify_range_adjoint(a: LinearMap, xhat, tol: float = 1e-8) -> np.ndarray:
    """Solve A* v = xhat by least squares and return w = -v, so that
    xhat = -A* w; raises when xhat is not in the range of A*."""
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    at = a.as_matrix().T
    v, *_ = np.linalg.lstsq(at, xhat, rcond=None)
    residual = float(np.linalg.norm(at @ v - xhat))
    if residual > tol * max(1.0, float(np.linalg.norm(xhat))):
        raise ValueError(
            f"xhat is not in the range of the adjoint (residual {residual:.3e})")
    return -v


def run_tikhonov_sweep(a: LinearMap, xhat, schedule: schedules.Schedule,
                       deltas, seed: int) -> SweepResult:
    """Closed-form ridge solves over a corruption grid.

    Requires xhat in the range of A* (certified internally, producing the
    dual vector w with xhat = -A* w).  Each row records the distance
    to xhat, the certified error bound
    delta^2/(2 alpha) + (alpha/2) ||w||^2 evaluated at the measured
    corruption, and the divergence bound, with pass/fail flags.
    """
    deltas = _check_grid(deltas)
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    w = certify_range_adjoint(a, xhat)
    w_norm = float(np.linalg.norm(w))
    xhat_norm = float(np.linalg.norm(xhat))
    certificate = diagnostics.SourceCertificate(
        operator=a, w=w, residual=0.0, found=True, iterations=0,
        residual_history=np.zeros(1))
    r_half_sq = proxmod.squared_norm(1.0)
    columns = ["delta", "delta_measured", "alpha", "n_iters", "dist_to_truth",
               "normalized_dist", "data_dist", "objective", "runtime_ms",
               "bound_lhs", "bound_rhs", "bound_holds",
               "bregman_lhs", "bregman_rhs", "bregman_holds"]

    def one_row(i: int) -> dict:
        delta = deltas[i]
        start = time.perf_counter()
        alpha = schedules.alpha_of(schedule, delta)
        model = NoiseModel("additive_on_data", delta,
                           rng.substream_seed(seed, i))
        b, measured = generate_data(xhat, a, model)
        x = solvers.tikhonov_solve(a, b, alpha)
        dist = float(np.linalg.norm(x - xhat))
        resid = a.apply(x) - b
        obj = 0.5 * float(resid @ resid) + 0.5 * alpha * float(x @ x)
        bound_rhs = measured**2 / (2 * alpha) + 0.5 * alpha * w_norm**2
        breg = diagnostics.verify_bregman_bound(
            r_half_sq, certificate, x, xhat, e_delta=0.0, delta=measured,
            alpha=alpha)
        return {
            "delta": delta,
            "delta_measured": measured,
            "alpha": alpha,
            "n_iters": 0,
            "dist_to_truth": dist,
            "normalized_dist": dist / xhat_norm if xhat_norm else dist,
            "data_dist": measured,
            "objective": obj,
            "runtime_ms": 1e3 * (time.perf_counter() - start),
            "bound_lhs": dist**2,
            "bound_rhs": bound_rhs,
            "bound_holds": dist**2 <= bound_rhs + 1e-9,
            "bregman_lhs": breg.lhs,
            "bregman_rhs": breg.rhs,
            "bregman_holds": breg.holds,
        }

    rows = _run_rows(one_row, len(deltas))
    return SweepResult(label="tikhonov", columns=columns, rows=rows,
                       meta={"w_norm": w_norm})


def run_lasso_sweep(a: LinearMap, xhat, schedule: schedules.Schedule, deltas,
                    seed: int, xhat_set_projector) -> SweepResult:
    """Forward-backward solves of the 1-norm problem over a corruption grid.

    Per level: alpha and the iteration budget come from the schedule, the
    solver starts from zero, and the row records the distance to the
    solution set (through the supplied exact projector), the distance to
    xhat, the solver accuracy surrogate and the divergence bound when a
    dual certificate is found.
    """
    deltas = _check_grid(deltas)
    xhat = np.asarray(xhat, dtype=np.float64).ravel()
    xhat_norm = float(np.linalg.norm(xhat))
    condition_report = schedules.check_convergence_conditions(schedule, deltas) \
        if len(deltas) >= 3 else None
    certificate = diagnostics.find_l1_certificate(a, xhat)
    r_l1 = proxmod.l1(1.0)
    norm_a = estimate_norm(a, seed=seed).value
    lip = norm_a**2
    tau = 0.99 / lip
    columns = ["delta", "delta_measured", "alpha", "n_iters", "dist_to_truth",
               "normalized_dist", "dist_to_set", "data_dist", "objective",
               "e_delta", "runtime_ms", "bregman_lhs", "bregman_rhs",
               "bregman_holds"]

    def one_row(i: int) -> dict:
        delta = deltas[i]
        start = time.perf_counter()
        alpha = schedules.alpha_of(schedule, delta)
        n = schedules.n_of(schedule, delta)
        model = NoiseModel("additive_on_data", delta,
                           rng.substream_seed(seed, i))
        b, measured = generate_data(xhat, a, model)
        spec = solvers.ProblemSpec(forward=a, data=b,
                                   regulariser=proxmod.l1(alpha))
        params = solvers.StepParams(tau=tau, lipschitz_or_norm=lip)
        trace = solvers.forward_backward(spec, params, np.zeros(a.domain_dim),
                                         n, record_every=0)
        x = trace.final
        proj = np.asarray(xhat_set_projector(x), dtype=np.float64).ravel()
        e_delta = solvers.fb_accuracy_bound(np.zeros(a.domain_dim), xhat, tau, n)
        row = {
            "delta": delta,
            "delta_measured": measured,
            "alpha": alpha,
            "n_iters": n,
            "dist_to_truth": float(np.linalg.norm(x - xhat)),
            "normalized_dist": float(np.linalg.norm(x - xhat)) / xhat_norm
            if xhat_norm else float(np.linalg.norm(x - xhat)),
            "dist_to_set": float(np.linalg.norm(x - proj)),
            "data_dist": measured,
            "objective": solvers.objective(spec, x),
            "e_delta": e_delta,
            "runtime_ms": 1e3 * (time.perf_counter() - start),
            "bregman_lhs": np.nan,
            "bregman_rhs": np.nan,
            "bregman_holds": True,
        }
        if certificate.found:
            breg = diagnostics.verify_bregman_bound(
                r_l1, certificate, x, xhat, e_delta=e_delta, delta=measured,
                alpha=alpha)
            row["bregman_lhs"] = breg.lhs
            row["bregman_rhs"] = breg.rhs
            row["bregman_holds"] = breg.holds
        return row

    rows = _run_rows(one_row, len(deltas))
    meta = {"certified": certificate.found,
            "certificate_residual": certificate.residual}
    if condition_report is not None:
        meta["convergence_conditions_passed"] = condition_report.passed
        meta["convergence_conditions"] = condition_report.to_json_dict()
    return SweepResult(label="lasso", columns=columns, rows=rows, meta=meta)


def run_tv_deblur_sweep(phantom: Phantom, blur_std: float, blur_window: int,
                        schedule: schedules.Schedule, delta_breves, seed: int,
                        fixed_ns=(), cap_seconds: float | None = None,
                        norm_seed: int = 0) -> list:
    """Total-variation deblurring over a pixelwise-noise grid.

    One curve uses the schedule's iteration budget, plus one extra curve per
    entry of ``fixed_ns``.  Per row: corrupt the image pixelwise, blur, run
    PDPS from zero with tau = 5/L and sigma = 0.99/(5 L) for L the estimated
    norm of the stacked operator, and record the normalised distances of the
    final and the ergodic iterate plus the data corruption.  When a wall
    clock cap is given and the projected time of the next row would exceed
    it, the remaining grid is dropped and the results are flagged truncated.
    """
    deltas = _check_grid(delta_breves)
    grid, _ = make_phantom(phantom)
    xhat = grid.values
    xhat_norm = float(np.linalg.norm(xhat))
    w, h = grid.width, grid.height
    blur = GaussianBlur2D(w, h, blur_std, blur_window)
    grad = Grad2D(w, h)
    stacked = Stack(blur, grad)
    norm_k = estimate_norm(stacked, seed=norm_seed).value
    tau = 5.0 / norm_k
    sigma = 0.99 / (5.0 * norm_k)
    params = solvers.StepParams(tau=tau, sigma=sigma, lipschitz_or_norm=norm_k)
    clean = blur.apply(xhat)
    clean_norm = float(np.linalg.norm(clean))
    n_pixels = w * h

    curves = [("n_delta", None)] + [(f"fixed_{n}", int(n)) for n in fixed_ns]
    columns = ["delta_breve", "alpha", "n_iters", "dist_to_truth",
               "normalized_dist", "ergodic_dist", "ergodic_normalized_dist",
               "data_dist", "normalized_data_dist", "objective", "runtime_ms"]
    results = [SweepResult(label=label, columns=columns,
                           meta={"norm_k": norm_k, "tau": tau, "sigma": sigma,
                                 "truncated": False})
               for label, _ in curves]

    start_all = time.perf_counter()
    done_iters = 0
    for i, delta in enumerate(deltas):
        alpha = schedules.alpha_of(schedule, delta)
        budgets = [schedules.n_of(schedule, delta) if fixed is None else fixed
                   for _, fixed in curves]
        if cap_seconds is not None and i > 0:
            elapsed = time.perf_counter() - start_all
            projected = elapsed * (1.0 + sum(budgets) / max(1, done_iters))
            if projected > cap_seconds:
                for res in results:
                    res.meta["truncated"] = True
                    res.meta["truncated_at_delta_breve"] = delta
                break
        model = NoiseModel("pixelwise_then_blur", delta,
                           rng.substream_seed(seed, i))
        b, measured = generate_data(xhat, blur, model)
        spec = solvers.ProblemSpec(
            forward=blur, data=b,
            regulariser=proxmod.group_l21(alpha, group_size=2, layout="planar"),
            reg_operator=grad)

        def one_curve(j: int):
            n = budgets[j]
            t0 = time.perf_counter()
            trace = solvers.pdps(spec, params, np.zeros(n_pixels),
                                 n_iters=n, record_every=0)
            dist = float(np.linalg.norm(trace.final - xhat))
            erg = float(np.linalg.norm(trace.ergodic - xhat))
            return {
                "delta_breve": delta,
                "alpha": alpha,
                "n_iters": n,
                "dist_to_truth": dist,
                "normalized_dist": dist / xhat_norm,
                "ergodic_dist": erg,
                "ergodic_normalized_dist": erg / xhat_norm,
                "data_dist": measured,
                "normalized_data_dist": measured / clean_norm,
                "objective": solvers.objective(spec, trace.final),
                "runtime_ms": 1e3 * (time.perf_counter() - t0),
            }

        for res, row in zip(results, _run_rows(one_curve, len(curves))):
            res.rows.append(row)
        done_iters = sum(row["n_iters"] for res in results for row in res.rows)
    return results


def project_onto_segment(x, p, q) -> np.ndarray:
    """Euclidean projection of x onto the segment [p, q]."""
    x = np.asarray(x, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    d = q - p
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else float((x - p) @ d) / denom
    return p + min(1.0, max(0.0, t)) * d
