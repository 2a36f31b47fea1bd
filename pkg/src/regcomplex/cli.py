"""Command line front end.

Dispatches the experiment sweeps and the condition checkers, writes
RFC-4180 CSV (17 significant digits, so doubles round-trip) plus a JSON
sidecar holding the resolved configuration, the library version, the
kernel backend and the measured corruption levels.  Re-running with
``--config <sidecar>`` reproduces the CSV byte for byte on the same
backend.

Exit codes: 0 on success (including advisory condition checks that merely
report failure), 2 when a verified error bound is violated, 1 on
operational errors such as bad flags or unreadable files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, diagnostics, experiments, schedules
from ._kernels import BACKEND
from .linop import Dense
from .prox import l1, squared_norm
from .rng import Xorshift64Star

EXPERIMENTS = ("tikhonov", "lasso", "tv-deblur", "check-source",
               "check-subreg", "check-fidelity")

_DEFAULTS = {
    "tikhonov": {"delta-grid": "1e-1,5e-2,1e-2,5e-3,1e-3,5e-4",
                 "alpha-rule": "power:1:1", "size": "10x10"},
    "lasso": {"delta-grid": "1e-1,1e-2,1e-3,1e-4",
              "alpha-rule": "power:1:1", "n-rule": "power:1:1.5"},
    "tv-deblur": {"alpha-rule": "half-delta", "size": "64x64",
                  "curves": "iterated-log,fixed:100,fixed:1000"},
}

_KNOWN_KEYS = ("experiment", "seed", "size", "image", "delta-grid",
               "paper-grid", "alpha-rule", "n-rule", "curves", "out",
               "report", "cap-seconds")


class ConfigError(ValueError):
    pass


def _parse_alpha_rule(text: str):
    if text == "half-delta":
        return schedules.HalfDelta()
    if text.startswith("power:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"alpha rule {text!r} needs the form power:c:p")
        return schedules.PowerAlpha(float(parts[1]), float(parts[2]))
    raise ConfigError(f"unknown alpha rule {text!r}")


def _parse_n_rule(text: str):
    if text == "iterated-log":
        return schedules.IteratedLog()
    if text.startswith("fixed:"):
        return schedules.FixedN(int(text.split(":")[1]))
    if text.startswith("power:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"N rule {text!r} needs the form power:c:q")
        return schedules.PowerN(float(parts[1]), float(parts[2]))
    raise ConfigError(f"unknown N rule {text!r}")


def _parse_grid(text: str) -> list:
    try:
        grid = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"malformed corruption grid {text!r}") from None
    if not grid:
        raise ConfigError("empty corruption grid")
    if any(d <= 0 for d in grid):
        raise ConfigError("corruption levels must be positive")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"corruption grid must be strictly decreasing: {text!r}")
    return grid


def _parse_size(text: str):
    try:
        if "x" in text.lower():
            w, h = text.lower().split("x")
            return int(w), int(h)
        n = int(text)
        return n, n
    except ValueError:
        raise ConfigError(f"size must look like 64x64 (or a single number), "
                          f"got {text!r}") from None


PAPER_GRID = ",".join(
    f"{f * 10.0 ** (-p):.0e}".replace("e-0", "e-").replace("e+00", "")
    for p in range(0, 9) for f in (1, 0.5)
)


class RunConfig:
    """Resolved flat configuration; ``to_flat_dict`` round-trips through the
    sidecar and the key=value config file format."""

    def __init__(self, values: dict):
        self.values = values
        self.experiment = values["experiment"]
        self.seed = int(values.get("seed", "0"))
        self.out = values.get("out")
        self.report = values.get("report")
        cap = values.get("cap-seconds")
        self.cap_seconds = float(cap) if cap else None
        if self.experiment in ("tikhonov", "lasso", "tv-deblur") and not self.out:
            raise ConfigError(f"{self.experiment} needs --out for its CSV")
        if self.experiment.startswith("check-") and not self.report:
            raise ConfigError(f"{self.experiment} needs --report for its JSON report")
        if "delta-grid" in values:
            self.delta_grid = _parse_grid(values["delta-grid"])
        if "alpha-rule" in values:
            self.alpha_rule = _parse_alpha_rule(values["alpha-rule"])
        if "n-rule" in values:
            self.n_rule = _parse_n_rule(values["n-rule"])
        if "size" in values:
            self.size = _parse_size(values["size"])
        self.image = values.get("image")
        self.curves = [c for c in values.get("curves", "").split(",") if c] or None

    def to_flat_dict(self) -> dict:
        return dict(self.values)


def parse_config(argv) -> RunConfig:
    """Merge flags over the optional config file over per-experiment
    defaults; unknown config keys are an error."""
    parser = argparse.ArgumentParser(
        prog="regcomplex",
        description="Regularisation sweeps and theory checkers for linear "
                    "inverse problems.",
        epilog="Config files are flat key=value lines (or a sidecar JSON); "
               "flags override file values. REGCOMPLEX_THREADS caps row "
               "parallelism, REGCOMPLEX_BACKEND picks the kernel backend.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="key=value file or a sidecar JSON")
    parser.add_argument("--seed", type=int, help="base seed (default 0)")
    parser.add_argument("--size", help="grid WxH (image experiments) or "
                                       "matrix MxN (tikhonov), e.g. 64x64")
    parser.add_argument("--image", help="PGM file to use as the ground truth")
    parser.add_argument("--delta-grid", dest="delta_grid",
                        help="comma list of corruption levels, strictly decreasing")
    parser.add_argument("--paper-grid", action="store_true",
                        help="use the full grid {1,0.5}x10^{-p}, p=0..8")
    parser.add_argument("--alpha-rule", dest="alpha_rule",
                        help="half-delta or power:c:p")
    parser.add_argument("--n-rule", dest="n_rule",
                        help="iterated-log, power:c:q or fixed:N")
    parser.add_argument("--curve", action="append", dest="curves",
                        help="tv-deblur curve N rule; repeatable")
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--report", help="JSON report path")
    parser.add_argument("--cap-seconds", dest="cap_seconds", type=float,
                        help="wall clock cap; sweeps truncate their grid")
    args = parser.parse_args(argv)

    values = dict(_DEFAULTS.get(args.experiment, {}))
    values["experiment"] = args.experiment
    if args.config:
        file_values = _read_config_file(args.config)
        unknown = sorted(set(file_values) - set(_KNOWN_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if file_values.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(
                f"config file is for {file_values['experiment']!r}, "
                f"not {args.experiment!r}")
        values.update(file_values)

    if args.curves and args.n_rule:
        raise ConfigError("--n-rule conflicts with --curve; curves carry "
                          "their own N rules")
    flag_values = {
        "seed": args.seed, "size": args.size, "image": args.image,
        "delta-grid": args.delta_grid, "alpha-rule": args.alpha_rule,
        "n-rule": args.n_rule, "out": args.out, "report": args.report,
        "cap-seconds": args.cap_seconds,
        "curves": ",".join(args.curves) if args.curves else None,
    }
    for key, val in flag_values.items():
        if val is not None:
            values[key] = str(val)
    if args.paper_grid:
        values["delta-grid"] = PAPER_GRID
    elif args.experiment == "tv-deblur" and "delta-grid" not in values:
        values["delta-grid"] = ",".join(
            f"{f * 10.0 ** (-p):g}" for p in range(0, 6) for f in (1, 0.5))
    values.setdefault("seed", "0")
    return RunConfig(values)


def _read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        flat = payload.get("config", payload)
        return {str(k): str(v) for k, v in flat.items()}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _format_cell(value) -> str:
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: str, results, curve_column: bool):
    """RFC-4180 CSV (CRLF, header row) with 17-significant-digit floats.

    Wall-clock columns stay out of the CSV so that re-running a recorded
    configuration reproduces the file byte for byte; per-curve totals go to
    the sidecar instead.
    """
    first = results[0]
    columns = [c for c in first.columns if c != "runtime_ms"]
    header = (["curve"] if curve_column else []) + columns
    lines = [",".join(header)]
    for res in results:
        for row in res.rows:
            cells = ([res.label] if curve_column else []) + [
                _format_cell(row[c]) for c in columns]
            lines.append(",".join(cells))
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\r\n".join(lines) + "\r\n")


def _write_sidecar(config: RunConfig, results, checks_passed: bool):
    sidecar = {
        "config": config.to_flat_dict(),
        "version": __version__,
        "backend": BACKEND,
        "error_bounds_hold": checks_passed,
        "truncated": any(res.meta.get("truncated", False) for res in results),
        "measured_deltas": sorted(
            {row[k] for res in results for row in res.rows
             for k in ("delta_measured", "data_dist") if k in row},
            reverse=True),
    }
    for res in results:
        extra = {k: v for k, v in res.meta.items() if not isinstance(v, dict)}
        extra["runtime_ms_total"] = round(sum(row.get("runtime_ms", 0.0)
                                              for row in res.rows), 3)
        sidecar.setdefault("meta", {})[res.label] = extra
    with open(config.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _lasso_toy():
    """The two-variable toy with solution segment from (1,0) to (0,1)."""
    a = Dense([[1.0, 1.0]])
    xhat = np.array([1.0, 0.0])

    def projector(x):
        return experiments.project_onto_segment(
            x, np.array([1.0, 0.0]), np.array([0.0, 1.0]))

    return a, xhat, projector


def _run_tikhonov(config: RunConfig) -> int:
    m, n = config.size
    gen = Xorshift64Star(config.seed)
    a = Dense(gen.normals(m * n).reshape(m, n))
    xhat = a.adjoint_apply(gen.normals(m))
    schedule = schedules.Schedule(alpha_rule=config.alpha_rule)
    result = experiments.run_tikhonov_sweep(a, xhat, schedule,
                                            config.delta_grid, config.seed)
    write_csv(config.out, [result], curve_column=False)
    _write_sidecar(config, [result], result.all_bounds_hold)
    return 0 if result.all_bounds_hold else 2


def _run_lasso(config: RunConfig) -> int:
    a, xhat, projector = _lasso_toy()
    schedule = schedules.Schedule(alpha_rule=config.alpha_rule,
                                  n_rule=config.n_rule)
    result = experiments.run_lasso_sweep(a, xhat, schedule, config.delta_grid,
                                         config.seed, projector)
    write_csv(config.out, [result], curve_column=False)
    _write_sidecar(config, [result], result.all_bounds_hold)
    if config.report:
        report = result.meta.get("convergence_conditions",
                                 {"passed": None, "note": "grid too short"})
        with open(config.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if result.all_bounds_hold else 2


def _run_tv_deblur(config: RunConfig) -> int:
    if config.image:
        import os

        if not os.path.exists(config.image):
            raise ConfigError(f"image file not found: {config.image}")
        phantom = experiments.Phantom("pgm", 0, 0, path=config.image)
    else:
        w, h = config.size
        phantom = experiments.Phantom("disk", w, h)
    curve_specs = config.curves or ["iterated-log", "fixed:100", "fixed:1000"]
    schedule_curves = [c for c in curve_specs if c == "iterated-log"]
    if len(schedule_curves) > 1:
        raise ConfigError("at most one iterated-log curve")
    fixed_ns = []
    for c in curve_specs:
        if c == "iterated-log":
            continue
        rule = _parse_n_rule(c)
        if not isinstance(rule, schedules.FixedN):
            raise ConfigError(f"tv-deblur curves must be iterated-log or "
                              f"fixed:N, got {c!r}")
        fixed_ns.append(rule.n)
    if not schedule_curves:
        raise ConfigError("tv-deblur needs the iterated-log curve")
    schedule = schedules.Schedule(alpha_rule=config.alpha_rule,
                                  n_rule=schedules.IteratedLog())
    results = experiments.run_tv_deblur_sweep(
        phantom, blur_std=2.0, blur_window=7, schedule=schedule,
        delta_breves=config.delta_grid, seed=config.seed, fixed_ns=fixed_ns,
        cap_seconds=config.cap_seconds)
    write_csv(config.out, results, curve_column=True)
    _write_sidecar(config, results, True)
    return 0


def _run_check_source(config: RunConfig) -> int:
    toys = {
        "identity_pair": (Dense(np.eye(2)), np.array([1.0, -2.0])),
        "row_sum_sparse": (Dense([[1.0, 1.0]]), np.array([1.0, 0.0])),
        "row_sum_infeasible": (Dense([[1.0, 1.0]]), np.array([1.0, -1.0])),
    }
    report = {}
    for name, (a, xhat) in toys.items():
        cert = diagnostics.find_l1_certificate(a, xhat, tol=1e-10)
        entry = cert.to_json_dict()
        if cert.found:
            strict, z_set = diagnostics.strict_complementarity(
                xhat, cert.d, tol=1e-6)
            entry["strictly_complementary"] = strict
            entry["strict_zero_set"] = sorted(z_set)
        report[name] = entry
    with open(config.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _run_check_subreg(config: RunConfig) -> int:
    alpha = 0.05
    radius = 0.05
    # positive control: strictly complementary instance
    a_pos = Dense([[1.0, 0.0]])
    xhat_pos = np.array([1.0, 0.0])
    d_pos = np.array([1.0, 0.5])
    gamma = diagnostics.lasso_admissible_gamma(a_pos, xhat_pos, d_pos,
                                               radius, alpha)
    positive = diagnostics.check_strong_subdiff_sampled(
        a_pos, l1(1.0), xhat_pos, d_pos, alpha=alpha, gamma=gamma,
        gamma_delta=alpha, radius=radius, n_samples=500, seed=config.seed)
    # negative control: certificate entry on the boundary
    a_neg = Dense([[1.0, 1.0]])
    xhat_neg = np.array([1.0, 0.0])
    d_neg = np.array([1.0, 1.0])
    t = 0.5 * radius
    negative = diagnostics.check_strong_subdiff_sampled(
        a_neg, l1(1.0), xhat_neg, d_neg, alpha=alpha, gamma=0.25,
        gamma_delta=alpha, radius=radius, n_samples=500, seed=config.seed,
        extra_points=[xhat_neg + np.array([-t, t])])
    report = {
        "positive_control": positive.to_json_dict() | {"gamma_used": gamma},
        "negative_control": negative.to_json_dict(),
        "as_expected": positive.passed and not negative.passed,
    }
    with open(config.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _run_check_fidelity(config: RunConfig) -> int:
    quad = squared_norm(1.0)
    good = diagnostics.check_fidelity_conditions(
        quad, p=2.0, c=3.0, n_pairs=10000, seed=config.seed, q=2.0,
        c_prime=0.5)
    bad = diagnostics.check_fidelity_conditions(
        quad, p=2.0, c=1.0, n_pairs=10000, seed=config.seed)
    report = {
        "quadratic_c3_p2": good.to_json_dict(),
        "quadratic_c1_counterexample": bad.to_json_dict(),
        "as_expected": good.passed and bad.counterexample_found,
    }
    with open(config.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def run(config: RunConfig) -> int:
    """Dispatch a parsed configuration; returns the process exit code."""
    runner = {
        "tikhonov": _run_tikhonov,
        "lasso": _run_lasso,
        "tv-deblur": _run_tv_deblur,
        "check-source": _run_check_source,
        "check-subreg": _run_check_subreg,
        "check-fidelity": _run_check_fidelity,
    }[config.experiment]
    return runner(config)


def main(argv=None) -> int:
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
        return run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
