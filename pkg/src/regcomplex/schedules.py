"""Parameter choice rules: corruption level -> (alpha, gamma, N).

A :class:`Schedule` bundles three rules: the regularisation weight alpha,
the growth weight gamma (usually equal to alpha) and the iteration count N.
The iterated-log rule reproduces the deblurring experiment's choice
N = 100 + ceil(alpha^{-1} * log-composition(1/delta)); the ceiling errs
toward extra iterations since the rounding mode is otherwise free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


# ---------------------------------------------------------------- alpha rules

@dataclass(frozen=True)
class HalfDelta:
    """alpha = delta / 2."""

    def __call__(self, delta: float) -> float:
        return 0.5 * delta


@dataclass(frozen=True)
class PowerAlpha:
    """alpha = c * delta**p."""

    c: float = 1.0
    p: float = 1.0

    def __call__(self, delta: float) -> float:
        return self.c * delta**self.p


@dataclass(frozen=True)
class TableAlpha:
    """alpha looked up from an explicit {delta: alpha} table."""

    table: dict

    def __call__(self, delta: float) -> float:
        try:
            return self.table[delta]
        except KeyError:
            raise ValueError(f"no alpha tabulated for delta={delta!r}") from None


# -------------------------------------------------------------------- N rules

@dataclass(frozen=True)
class IteratedLog:
    """N = floor_n + ceil(alpha(delta)^{-1} * iterated_log(1/delta, folds))."""

    folds: int = 1000
    floor_n: int = 100


@dataclass(frozen=True)
class PowerN:
    """N = ceil(c * delta**(-q))."""

    c: float = 1.0
    q: float = 1.0


@dataclass(frozen=True)
class FixedN:
    n: int = 100


# ---------------------------------------------------------------- gamma rules

@dataclass(frozen=True)
class EqualAlpha:
    """gamma = alpha."""


@dataclass(frozen=True)
class TableGamma:
    table: dict

    def __call__(self, delta: float) -> float:
        try:
            return self.table[delta]
        except KeyError:
            raise ValueError(f"no gamma tabulated for delta={delta!r}") from None


@dataclass(frozen=True)
class Schedule:
    alpha_rule: object = field(default_factory=HalfDelta)
    n_rule: object = field(default_factory=IteratedLog)
    gamma_rule: object = field(default_factory=EqualAlpha)


def iterated_log(t: float, folds: int) -> float:
    """folds-fold composition of u -> log(1 + u) applied to t.

    Always lands in [0, t]; strictly decreasing in the fold count for
    positive t (0 is the fixed point of the map).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if folds < 1:
        raise ValueError("folds must be positive")
    u = float(t)
    for _ in range(folds):
        u = math.log1p(u)
    return u


def alpha_of(schedule: Schedule, delta: float) -> float:
    if delta <= 0:
        raise ValueError("delta must be positive")
    alpha = schedule.alpha_rule(delta)
    if alpha <= 0:
        raise ValueError(f"alpha rule produced a nonpositive value at delta={delta}")
    return float(alpha)


def gamma_of(schedule: Schedule, delta: float) -> float:
    if delta <= 0:
        raise ValueError("delta must be positive")
    rule = schedule.gamma_rule
    gamma = alpha_of(schedule, delta) if isinstance(rule, EqualAlpha) else rule(delta)
    if gamma <= 0:
        raise ValueError(f"gamma rule produced a nonpositive value at delta={delta}")
    return float(gamma)


def n_of(schedule: Schedule, delta: float) -> int:
    """Iteration budget for corruption level delta (always an integer >= 1)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    rule = schedule.n_rule
    if isinstance(rule, FixedN):
        n = rule.n
    elif isinstance(rule, PowerN):
        n = math.ceil(rule.c * delta**(-rule.q))
    elif isinstance(rule, IteratedLog):
        alpha = alpha_of(schedule, delta)
        n = rule.floor_n + math.ceil(iterated_log(1.0 / delta, rule.folds) / alpha)
    else:
        n = int(rule(delta))
    if n < 1:
        raise ValueError(f"N rule produced {n} < 1 at delta={delta}")
    return int(n)


@dataclass
class ConvergenceConditionReport:
    """The three vanishing ratios behind iterate convergence, tabulated on a
    finite grid, with a tail check standing in for the limit statement.

    Each ratio divides by min(alpha, gamma); ``*_decreasing`` flags whether
    the ratio is strictly decreasing (1e-12 slack) over the last third of
    the grid, the finite proxy for "tends to zero".
    """

    deltas: list
    alpha_sq_ratio: list
    delta_sq_ratio: list
    inv_n_ratio: list
    tail_start: int
    alpha_sq_decreasing: bool
    delta_sq_decreasing: bool
    inv_n_decreasing: bool

    @property
    def passed(self) -> bool:
        return self.alpha_sq_decreasing and self.delta_sq_decreasing and self.inv_n_decreasing

    def to_json_dict(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "alpha_sq_ratio": list(self.alpha_sq_ratio),
            "delta_sq_ratio": list(self.delta_sq_ratio),
            "inv_n_ratio": list(self.inv_n_ratio),
            "tail_start": self.tail_start,
            "alpha_sq_decreasing": self.alpha_sq_decreasing,
            "delta_sq_decreasing": self.delta_sq_decreasing,
            "inv_n_decreasing": self.inv_n_decreasing,
            "passed": self.passed,
        }


def _tail_decreasing(values, start: int, slack: float = 1e-12) -> bool:
    # strict decrease by more than the slack; a constant tail does not count
    # as tending to zero
    tail = values[start:]
    return all(b < a - slack for a, b in zip(tail, tail[1:]))


def check_convergence_conditions(schedule: Schedule, deltas) -> ConvergenceConditionReport:
    """Tabulate alpha^2, delta^2 and 1/N, each over min(alpha, gamma), on a
    strictly decreasing grid of at least three corruption levels."""
    deltas = [float(d) for d in deltas]
    if len(deltas) < 3:
        raise ValueError("need at least three grid points")
    if any(d <= 0 for d in deltas):
        raise ValueError("corruption levels must be positive")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("corruption grid must be strictly decreasing")

    r_alpha, r_delta, r_n = [], [], []
    for d in deltas:
        alpha = alpha_of(schedule, d)
        gamma = gamma_of(schedule, d)
        n = n_of(schedule, d)
        m = min(alpha, gamma)
        r_alpha.append(alpha * alpha / m)
        r_delta.append(d * d / m)
        r_n.append(1.0 / (n * m))
    # last third of the grid, but always at least one consecutive pair
    tail_start = min((2 * len(deltas)) // 3, len(deltas) - 2)
    return ConvergenceConditionReport(
        deltas=deltas,
        alpha_sq_ratio=r_alpha,
        delta_sq_ratio=r_delta,
        inv_n_ratio=r_n,
        tail_start=tail_start,
        alpha_sq_decreasing=_tail_decreasing(r_alpha, tail_start),
        delta_sq_decreasing=_tail_decreasing(r_delta, tail_start),
        inv_n_decreasing=_tail_decreasing(r_n, tail_start),
    )
