import math

import pytest

from regcomplex.schedules import (EqualAlpha, FixedN, HalfDelta, IteratedLog,
                                  PowerAlpha, PowerN, Schedule, TableAlpha,
                                  alpha_of, check_convergence_conditions,
                                  gamma_of, iterated_log, n_of)


def test_half_delta_rule():
    sched = Schedule(alpha_rule=HalfDelta())
    assert alpha_of(sched, 1.0) == 0.5
    assert alpha_of(sched, 1e-4) == 5e-5


def test_power_rule():
    assert alpha_of(Schedule(alpha_rule=PowerAlpha(1, 1)), 0.01) == 0.01
    assert alpha_of(Schedule(alpha_rule=PowerAlpha(2, 0.5)), 0.25) == 1.0


def test_table_rule_and_missing_entry():
    sched = Schedule(alpha_rule=TableAlpha({0.1: 0.3}))
    assert alpha_of(sched, 0.1) == 0.3
    with pytest.raises(ValueError, match="tabulated"):
        alpha_of(sched, 0.2)


def test_nonpositive_delta_rejected():
    with pytest.raises(ValueError, match="positive"):
        alpha_of(Schedule(), 0.0)
    with pytest.raises(ValueError, match="positive"):
        n_of(Schedule(), -1.0)


def test_gamma_defaults_to_alpha():
    sched = Schedule(alpha_rule=HalfDelta(), gamma_rule=EqualAlpha())
    assert gamma_of(sched, 0.2) == alpha_of(sched, 0.2)


# ------------------------------------------------------------- iterated log

def test_iterated_log_fixed_point_at_zero():
    assert iterated_log(0.0, 1) == 0.0
    assert iterated_log(0.0, 1000) == 0.0


def test_iterated_log_single_fold():
    assert abs(iterated_log(1.0, 1) - math.log(2.0)) < 1e-15


def test_iterated_log_thousand_folds_matches_two_over_k_law():
    val = iterated_log(1.0, 1000)
    approx = 2.0 / (1000 + 2.0 / 1.0)
    assert abs(val - approx) / val < 0.1
    assert 0.0 < val < 1.0


def test_iterated_log_strictly_decreasing_in_folds():
    prev = iterated_log(3.0, 1)
    for folds in (2, 5, 10, 100, 1000):
        cur = iterated_log(3.0, folds)
        assert cur < prev
        prev = cur


# ----------------------------------------------------------------------- n

def test_fixed_n():
    assert n_of(Schedule(n_rule=FixedN(100)), 1e-3) == 100
    assert n_of(Schedule(n_rule=FixedN(100)), 1.0) == 100


def test_power_n_ceiling():
    assert n_of(Schedule(n_rule=PowerN(1, 1.5)), 0.01) == 1000
    assert n_of(Schedule(n_rule=PowerN(1, 1.5)), 0.5) == math.ceil(0.5**-1.5)


def test_iterated_log_n_small_delta_example():
    sched = Schedule(alpha_rule=HalfDelta(), n_rule=IteratedLog())
    # alpha = 0.5 so the correction is ceil(2 * iterated_log(1, 1000)) = 1
    assert n_of(sched, 1.0) == 100 + math.ceil(2.0 * iterated_log(1.0, 1000))
    assert n_of(sched, 1.0) == 101


def test_iterated_log_n_nondecreasing_on_grid():
    sched = Schedule(alpha_rule=HalfDelta(), n_rule=IteratedLog())
    grid = [1.0, 0.5, 0.1, 0.05, 0.01, 1e-3, 1e-4]
    ns = [n_of(sched, d) for d in grid]
    assert all(b >= a for a, b in zip(ns, ns[1:]))
    assert all(n >= 100 for n in ns)


# ------------------------------------------------------ convergence report

def test_convergence_conditions_pass_case():
    sched = Schedule(alpha_rule=PowerAlpha(1, 1), n_rule=PowerN(1, 1.5))
    grid = [10.0**-k for k in range(1, 6)]
    report = check_convergence_conditions(sched, grid)
    assert report.passed
    assert report.alpha_sq_decreasing
    assert report.delta_sq_decreasing
    assert report.inv_n_decreasing
    assert report.to_json_dict()["passed"] is True


def test_convergence_conditions_fixed_n_fails():
    sched = Schedule(alpha_rule=PowerAlpha(1, 1), n_rule=FixedN(100))
    report = check_convergence_conditions(sched, [10.0**-k for k in range(1, 6)])
    # 1/(N alpha) grows as alpha shrinks
    assert not report.inv_n_decreasing
    assert not report.passed


def test_convergence_conditions_quadratic_alpha_fails():
    sched = Schedule(alpha_rule=PowerAlpha(1, 2), n_rule=PowerN(1, 3))
    report = check_convergence_conditions(sched, [10.0**-k for k in range(1, 6)])
    # delta^2 / alpha is constant on this schedule
    assert not report.delta_sq_decreasing
    assert not report.passed


def test_convergence_conditions_validation():
    sched = Schedule()
    with pytest.raises(ValueError, match="three"):
        check_convergence_conditions(sched, [0.1, 0.01])
    with pytest.raises(ValueError, match="decreasing"):
        check_convergence_conditions(sched, [0.1, 0.2, 0.01])


def test_acceptance_lasso_schedule_passes_check():
    sched = Schedule(alpha_rule=PowerAlpha(1, 1), n_rule=PowerN(1, 1.5))
    report = check_convergence_conditions(sched, [1e-1, 1e-2, 1e-3, 1e-4])
    assert report.passed
