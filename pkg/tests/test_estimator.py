import math
from fractions import Fraction

import numpy as np
import pytest

from moranfp.engine import RES_EXTINCTION, RES_FIXATION, RES_THRESHOLD, lcm_upto, threshold_scaled
from moranfp.estimator import (
    FAILURE,
    early_termination_witness,
    estimate_fixation,
    fpras_params,
    least_power_at_least,
    mean_absorption_time,
    monte_carlo_fixation,
    threshold_runs,
)
from moranfp.exact import absorption_time_exact, fixation_probability_exact
from moranfp.families import complete, cycle, double_star
from moranfp.graph import Graph


def test_params_c30():
    p = fpras_params(cycle(30).graph, 2, Fraction(1, 2))
    assert (p.N, p.P_prime, p.P) == (288, 11, 11)
    assert p.T == p.N * 2 * 2 * (p.P + 1) * 2 / 1
    assert p.T_cap == math.floor(27 * p.T)


def test_params_k2():
    p = fpras_params(complete(2).graph, 2, Fraction(1, 2))
    assert p.P == 2 and p.P_prime > 2


def test_params_fractional_potential():
    p = fpras_params(cycle(5).graph, 2, Fraction(1, 5))
    assert p.P == Fraction(5, 2)


@pytest.mark.parametrize("r,eps", [(2, 1), (2, 0), (1, Fraction(1, 2)), (Fraction(1, 2), Fraction(1, 2))])
def test_params_errors(r, eps):
    with pytest.raises(ValueError):
        fpras_params(cycle(5).graph, r, eps)


def test_least_power():
    assert least_power_at_least(2, 1728) == 11
    assert least_power_at_least(Fraction(3, 2), 1) == 0
    assert least_power_at_least(Fraction(3, 2), 2) == 2
    assert least_power_at_least(2.0, 1728) >= 11


def test_shortcuts():
    single = Graph.from_lists([[]])
    assert estimate_fixation(single, 2, Fraction(1, 5)).value == 1.0
    split = Graph.from_edges(4, [(1, 2), (3, 4)])
    est = estimate_fixation(split, 2, Fraction(1, 5))
    assert est.value == 0.0 and est.shortcut == "disconnected"


def test_estimate_consistency():
    g = double_star(3).graph
    est = estimate_fixation(g, 2, Fraction(1, 5), seed=3)
    assert not est.capped
    assert 0 <= est.value <= 1
    assert est.value == est.runs_fixated / est.params.N
    assert len(est.attempts) == 3
    assert est == estimate_fixation(g, 2, Fraction(1, 5), seed=3)


def test_estimate_close_to_exact():
    g = cycle(5).graph
    exact = fixation_probability_exact(g, 2).value
    est = estimate_fixation(g, 2, Fraction(1, 5), seed=11)
    assert abs(est.value - exact) <= exact / 5


def test_estimate_jobs_invariant():
    g = cycle(12).graph
    a = estimate_fixation(g, 2, Fraction(1, 4), seed=5, jobs=1)
    b = estimate_fixation(g, 2, Fraction(1, 4), seed=5, jobs=2)
    assert a == b


def test_threshold_runs_stop_condition():
    g = cycle(30).graph
    res, steps, phis, lcm = threshold_runs(g, 2, 6, 500, seed=2)
    thr = threshold_scaled(6, lcm.D)
    assert set(res.tolist()) <= {RES_EXTINCTION, RES_THRESHOLD}
    assert np.all((phis == 0) == (res == RES_EXTINCTION))
    assert np.all(phis[res == RES_THRESHOLD] >= thr)


def test_threshold_at_full_potential_reports_fixation():
    g = complete(3).graph
    res, _, _, _ = threshold_runs(g, 2, Fraction(3, 2), 200, seed=1)
    assert set(res.tolist()) <= {RES_EXTINCTION, RES_FIXATION}


def test_monte_carlo_neutral():
    mc = monte_carlo_fixation(cycle(5).graph, 1, 20000, seed=4)
    assert abs(mc.value - 0.2) <= 3 * math.sqrt(0.16 / 20000)
    assert mc.ci_low <= mc.value <= mc.ci_high


def test_monte_carlo_d3():
    g = double_star(3).graph
    exact = fixation_probability_exact(g, 2).value
    mc = monte_carlo_fixation(g, 2, 10000, seed=8)
    assert abs(mc.value - exact) <= 3 * math.sqrt(exact * (1 - exact) / 10000)


def test_monte_carlo_errors():
    with pytest.raises(ValueError):
        monte_carlo_fixation(cycle(5).graph, 2, 0)
    with pytest.raises(ValueError):
        monte_carlo_fixation(Graph.from_lists([[]]), 2, 10)


def test_absorption_k2():
    t = mean_absorption_time(complete(2).graph, 3, 500, seed=1)
    assert t.mean == 1 and t.stderr == 0


def test_absorption_c3_neutral():
    t = mean_absorption_time(cycle(3).graph, 1, 20000, seed=6)
    want = absorption_time_exact(cycle(3).graph, 1).value
    assert abs(t.mean - want) <= 3 * t.stderr


def test_absorption_d4():
    g = double_star(4).graph
    t = mean_absorption_time(g, 2, 5000, seed=2)
    want = absorption_time_exact(g, 2).value
    assert abs(t.mean - want) <= 3 * t.stderr


def test_witness_counts():
    w = early_termination_witness(cycle(5).graph, 2, 1, 300, seed=1)
    assert 0 < w.reached <= 300
    assert w.extinct_after <= w.reached
    assert 0 <= w.fraction <= 1


def test_overrun_gives_failure():
    # a budget far below what N runs need: every attempt overruns
    from moranfp import estimator

    g = cycle(10).graph
    p = fpras_params(g, 2, Fraction(1, 5))
    tight = estimator.FprasParams(p.r, p.eps, p.N, p.P, p.P_prime, p.T, 10, p.delta, p.avg_degree)
    att = estimator._attempt(g, tight, seed=0, attempt=0, jobs=1)
    assert att.overrun and att.value == FAILURE and att.active_steps == 11


def test_lcm_used_for_threshold():
    assert threshold_scaled(Fraction(7, 2), lcm_upto(4).D) == 42
