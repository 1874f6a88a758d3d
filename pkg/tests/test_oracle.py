import math

import numpy as np
import pytest

from twrn import alloc, oracle
from twrn.alloc import LOG2E
from twrn.fading import ChannelSample
from twrn.oracle import (
    CheckResult,
    GridSpec,
    allocator_agreement,
    lemma3_check,
    lemma3_sweep,
    lemma4_check,
    lemma4_sweep,
    pointwise_grid_min,
    static_strategy_grid,
)


def test_grid_min_waterfill():
    value, (r,) = pointwise_grid_min("p2p_waterfill", (2 / LOG2E,), (1.0,))
    assert value == pytest.approx(1.0 - 2 / LOG2E, abs=1e-6)
    assert r == pytest.approx(1.0, abs=1e-3)


def test_grid_min_pnc_floors_at_silence():
    value, r = pointwise_grid_min("pnc_uplink", (3 / LOG2E,), (1.0, 1.0))
    assert value == 0.0 and r[0] == 0.0


def test_grid_respects_explicit_bounds():
    value, (r,) = pointwise_grid_min("p2p_waterfill", (2 / LOG2E,), (1.0,),
                                     GridSpec(upper_bounds=(0.5,)))
    assert r <= 0.5 + 1e-12
    assert value > 1.0 - 2 / LOG2E


def test_unknown_allocator():
    with pytest.raises(ValueError):
        pointwise_grid_min("nope", (1.0,), (1.0,))


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(points_per_axis=1)


# -- lemma checks ---------------------------------------------------------------

def test_lemma3_equal_gains_equal_rates_is_tight():
    s = ChannelSample(1.0, 1.0, 2.0, 2.0)
    e_ts, e5, holds = lemma3_check(s, 0.3, 0.2, 1.5, 1.5)
    assert holds and e5 == pytest.approx(e_ts, rel=1e-12)


def test_lemma3_strict_when_rates_differ():
    s = ChannelSample(1.0, 1.0, 3.0, 1.0)
    e_ts, e5, holds = lemma3_check(s, 0.4, 0.3, 1.0, 2.5)
    assert holds and e5 < e_ts


def test_lemma3_vectorized_matches_scalar():
    s = ChannelSample(1.0, 1.0, np.array([0.5, 4.0]), np.array([2.0, 0.3]))
    e_ts, e5, holds = lemma3_check(s, [0.2, 0.6], [0.5, 0.1], [1.0, 3.0], [2.0, 0.5])
    for k in range(2):
        one = lemma3_check(ChannelSample(1.0, 1.0, s.g_r1[k], s.g_r2[k]),
                           [0.2, 0.6][k], [0.5, 0.1][k], [1.0, 3.0][k], [2.0, 0.5][k])
        assert one[0] == pytest.approx(e_ts[k]) and one[1] == pytest.approx(e5[k])


def test_lemma3_sweep_small():
    res = lemma3_sweep(trials=5000, seed=1)
    assert res.passed, res.line()
    assert res.worst_slack <= 0


@pytest.mark.parametrize("g1, g2, r1, r2, case", [
    (3.0, 1.0, 2.0, 1.0, 1),
    (3.0, 1.0, 1.0, 2.0, 2),
    (1.0, 3.0, 2.0, 1.0, 3),
    (1.0, 3.0, 1.0, 2.0, 4),
])
def test_lemma4_case_labels(g1, g2, r1, r2, case):
    assert lemma4_check(g1, g2, r1, r2)[3] == case


def test_lemma4_equal_rates_and_gains():
    e6, e5, holds, _ = lemma4_check(2.0, 2.0, 1.0, 1.0)
    # both receivers decode the same common stream
    assert holds
    assert e5 == pytest.approx(0.5) and e6 == pytest.approx(1.0)


def test_lemma4_sweep_reports_per_case_breakdown():
    res = lemma4_sweep(trials=4000, seed=2)
    by_case = res.details["failures_by_case"]
    counts = res.details["trials_by_case"]
    assert sum(counts.values()) == 4000
    assert sum(by_case.values()) == res.failures
    # the weaker-S1, larger-S2-rate case is where the construction breaks down
    assert by_case[4] > 0


def test_lemma4_case4_counterexample():
    e6, e5, holds, case = lemma4_check(0.5, 4.0, 0.5, 3.0)
    assert case == 4 and not holds
    assert e5 > e6


# -- allocator agreement --------------------------------------------------------

@pytest.mark.parametrize("name", sorted(oracle.ALLOCATORS))
def test_allocators_agree_with_grid(name):
    res = allocator_agreement(name, trials=60, seed=5)
    assert res.passed, res.line()


def _unclamped_waterfill(beta, g):
    good = alloc.p2p_waterfill(beta, g)
    # drops the max(0, .) clamp: negative power below the cutoff
    p = beta * LOG2E - 1.0 / g
    r = math.log2(beta * LOG2E * g) if beta > 0 else -math.inf
    return alloc.ModeAllocation({"P": p}, {"R": r}, p - beta * r) if p < 0 else good


def test_fault_injection_is_caught():
    res = allocator_agreement("p2p_waterfill", trials=200, seed=0, allocator=_unclamped_waterfill)
    assert not res.passed
    assert res.failures > 0


def test_check_result_zero_trials_is_not_a_pass():
    r = CheckResult("empty", 0, 0, 0.0, 0.0)
    assert not r.passed
    assert r.line().startswith("FAIL")
    assert CheckResult("ok", 3, 0, -1.0, 0.1).line().startswith("PASS")


# -- static end-to-end ----------------------------------------------------------

def test_static_grid_beats_even_split():
    g = ChannelSample(1.0, 1.0, 1.0, 1.0)
    e = static_strategy_grid("PNC_SUP", 0.5, 0.5, g)
    # uplink PNC then common-only broadcast, each for half the time
    half = 0.5 * (2 * (2 ** (0.5 / 0.5) - 0.5)) + 0.5 * (2 ** (0.5 / 0.5) - 1)
    assert 0 < e <= half


def test_static_grid_swaps_to_canonical_order():
    a = static_strategy_grid("DNC_SUP", 0.6, 0.3, (1.0, 1.0, 2.0, 1.0))
    b = static_strategy_grid("DNC_SUP", 0.3, 0.6, (1.0, 1.0, 1.0, 2.0))
    assert a == pytest.approx(b, rel=1e-9)


def test_static_grid_zero_demand():
    assert static_strategy_grid("CW_SUP", 0.0, 0.0, (1.0, 1.0, 1.0, 1.0)) == 0.0
