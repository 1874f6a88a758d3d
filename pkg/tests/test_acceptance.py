"""Acceptance criteria, one PASS/FAIL line each (see the summary section).

Sweeps run at 10^5 samples on one shared sample set per sweep, so every
paired comparison uses common random numbers.
"""

import time

import numpy as np
import pytest

from twrn.cli import main
from twrn.fading import FadingSpec, sample_channels
from twrn.oracle import ALLOCATORS, GridSpec, allocator_agreement, lemma3_sweep, lemma4_sweep, static_matrix
from twrn.solvers import RateRequirement, SolverConfig, pick_optimal, solve

N = 100_000
CFG = SolverConfig()
SLACK = 2 * CFG.eps_outer
SYMMETRIC_LAMBDAS = [round(0.2 + 0.1 * k, 1) for k in range(15)]
FIXED_L2_LAMBDAS = [round(0.2 + 0.1 * k, 1) for k in range(9)]
ASYMMETRIC_LAMBDAS = [round(0.1 * k, 1) for k in range(1, 10)]
LINK_SWAP_PAIRS = [(0.2, 0.6), (0.4, 0.8), (0.5, 1.0)]

_SOLVED = []


def sweep(samples, strategies, pairs):
    start = time.perf_counter()
    out = {}
    for l1, l2 in pairs:
        for s in strategies:
            sol = solve(s, RateRequirement(l1, l2), samples, CFG, strict=False)
            out[s, (l1, l2)] = sol
            _SOLVED.append(sol)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def symmetric():
    samples = sample_channels(FadingSpec(1, 1, 1, 2, n_samples=N, seed=0))
    return sweep(samples, ["PNC_SUP", "DNC_SUP", "CW_SUP"], [(l, l) for l in SYMMETRIC_LAMBDAS])


@pytest.fixture(scope="module")
def fixed_l2():
    samples = sample_channels(FadingSpec(n_samples=N, seed=0))
    return sweep(samples, ["PNC_ZP", "PNC_SUP", "DNC_TS", "DNC_SUP"], [(l, 1.0) for l in FIXED_L2_LAMBDAS])


@pytest.fixture(scope="module")
def asymmetric():
    samples = sample_channels(FadingSpec(n_samples=N, seed=0))
    return sweep(samples, ["DNC_TS", "CW_SUP", "DNC_SUP"], [(l, 1.0) for l in ASYMMETRIC_LAMBDAS])


@pytest.fixture(scope="module")
def link_swap():
    out = {}
    for means in [(1, 2), (2, 1)]:
        samples = sample_channels(FadingSpec(1, 1, *means, n_samples=N, seed=0))
        out[means], _ = sweep(samples, ["DNC_SUP", "CW_SUP"], LINK_SWAP_PAIRS)
    return out


def energy(solved, strategy, pair):
    return solved[strategy, pair].total_energy


# -- randomized and oracle suites --------------------------------------------------

def test_c1_superposition_beats_time_sharing(acceptance_line):
    r = lemma3_sweep(100_000, seed=0)
    ok = r.passed and r.seconds < 10
    acceptance_line(1, ok, f"{r.failures}/{r.trials} violations, worst slack {r.worst_slack:+.2e}, {r.seconds:.2f}s")
    assert ok, r.line()


def test_c2_superposition_beats_codeword_superposition(acceptance_line):
    r = lemma4_sweep(100_000, seed=0)
    ok = r.passed and r.seconds < 10
    acceptance_line(2, ok, f"{r.failures}/{r.trials} violations by case {r.details['failures_by_case']}, "
                           f"worst slack {r.worst_slack:+.2e}, {r.seconds:.2f}s")
    assert ok, r.line()


def test_c3_allocators_match_grid(acceptance_line):
    start = time.perf_counter()
    results = [allocator_agreement(name, 1000, seed=i, tol=1e-3, grid=GridSpec(200))
               for i, name in enumerate(ALLOCATORS)]
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in results) and elapsed < 120
    worst = max(r.worst_slack for r in results)
    acceptance_line(3, ok, f"{sum(r.failures for r in results)} failures in {len(results)}x1000, "
                           f"worst |gap| {worst:.2e}, {elapsed:.1f}s")
    assert ok, "\n".join(r.line() for r in results)


def test_c4_static_end_to_end(acceptance_line):
    r = static_matrix(tol=0.01)
    ok = r.passed and r.seconds < 60
    acceptance_line(4, ok, f"{r.trials - r.failures}/{r.trials} within 1%, worst rel err {r.worst_slack:.2e}, "
                           f"{r.seconds:.1f}s")
    assert ok, r.details["rows"]


# -- energy sweeps -------------------------------------------------------------

def test_c5a_superposition_not_above_codewords(symmetric, acceptance_line):
    solved, _ = symmetric
    margins = [(energy(solved, "DNC_SUP", (l, l)) - energy(solved, "CW_SUP", (l, l)))
               / energy(solved, "CW_SUP", (l, l)) for l in SYMMETRIC_LAMBDAS]
    ok = max(margins) <= SLACK
    acceptance_line("5a", ok, f"max (DNC_SUP-CW_SUP)/CW_SUP = {max(margins):+.2e} "
                              f"(min {min(margins):+.2e}), slack {SLACK:.0e}")
    assert ok


def test_c5b_single_crossover(symmetric, acceptance_line):
    solved, _ = symmetric
    diff = [energy(solved, "PNC_SUP", (l, l)) - energy(solved, "DNC_SUP", (l, l)) for l in SYMMETRIC_LAMBDAS]
    signs = np.sign(diff)
    flips = [i for i in range(1, len(signs)) if signs[i] != signs[i - 1]]
    at = {l: d for l, d in zip(SYMMETRIC_LAMBDAS, diff)}
    ok = (at[0.4] >= 0 and at[1.6] <= 0 and len(flips) == 1
          and 0.8 <= SYMMETRIC_LAMBDAS[flips[0] - 1] and SYMMETRIC_LAMBDAS[flips[0]] <= 1.6)
    where = f"between {SYMMETRIC_LAMBDAS[flips[0] - 1]} and {SYMMETRIC_LAMBDAS[flips[0]]}" if flips else "none"
    acceptance_line("5b", ok, f"{len(flips)} crossover(s), {where}")
    assert ok


def test_c5c_popt_is_pointwise_minimum(symmetric, acceptance_line):
    solved, elapsed = symmetric
    bad = []
    for l in SYMMETRIC_LAMBDAS:
        pair = (l, l)
        best = pick_optimal([solved["PNC_SUP", pair], solved["DNC_SUP", pair]])
        if best.total_energy != min(energy(solved, "PNC_SUP", pair), energy(solved, "DNC_SUP", pair)):
            bad.append(l)
    ok = not bad and elapsed < 15 * 60
    acceptance_line("5c", ok, f"{len(SYMMETRIC_LAMBDAS) - len(bad)}/{len(SYMMETRIC_LAMBDAS)} points, sweep {elapsed:.1f}s")
    assert ok


def test_c6a_zero_padding_flat(fixed_l2, acceptance_line):
    solved, elapsed = fixed_l2
    e = [energy(solved, "PNC_ZP", (l, 1.0)) for l in FIXED_L2_LAMBDAS]
    spread = (max(e) - min(e)) / min(e)
    ok = spread <= SLACK and elapsed < 15 * 60
    acceptance_line("6a", ok, f"PNC_ZP relative spread {spread:.1e}, sweep {elapsed:.1f}s")
    assert ok


def test_c6b_zero_padding_dominated(fixed_l2, acceptance_line):
    solved, _ = fixed_l2
    rel = [(energy(solved, "PNC_ZP", (l, 1.0)) - energy(solved, "PNC_SUP", (l, 1.0)))
           / energy(solved, "PNC_SUP", (l, 1.0)) for l in FIXED_L2_LAMBDAS]
    ok = min(rel) >= -SLACK and abs(rel[-1]) <= SLACK
    acceptance_line("6b", ok, f"PNC_ZP-PNC_SUP relative gap min {min(rel):+.1e}, at lambda1=lambda2 {rel[-1]:+.1e}")
    assert ok


def test_c6c_time_sharing_dominated(fixed_l2, acceptance_line):
    solved, _ = fixed_l2
    rel = [(energy(solved, "DNC_TS", (l, 1.0)) - energy(solved, "DNC_SUP", (l, 1.0)))
           / energy(solved, "DNC_SUP", (l, 1.0)) for l in FIXED_L2_LAMBDAS]
    ok = min(rel) >= -SLACK
    acceptance_line("6c", ok, f"DNC_TS-DNC_SUP relative gap min {min(rel):+.1e}")
    assert ok


def test_c6d_time_sharing_gap_shrinks(fixed_l2, acceptance_line):
    solved, _ = fixed_l2
    gap = [energy(solved, "DNC_TS", (l, 1.0)) - energy(solved, "DNC_SUP", (l, 1.0)) for l in FIXED_L2_LAMBDAS]
    ok = all(b <= a + SLACK * energy(solved, "DNC_SUP", (l, 1.0))
             for a, b, l in zip(gap, gap[1:], FIXED_L2_LAMBDAS[1:]))
    acceptance_line("6d", ok, "DNC_TS-DNC_SUP gap over lambda1 " + " ".join(f"{g:.3f}" for g in gap))
    assert ok


def test_c7_asymmetric_ordering(asymmetric, acceptance_line):
    solved, elapsed = asymmetric
    bad = []
    for l in ASYMMETRIC_LAMBDAS:
        ts, cw, sup = (energy(solved, s, (l, 1.0)) for s in ("DNC_TS", "CW_SUP", "DNC_SUP"))
        if not (ts >= cw * (1 - SLACK) and cw >= sup * (1 - SLACK)):
            bad.append(l)
    ok = not bad
    acceptance_line(7, ok, f"DNC_TS >= CW_SUP >= DNC_SUP at {len(ASYMMETRIC_LAMBDAS) - len(bad)}/{len(ASYMMETRIC_LAMBDAS)} "
                           f"points (lambda2=1), {elapsed:.1f}s")
    assert ok, bad


def test_c8_stronger_link_to_s2_helps(link_swap, acceptance_line):
    rows = []
    for s in ("DNC_SUP", "CW_SUP"):
        for pair in LINK_SWAP_PAIRS:
            rows.append((s, pair, energy(link_swap[1, 2], s, pair), energy(link_swap[2, 1], s, pair)))
    ok = all(a < b for *_, a, b in rows)
    worst = max(rows, key=lambda r: r[2] / r[3])
    acceptance_line(8, ok, f"E(1,2) < E(2,1) at {sum(a < b for *_, a, b in rows)}/{len(rows)} points; "
                           f"{worst[0]} {worst[1]}: {worst[2]:.4f} vs {worst[3]:.4f}")
    assert ok


def test_c9_kkt_certificates(symmetric, fixed_l2, asymmetric, link_swap, acceptance_line):
    bad, worst_kkt, worst_rate = 0, 0.0, 0.0
    converged = [s for s in _SOLVED if s.converged]
    for sol in converged:
        kkt = max(sol.kkt_residuals.values())
        rate = max(abs(sol.fractions[k.split(".")[0]] * sol.avg_rates[k] - load) / load
                   for k, load in sol.loads.items() if load > 0)
        worst_kkt, worst_rate = max(worst_kkt, kkt), max(worst_rate, rate)
        if not (kkt < CFG.eps_outer and 1 - CFG.eps_outer <= sol.fraction_sum <= 1 and rate <= CFG.eps_outer):
            bad += 1
    ok = bad == 0 and len(converged) == len(_SOLVED)
    acceptance_line(9, ok, f"{len(converged)}/{len(_SOLVED)} converged, {bad} certificate failures, "
                           f"worst KKT {worst_kkt:.1e}, worst rate err {worst_rate:.1e}")
    assert ok


def test_c10_sweep_is_byte_identical(tmp_path, acceptance_line):
    from pathlib import Path
    conf = Path(__file__).resolve().parents[1] / "configs" / "symmetric_sweep.conf"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    codes = [main(["sweep", "--config", str(conf), "--output", str(p)]) for p in (a, b)]
    ok = codes == [0, 0] and a.read_bytes() == b.read_bytes()
    acceptance_line(10, ok, f"exit codes {codes}, {len(a.read_bytes())} bytes, identical={a.read_bytes() == b.read_bytes()}")
    assert ok
