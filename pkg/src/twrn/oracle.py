"""Brute-force verifiers for the allocators, the solvers and the dominance lemmas.

Nothing here uses a closed-form optimum. Pointwise checks search a grid of
rate tuples and map each tuple to power with the forward power formulas;
static checks search a grid of time fractions and invert the static rate
formulas exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import alloc
from .alloc import LOG2E, bc_superposition_power
from .fading import ChannelSample

__all__ = [
    "GridSpec",
    "CheckResult",
    "pointwise_grid_min",
    "static_strategy_grid",
    "lemma3_check",
    "lemma4_check",
    "ALLOCATORS",
    "allocator_agreement",
    "lemma3_sweep",
    "lemma4_sweep",
    "static_matrix",
    "STATIC_MATRIX",
]


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution. ``refinements`` zooms around the incumbent that many times."""

    points_per_axis: int = 200
    upper_bounds: tuple | None = None
    refinements: int = 4

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if self.upper_bounds is not None and any(b <= 0 for b in self.upper_bounds):
            raise ValueError("upper bounds must be positive")


def _grid_minimize(fn, lows, highs, points, refinements, interior=False):
    """Minimize ``fn`` over a box by repeated grid search with zooming.

    ``fn`` receives one array per axis (broadcast meshgrid) and returns the
    objective, ``inf`` where infeasible. Returns ``(value, point)``.
    """
    lows = floor = np.array(lows, dtype=float)
    highs = ceil = np.array(highs, dtype=float)
    k = len(lows)
    best_val, best_pt = math.inf, None
    for _ in range(refinements + 1):
        if interior:
            axes = [lo + (np.arange(points) + 0.5) * (hi - lo) / points for lo, hi in zip(lows, highs)]
        else:
            axes = [np.linspace(lo, hi, points) for lo, hi in zip(lows, highs)]
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        values = np.asarray(fn(*mesh), dtype=float)
        values = np.broadcast_to(values, tuple(points for _ in range(k)))
        idx = np.unravel_index(np.argmin(values), values.shape)
        val = float(values[idx])
        if val < best_val:
            best_val = val
            best_pt = np.array([axes[d][idx[d]] for d in range(k)])
        if best_pt is None:
            break
        step = (highs - lows) / points
        lows = np.maximum(best_pt - 2 * step, floor)
        highs = np.minimum(best_pt + 2 * step, ceil)
    return best_val, best_pt


# -- forward power formulas ----------------------------------------------------

def _p2p_power(r, g):
    return np.expm1(r * math.log(2)) / g


def _pnc_uplink_power(r, g1, g2):
    # rate log2(1/2 + SNR) from both sources at a common received SNR
    return (np.exp2(r) - 0.5) * (1.0 / g1 + 1.0 / g2)


def _mac_power(r1, r2, g1, g2):
    """Sum power for user rates ``(r1, r2)``; the stronger user is decoded first."""
    strong_is_1 = g1 >= g2
    rs = np.where(strong_is_1, r1, r2)
    rw = np.where(strong_is_1, r2, r1)
    gs = np.where(strong_is_1, g1, g2)
    gw = np.where(strong_is_1, g2, g1)
    pw = np.expm1(rw * math.log(2)) / gw
    ps = np.exp2(rw) * np.expm1(rs * math.log(2)) / gs
    return ps + pw


def _rate_bound(levels, gains):
    w = max(levels) * LOG2E
    return 1.05 * math.log2(max(w * max(gains), 1.0)) + 0.05


ALLOCATOR_IDS = ("p2p_waterfill", "pnc_uplink", "pnc_mode2", "bc_superposition",
                 "mac_uplink", "cw_downlink")


def pointwise_grid_min(allocator: str, multipliers: Sequence[float], gains: Sequence[float],
                       grid: GridSpec = GridSpec()):
    """Grid minimum of ``power - sum(beta*rate)`` for one mode at one sample.

    ``multipliers`` and ``gains`` follow the argument order of the matching
    allocator in :mod:`twrn.alloc` (for ``pnc_uplink`` the gains are
    ``(g_1r, g_2r)``; for ``pnc_mode2`` just ``(g_2r,)``). Returns
    ``(best_value, best_rates)``.
    """
    betas = [float(b) for b in multipliers]
    gains = [float(g) for g in gains]
    if allocator in ("p2p_waterfill", "pnc_mode2"):
        (b,), (g,) = betas, gains
        fn = lambda r: _p2p_power(r, g) - b * r
        k = 1
    elif allocator == "pnc_uplink":
        (b,), (g1, g2) = betas, gains
        fn = lambda r: _pnc_uplink_power(r, g1, g2) - b * r
        k = 1
    elif allocator == "bc_superposition":
        (bp, bc), (ga, gb) = betas, gains

        def fn(rp, rc):
            pp, pc = bc_superposition_power(np.broadcast_to(rp, np.broadcast(rp, rc).shape),
                                            np.broadcast_to(rc, np.broadcast(rp, rc).shape), ga, gb)
            return pp + pc - bp * rp - bc * rc
        k = 2
    elif allocator == "mac_uplink":
        (bs, bw), (gs, gw) = betas, gains
        fn = lambda rs, rw: _mac_power(rs, rw, gs, gw) - bs * rs - bw * rw
        k = 2
    elif allocator == "cw_downlink":
        (b1, b2), (g1, g2) = betas, gains
        fn = lambda r1, r2: _p2p_power(r1, g1) + _p2p_power(r2, g2) - b1 * r1 - b2 * r2
        k = 2
    else:
        raise ValueError(f"unknown allocator {allocator!r}")

    if grid.upper_bounds is not None:
        highs = list(grid.upper_bounds)
    else:
        highs = [_rate_bound(betas, gains)] * k
    value, point = _grid_minimize(fn, [0.0] * k, highs, grid.points_per_axis, grid.refinements)
    if allocator == "pnc_uplink" and value > 0.0:
        # staying silent (zero power, zero rate) is always available
        value, point = 0.0, np.zeros(1)
    return value, point


# -- static end-to-end oracle -------------------------------------------------

def _static_modes(strategy: str, lam1: float, lam2: float, g: ChannelSample):
    """Per-mode energy functions ``E(f)`` for a static channel, canonical order."""
    g1, g2, gr1, gr2 = g.g_1r, g.g_2r, g.g_r1, g.g_r2
    excess = lam2 - lam1

    def p2p(t, gain):
        return lambda f: f * _p2p_power(t / f, gain)

    def pnc(t):
        return lambda f: f * _pnc_uplink_power(t / f, g1, g2)

    def mac():
        return lambda f: f * _mac_power(lam1 / f, lam2 / f, g1, g2)

    def bc(tp, tc):
        def energy(f):
            pp, pc = bc_superposition_power(np.broadcast_to(tp / f, np.shape(f)),
                                            np.broadcast_to(tc / f, np.shape(f)), gr1, gr2)
            return f * (pp + pc)
        return energy

    if strategy == "PNC_ZP":
        m = max(lam1, lam2)
        return [(m, pnc(m)), (m, p2p(m, min(gr1, gr2)))]
    if strategy == "PNC_SUP":
        return [(lam1, pnc(lam1)), (excess, p2p(excess, g2)), (lam2, bc(excess, lam1))]
    if strategy == "DNC_TS":
        return [(lam2, mac()), (lam1, p2p(lam1, min(gr1, gr2))), (excess, p2p(excess, gr1))]
    if strategy == "DNC_SUP":
        return [(lam2, mac()), (lam2, bc(excess, lam1))]
    if strategy == "CW_SUP":
        cw = lambda f: f * (_p2p_power(lam2 / f, gr1) + _p2p_power(lam1 / f, gr2))
        return [(lam2, mac()), (lam2, cw)]
    raise ValueError(f"unknown strategy {strategy!r}")


def static_strategy_grid(strategy: str, lambda1: float, lambda2: float, gains,
                         grid: GridSpec = GridSpec()) -> float:
    """Minimum total energy of ``strategy`` on a single static channel.

    Grids over the time fractions of all active modes but the last, which
    receives the remaining time.
    """
    g = gains if isinstance(gains, ChannelSample) else ChannelSample(*gains)
    if lambda1 > lambda2:
        lambda1, lambda2, g = lambda2, lambda1, g.swapped()
    modes = [fn for load, fn in _static_modes(strategy, lambda1, lambda2, g) if load > 0]
    if not modes:
        return 0.0
    if len(modes) == 1:
        return float(modes[0](1.0))
    *free, last = modes

    def total(*fs):
        used = sum(fs)
        rest = 1.0 - used
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            e = sum(m(f) for m, f in zip(free, fs)) + last(np.where(rest > 0, rest, np.nan))
        return np.where((rest > 0) & np.isfinite(e), e, np.inf)

    value, _ = _grid_minimize(total, [0.0] * len(free), [1.0] * len(free),
                              grid.points_per_axis, grid.refinements, interior=True)
    return value


# -- dominance lemmas ----------------------------------------------------------

def lemma3_check(sample: ChannelSample, f2, f3, R2, R3):
    """Superposition downlink versus time-sharing of common and excess bits.

    Returns ``(E_timeshare, E_mode5, holds)``: the energy of sending the
    network-coded rate ``R2`` for time ``f2`` and the excess rate ``R3`` to S1
    for time ``f3``, the energy of carrying the same bits superposed over
    ``f2 + f3``, and whether the latter is no larger.
    """
    ga = np.asarray(sample.g_r1, dtype=float)
    gb = np.asarray(sample.g_r2, dtype=float)
    f2, f3, R2, R3 = (np.asarray(x, dtype=float) for x in (f2, f3, R2, R3))
    e_ts = f2 * _p2p_power(R2, np.minimum(ga, gb)) + f3 * _p2p_power(R3, ga)
    span = f2 + f3
    pp, pc = bc_superposition_power(f3 * R3 / span, f2 * R2 / span, ga, gb)
    e5 = span * (np.asarray(pp) + np.asarray(pc))
    holds = e5 <= e_ts + 1e-12 * np.maximum(1.0, e_ts)
    return alloc._out(e_ts), alloc._out(e5), holds if holds.ndim else bool(holds)


def lemma4_check(g_r1, g_r2, R61, R62):
    """Codeword-superposition downlink versus the case-matched superposition construction.

    Returns ``(E_mode6, E_mode5, holds, case)`` where ``case`` is 1..4 in the
    order (stronger S1 link, S1 rate larger), (stronger S1, S2 rate larger),
    (weaker S1, S1 rate larger), (weaker S1, S2 rate larger).
    """
    g1 = np.asarray(g_r1, dtype=float)
    g2 = np.asarray(g_r2, dtype=float)
    r1 = np.asarray(R61, dtype=float)
    r2 = np.asarray(R62, dtype=float)
    e6 = _p2p_power(r1, g1) + _p2p_power(r2, g2)
    s1_strong = g1 >= g2
    s1_more = r1 >= r2
    case = np.where(s1_strong, np.where(s1_more, 1, 2), np.where(s1_more, 3, 4))
    # cases 1 and 3: excess of S1's rate as private stream, the rest common;
    # case 2 sends only R61 as common, case 4 only R62 as common
    private = np.where(s1_more, r1 - r2, 0.0)
    common = np.where(s1_more, r2, np.where(s1_strong, r1, r2))
    pp, pc = bc_superposition_power(private, common, g1, g2)
    e5 = np.asarray(pp) + np.asarray(pc)
    holds = e5 <= e6 + 1e-12 * np.maximum(1.0, e6)
    if holds.ndim == 0:
        return float(e6), float(e5), bool(holds), int(case)
    return e6, e5, holds, case


# -- randomized suites ---------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    trials: int
    failures: int
    worst_slack: float
    seconds: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} trials={self.trials:<7d} failures={self.failures:<6d} "
                f"worst_slack={self.worst_slack:+.3e}  ({self.seconds:.1f}s)")


def _draw_gain(rng, size=None):
    return np.exp(rng.uniform(math.log(0.1), math.log(10.0), size))


def _draw_level(rng, size=None):
    # multipliers such that water levels span the interesting range
    return rng.uniform(0.0, 6.0, size) / LOG2E


def _random_case(name, rng):
    if name == "p2p_waterfill":
        b, g = _draw_level(rng), _draw_gain(rng)
        return (b,), (g,), lambda al: al(b, g)
    if name == "pnc_uplink":
        b, g1, g2 = _draw_level(rng) * 2, _draw_gain(rng), _draw_gain(rng)
        return (b,), (g1, g2), lambda al: al(b, ChannelSample(g1, g2, 1.0, 1.0))
    if name == "bc_superposition":
        bp, bc, ga, gb = _draw_level(rng), _draw_level(rng), _draw_gain(rng), _draw_gain(rng)
        return (bp, bc), (ga, gb), lambda al: al(bp, bc, ga, gb)
    if name == "mac_uplink":
        bs, bw = _draw_level(rng), _draw_level(rng)
        gs, gw = sorted((_draw_gain(rng), _draw_gain(rng)), reverse=True)
        return (bs, bw), (gs, gw), lambda al: al(bs, bw, gs, gw)
    if name == "cw_downlink":
        b1, b2, g1, g2 = _draw_level(rng), _draw_level(rng), _draw_gain(rng), _draw_gain(rng)
        return (b1, b2), (g1, g2), lambda al: al(b1, b2, g1, g2)
    raise ValueError(name)


ALLOCATORS = {
    "p2p_waterfill": alloc.p2p_waterfill,
    "pnc_uplink": alloc.pnc_uplink_alloc,
    "bc_superposition": alloc.bc_superposition_alloc,
    "mac_uplink": alloc.mac_uplink_alloc,
    "cw_downlink": alloc.cw_downlink_alloc,
}


def allocator_agreement(name: str, trials: int = 1000, seed: int = 0, tol: float = 1e-3,
                        grid: GridSpec = GridSpec(), allocator: Callable | None = None) -> CheckResult:
    """Closed-form Lagrangian versus the grid minimum over random inputs.

    A trial fails if the two differ by more than ``tol`` or if the allocator
    returns negative powers or rates. ``worst_slack`` is the largest
    ``|closed_form - grid|`` seen.
    """
    allocator = allocator or ALLOCATORS[name]
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    failures, worst = 0, 0.0
    for _ in range(trials):
        betas, gains, call = _random_case(name, rng)
        result = call(allocator)
        grid_val, _ = pointwise_grid_min(name, betas, gains, grid)
        gap = abs(float(result.lagrangian_value) - grid_val)
        worst = max(worst, gap)
        negative = any(v < 0 for v in result.powers.values()) or any(v < 0 for v in result.rates.values())
        if gap > tol or negative:
            failures += 1
    return CheckResult(f"oracle/{name}", trials, failures, worst, time.perf_counter() - start)


def lemma3_sweep(trials: int = 100_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    sample = ChannelSample(1.0, 1.0, _draw_gain(rng, trials), _draw_gain(rng, trials))
    f2 = rng.uniform(1e-3, 1.0, trials)
    f3 = rng.uniform(1e-3, 1.0, trials)
    R2 = rng.uniform(1e-3, 6.0, trials)
    R3 = rng.uniform(1e-3, 6.0, trials)
    e_ts, e5, holds = lemma3_check(sample, f2, f3, R2, R3)
    slack = np.max(e5 - e_ts)
    return CheckResult("lemma3/superposition_vs_ts", trials, int(np.count_nonzero(~holds)),
                       float(slack), time.perf_counter() - start)


def lemma4_sweep(trials: int = 100_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    g1, g2 = _draw_gain(rng, trials), _draw_gain(rng, trials)
    r1, r2 = rng.uniform(0.0, 6.0, trials), rng.uniform(0.0, 6.0, trials)
    e6, e5, holds, case = lemma4_check(g1, g2, r1, r2)
    by_case = {int(c): int(np.count_nonzero(~holds & (case == c))) for c in (1, 2, 3, 4)}
    counts = {int(c): int(np.count_nonzero(case == c)) for c in (1, 2, 3, 4)}
    return CheckResult("lemma4/superposition_vs_cw", trials, int(np.count_nonzero(~holds)),
                       float(np.max(e5 - e6)), time.perf_counter() - start,
                       {"failures_by_case": by_case, "trials_by_case": counts})


# (strategy, (lambda1, lambda2), static gains) checked end to end
STATIC_MATRIX = (
    ("PNC_SUP", (0.5, 0.5), (1.0, 1.0, 1.0, 1.0)),
    ("PNC_ZP", (0.3, 0.6), (1.0, 1.0, 1.0, 2.0)),
    ("DNC_TS", (0.3, 0.6), (1.0, 1.0, 1.0, 1.0)),
    ("DNC_SUP", (0.3, 0.6), (1.0, 1.0, 1.0, 1.0)),
    ("DNC_SUP", (0.3, 0.6), (1.0, 1.0, 1.0, 2.0)),
    ("CW_SUP", (0.3, 0.6), (1.0, 1.0, 1.0, 1.0)),
)


def static_matrix(solver_config=None, tol: float = 0.01, grid: GridSpec = GridSpec(),
                  matrix=STATIC_MATRIX) -> CheckResult:
    """Dual solvers against :func:`static_strategy_grid` on one-sample channels."""
    from .fading import FadingSpec, sample_channels
    from .solvers import RateRequirement, SolverConfig, solve

    cfg = solver_config or SolverConfig()
    start = time.perf_counter()
    failures, worst, rows = 0, 0.0, []
    for strategy, (l1, l2), gains in matrix:
        samples = sample_channels(FadingSpec.static(*gains))
        sol = solve(strategy, RateRequirement(l1, l2), samples, cfg)
        ref = static_strategy_grid(strategy, l1, l2, gains, grid)
        rel = abs(sol.total_energy - ref) / ref
        worst = max(worst, rel)
        rows.append((strategy, l1, l2, gains, sol.total_energy, ref))
        if rel > tol or not sol.converged:
            failures += 1
    return CheckResult("static/solver_vs_grid", len(matrix), failures, worst,
                       time.perf_counter() - start, {"rows": rows})
