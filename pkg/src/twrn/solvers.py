"""Strategy-level optimizers.

Every strategy is a set of transmission modes sharing one slot. A mode has one
or two rate streams, each with a load (bits per slot it must carry on
average). For given multipliers the allocators in :mod:`twrn.alloc` fix the
per-sample powers and rates; the solvers pick the multipliers and the time
fractions so that

* every stream carries its load: ``f_i * mean(R_is) == load_is``,
* every active mode has the same marginal value
  ``gamma == mean(P_i) - sum_s beta_is * mean(R_is)``,
* the fractions fill the slot: ``sum_i f_i == 1``.

The first active mode anchors the search. For a trial anchor fraction its
multipliers follow from its rate targets, which fixes ``gamma``; every other
mode is then solved for the multipliers that reach ``gamma`` with the right
rate ratio, which fixes its fraction. The anchor fraction is searched until
the fractions sum to one.

Root finding is bracketed throughout. Sample averages are piecewise smooth
in the multipliers and may jump (a finite set of samples switches allocation
case), so the two bracket ends are mixed, i.e. time-shared, to hit rate
targets exactly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import alloc
from .alloc import LOG2E, Multipliers
from .errors import BracketError, ConfigurationError, InfeasibleError, MonotonicityError, SolverError
from .fading import SampleSet

__all__ = [
    "Strategy",
    "RateRequirement",
    "SolverConfig",
    "StrategySolution",
    "mode_dual_solve",
    "solve",
    "solve_pnc_zp",
    "solve_pnc_sup",
    "solve_dnc_ts",
    "solve_dnc_sup",
    "solve_cw_sup",
    "select_optimal",
    "pick_optimal",
    "POPT_CANDIDATES",
]

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    PNC_ZP = "PNC_ZP"
    PNC_SUP = "PNC_SUP"
    DNC_TS = "DNC_TS"
    DNC_SUP = "DNC_SUP"
    CW_SUP = "CW_SUP"


@dataclass(frozen=True)
class RateRequirement:
    """Required average rates in frames (bits) per slot."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(name, f"must be a nonnegative finite real, got {value!r}")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ConfigurationError("lambda", "at least one rate must be positive")


@dataclass(frozen=True)
class SolverConfig:
    eps_inner: float = 1e-6
    eps_outer: float = 1e-3
    max_iter: int = 200
    bracket_max: float = 1e6

    def __post_init__(self):
        for name in ("eps_inner", "eps_outer", "bracket_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(name, f"must be positive, got {value!r}")
        if isinstance(self.max_iter, bool) or not isinstance(self.max_iter, int) or self.max_iter < 1:
            raise ConfigurationError("max_iter", f"must be a positive integer, got {self.max_iter!r}")
        if not self.eps_inner < self.eps_outer:
            raise ConfigurationError("eps_inner", "must be smaller than eps_outer")


@dataclass
class StrategySolution:
    strategy: Strategy
    fractions: dict
    multipliers: Multipliers
    avg_rates: dict
    avg_powers: dict
    total_energy: float
    gamma: float
    converged: bool
    iterations: int
    swapped: bool
    loads: dict = field(default_factory=dict)
    kkt_residuals: dict = field(default_factory=dict)
    message: str = ""

    @property
    def fraction_sum(self) -> float:
        return math.fsum(self.fractions.values())


# -- modes -----------------------------------------------------------------------

@dataclass(frozen=True)
class _Point:
    """Sample averages of one mode at given multipliers (possibly a mixture)."""

    betas: np.ndarray
    power: float
    rates: np.ndarray

    @property
    def lagrangian(self) -> float:
        return self.power - float(np.dot(self.betas, self.rates))


def _mix(a: _Point, b: _Point, theta: float) -> _Point:
    """Time-share ``a`` for ``1 - theta`` and ``b`` for ``theta`` of the mode."""
    if theta <= 0.0:
        return a
    if theta >= 1.0:
        return b
    return _Point((1 - theta) * a.betas + theta * b.betas,
                  (1 - theta) * a.power + theta * b.power,
                  (1 - theta) * a.rates + theta * b.rates)


class _Mode:
    """Sample averages of one transmission mode as a function of its multipliers.

    Multipliers are shared by all samples, so each evaluator precomputes what
    it can from the gains. The results equal the means of the kernels in
    :mod:`twrn.alloc` up to rounding.
    """

    label: str
    streams: tuple
    n: int

    def evaluate(self, betas) -> _Point:
        betas = np.asarray(betas, dtype=float)
        power, rates = self._sums(betas * LOG2E)
        return _Point(betas, max(power, 0.0) / self.n, np.maximum(rates, 0.0) / self.n)


class _SortedLink:
    """Water-filling sums over a set of links in O(log n) per level.

    A link is active iff its inverse gain lies below the level, so the
    active set is a prefix of the links sorted by inverse gain.
    """

    def __init__(self, inv_gain):
        self.inv = np.sort(np.asarray(inv_gain, dtype=float))
        self.cum_inv = np.concatenate(([0.0], np.cumsum(self.inv)))
        self.cum_log = np.concatenate(([0.0], np.cumsum(np.log2(self.inv))))

    def sums(self, w):
        """``(sum P, sum R)`` with ``P = [w - inv]+`` and ``R = log2(w/inv)`` when active."""
        k = int(np.searchsorted(self.inv, w, side="left")) if w > 0 else 0
        if k == 0:
            return 0.0, 0.0
        return k * w - self.cum_inv[k], k * math.log2(w) - self.cum_log[k]


class _Waterfill(_Mode):
    def __init__(self, label, stream, g):
        self.label, self.streams, self.n = label, (stream,), len(g)
        self.link = _SortedLink(1.0 / np.asarray(g))

    def _sums(self, w):
        p, r = self.link.sums(w[0])
        return p, [r]


class _PncUplink(_Mode):
    def __init__(self, label, g1, g2):
        self.label, self.streams, self.n = label, ("R1",), len(g1)
        # active iff w > PNC_ACTIVATION*h; then P = w - h/2 and R = log2(w/h)
        self.link = _SortedLink(1.0 / np.asarray(g1) + 1.0 / np.asarray(g2))

    def _sums(self, w):
        k = int(np.searchsorted(self.link.inv, w[0] / alloc.PNC_ACTIVATION, side="left"))
        if k == 0 or w[0] <= 0:
            return 0.0, [0.0]
        link = self.link
        return k * w[0] - 0.5 * link.cum_inv[k], [k * math.log2(w[0]) - link.cum_log[k]]


class _Broadcast(_Mode):
    """Superposition downlink; private stream to the ``ga`` receiver."""

    def __init__(self, label, ga, gb):
        self.label, self.streams, self.n = label, ("private", "common"), len(ga)
        ga, gb = np.asarray(ga), np.asarray(gb)
        strong = ga > gb
        self.ga, self.gb = ga[strong], gb[strong]
        self.inv_ga, self.inv_gb = 1.0 / self.ga, 1.0 / self.gb
        self.inv_gap = self.ga * self.gb / (self.ga - self.gb)
        # private receiver weaker: one water-fill on ga at the larger level
        self.weak = _SortedLink(1.0 / ga[~strong])

    def _sums(self, w):
        wp, wc = w
        p, r = self.weak.sums(max(wp, wc))
        rates = [0.0, r] if wc >= wp else [r, 0.0]
        if self.ga.size:
            x = wp * self.ga
            c = wc * self.gb
            case1 = x <= c
            # 2**R_common and 2**(R_common + R_private) per sample
            two_u = np.where(case1, np.maximum(c, 1.0),
                             np.minimum(np.maximum((wc - wp) * self.inv_gap, 1.0), np.maximum(x, 1.0)))
            two_w = np.where(case1, two_u, np.maximum(x, 1.0))
            pp = (two_w / two_u - 1.0) * self.inv_ga
            p += float(np.sum(pp + (two_u - 1.0) * (self.inv_gb + pp)))
            r_common = float(np.sum(np.log2(two_u)))
            rates[0] += float(np.sum(np.log2(two_w))) - r_common
            rates[1] += r_common
        return p, rates


class _MacSide:
    """Samples of a multi-access uplink sharing the same decoding order."""

    def __init__(self, gs, gw):
        gw = np.where(gw >= gs, np.nextafter(gs, 0.0), gw)
        self.gs, self.gw = gs, gw
        self.inv_gs, self.inv_gw = 1.0 / gs, 1.0 / gw
        self.inv_gap = gs * gw / (gs - gw)
        self.strong_only = _SortedLink(self.inv_gs)

    def sums(self, ws, ww):
        """``(sum P, sum R_strong, sum R_weak)``."""
        if ww <= ws:
            p, r = self.strong_only.sums(ws)
            return p, r, 0.0
        if self.gs.size == 0:
            return 0.0, 0.0, 0.0
        x = ww * self.gw
        weak_only = ws * self.gs <= x
        two_y = np.maximum(ws * self.gs, 1.0)
        two_x = np.minimum(np.maximum((ww - ws) * self.inv_gap, 1.0), two_y)
        # 2**R_weak and 2**(R_weak + R_strong) per sample
        two_weak = np.where(weak_only, np.maximum(x, 1.0), two_x)
        two_total = np.where(weak_only, two_weak, two_y)
        p = float(np.sum((two_total - two_weak) * self.inv_gs + (two_weak - 1.0) * self.inv_gw))
        r_weak = float(np.sum(np.log2(two_weak)))
        return p, float(np.sum(np.log2(two_total))) - r_weak, r_weak


class _Mac(_Mode):
    """Multi-access uplink; per sample the stronger source is decoded first."""

    def __init__(self, label, g1, g2):
        self.label, self.streams, self.n = label, ("R11", "R12"), len(g1)
        g1, g2 = np.asarray(g1), np.asarray(g2)
        one = g1 >= g2
        self.one_strong = _MacSide(g1[one], g2[one])
        self.two_strong = _MacSide(g2[~one], g1[~one])

    def _sums(self, w):
        p_a, r1_a, r2_a = self.one_strong.sums(w[0], w[1])
        p_b, r2_b, r1_b = self.two_strong.sums(w[1], w[0])
        return p_a + p_b, [r1_a + r1_b, r2_a + r2_b]


class _CodewordDownlink(_Mode):
    def __init__(self, label, g1, g2):
        self.label, self.streams, self.n = label, ("R61", "R62"), len(g1)
        self.link1 = _SortedLink(1.0 / np.asarray(g1))
        self.link2 = _SortedLink(1.0 / np.asarray(g2))

    def _sums(self, w):
        p1, r1 = self.link1.sums(w[0])
        p2, r2 = self.link2.sums(w[1])
        return p1 + p2, [r1, r2]


def _strategy_modes(strategy: Strategy, lam1: float, lam2: float, samples: SampleSet):
    """Modes and per-stream loads in the canonical frame ``lam1 <= lam2``."""
    g = samples.columns
    g1, g2, gr1, gr2 = (np.asarray(x) for x in (g.g_1r, g.g_2r, g.g_r1, g.g_r2))
    excess = lam2 - lam1
    if strategy is Strategy.PNC_ZP:
        m = max(lam1, lam2)
        return [(_PncUplink("1", g1, g2), (m,)),
                (_Waterfill("2", "R2", np.minimum(gr1, gr2)), (m,))]
    if strategy is Strategy.PNC_SUP:
        return [(_PncUplink("1", g1, g2), (lam1,)),
                (_Waterfill("2", "R22", g2), (excess,)),
                (_Broadcast("3", gr1, gr2), (excess, lam1))]
    if strategy is Strategy.DNC_TS:
        return [(_Mac("1", g1, g2), (lam1, lam2)),
                (_Waterfill("2", "R2", np.minimum(gr1, gr2)), (lam1,)),
                (_Waterfill("3", "R3", gr1), (excess,))]
    if strategy is Strategy.DNC_SUP:
        return [(_Mac("1", g1, g2), (lam1, lam2)),
                (_Broadcast("5", gr1, gr2), (excess, lam1))]
    if strategy is Strategy.CW_SUP:
        # stream R61 carries S2's message to S1, R62 carries S1's message to S2
        return [(_Mac("1", g1, g2), (lam1, lam2)),
                (_CodewordDownlink("6", gr1, gr2), (lam2, lam1))]
    raise ValueError(f"unknown strategy {strategy!r}")


# -- bracketed root finding --------------------------------------------------------

@dataclass
class _Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    p_lo: object
    p_hi: object
    evaluations: int = 0


def _refine(fn, br: _Bracket, ftol: float, xtol: float, max_iter: int, slack: float) -> _Bracket:
    """Shrink a bracket of a nondecreasing function around its root.

    ``fn(x)`` returns ``(value, payload)``; on entry ``f_lo < 0 <= f_hi``.
    Illinois steps with a bisection safeguard. Stops once either end is
    within ``ftol`` of zero or the bracket is narrower than ``xtol`` relative.
    A value outside ``[f_lo - slack, f_hi + slack]`` at an interior point
    violates monotonicity.
    """
    w_lo, w_hi = br.f_lo, br.f_hi
    side = 0
    for it in range(max_iter):
        if -br.f_lo <= ftol or br.f_hi <= ftol:
            break
        if br.hi - br.lo <= xtol * max(abs(br.hi), 1e-300):
            break
        width = br.hi - br.lo
        x = br.hi - w_hi * width / (w_hi - w_lo)
        if it % 4 == 3 or not (br.lo + 0.02 * width < x < br.hi - 0.02 * width):
            if br.lo > 0 and br.hi / br.lo > 4:
                x = math.sqrt(br.lo * br.hi)
            else:
                x = 0.5 * (br.lo + br.hi)
        value, payload = fn(x)
        br.evaluations += 1
        if value < br.f_lo - slack or value > br.f_hi + slack:
            raise MonotonicityError(
                f"value {value:.6g} at {x:.6g} outside bracket values [{br.f_lo:.6g}, {br.f_hi:.6g}]")
        if value < 0:
            br.lo, br.f_lo, br.p_lo, w_lo = x, value, payload, value
            if side == -1:
                w_hi *= 0.5
            side = -1
        else:
            br.hi, br.f_hi, br.p_hi, w_hi = x, value, payload, value
            if side == 1:
                w_lo *= 0.5
            side = 1
    return br


def _bracket_from_zero(fn, hint: float | None, cap: float, f_zero: float, p_zero,
                       what: str) -> _Bracket:
    """Bracket the root of a nondecreasing ``fn`` on ``[0, cap]`` with ``fn(0) < 0``."""
    x = hint if hint and hint > 0 else 1.0
    x = min(x, cap)
    value, payload = fn(x)
    n = 1
    if value < 0:
        lo, f_lo, p_lo = x, value, payload
        while True:
            if x >= cap:
                raise BracketError(f"{what}: target not reached at multiplier {cap:g}", achieved=value)
            x = min(2.0 * x, cap)
            value, payload = fn(x)
            n += 1
            if value >= 0:
                return _Bracket(lo, x, f_lo, value, p_lo, payload, n)
            lo, f_lo, p_lo = x, value, payload
    hi, f_hi, p_hi = x, value, payload
    while x > 1e-12:
        x *= 0.5
        value, payload = fn(x)
        n += 1
        if value < 0:
            return _Bracket(x, hi, value, f_hi, payload, p_hi, n)
        hi, f_hi, p_hi = x, value, payload
    return _Bracket(0.0, hi, f_zero, f_hi, p_zero, p_hi, n)


def _mix_to_zero(br: _Bracket) -> _Point:
    """Mixture of the bracket ends whose (linear) residual is zero."""
    if br.f_hi == 0 or br.f_hi <= -br.f_lo and br.f_hi <= 0:
        return br.p_hi
    theta = -br.f_lo / (br.f_hi - br.f_lo)
    return _mix(br.p_lo, br.p_hi, theta)


# -- mode-level dual solves --------------------------------------------------------

class _Counter:
    def __init__(self):
        self.evaluations = 0


def _zero_betas(mode):
    return np.zeros(len(mode.streams))


def _with(betas, k, value):
    out = np.array(betas, dtype=float)
    out[k] = value
    return out


def _newton(mode: _Mode, residual, beta0, idx, tol, counter: _Counter, max_iter: int = 25):
    """Damped Newton on the multipliers ``idx`` from ``beta0``.

    ``residual(point)`` returns one value per entry of ``idx``; convergence
    means every entry is within ``tol``. The Jacobian is a forward
    difference. Returns ``None`` when a step fails to reduce the residual or
    the Jacobian is singular, leaving the caller to its bracketed fallback.
    """
    beta = np.array(beta0, dtype=float)
    if not np.all(beta[idx] > 0):
        return None
    point = mode.evaluate(beta)
    res = residual(point)
    counter.evaluations += 1
    for _ in range(max_iter):
        if np.all(np.abs(res) <= tol):
            return point
        jac = np.empty((len(idx), len(idx)))
        for j, k in enumerate(idx):
            h = 1e-6 * beta[k]
            jac[:, j] = (residual(mode.evaluate(_with(beta, k, beta[k] + h))) - res) / h
        counter.evaluations += len(idx)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        merit = np.linalg.norm(res / tol)
        t = 1.0
        while True:
            trial = beta.copy()
            moved = beta[idx] + t * step
            trial[idx] = np.where(moved > 0, moved, 0.1 * beta[idx])
            candidate = mode.evaluate(trial)
            cand_res = residual(candidate)
            counter.evaluations += 1
            if np.linalg.norm(cand_res / tol) < (1 - 1e-4 * t) * merit:
                beta, point, res = trial, candidate, cand_res
                break
            t *= 0.5
            if t < 1e-3:
                return None
    return point if np.all(np.abs(res) <= tol) else None


def _diagonal_start(mode: _Mode, idx, fn, hint, cfg: SolverConfig, counter: _Counter):
    """Cold start for Newton: a common multiplier on ``idx`` solving ``fn(point) = 0``.

    ``fn`` must increase along the diagonal and be negative at zero.
    """
    def g(x):
        counter.evaluations += 1
        p = mode.evaluate(_with_all(len(mode.streams), idx, x))
        return fn(p), p

    positive = [hint[k] for k in idx if hint[k] > 0]
    zero = mode.evaluate(np.zeros(len(mode.streams)))
    br = _bracket_from_zero(g, max(positive) if positive else None, cfg.bracket_max,
                            fn(zero), zero, f"mode {mode.label}")
    br = _refine(g, br, 1e-3 * max(1.0, abs(br.f_hi)), 1e-6, cfg.max_iter, slack=math.inf)
    return br.p_hi.betas


def _with_all(size, idx, value):
    out = np.zeros(size)
    out[idx] = value
    return out


def _solve_rates(mode: _Mode, targets, cfg: SolverConfig, hints: dict, counter: _Counter) -> _Point:
    """Multipliers whose average rates equal ``targets`` (mixing across a jump)."""
    targets = np.asarray(targets, dtype=float)
    active = [k for k in range(len(targets)) if targets[k] > 0]
    base = _zero_betas(mode)
    zero = mode.evaluate(base)
    counter.evaluations += 1
    if not active:
        return zero
    key = (mode.label, "rates")
    hint = hints.get(key, base)

    def solve_one(k, betas_fixed, hint_k):
        r = targets[k]
        ftol = cfg.eps_inner * max(1.0, r)
        f_zero = zero.rates[k] - r if not betas_fixed.any() else None

        def fn(x):
            counter.evaluations += 1
            p = mode.evaluate(_with(betas_fixed, k, x))
            return p.rates[k] - r, p

        if f_zero is None:
            p0 = mode.evaluate(_with(betas_fixed, k, 0.0))
            counter.evaluations += 1
            f_zero = p0.rates[k] - r
        else:
            p0 = zero
        if f_zero >= 0:
            return p0
        br = _bracket_from_zero(fn, hint_k, cfg.bracket_max, f_zero, p0,
                                f"mode {mode.label} stream {mode.streams[k]}")
        br = _refine(fn, br, ftol, 1e-13, cfg.max_iter, slack=ftol)
        return _mix_to_zero(br)

    if len(active) == 1:
        (k,) = active
        point = solve_one(k, base, hint[k])
    else:
        a, b = active
        idx = [a, b]
        if not np.all(hint[idx] > 0):
            hint = _diagonal_start(mode, idx, lambda p: p.rates[idx].sum() - targets[idx].sum(),
                                   hint, cfg, counter)
        point = _newton(mode, lambda p: p.rates[idx] - targets[idx], hint, idx,
                        cfg.eps_inner * np.maximum(1.0, targets[idx]), counter)
        if point is not None:
            hints[key] = point.betas
            return point
        inner_hint = [hint[a]]
        r_b = targets[b]
        ftol = cfg.eps_inner * max(1.0, r_b)

        def outer(x):
            p = solve_one(a, _with(base, b, x), inner_hint[0])
            if p.betas[a] > 0:
                inner_hint[0] = p.betas[a]
            return p.rates[b] - r_b, p

        f0, p0 = outer(0.0)
        if f0 >= 0:
            point = p0
        else:
            br = _bracket_from_zero(outer, hint[b], cfg.bracket_max, f0, p0,
                                    f"mode {mode.label} stream {mode.streams[b]}")
            br = _refine(outer, br, ftol, 1e-13, cfg.max_iter, slack=ftol)
            point = _mix_to_zero(br)
    hints[key] = point.betas
    return point


def _solve_gamma(mode: _Mode, loads, gamma: float, cfg: SolverConfig, hints: dict,
                 counter: _Counter):
    """Multipliers reaching marginal value ``gamma`` with rates proportional to ``loads``.

    Returns ``(point, fraction)``.
    """
    loads = np.asarray(loads, dtype=float)
    active = [k for k in range(len(loads)) if loads[k] > 0]
    base = _zero_betas(mode)
    if gamma >= 0:
        # silence already reaches gamma; no finite fraction carries the load
        return mode.evaluate(base), math.inf
    key = (mode.label, "gamma")
    hint = hints.get(key, base)
    ftol = cfg.eps_inner

    def on_level(k, betas_fixed, hint_k):
        """Raise multiplier ``k`` until the Lagrangian drops to ``gamma``."""
        def fn(x):
            counter.evaluations += 1
            p = mode.evaluate(_with(betas_fixed, k, x))
            return gamma - p.lagrangian, p

        p0 = mode.evaluate(betas_fixed)
        counter.evaluations += 1
        f0 = gamma - p0.lagrangian
        if f0 >= 0:
            return p0, f0
        br = _bracket_from_zero(fn, hint_k, cfg.bracket_max, f0, p0,
                                f"mode {mode.label} stream {mode.streams[k]}")
        br = _refine(fn, br, ftol, 1e-14, cfg.max_iter, slack=ftol)
        if -br.f_lo < br.f_hi:
            return br.p_lo, br.f_lo
        return br.p_hi, br.f_hi

    if len(active) == 1:
        (k,) = active
        point, _ = on_level(k, base, hint[k])
    else:
        a, b = active
        t_a, t_b = loads[a], loads[b]
        scale = t_a + t_b
        idx = [a, b]
        if not np.all(hint[idx] > 0):
            hint = _diagonal_start(mode, idx, lambda p: gamma - p.lagrangian, hint, cfg, counter)
        point = _newton(mode, lambda p: np.array([p.lagrangian - gamma,
                                                  (t_a * p.rates[b] - t_b * p.rates[a]) / scale]),
                        hint, idx, np.array([ftol, ftol]), counter)
        if point is not None:
            hints[key] = point.betas
            carried = point.rates[a] + point.rates[b]
            return point, (math.inf if carried <= 0 else float(scale / carried))

        # largest useful multiplier on stream b: the level is reached with beta_a = 0
        top, _ = on_level(b, base, hint[b])
        b_max = top.betas[b]
        inner_hint = [hint[a]]

        def outer(x):
            if x >= b_max:
                p = top
            else:
                p, _ = on_level(a, _with(base, b, x), inner_hint[0])
                if p.betas[a] > 0:
                    inner_hint[0] = p.betas[a]
            return (t_a * p.rates[b] - t_b * p.rates[a]) / scale, p

        f0, p0 = outer(0.0)
        f_top_ratio, _ = outer(b_max)
        if f0 >= 0:
            point = p0
        elif f_top_ratio <= 0:
            point = top
        else:
            br = _Bracket(0.0, b_max, f0, f_top_ratio, p0, top)
            mid = hint[b] if 0 < hint[b] < b_max else 0.5 * b_max
            fm, pm = outer(mid)
            if fm < 0:
                br.lo, br.f_lo, br.p_lo = mid, fm, pm
            else:
                br.hi, br.f_hi, br.p_hi = mid, fm, pm
            br = _refine(outer, br, cfg.eps_inner, 1e-13, cfg.max_iter, slack=cfg.eps_inner)
            point = _mix_to_zero(br)
    hints[key] = point.betas
    carried = sum(point.rates[k] for k in active)
    fraction = math.inf if carried <= 0 else float(sum(loads[k] for k in active) / carried)
    return point, fraction


def mode_dual_solve(mode: str, targets, samples: SampleSet, cfg: SolverConfig = SolverConfig()):
    """Multipliers hitting average rate ``targets`` for one mode.

    ``mode`` is one of ``"waterfill_1r"``, ``"waterfill_2r"``, ``"waterfill_r1"``,
    ``"waterfill_r2"``, ``"pnc_uplink"``, ``"broadcast"`` (targets: private,
    common), ``"mac"`` (targets: source 1, source 2) or ``"codeword"``
    (targets: R61, R62). Returns ``(Multipliers, avg_rates, avg_power)``.
    """
    g = samples.columns
    cols = {"1r": g.g_1r, "2r": g.g_2r, "r1": g.g_r1, "r2": g.g_r2}
    if mode.startswith("waterfill_"):
        m = _Waterfill(mode, "R", np.asarray(cols[mode.split("_")[1]]))
    elif mode == "pnc_uplink":
        m = _PncUplink(mode, np.asarray(g.g_1r), np.asarray(g.g_2r))
    elif mode == "broadcast":
        m = _Broadcast(mode, np.asarray(g.g_r1), np.asarray(g.g_r2))
    elif mode == "mac":
        m = _Mac(mode, np.asarray(g.g_1r), np.asarray(g.g_2r))
    elif mode == "codeword":
        m = _CodewordDownlink(mode, np.asarray(g.g_r1), np.asarray(g.g_r2))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if targets.shape != (len(m.streams),) or (targets < 0).any():
        raise ValueError(f"mode {mode!r} needs {len(m.streams)} nonnegative targets")
    point = _solve_rates(m, targets, cfg, {}, _Counter())
    betas = Multipliers(dict(zip(m.streams, map(float, point.betas))))
    return betas, dict(zip(m.streams, map(float, point.rates))), point.power


# -- strategy-level search ---------------------------------------------------------

@dataclass
class _Trial:
    f1: float
    residual: float
    fractions: list
    points: list
    gamma: float


def _solve_strategy(strategy: Strategy, req: RateRequirement, samples: SampleSet,
                    cfg: SolverConfig, strict: bool) -> StrategySolution:
    swapped = req.lambda1 > req.lambda2
    lam1, lam2 = (req.lambda2, req.lambda1) if swapped else (req.lambda1, req.lambda2)
    if swapped:
        samples = samples.swapped()
    modes = _strategy_modes(strategy, lam1, lam2, samples)
    active = [i for i, (_, loads) in enumerate(modes) if sum(loads) > 0]
    anchor = active[0]
    others = active[1:]
    hints: dict = {}
    counter = _Counter()
    n_outer = 0

    def trial(f1: float) -> _Trial:
        nonlocal n_outer
        n_outer += 1
        mode, loads = modes[anchor]
        fractions = [0.0] * len(modes)
        points = [None] * len(modes)
        fractions[anchor] = f1
        try:
            points[anchor] = _solve_rates(mode, np.asarray(loads) / f1, cfg, hints, counter)
        except BracketError:
            # anchor rates unreachable: its fraction is far too small
            return _Trial(f1, -1.0, fractions, points, -math.inf)
        gamma = points[anchor].lagrangian
        for i in others:
            mode, loads = modes[i]
            try:
                points[i], fractions[i] = _solve_gamma(mode, loads, gamma, cfg, hints, counter)
            except BracketError:
                return _Trial(f1, -1.0, fractions, points, gamma)
        total = math.fsum(fractions)
        return _Trial(f1, total - 1.0, fractions, points, gamma)

    def within(t: _Trial, tol: float) -> bool:
        return -tol < t.residual <= 0.0

    # Aim well inside the tolerance window so that paired comparisons between
    # strategies are not dominated by where each search happened to stop.
    def accept(t: _Trial) -> bool:
        return within(t, 1e-2 * cfg.eps_outer)

    best = None
    if not others:
        best = trial(1.0)
    else:
        # bracket by halving the distance to 0 or to 1, starting mid-slot
        lo = _Trial(0.0, -1.0, [], [], -math.inf)
        hi = None
        f = 0.5
        while True:
            t = trial(f)
            if accept(t):
                best = t
                break
            if t.residual > 0:
                hi = t
                if lo.f1 > 0 or f < 1e-9:
                    break
                f *= 0.5
            else:
                lo = t
                if hi is not None or 1.0 - f < 1e-9:
                    break
                f = 1.0 - 0.5 * (1.0 - f)
        if best is None and hi is not None:
            def fn(x):
                t = trial(x)
                return t.residual, t

            br = _Bracket(lo.f1, hi.f1, lo.residual, hi.residual, lo, hi)
            w_lo, w_hi, side = br.f_lo, br.f_hi, 0
            for it in range(cfg.max_iter):
                width = br.hi - br.lo
                if width <= 1e-15:
                    break
                x = br.hi - w_hi * width / (w_hi - w_lo)
                if it % 4 == 3 or not (br.lo + 0.01 * width < x < br.hi - 0.01 * width):
                    x = 0.5 * (br.lo + br.hi)
                value, t = fn(x)
                if accept(t):
                    best = t
                    break
                if value < br.f_lo - 10 * cfg.eps_inner or value > br.f_hi + 10 * cfg.eps_inner:
                    raise MonotonicityError(f"fraction sum not monotone in f1 near {x:.6g}")
                if value < 0:
                    br.lo, br.f_lo, br.p_lo, w_lo = x, value, t, value
                    if side == -1:
                        w_hi *= 0.5
                    side = -1
                else:
                    br.hi, br.f_hi, br.p_hi, w_hi = x, value, t, value
                    if side == 1:
                        w_lo *= 0.5
                    side = 1
            if best is None and within(br.p_lo, cfg.eps_outer):
                best = br.p_lo
            if best is None:
                closest = min((br.p_lo, br.p_hi), key=lambda t: abs(t.residual))
                if strict:
                    raise InfeasibleError(
                        f"{strategy.value}: fractions sum to {1 + closest.residual:.6f}, not within "
                        f"{cfg.eps_outer:g} of 1", closest_sum=1 + closest.residual)
                best = closest
        if best is None:
            if strict:
                raise InfeasibleError(f"{strategy.value}: no anchor fraction fills the slot",
                                      closest_sum=1 + lo.residual)
            best = lo
    converged = within(best, cfg.eps_outer) or not others
    return _assemble(strategy, modes, best, converged, n_outer, swapped, counter)


def _assemble(strategy, modes, t: _Trial, converged, n_outer, swapped, counter) -> StrategySolution:
    fractions, avg_rates, avg_powers, betas, loads_out, kkt = {}, {}, {}, {}, {}, {}
    energy = []
    for i, (mode, loads) in enumerate(modes):
        f = t.fractions[i] if t.fractions else 0.0
        p = t.points[i] if t.points else None
        fractions[mode.label] = f
        avg_powers[mode.label] = p.power if p is not None and f > 0 else 0.0
        for k, stream in enumerate(mode.streams):
            name = f"{mode.label}.{stream}"
            loads_out[name] = float(loads[k])
            avg_rates[name] = float(p.rates[k]) if p is not None and f > 0 else 0.0
            betas[name] = float(p.betas[k]) if p is not None and f > 0 else 0.0
        if p is not None and f > 0:
            energy.append(f * p.power)
            kkt[mode.label] = abs(p.lagrangian - t.gamma)
    return StrategySolution(
        strategy=strategy,
        fractions=fractions,
        multipliers=Multipliers(betas),
        avg_rates=avg_rates,
        avg_powers=avg_powers,
        total_energy=math.fsum(energy),
        gamma=float(t.gamma),
        converged=bool(converged),
        iterations=n_outer,
        swapped=swapped,
        loads=loads_out,
        kkt_residuals=kkt,
        message=f"{counter.evaluations} mode evaluations",
    )


def solve(strategy, req: RateRequirement, samples: SampleSet, cfg: SolverConfig = SolverConfig(),
          strict: bool = True) -> StrategySolution:
    """Minimum average energy of ``strategy`` for ``req`` on ``samples``.

    Requirements with ``lambda1 > lambda2`` are solved with the roles of the
    two sources exchanged; the solution then reports ``swapped=True`` and its
    labels refer to the exchanged roles. With ``strict=False`` a failed
    search returns the closest trial marked ``converged=False`` instead of
    raising.
    """
    strategy = Strategy(strategy)
    return _solve_strategy(strategy, req, samples, cfg, strict)


def solve_pnc_zp(req, samples, cfg=SolverConfig(), strict=True):
    """PNC with the shorter message zero-padded; both directions carry max(lambda)."""
    return solve(Strategy.PNC_ZP, req, samples, cfg, strict)


def solve_pnc_sup(req, samples, cfg=SolverConfig(), strict=True):
    """PNC uplink, excess-bit uplink, superposition downlink."""
    return solve(Strategy.PNC_SUP, req, samples, cfg, strict)


def solve_dnc_ts(req, samples, cfg=SolverConfig(), strict=True):
    """Multi-access uplink; downlink time-shares the XOR message and the excess bits."""
    return solve(Strategy.DNC_TS, req, samples, cfg, strict)


def solve_dnc_sup(req, samples, cfg=SolverConfig(), strict=True):
    """Multi-access uplink; downlink superposes the excess bits on the XOR message."""
    return solve(Strategy.DNC_SUP, req, samples, cfg, strict)


def solve_cw_sup(req, samples, cfg=SolverConfig(), strict=True):
    """Multi-access uplink; downlink superposes both source codewords."""
    return solve(Strategy.CW_SUP, req, samples, cfg, strict)


POPT_CANDIDATES = (Strategy.PNC_SUP, Strategy.DNC_SUP)


# energies closer than this (relative) are equal up to rounding
TIE_RTOL = 1e-9


def pick_optimal(solutions) -> StrategySolution:
    """Cheapest of already solved PNC-Sup and DNC-Sup solutions.

    Energies equal up to ``TIE_RTOL`` count as a tie, which goes to DNC-Sup.
    """
    solutions = list(solutions)
    floor = min(s.total_energy for s in solutions)
    tied = [s for s in solutions if s.total_energy <= floor + TIE_RTOL * abs(floor)]
    return min(tied, key=lambda s: (s.strategy is Strategy.PNC_SUP, s.total_energy))


def select_optimal(req: RateRequirement, samples: SampleSet, cfg: SolverConfig = SolverConfig()):
    """Pick the cheaper of PNC-Sup and DNC-Sup on the same samples.

    DNC-TS never beats DNC-Sup, so it is not a candidate. Returns
    ``(solution, energies)`` with ``energies`` keyed by strategy name.
    """
    sols = []
    for strategy in POPT_CANDIDATES:
        try:
            sols.append(solve(strategy, req, samples, cfg))
        except SolverError as exc:
            exc.args = (f"{strategy.value}: {exc}",)
            exc.strategy = strategy
            raise
    return pick_optimal(sols), {s.strategy.value: s.total_energy for s in sols}
