"""Closed-form pointwise power and rate allocators.

Each allocator minimizes the per-sample Lagrangian ``power - sum(beta * rate)``
for one transmission mode. Multipliers are raw; the water level of a stream is
``beta * log2(e)``. Powers are noise-normalized, so the received SNR is
``P * g``. Every function accepts scalars or equally shaped arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from .errors import NumericalError
from .fading import ChannelSample

__all__ = [
    "LOG2E",
    "PNC_ACTIVATION",
    "ModeAllocation",
    "Multipliers",
    "p2p_waterfill",
    "pnc_uplink_alloc",
    "pnc_mode2_alloc",
    "bc_superposition_power",
    "bc_superposition_alloc",
    "mac_uplink_alloc",
    "cw_downlink_alloc",
]

LOG2E = math.log2(math.e)

# Water level (in units of 1/g_1r + 1/g_2r) above which a PNC uplink
# transmission beats staying silent: the root t > 1 of t - t*ln(t) = 1/2.
PNC_ACTIVATION = float(np.exp(1.0 + lambertw(-0.5 / math.e, 0).real))


@dataclass(frozen=True)
class ModeAllocation:
    powers: dict
    rates: dict
    lagrangian_value: object

    @property
    def total_power(self):
        return sum(self.powers.values())


@dataclass(frozen=True)
class Multipliers:
    """Nonnegative Lagrange multipliers keyed by constraint label."""

    values: dict

    def __post_init__(self):
        for key, value in self.values.items():
            if not value >= 0:
                raise ValueError(f"multiplier {key!r} must be >= 0, got {value!r}")

    def __getitem__(self, key):
        return self.values[key]


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _validate(betas=(), gains=()):
    for b in betas:
        b = np.asarray(b, dtype=float)
        if not np.isfinite(b).all():
            raise NumericalError(f"non-finite multiplier {b!r}")
        if (b < 0).any():
            raise ValueError("multipliers must be >= 0")
    for g in gains:
        g = np.asarray(g, dtype=float)
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gain {g!r}")
        if (g <= 0).any():
            raise ValueError("gains must be > 0")


# -- kernels (no validation; used directly by the solvers) -------------------

def _waterfill(w, g):
    p = np.maximum(w - 1.0 / g, 0.0)
    return p, np.log2(1.0 + p * g)


def _pnc_uplink(w, g1, g2):
    h = 1.0 / g1 + 1.0 / g2
    active = w > PNC_ACTIVATION * h
    # common received SNR under channel inversion
    snr = np.where(active, w / h - 0.5, 0.0)
    rate = np.where(active, np.log2(0.5 + snr), 0.0)
    return snr / g1, snr / g2, rate


def _bc_superposition(wp, wc, ga, gb):
    """Powers and rates (private, common) of the superposition downlink."""
    strong = ga > gb

    # private receiver is the stronger one: three cases of the downlink lemma
    gap = (ga - gb) / (ga * gb)
    case1 = wp * ga <= wc * gb
    case2 = ~case1 & (wc - wp <= gap)
    case3 = ~case1 & ~case2
    two_w = np.maximum(wp * ga, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        two_u = np.clip((wc - wp) / gap, 1.0, two_w)
        pp3 = (two_w / two_u - 1.0) / ga
        pc3 = (two_u - 1.0) * (1.0 / gb + pp3)
    pc_s = np.where(case1, np.maximum(wc - 1.0 / gb, 0.0), np.where(case3, pc3, 0.0))
    pp_s = np.where(case2, np.maximum(wp - 1.0 / ga, 0.0), np.where(case3, pp3, 0.0))

    # private receiver is the weaker one: only the sum rate matters and all of
    # it goes to the stream with the larger multiplier (ties to common)
    total = np.maximum(np.maximum(wc, wp) - 1.0 / ga, 0.0)
    to_common = wc >= wp
    pc_w = np.where(to_common, total, 0.0)
    pp_w = np.where(to_common, 0.0, total)

    pp = np.where(strong, pp_s, pp_w)
    pc = np.where(strong, pc_s, pc_w)
    rp = np.log2(1.0 + pp * ga)
    rc = np.log2(1.0 + pc * np.minimum(ga, gb) / (1.0 + pp * np.minimum(ga, gb)))
    return pp, pc, rp, rc


def _mac_uplink(ws, ww, gs, gw):
    """Powers and rates (strong, weak); the strong user is decoded first."""
    gw = np.where(gw >= gs, np.nextafter(gs, 0.0), gw)
    gap = (gs - gw) / (gs * gw)
    case1 = ww <= ws
    case2a = ~case1 & (ws * gs <= ww * gw)
    case2b = ~case1 & ~case2a & (ww - ws <= gap)
    case2c = ~case1 & ~case2a & ~case2b
    # case 2c in exponent form: 2**R_weak and 2**(R_weak + R_strong). Equal to
    # the lemma's closed forms but stable when the gains nearly tie.
    two_y = np.maximum(ws * gs, 1.0)
    two_x = np.clip((ww - ws) / gap, 1.0, two_y)
    strong_only = case1 | case2b
    ps = np.where(strong_only, np.maximum(ws - 1.0 / gs, 0.0),
                  np.where(case2c, (two_y - two_x) / gs, 0.0))
    pw = np.where(case2a, np.maximum(ww - 1.0 / gw, 0.0),
                  np.where(case2c, (two_x - 1.0) / gw, 0.0))
    rw = np.log2(1.0 + pw * gw)
    rs = np.log2(1.0 + ps * gs / (1.0 + pw * gw))
    return ps, pw, rs, rw


# -- public allocators ---------------------------------------------------------

def p2p_waterfill(beta, g) -> ModeAllocation:
    """Water-filling on a single point-to-point link."""
    _validate((beta,), (g,))
    p, r = _waterfill(np.asarray(beta, dtype=float) * LOG2E, np.asarray(g, dtype=float))
    return ModeAllocation({"P": _out(p)}, {"R": _out(r)}, _out(p - beta * r))


def pnc_uplink_alloc(beta1, sample: ChannelSample) -> ModeAllocation:
    """PNC uplink: both sources transmit with equal received SNR.

    When active, the total power is ``beta1*log2(e) - (1/g_1r + 1/g_2r)/2``
    and is split so that ``P11*g_1r == P12*g_2r``. The mode activates only
    when transmitting lowers the Lagrangian below that of silence, which also
    guarantees a positive rate ``log2(1/2 + SNR)``.
    """
    _validate((beta1,), (sample.g_1r, sample.g_2r))
    beta1 = np.asarray(beta1, dtype=float)
    p11, p12, r = _pnc_uplink(beta1 * LOG2E, np.asarray(sample.g_1r, dtype=float),
                              np.asarray(sample.g_2r, dtype=float))
    return ModeAllocation({"P11": _out(p11), "P12": _out(p12)}, {"R1": _out(r)},
                          _out(p11 + p12 - beta1 * r))


def pnc_mode2_alloc(beta2, sample: ChannelSample) -> ModeAllocation:
    """Excess bits of the longer message from S2 to the relay."""
    return p2p_waterfill(beta2, sample.g_2r)


def bc_superposition_power(r_private, r_common, g_a, g_b):
    """Powers ``(P_private, P_common)`` needed for a rate pair.

    The private stream goes to the receiver with gain ``g_a``; the common
    stream must be decoded by both receivers in the presence of the private
    one.
    """
    r_private = np.asarray(r_private, dtype=float)
    r_common = np.asarray(r_common, dtype=float)
    if (r_private < 0).any() or (r_common < 0).any():
        raise ValueError("rates must be >= 0")
    _validate((), (g_a, g_b))
    g_a = np.asarray(g_a, dtype=float)
    g_b = np.asarray(g_b, dtype=float)
    p_private = np.expm1(r_private * math.log(2)) / g_a
    p_common = np.where(
        g_a >= g_b,
        np.expm1(r_common * math.log(2)) * (1.0 / g_b + p_private),
        np.exp2(r_private) * np.expm1(r_common * math.log(2)) / g_a,
    )
    return _out(p_private), _out(p_common)


def bc_superposition_alloc(beta_p, beta_c, g_a, g_b) -> ModeAllocation:
    """Superposition downlink: common stream to both, private stream to ``g_a``.

    For ``g_a > g_b`` this is the three-case downlink lemma. For ``g_a <= g_b``
    the common stream is limited by ``g_a`` as well, so the total power is a
    single water-fill on ``g_a`` assigned to the stream with the larger
    multiplier.
    """
    _validate((beta_p, beta_c), (g_a, g_b))
    beta_p = np.asarray(beta_p, dtype=float)
    beta_c = np.asarray(beta_c, dtype=float)
    pp, pc, rp, rc = _bc_superposition(beta_p * LOG2E, beta_c * LOG2E,
                                       np.asarray(g_a, dtype=float), np.asarray(g_b, dtype=float))
    return ModeAllocation(
        {"private": _out(pp), "common": _out(pc)},
        {"private": _out(rp), "common": _out(rc)},
        _out(pp + pc - beta_p * rp - beta_c * rc),
    )


def mac_uplink_alloc(beta_strong, beta_weak, g_strong, g_weak) -> ModeAllocation:
    """Multi-access uplink with successive decoding, stronger user first.

    The weaker user is decoded last and sees no interference, so
    ``R_strong + R_weak == log2(1 + P_strong*g_strong + P_weak*g_weak)``.
    An exact gain tie is broken by lowering ``g_weak`` by one ulp.
    """
    _validate((beta_strong, beta_weak), (g_strong, g_weak))
    g_strong = np.asarray(g_strong, dtype=float)
    g_weak = np.asarray(g_weak, dtype=float)
    if (g_weak > g_strong).any():
        raise ValueError("g_strong must be >= g_weak")
    beta_strong = np.asarray(beta_strong, dtype=float)
    beta_weak = np.asarray(beta_weak, dtype=float)
    ps, pw, rs, rw = _mac_uplink(beta_strong * LOG2E, beta_weak * LOG2E, g_strong, g_weak)
    return ModeAllocation(
        {"strong": _out(ps), "weak": _out(pw)},
        {"strong": _out(rs), "weak": _out(rw)},
        _out(ps + pw - beta_strong * rs - beta_weak * rw),
    )


def cw_downlink_alloc(beta_1, beta_2, g_r1, g_r2) -> ModeAllocation:
    """Codeword superposition: two interference-free water-fills."""
    _validate((beta_1, beta_2), (g_r1, g_r2))
    beta_1 = np.asarray(beta_1, dtype=float)
    beta_2 = np.asarray(beta_2, dtype=float)
    p1, r1 = _waterfill(beta_1 * LOG2E, np.asarray(g_r1, dtype=float))
    p2, r2 = _waterfill(beta_2 * LOG2E, np.asarray(g_r2, dtype=float))
    return ModeAllocation(
        {"P61": _out(p1), "P62": _out(p2)},
        {"R61": _out(r1), "R62": _out(r2)},
        _out(p1 + p2 - beta_1 * r1 - beta_2 * r2),
    )
