"""Closed-form key-rate model of RRDPS with one delay choice per sequence.

A sequence is ``M`` blocks of ``L`` pulses sharing one interferometer delay.
Alice's block is tagged when it carries more than ``nu_th`` photons; a
sequence is tagged when any of its blocks is. Bob keeps the first block with
a detection. The detection rate, bit error rate and double-count estimate are
the leading-order channel expressions (coherent source, loss ``eta``, dark
count ``d_c`` per slot, interferometer efficiency 1/2).

Every function here is pure and safe to call concurrently.
"""

from __future__ import annotations

import math

from rrdps.enums import Detector, RateStatus
from rrdps.errors import NoValidBoundError, UndefinedRateError
from rrdps.schemas.params import ProtocolParams
from rrdps.schemas.results import KeyRateResult

_LN2 = math.log(2.0)
# Stop summing a Poisson tail once terms fall below this fraction of the total
_TAIL_EPS = 1e-18


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / _LN2


def _log_poisson_pmf(lam: float, k: int) -> float:
    return -lam + k * math.log(lam) - math.lgamma(k + 1)


def _upper_tail(lam: float, nu_th: int) -> float:
    # terms decrease from k = nu_th + 1 because nu_th >= lam
    k = nu_th + 1
    term = math.exp(_log_poisson_pmf(lam, k))
    terms: list[float] = []
    total = 0.0
    while term > 0.0 and term >= _TAIL_EPS * total:
        terms.append(term)
        total += term
        k += 1
        term *= lam / k
    return math.fsum(terms)


def _lower_sum(lam: float, nu_th: int) -> float:
    # terms increase up to k = nu_th because nu_th < lam; sum downwards
    k = nu_th
    term = math.exp(_log_poisson_pmf(lam, k))
    terms: list[float] = []
    total = 0.0
    while k >= 0 and term > 0.0 and term >= _TAIL_EPS * total:
        terms.append(term)
        total += term
        term *= k / lam
        k -= 1
    return math.fsum(terms)


def e_src(L: int, mu: float, nu_th: int) -> float:
    """Probability that an L-pulse coherent block carries more than nu_th photons.

    The block photon number is Poisson(L*mu). The small tail is summed
    directly; when nu_th < L*mu the tail is large and taken as one minus the
    lower sum, so neither branch cancels catastrophically.
    """
    if L < 1 or mu < 0 or nu_th < 0:
        raise ValueError(f"invalid source parameters L={L}, mu={mu}, nu_th={nu_th}")
    lam = L * mu
    if lam == 0.0:
        return 0.0
    if nu_th >= lam:
        return min(1.0, _upper_tail(lam, nu_th))
    return min(1.0, max(0.0, 1.0 - _lower_sum(lam, nu_th)))


def e_src_slow(e_src: float, M: int) -> float:
    """1 - (1 - e_src)^M, evaluated without cancellation for e_src*M << 1."""
    if not 0.0 <= e_src <= 1.0:
        raise ValueError(f"e_src must lie in [0, 1], got {e_src!r}")
    if M < 1:
        raise ValueError(f"M must be positive, got {M}")
    if e_src == 1.0:
        return 1.0
    return -math.expm1(M * math.log1p(-e_src))


def _geometric_from_decay(a: float, M: int) -> float:
    """sum_{m<M} exp(-a m) for a >= 0."""
    if a == 0.0:
        return float(M)
    return math.expm1(-M * a) / math.expm1(-a)


def geometric_series(r: float, M: int) -> float:
    """Closed form of sum_{m=0}^{M-1} r^m for r in [0, 1]."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {r!r}")
    if M < 1:
        raise ValueError(f"M must be positive, got {M}")
    if r == 0.0:
        return 1.0
    return _geometric_from_decay(-math.log(r), M)


def _channel(L: int, M: int, mu: float, eta: float, d_c: float) -> tuple[float, float, float]:
    """Mean arrivals per block x, exp(-x), and the no-click geometric factor."""
    x = L * eta * mu
    ex = math.exp(-x)
    # (1 - d_c)^(2L) over all 2L slots of a block
    dark_decay = math.inf if d_c >= 1.0 else -2 * L * math.log1p(-d_c)
    return x, ex, _geometric_from_decay(x + dark_decay, M)


def _detection(L: int, M: int, mu: float, eta: float, d_c: float) -> float:
    x, ex, geo = _channel(L, M, mu, eta, d_c)
    return geo * (0.5 * x * ex + L * d_c)


def _bit_error(L: int, mu: float, eta: float, e_sys: float, d_c: float) -> float:
    x = L * eta * mu
    signal = 0.5 * x * math.exp(-x)
    denominator = signal + L * d_c
    if denominator <= 0.0:
        raise UndefinedRateError("detection rate is zero; bit error rate undefined")
    # the geometric prefactor is common to numerator and Q
    return (signal * e_sys + 0.5 * L * d_c) / denominator


def _double_count(L: int, M: int, mu: float, eta: float, d_c: float) -> float:
    x, ex, geo = _channel(L, M, mu, eta, d_c)
    per_block = (
        x * x * ex / 16.0
        + 0.5 * x * ex * (2 * L - 1) * d_c
        + L * (2 * L - 1) * d_c * d_c
    )
    return 8.0 * geo * per_block


def detection_rate_Q(p: ProtocolParams) -> float:
    """Detection rate per sequence (first clicked block)."""
    return _detection(p.L, p.M, p.mu, p.eta, p.d_c)


def bit_error_rate(p: ProtocolParams) -> float:
    return _bit_error(p.L, p.mu, p.eta, p.e_sys, p.d_c)


def double_count_bound(p: ProtocolParams) -> float:
    """Eight times the beam-dump double-count rate per sequence."""
    return _double_count(p.L, p.M, p.mu, p.eta, p.d_c)


def e_mB(p: ProtocolParams) -> float:
    """Multi-photon bound entering the threshold formula; zero for PNR detectors."""
    if p.detector is Detector.PNR:
        return 0.0
    return double_count_bound(p)


def _phase_error(e_src_slow: float, usable: float, nu_th: int, L: int) -> float:
    ratio = e_src_slow / usable
    if ratio > 1.0:
        raise NoValidBoundError(ratio)
    # the sum can round one ulp above 1 at nu_th = L - 1
    return min(1.0, ratio + (1.0 - ratio) * nu_th / (L - 1))


def phase_error_penalty(e_ph: float) -> float:
    """Privacy-amplification cost h(e_ph); a phase error of 1/2 or more leaves no key."""
    if e_ph >= 0.5:
        return 1.0
    return binary_entropy(e_ph)


def phase_error_pnr(e_src_slow: float, Q: float, nu_th: int, L: int) -> float:
    if Q <= 0.0:
        raise UndefinedRateError("phase error needs Q > 0")
    return _phase_error(e_src_slow, Q, nu_th, L)


def phase_error_threshold(
    e_src_slow: float, Q: float, e_mB: float, nu_th: int, L: int
) -> float:
    if Q <= 0.0:
        raise UndefinedRateError("phase error needs Q > 0")
    usable = Q - e_mB
    if usable <= 0.0:
        raise NoValidBoundError(math.inf)
    return _phase_error(e_src_slow, usable, nu_th, L)


_Evaluation = tuple[float, float, float, float, float, float, float, float, RateStatus]


def _assemble(
    Q: float,
    e_bit: float,
    e_src_: float,
    e_src_slow_: float,
    e_mB_: float,
    nu_th: int,
    L: int,
    M: int,
    c_d: int,
    detector: Detector,
) -> _Evaluation:
    """Key rate from the channel quantities.

    Returns (G, G_raw, Q, e_bit, e_ph, e_src, e_src_slow, e_mB, status).
    """
    nan = math.nan
    if detector is Detector.PNR:
        e_mB_ = 0.0
    if Q <= 0.0 or math.isnan(e_bit):
        return 0.0, 0.0, Q, nan, nan, e_src_, e_src_slow_, e_mB_, RateStatus.undefined_rate
    try:
        if detector is Detector.PNR:
            e_ph = phase_error_pnr(e_src_slow_, Q, nu_th, L)
            penalty = phase_error_penalty(e_ph)
        else:
            e_ph = phase_error_threshold(e_src_slow_, Q, e_mB_, nu_th, L)
            multi = e_mB_ / Q
            penalty = multi + (1.0 - multi) * phase_error_penalty(e_ph)
    except NoValidBoundError:
        return 0.0, 0.0, Q, e_bit, nan, e_src_, e_src_slow_, e_mB_, RateStatus.no_valid_bound
    g_raw = Q / (M * L + c_d) * (1.0 - binary_entropy(e_bit) - penalty)
    status = RateStatus.ok if g_raw >= 0.0 else RateStatus.negative
    return max(g_raw, 0.0), g_raw, Q, e_bit, e_ph, e_src_, e_src_slow_, e_mB_, status


def _to_result(values: _Evaluation) -> KeyRateResult:
    G, G_raw, Q, e_bit, e_ph, e_src_, slow, mB, status = values
    return KeyRateResult(
        G=G,
        G_raw=G_raw,
        Q=Q,
        e_bit=e_bit,
        e_ph=e_ph,
        e_src=e_src_,
        e_src_slow=slow,
        e_mB=mB,
        status=status,
    )


def assemble_key_rate(
    Q: float,
    e_bit: float,
    e_src: float,
    e_src_slow: float,
    e_mB: float,
    *,
    nu_th: int,
    L: int,
    M: int,
    c_d: int = 0,
    detector: Detector = Detector.PNR,
) -> KeyRateResult:
    """Key rate from already computed channel quantities (e_mB may be forced)."""
    return _to_result(
        _assemble(Q, e_bit, e_src, e_src_slow, e_mB, nu_th, L, M, c_d, detector)
    )


def evaluate(
    L: int,
    M: int,
    mu: float,
    nu_th: int,
    eta: float,
    e_sys: float,
    d_c: float,
    c_d: int,
    detector: Detector,
) -> _Evaluation:
    """Tuple-returning path shared by :func:`key_rate` and the optimizer."""
    src = e_src(L, mu, nu_th)
    slow = e_src_slow(src, M)
    Q = _detection(L, M, mu, eta, d_c)
    try:
        e_bit = _bit_error(L, mu, eta, e_sys, d_c)
    except UndefinedRateError:
        e_bit = math.nan
    mB = 0.0 if detector is Detector.PNR else _double_count(L, M, mu, eta, d_c)
    return _assemble(Q, e_bit, src, slow, mB, nu_th, L, M, c_d, detector)


def key_rate(p: ProtocolParams) -> KeyRateResult:
    """Secret key rate per pulse, raw and clamped at zero.

    The denominator is ``M*L + c_d``: pulses spent on device initialization
    cost rate but never enter the sequence count used for tagging.
    """
    return _to_result(
        evaluate(p.L, p.M, p.mu, p.nu_th, p.eta, p.e_sys, p.d_c, p.c_d, p.detector)
    )
