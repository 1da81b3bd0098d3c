import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrdps.core.keyrate import (
    assemble_key_rate,
    binary_entropy,
    bit_error_rate,
    detection_rate_Q,
    e_mB,
    e_src,
    e_src_slow,
    geometric_series,
    key_rate,
    phase_error_penalty,
    phase_error_pnr,
    phase_error_threshold,
)
from rrdps.enums import Detector, RateStatus
from rrdps.errors import NoValidBoundError, UndefinedRateError
from rrdps.schemas import ProtocolParams

mpmath.mp.dps = 60


def _mp_entropy(x):
    x = mpmath.mpf(x)
    return -(x * mpmath.log(x, 2) + (1 - x) * mpmath.log(1 - x, 2))


def _mp_tail(L, mu, nu_th):
    lam = mpmath.mpf(L) * mpmath.mpf(mu)

    def pmf(k):
        return mpmath.exp(-lam) * lam**k / mpmath.factorial(k)

    if nu_th >= lam:
        return mpmath.fsum(pmf(k) for k in range(nu_th + 1, nu_th + 600))
    return 1 - mpmath.fsum(pmf(k) for k in range(nu_th + 1))


@st.composite
def source_points(draw):
    L = draw(st.integers(min_value=1, max_value=256))
    mu = draw(st.floats(min_value=1e-4, max_value=2.0))
    nu_th = draw(st.integers(min_value=0, max_value=min(L - 1, 30)))
    return L, mu, nu_th


@st.composite
def operating_points(draw):
    L = draw(st.integers(min_value=2, max_value=256))
    return ProtocolParams(
        L=L,
        M=draw(st.integers(min_value=1, max_value=10**6)),
        mu=draw(st.floats(min_value=1e-6, max_value=1.0)),
        nu_th=draw(st.integers(min_value=0, max_value=L - 1)),
        eta=draw(st.floats(min_value=1e-7, max_value=1.0)),
        e_sys=draw(st.floats(min_value=0.0, max_value=0.2)),
        d_c=draw(st.floats(min_value=1e-12, max_value=1e-6)),
    )


def test_binary_entropy_boundaries():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0, rel=1e-15)
    assert binary_entropy(0.11) == pytest.approx(float(_mp_entropy("0.11")), rel=1e-12)
    assert binary_entropy(0.11) == pytest.approx(0.49993, abs=2e-5)


@pytest.mark.parametrize("bad", [-0.1, 1.5, math.nan])
def test_binary_entropy_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_e_src_examples():
    assert e_src(64, 0.0, 3) == 0.0
    assert e_src(1, 0.3, 0) == pytest.approx(-math.expm1(-0.3), rel=1e-14)
    assert e_src(1, 0.3, 0) == pytest.approx(0.259182, abs=1e-6)
    assert e_src(128, 0.01, 3) == pytest.approx(0.0412, abs=1e-4)


@settings(max_examples=150, deadline=None)
@given(source_points())
def test_e_src_matches_high_precision_tail(point):
    L, mu, nu_th = point
    expected = float(_mp_tail(L, mu, nu_th))
    assert e_src(L, mu, nu_th) == pytest.approx(expected, rel=1e-9)


def test_e_src_slow_examples():
    assert e_src_slow(0.37, 1) == pytest.approx(0.37, rel=1e-15)
    assert e_src_slow(0.1, 3) == pytest.approx(0.271, rel=1e-14)
    assert e_src_slow(1e-12, 10**6) == pytest.approx(9.999995e-7, rel=1e-9)
    assert e_src_slow(1.0, 50) == 1.0
    assert e_src_slow(0.0, 50) == 0.0


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=1e-15, max_value=0.5),
    st.integers(min_value=1, max_value=10**6),
)
def test_e_src_slow_matches_high_precision(e, M):
    expected = 1 - (1 - mpmath.mpf(e)) ** M
    assert e_src_slow(e, M) == pytest.approx(float(expected), rel=1e-9)


def test_geometric_series():
    assert geometric_series(1.0, 7) == 7.0
    assert geometric_series(0.0, 7) == 1.0
    assert geometric_series(0.5, 10) == pytest.approx(sum(0.5**m for m in range(10)), rel=1e-14)
    # close to 1: the closed form must not lose digits
    r = 1 - 1e-12
    assert geometric_series(r, 1000) == pytest.approx(
        float(mpmath.fsum(mpmath.mpf(r) ** m for m in range(1000))), rel=1e-9
    )
    with pytest.raises(ValueError):
        geometric_series(1.5, 3)


def test_detection_rate_examples():
    p = ProtocolParams(L=128, M=1, eta=1e-3, mu=0.01, d_c=0.0)
    x = 128 * 1e-3 * 0.01
    assert detection_rate_Q(p) == pytest.approx(0.5 * x * math.exp(-x), rel=1e-13)

    p10 = p.with_point(M=10)
    brute = mpmath.fsum(
        mpmath.exp(-mpmath.mpf(x) * m) * mpmath.mpf(x) / 2 * mpmath.exp(-mpmath.mpf(x))
        for m in range(10)
    )
    assert detection_rate_Q(p10) == pytest.approx(float(brute), rel=1e-12)
    assert detection_rate_Q(p10) == pytest.approx(6.355e-3, abs=1e-6)

    idle = ProtocolParams(eta=0.0, mu=0.0, d_c=0.0, M=10**6)
    assert detection_rate_Q(idle) == 0.0


def test_detection_rate_large_M_is_finite():
    p = ProtocolParams(L=128, M=10**6, eta=1.0, mu=0.5)
    q = detection_rate_Q(p)
    assert 0.0 < q < 1.0


def test_bit_error_rate_examples():
    assert bit_error_rate(ProtocolParams(mu=0.01, eta=1e-3, d_c=0.0, e_sys=0.03)) == pytest.approx(
        0.03, rel=1e-14
    )
    assert bit_error_rate(ProtocolParams(mu=0.0, d_c=1e-6)) == 0.5

    p = ProtocolParams(L=128, eta=1e-3, mu=0.01, d_c=1e-9, e_sys=0.03)
    x = 128e-5
    signal = 0.5 * x * math.exp(-x)
    expected = (signal * 0.03 + 0.5 * 128e-9) / (signal + 128e-9)
    assert bit_error_rate(p) == pytest.approx(expected, rel=1e-14)
    assert bit_error_rate(p) > 0.03

    with pytest.raises(UndefinedRateError):
        bit_error_rate(ProtocolParams(mu=0.0, d_c=0.0))


def test_e_mB_examples():
    x = 128 * 1e-3 * 0.01
    p = ProtocolParams(L=128, M=1, eta=1e-3, mu=0.01, d_c=0.0, detector=Detector.THRESHOLD)
    assert e_mB(p) == pytest.approx(0.5 * x * x * math.exp(-x), rel=1e-13)

    dark = ProtocolParams(L=128, M=1, mu=0.0, d_c=1e-6, detector=Detector.THRESHOLD)
    assert e_mB(dark) == pytest.approx(8 * 128 * 255 * 1e-12, rel=1e-9)

    assert e_mB(p.with_point(detector=Detector.PNR)) == 0.0


def test_e_mB_against_brute_force_sum():
    p = ProtocolParams(
        L=128, M=1000, eta=1e-3, mu=0.01, d_c=1e-9, detector=Detector.THRESHOLD
    )
    L, d = mpmath.mpf(128), mpmath.mpf("1e-9")
    x = L * mpmath.mpf("1e-3") * mpmath.mpf("0.01")
    block = x * x * mpmath.exp(-x) / 16 + x * mpmath.exp(-x) * (2 * L - 1) * d / 2
    block += L * (2 * L - 1) * d * d
    decay = mpmath.exp(-x) * (1 - d) ** (2 * L)
    brute = 8 * block * mpmath.fsum(decay**m for m in range(1000))
    assert e_mB(p) == pytest.approx(float(brute), rel=1e-3)


def test_phase_error_pnr_examples():
    assert phase_error_pnr(0.0, 0.01, 5, 128) == pytest.approx(5 / 127, rel=1e-15)
    assert phase_error_pnr(0.01, 0.01, 17, 128) == pytest.approx(1.0, rel=1e-15)
    assert phase_error_pnr(0.001, 0.01, 4, 128) == pytest.approx(0.12835, abs=1e-5)


def test_phase_error_pnr_errors():
    with pytest.raises(UndefinedRateError):
        phase_error_pnr(0.0, 0.0, 1, 128)
    with pytest.raises(NoValidBoundError) as info:
        phase_error_pnr(0.02, 0.01, 1, 128)
    assert info.value.ratio == pytest.approx(2.0)


def test_phase_error_threshold_examples():
    assert phase_error_threshold(0.0, 0.01, 0.005, 2, 65) == pytest.approx(2 / 64, rel=1e-15)
    assert phase_error_threshold(0.001, 0.011, 0.001, 4, 128) == pytest.approx(
        phase_error_pnr(0.001, 0.01, 4, 128), rel=1e-12
    )
    assert phase_error_threshold(0.001, 0.01, 0.0, 4, 128) == phase_error_pnr(0.001, 0.01, 4, 128)
    with pytest.raises(NoValidBoundError):
        phase_error_threshold(0.0, 0.01, 0.01, 4, 128)


def test_key_rate_without_errors_is_detection_over_pulses():
    res = assemble_key_rate(0.01, 0.0, 0.0, 0.0, 0.0, nu_th=0, L=128, M=10)
    assert res.G == pytest.approx(0.01 / 1280, rel=1e-15)
    assert res.status is RateStatus.ok


def test_key_rate_initialization_gap_only_scales_denominator():
    p = ProtocolParams(L=128, M=100, eta=1e-3, mu=1e-3, nu_th=3)
    with_gap = key_rate(p.with_point(c_d=128_000))
    without = key_rate(p)
    assert with_gap.G_raw == pytest.approx(without.G_raw * 12_800 / 140_800, rel=1e-12)
    assert with_gap.e_ph == without.e_ph


def test_key_rate_statuses():
    assert key_rate(ProtocolParams(mu=0.0, d_c=0.0)).status is RateStatus.undefined_rate
    undefined = key_rate(ProtocolParams(mu=0.0, d_c=0.0))
    assert undefined.G == 0.0 and math.isnan(undefined.e_bit)

    bad = key_rate(ProtocolParams(L=128, M=10**6, eta=1e-6, mu=0.5, nu_th=0))
    assert bad.status is RateStatus.no_valid_bound
    assert bad.G == 0.0 and math.isnan(bad.e_ph)

    noisy = key_rate(ProtocolParams(eta=1e-2, mu=1e-3, nu_th=3, e_sys=0.5))
    assert noisy.status is RateStatus.negative
    assert noisy.G == 0.0 and noisy.G_raw < 0.0


@settings(max_examples=1000, deadline=None)
@given(operating_points())
def test_threshold_formula_reduces_to_pnr(p):
    pnr = key_rate(p)
    res = assemble_key_rate(
        pnr.Q,
        pnr.e_bit,
        pnr.e_src,
        pnr.e_src_slow,
        0.0,
        nu_th=p.nu_th,
        L=p.L,
        M=p.M,
        c_d=0,
        detector=Detector.THRESHOLD,
    )
    assert res.status is pnr.status
    assert res.G == pytest.approx(pnr.G, rel=1e-12, abs=0.0)
    assert res.G_raw == pytest.approx(pnr.G_raw, rel=1e-12, abs=0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(L=128, nu_th=128)
    with pytest.raises(ValueError):
        ProtocolParams(eta=1.5)
    with pytest.raises(ValueError):
        ProtocolParams(L=1)


def test_full_threshold_range_is_evaluated():
    # nu_th = L - 1 puts e_ph at 1 up to rounding
    p = ProtocolParams(
        L=128,
        M=20_000,
        mu=0.6309573444801942,
        nu_th=127,
        eta=1e-7,
        c_d=128_000,
        detector=Detector.THRESHOLD,
    )
    res = key_rate(p)
    assert 1.0 - 1e-12 <= res.e_ph <= 1.0
    assert res.G == 0.0
    assert res.status is RateStatus.negative

    pnr = key_rate(ProtocolParams(L=128, M=10_000, mu=0.01, nu_th=127, eta=0.316))
    assert pnr.e_ph <= 1.0 and pnr.G == 0.0


def test_phase_error_of_one_half_or_more_leaves_no_key():
    assert phase_error_penalty(0.3) == binary_entropy(0.3)
    assert phase_error_penalty(0.5) == 1.0
    assert phase_error_penalty(1.0) == 1.0
    # a fully tagged key must not come for free
    res = assemble_key_rate(0.01, 0.0, 0.0, 0.0, 0.0, nu_th=127, L=128, M=1)
    assert res.e_ph == 1.0
    assert res.G_raw == 0.0 and res.G == 0.0


@settings(max_examples=300, deadline=None)
@given(
    st.integers(min_value=1, max_value=256),
    st.floats(min_value=0.0, max_value=2.0),
    st.floats(min_value=0.0, max_value=2.0),
    st.integers(min_value=0, max_value=255),
)
def test_e_src_grows_with_mu(L, mu_a, mu_b, nu_th):
    lo, hi = sorted((mu_a, mu_b))
    assert e_src(L, lo, nu_th) <= e_src(L, hi, nu_th) * (1 + 1e-9) + 1e-15


@settings(max_examples=300, deadline=None)
@given(
    st.integers(min_value=1, max_value=256),
    st.floats(min_value=0.0, max_value=2.0),
    st.integers(min_value=0, max_value=255),
    st.integers(min_value=0, max_value=255),
)
def test_e_src_shrinks_with_threshold(L, mu, nu_a, nu_b):
    lo, hi = sorted((nu_a, nu_b))
    assert e_src(L, mu, hi) <= e_src(L, mu, lo) * (1 + 1e-9) + 1e-15


@settings(max_examples=30, deadline=None)
@given(
    st.integers(min_value=5_000, max_value=9_999),
    st.floats(min_value=0.9, max_value=1.1),
)
def test_e_src_stable_at_large_thresholds(nu_th, ratio):
    L = 10_000
    mu = nu_th * ratio / L
    lam = mpmath.mpf(L) * mpmath.mpf(mu)
    expected = mpmath.gammainc(nu_th + 1, 0, lam, regularized=True)
    assert e_src(L, mu, nu_th) == pytest.approx(float(expected), rel=1e-8)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=1, max_value=10**6))
def test_e_src_slow_never_below_single_block(x, M):
    slow = e_src_slow(x, M)
    if M == 1 or x in (0.0, 1.0):
        assert slow == pytest.approx(x, rel=1e-14)
    else:
        assert slow > x


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=1, max_value=10**4))
def test_geometric_closed_form_matches_summation(r, M):
    expected = math.fsum(r**m for m in range(M))
    assert geometric_series(r, M) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(operating_points(), st.integers(min_value=0, max_value=10**6))
def test_raw_rate_never_exceeds_detection_per_pulse(p, c_d):
    point = p.with_point(c_d=c_d)
    res = key_rate(point)
    assert res.G_raw <= res.Q / (point.M * point.L + c_d) * (1 + 1e-12)


@settings(max_examples=300, deadline=None)
@given(
    operating_points(),
    st.floats(min_value=0.0, max_value=0.5),
    st.floats(min_value=0.0, max_value=0.5),
)
def test_rate_nonincreasing_in_system_error(p, e_a, e_b):
    lo, hi = sorted((e_a, e_b))
    low = key_rate(p.with_point(e_sys=lo))
    high = key_rate(p.with_point(e_sys=hi))
    scale = low.Q / (p.M * p.L + p.c_d)
    assert high.G_raw <= low.G_raw + 1e-12 * scale
    assert high.G <= low.G + 1e-12 * scale
