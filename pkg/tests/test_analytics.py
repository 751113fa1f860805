import math
from decimal import Decimal, getcontext

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flitsim.analytics import (
    AnalyticInputs,
    analyze,
    bw_loss_retry,
    bw_loss_standalone,
    bw_loss_switched,
    fer_from_ber,
    fer_order,
    fer_ud,
    fit,
    fit_curve,
    fit_vs_levels,
    p_correct,
)

getcontext().prec = 60


def fer_decimal(ber, n):
    return 1 - (1 - Decimal(repr(ber))) ** n


@pytest.mark.parametrize("ber,n", [(1e-6, 2048), (1e-12, 528), (1e-15, 2048), (0.3, 7)])
def test_fer_matches_high_precision(ber, n):
    assert fer_from_ber(ber, n) == pytest.approx(float(fer_decimal(ber, n)), rel=1e-12)


def test_fer_examples():
    assert fer_from_ber(1e-6, 2048) == pytest.approx(2.0459e-3, rel=1e-4)
    assert fer_from_ber(1e-12, 528) == pytest.approx(5.28e-10, rel=1e-6)
    assert fer_from_ber(0, 99) == 0 and fer_from_ber(1, 3) == 1


@given(st.floats(1e-15, 1e-4), st.integers(1, 4096))
def test_fer_monotone(ber, n):
    assert fer_from_ber(ber * 1.5, n) > fer_from_ber(ber, n)
    assert fer_from_ber(ber, n + 1) > fer_from_ber(ber, n)


def test_p_correct():
    assert p_correct(2.0459e-3, 3e-5) == pytest.approx(0.98534, abs=1e-5)
    assert p_correct(3e-5, 3e-5) == 0
    assert p_correct(1e-3, 0) == 1
    with pytest.raises(ValueError):
        p_correct(1e-6, 3e-5)


def test_fer_ud_modes():
    assert fer_ud(3e-5, mode="direct") == pytest.approx(1.626e-24, rel=1e-3)
    assert fer_ud(3e-5, mode="rxl_printed") == pytest.approx(5.421e-20, rel=1e-3)
    assert fer_ud(3e-5, mode="rxl", levels=1) == pytest.approx(3e-5 * (1 + 3e-5) * 2.0**-64)
    assert fer_ud(0, mode="direct") == 0
    with pytest.raises(ValueError):
        fer_ud(3e-5, mode="bogus")


def test_fit_examples():
    assert fit(1.6e-24, 5e8) == pytest.approx(2.88e-3)
    assert fit(3.0e-6, 5e8) == pytest.approx(5.4e15)
    assert fit(0, 5e8) == 0


def test_fer_order():
    assert fer_order(3e-5, 0.1) == pytest.approx(3e-6)
    assert fer_order(0.2, 0) == 0 and fer_order(0.2, 1) == 0.2


def test_bw_loss():
    # 1 - s / (s + p*r), evaluated by hand
    assert bw_loss_retry(3e-5) == pytest.approx(1 - 2 / 2.003, rel=1e-12)
    assert bw_loss_retry(6e-5) == pytest.approx(1 - 2 / 2.006, rel=1e-12)
    assert bw_loss_retry(3e-5) == pytest.approx(1.4998e-3, rel=1e-2)
    assert bw_loss_retry(0) == 0
    assert bw_loss_standalone(1) == 1.0 and bw_loss_standalone(0.1) == 0.1
    assert bw_loss_switched(3e-5, 1) == bw_loss_retry(6e-5)
    assert bw_loss_switched(3e-5, 0) == bw_loss_retry(3e-5)


def test_fit_vs_levels_examples():
    d = AnalyticInputs()
    assert fit_vs_levels("baseline", 1, d) == pytest.approx(5.4e15)
    assert fit_vs_levels("baseline", 0, d) == pytest.approx(2.93e-3, rel=1e-2)
    assert fit_vs_levels("rxl", 1, d) == pytest.approx(2.93e-3, rel=1e-2)
    assert fit_vs_levels("baseline", 1, d) / fit_vs_levels("rxl", 1, d) > 1e18


def test_baseline_curve_strictly_increasing():
    fits = [b for _, b, _ in fit_curve(max_levels=8)]
    assert all(a < b for a, b in zip(fits, fits[1:]))


def test_rxl_curve_nearly_flat():
    # per-level step is ~8.8e-8 FIT (absolute) and far below 1e-19 per flit
    d = AnalyticInputs()
    for L in range(8):
        step = fer_ud(d.fer_uc, mode="rxl", levels=L + 1) - fer_ud(d.fer_uc, mode="rxl", levels=L)
        assert 0 <= step < 1e-19
        assert fit_vs_levels("rxl", L + 1) / fit_vs_levels("rxl", L) - 1 < 1e-4


def test_analyze_report_fields():
    r = analyze(AnalyticInputs(switch_levels=1), "baseline")
    assert r.fer == pytest.approx(2.0459e-3, rel=1e-4)
    assert r.fer_order == pytest.approx(3e-6) and r.fit_device == pytest.approx(5.4e15)
    assert r.bw_loss_switched == pytest.approx(1 - 2 / 2.006, rel=1e-12)
    x = analyze(AnalyticInputs(switch_levels=1), "rxl")
    assert x.fer_order == 0 and x.fit_device < 1e-2


def test_analyze_tiny_ber_has_no_p_correct():
    assert math.isnan(analyze(AnalyticInputs(ber=1e-12)).p_correct)


@pytest.mark.parametrize("kw", [{"ber": 2}, {"flit_bits": 0}, {"p_coalescing": -1}, {"switch_levels": -1}])
def test_input_validation(kw):
    with pytest.raises(ValueError):
        AnalyticInputs(**kw)
