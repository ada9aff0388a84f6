import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from vecselnoise.model import (
    ConfigError,
    HierarchyWarning,
    ModelParams,
    ParameterError,
    check_hierarchy,
    check_validity,
    derive_rates,
    format_params,
    parse_config_text,
    threshold_rate,
)
from vecselnoise.steadystate import closed_form_steady


class _I:
    def __init__(self, I_a, I_b):
        self.I_a, self.I_b = I_a, I_b


def test_reference_threshold():
    p = ModelParams()
    assert threshold_rate(p, "a") == pytest.approx(5e5, rel=1e-14)
    assert threshold_rate(p, "b") == pytest.approx(5e5, rel=1e-14)


def test_detuning_raises_threshold():
    p = ModelParams(nu=1e3)
    # d doubles when nu = gamma_perp
    assert threshold_rate(p, "a") == pytest.approx(1e6, rel=1e-14)


def test_pump_split_reference():
    p = ModelParams()
    dr = derive_rates(p)
    s = math.sqrt(0.8)
    assert dr.R_3 == pytest.approx(s * 5.05e5)
    assert dr.R_b == pytest.approx(5.05e5)
    assert dr.R_1 == pytest.approx((1 - s) * 5.05e5)
    assert dr.R_2 == pytest.approx((1 - s) * 5.05e5)
    assert dr.R == pytest.approx(dr.R_1 + dr.R_2 + dr.R_3)
    assert dr.zeta_ab == pytest.approx(0.8)
    assert dr.c_a == pytest.approx(1e-5)


def test_asymmetric_pump_split():
    p = ModelParams(xi_a=0.4, xi_b=0.9, R_a=1e6)
    dr = derive_rates(p)
    assert dr.R_3 == pytest.approx(math.sqrt(0.4) * 1e6)
    assert dr.R_b == pytest.approx(math.sqrt(0.4) * 1e6 / math.sqrt(0.9))


@pytest.mark.parametrize("bad", [
    {"kappa_ap": 1.0},
    {"kappa_bp": 2.0},
    {"xi_a": 0.0},
    {"xi_b": 1.5},
    {"p": -0.1},
    {"gamma_2": -1.0},
    {"g_a": float("nan")},
    {"R_a": -1.0},
    {"dichroism_sign_a": 0},
])
def test_invalid_params_rejected(bad):
    with pytest.raises(ParameterError):
        ModelParams(**bad)


@settings(max_examples=60, deadline=None)
@given(xi_a=st.floats(0.01, 1.0), xi_b=st.floats(0.01, 1.0), R=st.floats(1e3, 1e8))
def test_pump_parts_sum_and_sign(xi_a, xi_b, R):
    dr = derive_rates(ModelParams(xi_a=xi_a, xi_b=xi_b, R_a=R))
    assert dr.R_1 + dr.R_2 + dr.R_3 == pytest.approx(dr.R, rel=1e-12)
    assert dr.R_1 >= 0 and dr.R_2 >= 0 and dr.R_3 >= 0


@settings(max_examples=60, deadline=None)
@given(s=st.floats(1e-3, 1e3), xi=st.floats(0.05, 1.0))
def test_scale_covariance(s, xi):
    base = ModelParams(xi_a=xi, xi_b=xi)
    rates = ("kappa_a", "kappa_b", "kappa_ap", "kappa_bp", "gamma_2", "gamma_1",
             "gamma_perp", "gamma_c", "R_a")
    kw = {k: s * getattr(base, k) for k in rates}
    kw["g_a"] = s * base.g_a
    kw["g_b"] = s * base.g_b
    d0, d1 = derive_rates(base), derive_rates(base.replace(**kw))
    assert d1.d == pytest.approx(s * d0.d, rel=1e-12)
    assert d1.c_a == pytest.approx(s * d0.c_a, rel=1e-12)
    assert d1.r_a == pytest.approx(s * s * d0.r_a, rel=1e-12)
    assert d1.R_1 / d1.R == pytest.approx(d0.R_1 / d0.R, rel=1e-9)
    assert d1.R_b == pytest.approx(s * d0.R_b, rel=1e-12)
    assert d1.zeta_ab == pytest.approx(d0.zeta_ab, rel=1e-12)
    assert d1.zeta_ba == pytest.approx(d0.zeta_ba, rel=1e-12)


def test_hierarchy_reference_ok():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_hierarchy(ModelParams())


def test_hierarchy_warns():
    with pytest.warns(HierarchyWarning):
        assert not check_hierarchy(ModelParams(gamma_perp=20.0))


def test_validity_reference():
    p = ModelParams().with_pump_ratio(1.01)
    rep = check_validity(p, closed_form_steady(p))
    # c (I_a + zeta I_b) / d with I = 5555.56, zeta = 0.8
    assert rep.ratio_a == pytest.approx(1e-5 * 5555.5556 * 1.8 / 10, rel=1e-6)
    assert rep.valid


def test_validity_dark_is_zero():
    rep = check_validity(ModelParams(), _I(0.0, 0.0))
    assert rep.ratio_a == 0 and rep.ratio_b == 0 and rep.valid


def test_validity_flags_strong_pump():
    p = ModelParams().with_pump_ratio(2.0)
    rep = check_validity(p, closed_form_steady(p))
    assert rep.ratio_a > 0.1
    assert not rep.valid


def test_config_roundtrip():
    p = ModelParams(xi_a=0.3, xi_b=0.3, p=1.0, R_a=7.25e5)
    back = parse_config_text("\n".join(format_params(p))).params
    assert back == p


def test_config_pump_ratio_and_comments():
    text = "# reference\nxi_a = 0.5   # overlap\nxi_b = 0.5\n\npump_ratio = 1.01\n"
    p = parse_config_text(text).params
    assert p.pump_ratio == pytest.approx(1.01)
    assert p.xi_a == 0.5


@pytest.mark.parametrize("text, line", [
    ("kappa_a = 1\nbogus = 3\n", 2),
    ("kappa_a = 1\nkappa_a = 2\n", 2),
    ("\n\nxi_a 0.4\n", 3),
    ("g_a = fast\n", 1),
    ("R_a = 1e6\npump_ratio = 1.1\n", 2),
    ("dichroism_sign_b = sideways\n", 1),
])
def test_config_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.lineno == line
    assert f"line {line}" in str(exc.value)


def test_config_degenerate_is_parameter_error():
    with pytest.raises(ParameterError):
        parse_config_text("kappa_ap = 1.0\n")
