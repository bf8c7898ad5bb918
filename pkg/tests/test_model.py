import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.expr import Expression
from blowup_lab.model import (ConfigError, InitialData, ProblemConfig, a5_structural,
                              auto_thresholds, condgam_threshold, constant_data,
                              glassey_exponent, load_problem, parse_corrector,
                              riemann_invariants, validate_assumptions)
from conftest import REFERENCE, REFERENCE_P3, reference_cfg


def test_glassey_exponent():
    assert glassey_exponent(1) == 3
    assert glassey_exponent(2) == 2
    with pytest.raises(ConfigError):
        glassey_exponent(0)


def test_condgam_threshold_is_eight():
    assert condgam_threshold(2, 1) == pytest.approx(8.0, rel=1e-15)


@pytest.mark.parametrize("u0p,u1,f,g", [("0", "3", 3, 3), ("1", "0", 1, -1)])
def test_riemann_invariants_examples(u0p, u1, f, g):
    F, G = riemann_invariants(Expression.parse(u0p), Expression.parse(u1))
    assert F(0.4) == f and G(0.4) == g


def test_riemann_average_recovers_u1():
    u0p, u1 = Expression.parse("sin(3*x)+x^2"), Expression.parse("2+cos(x)*x")
    F, G = riemann_invariants(u0p, u1)
    xs = np.linspace(-2, 2, 17)
    assert np.allclose((F(xs) + G(xs)) / 2, u1(xs), rtol=0, atol=1e-14)


def test_reference_assumptions():
    cfg = reference_cfg()
    rep = validate_assumptions(cfg, constant_data(cfg))
    assert rep["condgam"].satisfied and rep["condgam"].margin == pytest.approx(2.0)
    assert rep["A1"].margin == pytest.approx(0.25 - math.log(1.25))
    assert rep["A2"].satisfied and rep["A2"].margin == 0
    assert rep["A3"].satisfied
    assert rep["A4"].margin == pytest.approx(20.0)
    assert not rep.a5_feasible and not rep["A5"].satisfied
    assert rep.hard_ok and not rep.all_ok


def test_a5_structural_values():
    # 0.5625 * 1.5 - 1 - 1 at the supremal factor
    assert a5_structural(2, 1, 1e12) == pytest.approx(0.5625 * 1.5 - 2.0, rel=1e-9)
    assert a5_structural(3, 0.01, 50) == pytest.approx(0.0161, abs=5e-4)


def test_p3_reference_all_ok():
    cfg = ProblemConfig(**REFERENCE_P3)
    rep = validate_assumptions(cfg, constant_data(cfg))
    assert rep.all_ok and rep.a5_feasible
    assert rep["A5"].margin > 0


def test_condgam_failure_margin():
    cfg = reference_cfg(gamma1=3.5, gamma2=3.5)
    rep = validate_assumptions(cfg, constant_data(cfg))
    assert not rep["condgam"].satisfied
    assert rep["condgam"].margin == pytest.approx(-1.0)
    assert not rep.hard_ok


def test_a2_failure_detected():
    cfg = reference_cfg()
    rep = validate_assumptions(cfg, InitialData.from_strings("5-0.1*exp(-x^2)", "5"))
    assert not rep["A2"].satisfied and not rep.hard_ok


def test_a4_penalises_steep_data():
    cfg = reference_cfg()
    rep = validate_assumptions(cfg, InitialData.from_strings("5+2*exp(-10*x^2)", "5+exp(-10*(x-0.2)^2)"))
    assert not rep["A4"].satisfied and rep.hard_ok


@pytest.mark.parametrize("bad", [
    dict(p=1.0), dict(p=3.5), dict(mu=-1), dict(h=0), dict(gamma1=0),
    dict(corrector="rk9"), dict(thresholds=[100]), dict(thresholds=[200, 100]),
    dict(ladder_order=3), dict(eps1=-1), dict(thresholds=[20, 2e6]),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        reference_cfg(**bad)


def test_load_problem_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        load_problem({**REFERENCE, "gamma3": 1})
    cfg = load_problem(REFERENCE, {"h": 5e-4})
    assert cfg.h == 5e-4


def test_parse_corrector():
    assert parse_corrector("pc") == ("pc", 0)
    assert parse_corrector("fixed_point_7") == ("pc", 7)
    assert parse_corrector("abm4")[0] == "abm4"
    with pytest.raises(ConfigError):
        parse_corrector("fixed_point_x")


@settings(max_examples=60, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(5.0, 100.0), st.sampled_from([1e-3, 5e-4, 2.5e-4]))
def test_auto_thresholds_increasing_above_data(p, gamma, h):
    levels = auto_thresholds(p, gamma, 0.2, h)
    assert all(b > a for a, b in zip(levels, levels[1:]))
    assert all(m > gamma for m in levels)


def test_to_dict_round_trip():
    cfg = reference_cfg(thresholds=[40, 80, 160])
    assert ProblemConfig(**cfg.to_dict()) == cfg
