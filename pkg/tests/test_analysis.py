import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.analysis import (InsufficientData, ShapeError, check_gradient_domination,
                                 check_picard_monotone, check_two_sided, fit_rate_exponent,
                                 paper_rate_constants, power_law_fit, proof_rate_constants)
from blowup_lab.curve import BlowupCurve, curve_extract
from blowup_lab.ode import closed_form_y
from blowup_lab.solver import ConeLattice, FieldSolution, picard_iterates

T1 = math.log(1.25)


def test_stated_constants():
    assert paper_rate_constants(2, 1) == (pytest.approx(1.0), pytest.approx(2.0))
    c1, c2 = paper_rate_constants(3, 1)
    assert c1 == pytest.approx(1.0) and c2 == pytest.approx(4 / math.sqrt(2))


def test_constants_ordered_on_grid():
    for p in (1.5, 2.0, 2.5, 3.0, 4.0):
        for eps0 in (0.25, 0.5, 1.0, 2.0, 4.0):
            c1, c2 = paper_rate_constants(p, eps0)
            assert c1 < c2
            # never below the sharp undamped constant
            assert proof_rate_constants(p, eps0)[1] >= 2 * (p - 1) ** (-1 / (p - 1))


def _synthetic(T=0.3, C=3.0, p=2.0, h=1e-3, J=600, K=290):
    lat = ConeLattice(h, J, K)
    tau = T - lat.t[:, None]
    tot = np.broadcast_to(C * tau ** (-1 / (p - 1)), (K + 1, lat.n))
    phi = np.where(lat.inside, tot / 2, np.nan)
    sol = FieldSolution(lat, phi, phi.copy(), np.zeros(phi.shape, bool), p, 0.0)
    xs = lat.x[np.abs(lat.x) <= 0.1]
    return sol, BlowupCurve.from_samples(xs, np.full(xs.size, T), h=h)


def test_synthetic_power_law_exact():
    sol, crv = _synthetic()
    rep = fit_rate_exponent(sol, crv, 0.0, window=(0.1, 0.28))
    assert rep.q_hat == pytest.approx(1.0, abs=1e-10)
    assert rep.C_hat == pytest.approx(3.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.1, 50.0))
def test_power_law_fit_recovers(q, C):
    tau = np.geomspace(1e-3, 1e-1, 30)
    qh, Ch, r2 = power_law_fit(tau, C * tau**-q)
    assert qh == pytest.approx(q, abs=1e-10) and Ch == pytest.approx(C, rel=1e-9)
    assert r2 == pytest.approx(1.0)


def test_power_law_fit_needs_samples():
    with pytest.raises(InsufficientData):
        power_law_fit([0.1] * 5, [1.0] * 5)


def test_injected_ee_violation_located():
    sol, crv = _synthetic(C=2.0)
    j, k = sol.lattice.index(0.0), 200
    sol.phi[k, j] *= 10
    sol.psi[k, j] *= 10
    rep = check_two_sided(sol, crv, 2.0, 1.0, window=(0.5, 0.9), constants=(1.0, 2.5))
    ee = [v for v in rep.violations if v.quantity == "ee_upper"]
    assert len(ee) == 1
    assert (ee[0].x, ee[0].t) == (pytest.approx(0.0), pytest.approx(0.2))


def test_closed_form_exceeds_stated_C2():
    # oracle: the damped ODE sits above 2/(T - t) throughout (0.5 T1, 0.9 T1)
    ts = np.linspace(0.5 * T1, 0.9 * T1, 50)
    ratio = np.array([closed_form_y(2, 1, 10, t) * (T1 - t) for t in ts]) / 2.0
    assert np.all(ratio > 1.0)


def test_ee_stated_constants_constant_data(ref_sol, ref_cfg):
    """The stated example: zero (ee) violations with the published C1, C2.

    Fails because the published C2 is the sharp undamped constant; the damped
    solution exceeds it (see test_closed_form_exceeds_stated_C2).
    """
    crv = curve_extract(ref_sol, ref_cfg)
    T = crv(0.0)
    rep = check_two_sided(ref_sol, crv, 2, 1, window=(0.5 * T1 / T, 0.9 * T1 / T))
    assert rep.counts().get("ee", 0) == 0


def test_ee_proof_constants_constant_data(ref_sol, ref_cfg):
    crv = curve_extract(ref_sol, ref_cfg)
    T = crv(0.0)
    rep = check_two_sided(ref_sol, crv, 2, 1, window=(0.5 * T1 / T, 0.9 * T1 / T),
                          constants=proof_rate_constants(2, 1))
    assert rep.checked > 0 and rep.violations == []


def test_aa_violations_rare_and_near_mask(ref_sol, ref_cfg):
    crv = curve_extract(ref_sol, ref_cfg)
    rep = check_two_sided(ref_sol, crv, 2, 1)
    aa = [v for v in rep.violations if v.quantity.startswith("aa")]
    assert len(aa) <= 1e-3 * rep.checked
    front = ref_sol.first_blow_row
    for v in aa:
        j = ref_sol.lattice.index(v.x)
        assert front[j] - round(v.t / ref_cfg.h) <= 2


def test_bump_envelope_bounds_hold(bump_sol, ref_cfg):
    crv = curve_extract(bump_sol, ref_cfg)
    rep = check_two_sided(bump_sol, crv, 2, 1)
    assert rep.envelope_pass


def test_domination_constant_data(ref_sol):
    rep = check_gradient_domination(ref_sol, 1.0)
    act = ref_sol.active
    assert rep.margin > 0
    dt = (ref_sol.phi[2:] - ref_sol.phi[:-2]) / (2 * ref_sol.lattice.h)
    ok = act[2:] & act[:-2] & act[1:-1]
    assert rep.phi_margin == pytest.approx(np.min(dt[ok]), rel=1e-12)


def test_domination_bump(bump_sol):
    rep = check_gradient_domination(bump_sol, 1.0)
    assert rep.margin >= -rep.slack_constant * bump_sol.lattice.h
    assert rep.slack_constant >= 0


def test_domination_near_singular_flag():
    sol, _ = _synthetic(T=0.3, K=299)
    lat = sol.lattice
    inside = lat.inside
    sol.blown[297:] = inside[297:]
    sol.phi[297:] = np.nan
    sol.psi[297:] = np.nan
    # a decreasing phi one row below the mask puts the minimum at row 295
    j = lat.index(0.0)
    sol.phi[296, j] = sol.phi[294, j] - 1.0
    rep = check_gradient_domination(sol, 1.0)
    assert rep.phi_at == (pytest.approx(0.0), pytest.approx(0.295))
    assert any("near-singular, informational" in f for f in rep.flags)


def test_picard_monotone_reference(ref_cfg, bump_data):
    from blowup_lab.model import constant_data
    assert check_picard_monotone(picard_iterates(ref_cfg, constant_data(ref_cfg), 10)) is None
    assert check_picard_monotone(picard_iterates(ref_cfg, bump_data, 10)) is None


def test_picard_decreasing_pair():
    a, _ = _synthetic()
    b, _ = _synthetic()
    j, k = a.lattice.index(0.05), 40
    b.psi[k, j] -= 1e-6
    bad = check_picard_monotone([a, b])
    assert (bad.n, bad.x, bad.t, bad.field) == (0, pytest.approx(0.05), pytest.approx(0.04), "psi")


def test_picard_shape_errors():
    a, _ = _synthetic()
    with pytest.raises(ShapeError):
        check_picard_monotone([a])
    c, _ = _synthetic(K=100)
    with pytest.raises(ShapeError):
        check_picard_monotone([a, c])
