import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.curve import (BlowupCurve, IllConditioned, LevelNotReached, OutOfRange,
                              curve_extract, derivative_continuity, distance_to_curve,
                              extrapolate_blowup_time, fit_ladder, level_time)
from blowup_lab.model import InitialData
from blowup_lab.solver import solve_characteristic
from conftest import BUMP_F, BUMP_G, reference_cfg


def test_level_time_M100(ref_sol, ref_cfg):
    assert abs(level_time(ref_sol, 0.0, 100) - math.log(1.225)) <= 2 * ref_cfg.h


def test_level_time_at_initial_level(ref_sol):
    assert level_time(ref_sol, 0.3, 10) == 0.0


def test_level_time_monotone_in_M(bump_sol):
    for x in (-0.4, 0.0, 0.25):
        e = [level_time(bump_sol, x, M) for M in (20, 40, 80, 160)]
        assert all(b > a for a, b in zip(e, e[1:]))


def test_unreached_level(ref_sol):
    with pytest.raises(LevelNotReached):
        level_time(ref_sol, 0.0, 1e9)


def test_two_point_extrapolation_p2():
    e100, e200 = math.log(1.225), math.log(1.2375)
    T, K = extrapolate_blowup_time([(100, e100), (200, e200)], 2)
    assert T == pytest.approx(2 * e200 - e100, rel=1e-14)
    assert abs(T - math.log(1.25)) < 1.5e-4


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_exact_law_recovered(p):
    T, K = 0.3, 1.7
    ladder = [(M, T - K * M ** (1 - p)) for M in (30, 60, 120, 240)]
    T1, K1, _ = fit_ladder(ladder, p, order=1)
    assert (T1, K1) == (pytest.approx(T, rel=1e-13), pytest.approx(K, rel=1e-12))
    T2, K2, _ = fit_ladder(ladder, p, order=2)
    assert T2 == pytest.approx(T, rel=1e-12)


def test_ladder_errors():
    with pytest.raises(IllConditioned):
        fit_ladder([(100, 0.2)], 2)
    with pytest.raises(IllConditioned):
        fit_ladder([(100, 0.2), (120, 0.21)], 2)


def test_constant_curve_is_flat(ref_sol, ref_cfg):
    crv = curve_extract(ref_sol, ref_cfg)
    assert np.ptp(crv.T_hat) <= 1e-3 * crv.T_hat.mean()
    assert np.max(np.abs(crv.T_prime)) <= 1e-9


@pytest.mark.parametrize("g,tol", [("5+exp(-x^2)", 0.0), ("5", 0.1)])
def test_bump_curve_minimum_near_peak(ref_cfg, g, tol):
    # with only f raised, transport from x + t drags the minimum slightly left
    data = InitialData.from_strings("5+exp(-x^2)", g)
    crv = curve_extract(solve_characteristic(ref_cfg, data), ref_cfg)
    assert abs(crv.xs[np.argmin(crv.T_hat)]) <= tol + 1e-12
    assert crv.T_hat.min() < crv.T_hat[0] and crv.T_hat.min() < crv.T_hat[-1]


def test_bump_curve_lipschitz(bump_sol, ref_cfg):
    crv = curve_extract(bump_sol, ref_cfg)
    assert crv.lipschitz_hat <= 1 / (1 + ref_cfg.eps0) + 0.05


def test_curve_interpolation_and_range():
    crv = BlowupCurve.from_samples([0, 1, 2], [0.5, 0.7, 0.6])
    assert crv(0.5) == pytest.approx(0.6)
    with pytest.raises(OutOfRange):
        crv(2.5)


def test_distance_examples():
    flat = BlowupCurve.from_samples(np.linspace(-1, 1, 11), np.full(11, 0.4))
    assert distance_to_curve(flat, 0.13, 0.1) == pytest.approx(0.3, rel=1e-14)
    line = BlowupCurve.from_samples(np.linspace(-4, 4, 9), np.linspace(-2, 2, 9))
    assert distance_to_curve(line, 0.0, -1.0) == pytest.approx(1 / math.sqrt(1.25), rel=1e-14)
    with pytest.raises(OutOfRange):
        distance_to_curve(flat, 0.0, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.05, 1.0), st.floats(0.0, 0.99))
def test_distance_sandwich_on_lipschitz_curve(x, amp, frac):
    xs = np.linspace(-1, 1, 81)
    crv = BlowupCurve.from_samples(xs, 1.0 + 0.3 * amp * np.sin(3 * xs))  # slope <= 0.9
    t = frac * crv(x)
    d = distance_to_curve(crv, x, t)
    gap = crv(x) - t
    assert gap / math.sqrt(2) - 1e-12 <= d <= gap + 1e-12


def test_derivative_continuity_flat_and_linear():
    xs = np.linspace(-1, 1, 21)
    assert derivative_continuity(BlowupCurve.from_samples(xs, np.full(21, 0.3)))["modulus"] == 0
    lin = derivative_continuity(BlowupCurve.from_samples(xs, 0.2 + 0.3 * xs))
    assert lin["modulus"] <= 1e-13


def test_derivative_continuity_refines(bump_sol, ref_cfg, bump_data):
    fine_cfg = reference_cfg(h=ref_cfg.h / 2)
    coarse = curve_extract(bump_sol, ref_cfg)
    fine = curve_extract(solve_characteristic(fine_cfg, bump_data), fine_cfg)
    rep = derivative_continuity(coarse, fine)
    assert rep["ratio"] <= 0.75
