"""Spatially homogeneous dynamics: closed-form Bernoulli solution and RK4 oracle.

For constant data the Riemann invariants stay x-independent and their sum
y = phi + psi obeys y' = 2^(1-p) y^p - mu y (autonomous damping) or
y' = 2^(1-p) y^p - mu y / (1 + t) (scale-invariant damping, as in the PDE).
Both components share one right-hand side, so phi - psi is constant and
only y is integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NoBlowupError(ValueError):
    pass


class BlowupPassedError(ValueError):
    def __init__(self, t, t1):
        super().__init__(f"t={t} is not before the blow-up time T1={t1}")
        self.t1 = t1


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeState:
    t: float
    y: float
    phi_hat: float
    psi_hat: float


def _state(t, y, gamma1, gamma2):
    d = gamma1 - gamma2
    return OdeState(t, y, (y + d) / 2.0, (y - d) / 2.0)


def closed_form_T1(p, mu, gamma_sum):
    if mu == 0:
        return gamma_sum ** (1 - p) / ((p - 1) * 2.0 ** (1 - p))
    a = 2.0 ** (1 - p) / mu
    if not gamma_sum > 2.0 * mu ** (1.0 / (p - 1)):
        raise NoBlowupError(
            f"gamma1+gamma2={gamma_sum} does not exceed 2 mu^(1/(p-1))={2.0 * mu ** (1.0 / (p - 1))}")
    return math.log(a / (a - gamma_sum ** (1 - p))) / ((p - 1) * mu)


def closed_form_y(p, mu, gamma_sum, t):
    if mu == 0:
        v = gamma_sum ** (1 - p) - (p - 1) * 2.0 ** (1 - p) * t
    else:
        a = 2.0 ** (1 - p) / mu
        v = (gamma_sum ** (1 - p) - a) * math.exp((p - 1) * mu * t) + a
    if v <= 0:
        raise BlowupPassedError(t, closed_form_T1(p, mu, gamma_sum))
    return v ** (1.0 / (1 - p))


def closed_form_state(p, mu, gamma1, gamma2, t) -> OdeState:
    gam = gamma1 + gamma2
    t1 = closed_form_T1(p, mu, gam)
    if t >= t1:
        raise BlowupPassedError(t, t1)
    return _state(t, closed_form_y(p, mu, gam, t), gamma1, gamma2)


def autonomous_rhs(p, mu):
    c = 2.0 ** (1 - p)
    return lambda t, y: c * y**p - mu * y


def scale_invariant_rhs(p, mu):
    c = 2.0 ** (1 - p)
    return lambda t, y: c * y**p - mu * y / (1.0 + t)


def rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, y + dt / 2 * k1)
    k3 = rhs(t + dt / 2, y + dt / 2 * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def asymptotic_remaining_time(p, y):
    """Leading-order undamped time to blow-up from level y."""
    return 2.0 ** (p - 1) * y ** (1 - p) / (p - 1)


@dataclass
class Trajectory:
    states: list[OdeState]
    blowup_time: float
    dt: float
    monotone: bool

    @property
    def t(self):
        return np.array([s.t for s in self.states])

    @property
    def y(self):
        return np.array([s.y for s in self.states])


def _integrate(rhs, p, y0, dt, cap, resolve=0.05):
    """RK4 from y0 until y exceeds cap or the step stops resolving the growth.

    Returns (ts, ys, monotone).  The run also stops once dt * 2^(1-p) y^(p-1)
    exceeds `resolve`, since a fixed step cannot follow the singularity past
    that point; the caller extrapolates from the last accepted state.
    """
    ts, ys = [0.0], [y0]
    t, y = 0.0, y0
    monotone = True
    c = 2.0 ** (1 - p)
    while y <= cap and dt * c * y ** (p - 1) <= resolve:
        with np.errstate(all="ignore"):
            y_new = rk4_step(rhs, t, y, dt)
        if not math.isfinite(y_new):
            raise NumericalFailure(f"non-finite state at t={t + dt} before reaching cap")
        if rhs(t, y) <= 0:
            monotone = False
        t += dt
        y = y_new
        ts.append(t)
        ys.append(y)
        if len(ts) > 50_000_000:
            raise NumericalFailure("no blow-up within step budget")
    return np.array(ts), np.array(ys), monotone


def rk4_trajectory(p, mu, gamma1, gamma2, dt=None, cap=1e8, damping="autonomous",
                   t_star=None, rtol=1e-4, max_halvings=12) -> Trajectory:
    """Fixed-step RK4 on the summed system with blow-up time detection.

    The detected time is t_stop + 2^(p-1) y_stop^(1-p) / (p-1), refined by
    halving dt until successive estimates differ by less than rtol * T.
    damping selects mu*y ("autonomous") or mu*y/(1+t) ("scale_invariant").
    """
    gam = gamma1 + gamma2
    if not cap > gam:
        raise ValueError("cap must exceed gamma1 + gamma2")
    rhs = {"autonomous": autonomous_rhs, "scale_invariant": scale_invariant_rhs}[damping](p, mu)
    if dt is None:
        if t_star is None:
            t_star = closed_form_T1(p, mu, gam) if damping == "autonomous" else 1.0
        dt = t_star / 1e5
    if not dt > 0:
        raise ValueError("dt must be positive")

    prev = None
    for _ in range(max_halvings + 1):
        ts, ys, monotone = _integrate(rhs, p, gam, dt, cap)
        est = ts[-1] + asymptotic_remaining_time(p, ys[-1])
        if prev is not None and abs(est - prev[0]) < rtol * est:
            break
        prev = (est, ts, ys, monotone, dt)
        dt /= 2
    else:
        raise NumericalFailure("blow-up time estimate did not settle")
    states = [_state(t, y, gamma1, gamma2) for t, y in zip(ts, ys)]
    return Trajectory(states, est, dt, monotone)


def rk4_dense(p, mu, y0, times, damping="scale_invariant", substeps=16):
    """RK4 values of y at the given increasing times (uniform substeps per interval)."""
    rhs = {"autonomous": autonomous_rhs, "scale_invariant": scale_invariant_rhs}[damping](p, mu)
    out = np.empty(len(times))
    t, y = 0.0, float(y0)
    for i, target in enumerate(times):
        if target < t:
            raise ValueError("times must be nondecreasing and start at or after 0")
        if target > t:
            dt = (target - t) / substeps
            for _ in range(substeps):
                y = rk4_step(rhs, t, y, dt)
                t += dt
            t = target
        out[i] = y
    return out
