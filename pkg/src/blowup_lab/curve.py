"""Blow-up curve extraction from level-set times and ladder extrapolation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .solver import FieldSolution


class LevelNotReached(LookupError):
    pass


class IllConditioned(ValueError):
    pass


class InsufficientCoverage(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def level_time(sol: FieldSolution, x: float, M: float) -> float:
    """First time phi + psi reaches M at abscissa x (linear interpolation in t)."""
    j = sol.lattice.index(x)
    return _level_time_column(sol, j, M)


def _level_time_column(sol, j, M):
    t, phi, psi = sol.column(j)
    y = phi + psi
    hit = np.nonzero(y >= M)[0]
    if hit.size == 0:
        raise LevelNotReached(f"level {M} not reached before the mask at column {j}")
    k = hit[0]
    if k == 0:
        if y[0] == M:
            return float(t[0])
        raise LevelNotReached(f"level {M} already exceeded at t=0")
    # rows before the crossing are contiguous because the mask is upward closed
    y0, y1 = y[k - 1], y[k]
    p = sol.p
    if math.isfinite(p):
        # y^(1-p) is nearly affine in t close to blow-up, so interpolate that
        y0, y1, M = y0 ** (1 - p), y1 ** (1 - p), M ** (1 - p)
    return float(t[k - 1] + (M - y0) / (y1 - y0) * (t[k] - t[k - 1]))


def fit_ladder(ladder, p, order=1):
    """Least squares E_M = T - K r - K2 r^2 with r = M^-(p-1).

    order=1 drops the r^2 term (the pure rate law).  order=2 also removes the
    leading correction coming from y^(1-p) being smooth but not affine in t
    near blow-up, and needs at least three levels; with fewer it falls back
    to order 1.  Returns (T, K, rms residual).
    """
    M = np.array([m for m, _ in ladder], dtype=float)
    E = np.array([e for _, e in ladder], dtype=float)
    if M.size < 2:
        raise IllConditioned("need at least two ladder points")
    if M.max() / M.min() < 1.5:
        raise IllConditioned("ladder levels span a ratio below 1.5")
    r = M ** (1.0 - p)
    cols = [np.ones_like(r), -r]
    if order >= 2 and M.size >= 3:
        cols.append(-r * r)
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, E, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - E) ** 2)))
    return float(coef[0]), float(coef[1]), resid


def extrapolate_blowup_time(ladder, p) -> tuple[float, float]:
    T, K, _ = fit_ladder(ladder, p)
    return T, K


@dataclass
class BlowupCurve:
    xs: np.ndarray
    T_hat: np.ndarray
    ladder: list[list[tuple[float, float]]]
    K_hat: np.ndarray
    residual: np.ndarray
    T_prime: np.ndarray = field(init=False)
    lipschitz_hat: float = field(init=False)
    h: float = float("nan")

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.T_hat = np.asarray(self.T_hat, dtype=float)
        if self.xs.size >= 2:
            d = np.empty_like(self.T_hat)
            d[1:-1] = (self.T_hat[2:] - self.T_hat[:-2]) / (self.xs[2:] - self.xs[:-2])
            d[0] = (self.T_hat[1] - self.T_hat[0]) / (self.xs[1] - self.xs[0])
            d[-1] = (self.T_hat[-1] - self.T_hat[-2]) / (self.xs[-1] - self.xs[-2])
            self.T_prime = d
            self.lipschitz_hat = float(np.max(np.abs(np.diff(self.T_hat) / np.diff(self.xs))))
        else:
            self.T_prime = np.zeros_like(self.T_hat)
            self.lipschitz_hat = 0.0

    @classmethod
    def from_samples(cls, xs, T_hat, h=float("nan")):
        """Curve with no ladder information (synthetic or external data)."""
        xs = np.asarray(xs, dtype=float)
        nan = np.full(xs.shape, np.nan)
        return cls(xs, T_hat, [[] for _ in xs], nan, nan.copy(), h=h)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.xs[0] - 1e-12) or np.any(x > self.xs[-1] + 1e-12):
            raise OutOfRange(f"x outside curve support [{self.xs[0]}, {self.xs[-1]}]")
        out = np.interp(x, self.xs, self.T_hat)
        return float(out) if out.ndim == 0 else out

    def one_sided_slopes(self, x0):
        """(left, right) difference quotients at the sample nearest x0."""
        i = int(np.argmin(np.abs(self.xs - x0)))
        left = (self.T_hat[i] - self.T_hat[i - 1]) / (self.xs[i] - self.xs[i - 1]) if i > 0 else math.nan
        right = (self.T_hat[i + 1] - self.T_hat[i]) / (self.xs[i + 1] - self.xs[i]) if i + 1 < self.xs.size else math.nan
        return float(left), float(right)

    def slope_at(self, x0):
        return float(np.interp(x0, self.xs, self.T_prime))


def curve_extract(sol: FieldSolution, cfg, xs=None, order=None) -> BlowupCurve:
    """T_hat at every lattice abscissa of B_{R*} with at least two reachable levels."""
    lat = sol.lattice
    levels = cfg.ladder()
    order = cfg.ladder_order if order is None else order
    if xs is None:
        cols = np.nonzero(np.abs(lat.x) <= cfg.r_star + 1e-12)[0]
    else:
        cols = [lat.index(x) for x in xs]
    out_x, out_T, out_K, out_r, out_ladder = [], [], [], [], []
    for j in cols:
        ladder = []
        for M in levels:
            try:
                ladder.append((M, _level_time_column(sol, j, M)))
            except LevelNotReached:
                continue
        try:
            T, K, r = fit_ladder(ladder, cfg.p, order)
        except IllConditioned:
            continue
        out_x.append(lat.x[j])
        out_T.append(T)
        out_K.append(K)
        out_r.append(r)
        out_ladder.append(ladder)
    if len(out_x) < 3:
        raise InsufficientCoverage(f"only {len(out_x)} abscissas have blow-up estimates")
    return BlowupCurve(np.array(out_x), np.array(out_T), out_ladder, np.array(out_K),
                       np.array(out_r), h=lat.h)


def distance_to_curve(curve: BlowupCurve, x: float, t: float) -> float:
    """Euclidean distance from (x, t) to the piecewise-linear graph of T_hat."""
    T_at = curve(x)
    if not t < T_at:
        raise OutOfRange(f"(x={x}, t={t}) is not below the curve (T={T_at})")
    px, pt = curve.xs, curve.T_hat
    ax, at = px[:-1], pt[:-1]
    dx, dt = np.diff(px), np.diff(pt)
    lam = ((x - ax) * dx + (t - at) * dt) / (dx * dx + dt * dt)
    lam = np.clip(lam, 0.0, 1.0)
    d = np.hypot(ax + lam * dx - x, at + lam * dt - t)
    return float(d.min())


def derivative_continuity(curve: BlowupCurve, refined: BlowupCurve | None = None) -> dict:
    """Largest jump of T' between neighbouring samples, and its change under refinement."""
    if curve.xs.size < 5:
        raise InsufficientCoverage("need at least five abscissas")
    mod = float(np.max(np.abs(np.diff(curve.T_prime))))
    report = {"modulus": mod, "samples": int(curve.xs.size)}
    if refined is not None:
        fine = float(np.max(np.abs(np.diff(refined.T_prime))))
        report["refined_modulus"] = fine
        report["ratio"] = fine / mod if mod > 0 else (0.0 if fine == 0 else math.inf)
    return report
