"""Characteristic solver for the Riemann-invariant system on a unit-CFL cone lattice.

phi is transported along x + t = const and psi along x - t = const, both
driven by N = 2^-p (phi + psi)^p - mu/(1+t) (phi + psi)/2.  With dt = dx = h
every characteristic segment joins two lattice nodes, so transport is exact
and only the source integral is discretised.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import ProblemConfig, InitialData, parse_corrector, validate_assumptions


class PreconditionError(ValueError):
    pass


class RegimeError(ArithmeticError):
    pass


def thread_count() -> int:
    n = int(os.environ.get("BLOWUP_LAB_THREADS", "1") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def source_term(phi, psi, t, p, mu):
    s = np.asarray(phi, dtype=float) + psi
    if np.any(s <= 0):
        raise RegimeError("phi + psi must stay positive")
    out = 2.0**-p * s**p - mu / (1.0 + np.asarray(t, dtype=float)) * s / 2.0
    return float(out) if np.ndim(out) == 0 else out


def _source(s, t, p, mu):
    if p == 2.0:
        return 0.25 * s * s - mu / (1.0 + t) * s * 0.5
    return 2.0**-p * np.power(s, p) - mu / (1.0 + t) * s * 0.5


@dataclass(frozen=True, eq=False)
class ConeLattice:
    """Nodes (x_j, t_k), x_j = (j - J) h, t_k = k h, kept where |j - J| <= J - k."""

    h: float
    J: int
    K: int

    @classmethod
    def for_config(cls, cfg: ProblemConfig) -> "ConeLattice":
        J = round(cfg.half_width / cfg.h)
        K = round(cfg.t_star / cfg.h)
        if abs(J * cfg.h - cfg.half_width) > 1e-9 * cfg.half_width or abs(K * cfg.h - cfg.t_star) > 1e-9 * cfg.t_star:
            raise PreconditionError("h must divide both R*+T* and T*")
        return cls(cfg.h, J, K)

    @property
    def n(self) -> int:
        return 2 * self.J + 1

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.J) * self.h

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.h

    def row_bounds(self, k):
        """Inclusive index range of row k."""
        return k, self.n - 1 - k

    @cached_property
    def inside(self) -> np.ndarray:
        k = np.arange(self.K + 1)[:, None]
        j = np.arange(self.n)[None, :]
        return np.abs(j - self.J) <= self.J - k

    def index(self, x) -> int:
        j = int(round(x / self.h)) + self.J
        if not 0 <= j < self.n or abs((j - self.J) * self.h - x) > 1e-9 * max(1.0, abs(x)):
            raise ValueError(f"x={x} is not a lattice abscissa")
        return j


@dataclass
class FieldSolution:
    lattice: ConeLattice
    phi: np.ndarray
    psi: np.ndarray
    blown: np.ndarray
    p: float = float("nan")
    mu: float = float("nan")

    @cached_property
    def active(self) -> np.ndarray:
        return self.lattice.inside & ~self.blown

    @property
    def total(self) -> np.ndarray:
        return self.phi + self.psi

    @property
    def first_blow_row(self) -> np.ndarray:
        """Per abscissa, first masked row index, or -1 if never masked."""
        b = self.blown & self.lattice.inside
        rows = np.argmax(b, axis=0)
        return np.where(b.any(axis=0), rows, -1)

    def column(self, j):
        """Times and (phi, psi) on the unmasked prefix of column j."""
        act = self.active[:, j]
        k = np.nonzero(act)[0]
        return self.lattice.t[k], self.phi[k, j], self.psi[k, j]

    def sample(self, x, t):
        """Bilinear interpolation; NaN where any surrounding node is inactive."""
        lat = self.lattice
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        x, t = np.broadcast_arrays(x, t)
        u = x / lat.h + lat.J
        v = t / lat.h
        j0 = np.floor(u).astype(int)
        k0 = np.floor(v).astype(int)
        # exact hits on the last row/column use the cell below/left
        j0 = np.where(j0 == lat.n - 1, j0 - 1, j0)
        k0 = np.where(k0 == lat.K, k0 - 1, k0)
        ok = (j0 >= 0) & (j0 + 1 < lat.n) & (k0 >= 0) & (k0 + 1 <= lat.K)
        j0c = np.clip(j0, 0, lat.n - 2)
        k0c = np.clip(k0, 0, lat.K - 1)
        a = u - j0c
        b = v - k0c
        act = self.active
        ok &= act[k0c, j0c] & act[k0c, j0c + 1] & act[k0c + 1, j0c] & act[k0c + 1, j0c + 1]
        out = []
        for F in (self.phi, self.psi):
            val = ((1 - a) * (1 - b) * F[k0c, j0c] + a * (1 - b) * F[k0c, j0c + 1]
                   + (1 - a) * b * F[k0c + 1, j0c] + a * b * F[k0c + 1, j0c + 1])
            out.append(np.where(ok, val, np.nan))
        return out[0], out[1]

    def mask_frontier(self):
        """(x, first masked time) for every abscissa that blows up inside the cone."""
        rows = self.first_blow_row
        j = np.nonzero(rows >= 0)[0]
        return self.lattice.x[j], self.lattice.t[rows[j]]


def _check_preconditions(cfg, data):
    report = validate_assumptions(cfg, data)
    failed = [r.id for r in report.records if r.id in ("condgam", "A2") and not r.satisfied]
    if failed:
        raise PreconditionError(f"assumptions {failed} fail; refusing to solve")
    return report


def _chunks(lo, hi, parts):
    """Split the inclusive range [lo, hi] into at most `parts` contiguous slices."""
    edges = np.linspace(lo, hi + 1, parts + 1).round().astype(int)
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


class _Stepper:
    AB4 = (55.0, -59.0, 37.0, -9.0)
    AM4 = (9.0, 19.0, -5.0, 1.0)

    def __init__(self, lat, phi, psi, N, blown, cfg):
        self.lat, self.phi, self.psi, self.N, self.blown = lat, phi, psi, N, blown
        self.p, self.mu, self.h, self.v_max = cfg.p, cfg.mu, cfg.h, cfg.v_max
        self.kind, self.extra = parse_corrector(cfg.corrector)

    def row(self, k, a, b):
        """Fill nodes a..b-1 of row k+1 from rows <= k."""
        h, p, mu = self.h, self.p, self.mu
        phi, psi, N = self.phi, self.psi, self.N
        t1 = (k + 1) * h
        phi0 = phi[k, a + 1:b + 1]
        psi0 = psi[k, a - 1:b - 1]
        nphi = N[k, a + 1:b + 1]
        npsi = N[k, a - 1:b - 1]
        multistep = self.kind == "abm4" and k + 1 >= 4
        with np.errstate(all="ignore"):
            if multistep:
                hphi = [N[k - m, a + 1 + m:b + 1 + m] for m in range(4)]
                hpsi = [N[k - m, a - 1 - m:b - 1 - m] for m in range(4)]
                c = self.AB4
                fp = phi0 + h / 24 * (c[0] * hphi[0] + c[1] * hphi[1] + c[2] * hphi[2] + c[3] * hphi[3])
                fs = psi0 + h / 24 * (c[0] * hpsi[0] + c[1] * hpsi[1] + c[2] * hpsi[2] + c[3] * hpsi[3])
                c = self.AM4
                bphi = phi0 + h / 24 * (c[1] * hphi[0] + c[2] * hphi[1] + c[3] * hphi[2])
                bpsi = psi0 + h / 24 * (c[1] * hpsi[0] + c[2] * hpsi[1] + c[3] * hpsi[2])
                w = 9.0 * h / 24
                passes = 1 + self.extra
            else:
                fp = phi0 + h * nphi
                fs = psi0 + h * npsi
                bphi = phi0 + h / 2 * nphi
                bpsi = psi0 + h / 2 * npsi
                w = h / 2
                # startup rows of the multistep scheme use a converged trapezoid
                passes = 1 + (3 if self.kind == "abm4" else self.extra)
            for _ in range(passes):
                n1 = _source(fp + fs, t1, p, mu)
                fp = bphi + w * n1
                fs = bpsi + w * n1
            s = fp + fs
            n1 = _source(s, t1, p, mu)
        bl = self.blown
        bad = (bl[k, a + 1:b + 1] | bl[k, a - 1:b - 1] | bl[k, a:b]
               | ~np.isfinite(fp) | ~np.isfinite(fs) | ~np.isfinite(n1)
               | (fp > self.v_max) | (fs > self.v_max))
        if np.any(s[~bad] <= 0):
            raise RegimeError(f"phi + psi lost positivity in row {k + 1}")
        phi[k + 1, a:b] = np.where(bad, np.nan, fp)
        psi[k + 1, a:b] = np.where(bad, np.nan, fs)
        N[k + 1, a:b] = np.where(bad, np.nan, n1)
        bl[k + 1, a:b] = bad


def solve_characteristic(cfg: ProblemConfig, data: InitialData, threads: int | None = None,
                         check: bool = True) -> FieldSolution:
    if check:
        _check_preconditions(cfg, data)
    lat = ConeLattice.for_config(cfg)
    shape = (lat.K + 1, lat.n)
    phi = np.full(shape, np.nan)
    psi = np.full(shape, np.nan)
    N = np.full(shape, np.nan)
    blown = np.zeros(shape, dtype=bool)
    x = lat.x
    phi[0] = data.f(x)
    psi[0] = data.g(x)
    N[0] = source_term(phi[0], psi[0], 0.0, cfg.p, cfg.mu)

    stepper = _Stepper(lat, phi, psi, N, blown, cfg)
    threads = thread_count() if threads is None else threads
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for k in range(lat.K):
            lo, hi = lat.row_bounds(k + 1)
            if hi < lo:
                break
            if pool is None:
                stepper.row(k, lo, hi + 1)
            else:
                jobs = [pool.submit(stepper.row, k, a, b) for a, b in _chunks(lo, hi, threads)]
                for job in jobs:
                    job.result()
    finally:
        if pool is not None:
            pool.shutdown()
    return FieldSolution(lat, phi, psi, blown, cfg.p, cfg.mu)


# ------------------------------------------------------------------ Picard

def constant_iterate(cfg: ProblemConfig) -> FieldSolution:
    """Iterate zero: phi = gamma1, psi = gamma2 on the whole cone."""
    lat = ConeLattice.for_config(cfg)
    inside = lat.inside
    phi = np.where(inside, cfg.gamma1, np.nan)
    psi = np.where(inside, cfg.gamma2, np.nan)
    return FieldSolution(lat, phi, psi, np.zeros(phi.shape, dtype=bool), cfg.p, cfg.mu)


def picard_sweep(iterate: FieldSolution, cfg: ProblemConfig, data: InitialData) -> FieldSolution:
    """One successive-approximation step by trapezoidal quadrature along characteristics.

    phi_next(x, t) = f(x + t) + int_0^t N(x + t - s, s) ds with the source
    built from `iterate`; psi likewise along x - t + s.  A masked source node
    on the path masks the target.
    """
    lat = iterate.lattice
    h = lat.h
    K, n = lat.K + 1, lat.n
    inside = lat.inside
    src_bad = ~iterate.active | ~np.isfinite(iterate.total)
    t = lat.t[:, None]
    with np.errstate(all="ignore"):
        s = np.where(src_bad, np.nan, iterate.total)
        if np.any(s[~src_bad] <= 0):
            raise RegimeError("iterate lost positivity")
        N = _source(s, t, cfg.p, cfg.mu)
    N = np.where(src_bad, 0.0, N)

    fx = data.f(lat.x)
    gx = data.g(lat.x)
    Sphi = np.zeros((K, n))
    Spsi = np.zeros((K, n))
    mphi = src_bad.copy()
    mpsi = src_bad.copy()
    for k in range(1, K):
        lo, hi = lat.row_bounds(k)
        if hi < lo:
            break
        sl = slice(lo, hi + 1)
        up, dn = slice(lo + 1, hi + 2), slice(lo - 1, hi)
        Sphi[k, sl] = Sphi[k - 1, up] + h / 2 * (N[k - 1, up] + N[k, sl])
        Spsi[k, sl] = Spsi[k - 1, dn] + h / 2 * (N[k - 1, dn] + N[k, sl])
        mphi[k, sl] |= mphi[k - 1, up]
        mpsi[k, sl] |= mpsi[k - 1, dn]

    rows = np.arange(K)[:, None]
    cols = np.arange(n)[None, :]
    fshift = fx[np.clip(cols + rows, 0, n - 1)]
    gshift = gx[np.clip(cols - rows, 0, n - 1)]
    with np.errstate(invalid="ignore"):
        phi = fshift + Sphi
        psi = gshift + Spsi
        blown = (mphi | mpsi | (phi > cfg.v_max) | (psi > cfg.v_max)) & inside
    blown = np.logical_or.accumulate(blown, axis=0) & inside
    phi = np.where(inside & ~blown, phi, np.nan)
    psi = np.where(inside & ~blown, psi, np.nan)
    return FieldSolution(lat, phi, psi, blown, cfg.p, cfg.mu)


def picard_iterates(cfg: ProblemConfig, data: InitialData, sweeps: int | None = None):
    """[iterate_0, ..., iterate_sweeps] starting from the constant pair."""
    sweeps = cfg.picard_iterations if sweeps is None else sweeps
    its = [constant_iterate(cfg)]
    for _ in range(sweeps):
        its.append(picard_sweep(its[-1], cfg, data))
    return its


def reconstruct_u(sol: FieldSolution, u0=None) -> np.ndarray:
    """u(x, t) = u0(x) + 1/2 int_0^t (phi + psi)(x, s) ds, trapezoid in t; NaN once masked."""
    lat = sol.lattice
    half = np.where(sol.active, sol.total / 2.0, np.nan)
    incr = lat.h / 2 * (half[1:] + half[:-1])
    integral = np.vstack([np.zeros((1, lat.n)), np.cumsum(incr, axis=0)])
    base = np.zeros(lat.n) if u0 is None else np.asarray(u0(lat.x), dtype=float)
    return np.where(sol.active, base[None, :] + integral, np.nan)
