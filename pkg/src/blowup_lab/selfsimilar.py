"""Similarity profiles of the undamped limiting system and the blow-up rescaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import BlowupCurve


class DomainError(ValueError):
    pass


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityProfile:
    """V_phi = C_phi (alpha y - s)^-q, V_psi = C_psi (alpha y - s)^-q."""

    p: float
    alpha: float
    q: float
    A: float
    C_phi: float
    C_psi: float

    def to_dict(self):
        return {"p": self.p, "alpha": self.alpha, "q": self.q, "A": self.A,
                "C_phi": self.C_phi, "C_psi": self.C_psi}


def profile_constants(p, alpha) -> SimilarityProfile:
    if not p > 1:
        raise DomainError("p must exceed 1")
    if not abs(alpha) < 1:
        raise DomainError(f"|alpha| must be below 1, got {alpha}")
    q = 1.0 / (p - 1.0)
    A = (2.0 ** (p - 1) * q * (1 - alpha * alpha)) ** q
    c_phi = (1 - alpha) / 2 * A
    c_psi = A - c_phi
    return SimilarityProfile(p, alpha, q, A, c_phi, c_psi)


def _rho(profile, y, s):
    rho = profile.alpha * np.asarray(y, dtype=float) - np.asarray(s, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("sample on or above the blow-up line s = alpha y")
    return rho


def profile_eval(profile: SimilarityProfile, y, s):
    w = _rho(profile, y, s) ** -profile.q
    return profile.C_phi * w, profile.C_psi * w


def profile_residual(profile: SimilarityProfile, samples, C_phi=None, C_psi=None) -> float:
    """Largest relative residual of D_-V_phi = D_+V_psi = 2^-p (V_phi + V_psi)^p.

    Partials are taken analytically: with rho = alpha y - s,
    D_-V_phi = (1 + alpha) q C_phi rho^(-q-1) and
    D_+V_psi = (1 - alpha) q C_psi rho^(-q-1).  C_phi/C_psi override the
    profile's constants (fault injection).
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    if samples.shape[0] == 0:
        raise ValueError("empty sample set")
    a, q, p = profile.alpha, profile.q, profile.p
    cp = profile.C_phi if C_phi is None else C_phi
    cs = profile.C_psi if C_psi is None else C_psi
    rho = _rho(profile, samples[:, 0], samples[:, 1])
    rhs = 2.0**-p * ((cp + cs) * rho**-q) ** p
    dm = (1 + a) * q * cp * rho ** (-q - 1)
    dp = (1 - a) * q * cs * rho ** (-q - 1)
    return float(np.max(np.maximum(np.abs(dm - rhs), np.abs(dp - rhs)) / rhs))


@dataclass
class RescaledView:
    x0: float
    lam: float
    q: float
    ys: np.ndarray
    ss: np.ndarray
    phi_l: np.ndarray
    psi_l: np.ndarray
    T_l: np.ndarray
    coverage: float

    def lipschitz(self):
        return float(np.max(np.abs(np.diff(self.T_l) / np.diff(self.ys))))


def rescale(field, curve: BlowupCurve, x0, lam, ys=None, ss=None, q=None) -> RescaledView:
    """Sample lam^q (phi, psi)(x0 + lam y, T(x0) + lam s) and (T(x0 + lam y) - T(x0))/lam.

    `field` is anything with ``sample(x, t) -> (phi, psi)`` (a FieldSolution
    samples bilinearly) and, unless q is given, a ``p`` attribute.  Points
    mapping outside the unmasked lattice come back as NaN and lower the
    reported coverage.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    q = 1.0 / (field.p - 1.0) if q is None else q
    ys = np.linspace(-1, 1, 21) if ys is None else np.asarray(ys, dtype=float)
    ss = np.linspace(-2, -0.25, 36) if ss is None else np.asarray(ss, dtype=float)
    T0 = curve(x0)
    xs = x0 + lam * ys
    inside = (xs >= curve.xs[0]) & (xs <= curve.xs[-1])
    T_l = np.full(ys.shape, np.nan)
    T_l[inside] = (curve(xs[inside]) - T0) / lam
    Y, S = np.meshgrid(ys, ss, indexing="ij")
    phi, psi = field.sample(x0 + lam * Y, T0 + lam * S)
    scale = lam**q
    phi_l, psi_l = scale * np.asarray(phi), scale * np.asarray(psi)
    coverage = float(np.mean(np.isfinite(phi_l) & np.isfinite(psi_l)))
    return RescaledView(float(x0), float(lam), q, ys, ss, phi_l, psi_l, T_l, coverage)


def probe_set(alpha, ny=21, ns=36, gap=0.25):
    """Points (y, s) with |y| <= 1, -2 <= s <= alpha y - gap."""
    pts = []
    for y in np.linspace(-1, 1, ny):
        top = alpha * y - gap
        for s in np.linspace(-2, top, ns):
            pts.append((y, s))
    return np.array(pts)


@dataclass
class ConvergenceRow:
    lam: float
    sup_error: float
    damping_contribution: float
    coverage: float


def profile_convergence(field, curve: BlowupCurve, x0, lambdas, mu=0.0, p=None, alpha=None,
                        h=None):
    """Sup distance between the rescaled field and the similarity profile per lambda.

    alpha defaults to the measured slope T_hat'(x0).  The damping column is
    lam * mu / (1 + T(x0)) * max (phi_l + psi_l)/2, the size of the term the
    limit drops.  Returns (profile, rows, slopes) with slopes = (left, right).
    """
    p = field.p if p is None else p
    q = 1.0 / (p - 1.0)
    slopes = curve.one_sided_slopes(x0)
    alpha = curve.slope_at(x0) if alpha is None else alpha
    prof = profile_constants(p, alpha)
    pts = probe_set(alpha)
    T0 = curve(x0)
    if h is not None and min(lambdas) < 10 * h:
        raise CoverageError("lambda ladder below lattice resolution (need lambda >= 10h)")
    rows = []
    for lam in lambdas:
        phi, psi = field.sample(x0 + lam * pts[:, 0], T0 + lam * pts[:, 1])
        phi_l = lam**q * np.asarray(phi)
        psi_l = lam**q * np.asarray(psi)
        ok = np.isfinite(phi_l) & np.isfinite(psi_l)
        if not ok.all():
            raise CoverageError(f"probe set leaves the unmasked cone at lambda={lam}")
        vp, vs = profile_eval(prof, pts[:, 0], pts[:, 1])
        err = float(np.max(np.abs(phi_l - vp) + np.abs(psi_l - vs)))
        damp = float(lam * mu / (1 + T0) * np.max(phi_l + psi_l) / 2)
        rows.append(ConvergenceRow(float(lam), err, damp, 1.0))
    return prof, rows, slopes
