"""Problem parameters, initial data and the assumption checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .expr import Expression, ExprEvalError, Bin
from .ode import closed_form_T1, NoBlowupError


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def glassey_exponent(mu: float) -> float:
    if not mu > 0:
        raise ConfigError(f"no finite Glassey exponent for mu={mu!r} (need mu > 0)")
    return 1.0 + 2.0 / mu


def condgam_threshold(p: float, mu: float) -> float:
    """Lower bound that gamma1 + gamma2 must strictly exceed."""
    return max(1.0, (mu * p * 2.0**p) ** (1.0 / (p - 1.0)))


def ode_blowup_threshold(p: float, mu: float) -> float:
    """Threshold 2 mu^(1/(p-1)) above which the homogeneous ODE blows up."""
    return 2.0 * mu ** (1.0 / (p - 1.0))


def auto_thresholds(p, gamma_sum, t1, h, count=4):
    """Level ladder whose asymptotic level times sit between T1/4 and 8h before blow-up.

    Uses the undamped rate y ~ [(p-1) 2^(1-p) (T-t)]^(-1/(p-1)); levels below
    2 gamma_sum are dropped.
    """
    levels = []
    tau = t1 / 4.0
    while tau >= 8.0 * h and len(levels) < count:
        m = ((p - 1.0) * 2.0 ** (1.0 - p) * tau) ** (-1.0 / (p - 1.0))
        if m >= 2.0 * gamma_sum:
            levels.append(float(m))
        tau /= 2.0
    return levels


@dataclass
class ProblemConfig:
    p: float
    mu: float
    gamma1: float
    gamma2: float
    r_star: float
    t_star: float
    eps0: float = 1.0
    eps1: float = 1.0
    h: float = 1e-3
    v_max: float = 1e6
    thresholds: list[float] | None = None
    ladder_order: int = 2
    corrector: str = "pc"
    picard_iterations: int = 10
    sample_density: int = 10

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.mu < 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}")
        if self.mu > 0 and not self.p < glassey_exponent(self.mu):
            raise ConfigError(
                f"p={self.p} outside the Glassey range p < 1 + 2/mu = {glassey_exponent(self.mu)}")
        if not (self.h > 0 and self.r_star > 0 and self.t_star > 0):
            raise ConfigError("h, r_star and t_star must be positive")
        if self.eps1 == -1:
            raise ConfigError("eps1 = -1 is excluded")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ConfigError("gamma1 and gamma2 must be positive")
        parse_corrector(self.corrector)
        if self.ladder_order not in (1, 2):
            raise ConfigError("ladder_order must be 1 or 2")
        if self.thresholds is not None:
            th = [float(m) for m in self.thresholds]
            if len(th) < 2:
                raise ConfigError("need at least two thresholds")
            if any(b <= a for a, b in zip(th, th[1:])):
                raise ConfigError("thresholds must be strictly increasing")
            self.thresholds = th
        ceiling = max([self.gamma_sum] + list(self.thresholds or []))
        if not self.v_max > ceiling:
            raise ConfigError(f"v_max={self.v_max} must exceed {ceiling}")

    @property
    def gamma_sum(self) -> float:
        return self.gamma1 + self.gamma2

    @property
    def half_width(self) -> float:
        return self.r_star + self.t_star

    def ladder(self) -> list[float]:
        if self.thresholds is not None:
            return list(self.thresholds)
        try:
            t1 = min(closed_form_T1(self.p, self.mu, self.gamma_sum), self.t_star)
        except NoBlowupError:
            t1 = self.t_star
        levels = [m for m in auto_thresholds(self.p, self.gamma_sum, t1, self.h) if m < self.v_max]
        if len(levels) < 2:
            raise ConfigError("cannot build a default threshold ladder; set thresholds explicitly")
        return levels

    def to_dict(self):
        return asdict(self)


def parse_corrector(name: str) -> tuple[str, int]:
    """'pc' | 'fixed_point_<k>' | 'abm4' -> (kind, extra corrector passes)."""
    if name == "pc":
        return "pc", 0
    if name == "abm4":
        return "abm4", 1
    if name.startswith("fixed_point_"):
        try:
            k = int(name[len("fixed_point_"):])
        except ValueError:
            k = -1
        if k >= 0:
            return "pc", k
    raise ConfigError(f"unknown corrector {name!r}")


@dataclass(frozen=True)
class InitialData:
    """Riemann invariants f = u1 + u0', g = u1 - u0' at t = 0."""

    f: Expression
    g: Expression
    u0: Expression | None = None

    @property
    def f_deriv(self) -> Expression:
        return self.f.derivative()

    @property
    def g_deriv(self) -> Expression:
        return self.g.derivative()

    @classmethod
    def from_strings(cls, f: str, g: str, u0: str | None = None):
        return cls(Expression.parse(f), Expression.parse(g),
                   Expression.parse(u0) if u0 else None)

    @classmethod
    def from_wave_data(cls, u0_prime: str, u1: str, u0: str | None = None):
        f, g = riemann_invariants(Expression.parse(u0_prime), Expression.parse(u1))
        return cls(f, g, Expression.parse(u0) if u0 else None)


def riemann_invariants(u0_prime: Expression, u1: Expression) -> tuple[Expression, Expression]:
    f = Expression.from_ast(Bin("+", u1.ast, u0_prime.ast))
    g = Expression.from_ast(Bin("-", u1.ast, u0_prime.ast))
    return f, g


@dataclass
class AssumptionRecord:
    id: str
    satisfied: bool
    margin: float
    details: str = ""


@dataclass
class AssumptionReport:
    records: list[AssumptionRecord] = field(default_factory=list)
    a5_feasible: bool = False

    def __getitem__(self, key) -> AssumptionRecord:
        for rec in self.records:
            if rec.id == key:
                return rec
        raise KeyError(key)

    @property
    def hard_ok(self) -> bool:
        return self["condgam"].satisfied and self["A2"].satisfied

    @property
    def all_ok(self) -> bool:
        return all(r.satisfied for r in self.records)

    def to_dict(self):
        return {"a5_feasible": self.a5_feasible,
                "records": [asdict(r) for r in self.records]}


def a5_structural(p, mu, eps1):
    factor = 1.0 + eps1 / (2.0 * (1.0 + eps1))
    return a5_structural_at_factor(p, mu, factor)


def a5_structural_at_factor(p, mu, factor):
    return 2.0**-p * (2 * p - 1) * factor * (1 - 1 / (2 * p)) - 2.0 ** (1 - p) * p - mu


def sampling_lattice(cfg: ProblemConfig) -> np.ndarray:
    """Uniform abscissas over the closed ball B_{R*+T*}, sample_density points per h."""
    w = cfg.half_width
    n = int(round(2 * w / cfg.h * cfg.sample_density)) + 1
    return np.linspace(-w, w, n)


def _sample(expr, xs, name):
    try:
        return expr(xs)
    except ExprEvalError as err:
        raise DataError(f"{name} is not finite at x={err.x!r}") from err


def validate_assumptions(cfg: ProblemConfig, data: InitialData) -> AssumptionReport:
    p, mu = cfg.p, cfg.mu
    gam = cfg.gamma_sum
    recs = []

    thr = condgam_threshold(p, mu)
    m = gam - thr
    recs.append(AssumptionRecord("condgam", m > 0, m, f"gamma1+gamma2={gam:g} vs threshold {thr:g}"))

    ode_thr = ode_blowup_threshold(p, mu)
    try:
        t1 = closed_form_T1(p, mu, gam)
        m = cfg.t_star - t1
        det = f"T1={t1:.12g}, T*={cfg.t_star:g}"
    except NoBlowupError:
        m = -math.inf
        det = "homogeneous ODE does not blow up"
    det += f"; ODE threshold 2mu^(1/(p-1))={ode_thr:g}, margin {gam - ode_thr:g}"
    recs.append(AssumptionRecord("A1", m > 0, m, det))

    xs = sampling_lattice(cfg)
    f = _sample(data.f, xs, "f")
    g = _sample(data.g, xs, "g")
    fd = _sample(data.f_deriv, xs, "f'")
    gd = _sample(data.g_deriv, xs, "g'")
    m = float(min(np.min(f - cfg.gamma1), np.min(g - cfg.gamma2)))
    # A2 is an inequality f >= gamma1, so equality counts as satisfied
    recs.append(AssumptionRecord("A2", m >= 0, m, f"{xs.size} samples on B_(R*+T*)"))
    recs.append(AssumptionRecord("A3", True, math.inf, "satisfied (by grammar)"))

    drive = 2.0**-p * gam**p - mu / 2.0 * gam
    slope = float(np.max(np.abs(fd) + np.abs(gd)))
    m = drive - (2.0 + cfg.eps0) * slope
    recs.append(AssumptionRecord("A4", m >= 0 and cfg.eps0 > 0, m,
                                 f"drive={drive:g}, max(|f'|+|g'|)={slope:g}, eps0={cfg.eps0:g}"))

    feasible = a5_structural_at_factor(p, mu, 1.5) > 0
    s = a5_structural(p, mu, cfg.eps1)
    d = drive - (2.0 + cfg.eps1) * slope
    m = min(s, d)
    det = f"structural={s:.6g}, data={d:.6g}, eps1={cfg.eps1:g}"
    ok = s > 0 and d >= 0
    if not feasible:
        det = "infeasible for all eps1; " + det
    if cfg.eps1 <= 0:
        ok = False
        det = "eps1 <= 0 is paper-ambiguous, require eps1 > 0; " + det
    recs.append(AssumptionRecord("A5", ok, m, det))
    return AssumptionReport(recs, feasible)


def load_problem(problem: dict, numerics: dict | None = None) -> ProblemConfig:
    kwargs = dict(problem)
    kwargs.update(numerics or {})
    known = set(ProblemConfig.__dataclass_fields__)
    unknown = set(kwargs) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    return ProblemConfig(**kwargs)


def constant_data(cfg: ProblemConfig) -> InitialData:
    return InitialData.from_strings(repr(float(cfg.gamma1)), repr(float(cfg.gamma2)))

