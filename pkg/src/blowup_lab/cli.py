"""Experiment runner: one JSON config in, CSV/JSON artifacts and a manifest out."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, curve as curve_mod, ode, selfsimilar
from .model import (ConfigError, DataError, InitialData, ProblemConfig, load_problem,
                    validate_assumptions)
from .solver import PreconditionError, picard_iterates, solve_characteristic

SUBCOMMANDS = ("assumptions", "ode", "solve", "curve", "rates", "profile", "convergence", "run")


class HardFailure(RuntimeError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % v


def _clean(obj):
    """JSON-safe copy: NaN/inf become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float("%.17g" % v)
    return obj


def write_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ----------------------------------------------------------------- config

@dataclass
class Outputs:
    dir: str = "results"
    emit_field: bool = True
    emit_curve: bool = True
    emit_rates: bool = True
    emit_profile: dict | None = None
    rate_x: float | None = None


@dataclass
class ExperimentConfig:
    problem: ProblemConfig
    data: InitialData
    data_source: dict
    outputs: Outputs = field(default_factory=Outputs)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        for key in ("problem", "data"):
            if key not in doc:
                raise ConfigError(f"config lacks the {key!r} section")
        problem = load_problem(doc["problem"], doc.get("numerics"))
        d = dict(doc["data"])
        wave = "u0_prime" in d or "u1" in d
        direct = "f" in d or "g" in d
        if wave == direct:
            raise ConfigError("data needs exactly one of {u0_prime, u1} or {f, g}")
        if wave:
            if not ("u0_prime" in d and "u1" in d):
                raise ConfigError("data needs both u0_prime and u1")
            data = InitialData.from_wave_data(d["u0_prime"], d["u1"], d.get("u0"))
        else:
            if not ("f" in d and "g" in d):
                raise ConfigError("data needs both f and g")
            data = InitialData.from_strings(d["f"], d["g"], d.get("u0"))
        out = Outputs(**doc.get("outputs", {}))
        return cls(problem, data, d, out, doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ----------------------------------------------------------------- stages

class Bundle:
    """Collects emitted files per stage and writes the manifest."""

    def __init__(self, out: Path, quiet=False):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.stages: dict[str, dict] = {}
        self.quiet = quiet
        self.status = "ok"

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def stage(self, name, status="ok", **info):
        self.stages[name] = {"status": status, "files": {}, **info}
        return self.stages[name]

    def add(self, stage, filename):
        self.stages[stage]["files"][filename] = digest(self.out / filename)

    def write_manifest(self, cfg_raw):
        cfg_text = json.dumps(_clean(cfg_raw), sort_keys=True)
        manifest = {
            "status": self.status,
            "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
            "stages": self.stages,
        }
        write_json(self.out / "manifest.json", manifest)
        return manifest


def stage_assumptions(exp: ExperimentConfig, bundle: Bundle):
    rep = validate_assumptions(exp.problem, exp.data)
    st = bundle.stage("assumptions", "ok" if rep.hard_ok else "aborted")
    write_json(bundle.out / "assumptions.json", rep.to_dict())
    bundle.add("assumptions", "assumptions.json")
    for r in rep.records:
        bundle.say(f"{r.id}: {'ok' if r.satisfied else 'FAIL'} margin={r.margin:.6g} ({r.details})")
    if not rep.a5_feasible:
        bundle.say("A5: infeasible for all ε₁")
    st["soft_failures"] = [r.id for r in rep.records if r.id in ("A4", "A5") and not r.satisfied]
    if not rep.hard_ok:
        bad = [r for r in rep.records if r.id in ("condgam", "A2") and not r.satisfied]
        raise HardFailure("; ".join(f"{r.id} margin {r.margin:g}" for r in bad))
    return rep


def stage_ode(exp: ExperimentConfig, bundle: Bundle):
    cfg = exp.problem
    st = bundle.stage("ode")
    t1 = ode.closed_form_T1(cfg.p, cfg.mu, cfg.gamma_sum)
    traj = ode.rk4_trajectory(cfg.p, cfg.mu, cfg.gamma1, cfg.gamma2, dt=cfg.t_star / 1e5)
    si = ode.rk4_trajectory(cfg.p, cfg.mu, cfg.gamma1, cfg.gamma2, damping="scale_invariant",
                            t_star=cfg.t_star)
    stride = max(1, len(traj.states) // 10000)
    rows = [(s.t, s.y, s.phi_hat, s.psi_hat) for s in traj.states[::stride]]
    write_csv(bundle.out / "ode_trajectory.csv", ["t", "y", "phi_hat", "psi_hat"], rows)
    bundle.add("ode", "ode_trajectory.csv")
    st.update(T1_closed_form=t1, T1_detected=traj.blowup_time,
              T_scale_invariant=si.blowup_time, monotone=traj.monotone)
    bundle.say(f"T1 = {t1:.6f} (closed form), detected {traj.blowup_time:.6f}; "
               f"with mu/(1+t) damping {si.blowup_time:.6f}")
    return t1


def stage_solve(exp, bundle, informational=False):
    cfg = exp.problem
    sol = solve_characteristic(cfg, exp.data)
    st = bundle.stage("solve", "informational" if informational else "ok")
    lat = sol.lattice
    if exp.outputs.emit_field:
        inside = lat.inside
        kk, jj = np.nonzero(inside)
        rows = zip(kk, lat.t[kk], lat.x[jj], sol.phi[kk, jj], sol.psi[kk, jj], sol.blown[kk, jj])
        write_csv(bundle.out / "field.csv", ["k", "t", "x", "phi", "psi", "blown"], rows)
        bundle.add("solve", "field.csv")
    fx, ft = sol.mask_frontier()
    summary = {"config": cfg.to_dict(), "data": exp.data_source,
               "lattice": {"h": lat.h, "J": lat.J, "K": lat.K},
               "mask_frontier": {"x": fx.tolist(), "t": ft.tolist()}}
    write_json(bundle.out / "solve_summary.json", summary)
    bundle.add("solve", "solve_summary.json")
    bundle.say(f"solved {lat.K + 1} rows x {lat.n} abscissas; {fx.size} columns reach the mask")
    return sol


def stage_curve(exp, bundle, sol, informational=False):
    cfg = exp.problem
    crv = curve_mod.curve_extract(sol, cfg)
    st = bundle.stage("curve", "informational" if informational else "ok")
    levels = cfg.ladder()
    header = ["x", "T_hat", "K_hat", "T_prime", "residual"] + [f"E_{i}" for i in range(len(levels))]
    rows = []
    for i, x in enumerate(crv.xs):
        got = dict(crv.ladder[i])
        rows.append([x, crv.T_hat[i], crv.K_hat[i], crv.T_prime[i], crv.residual[i]]
                    + [got.get(m, float("nan")) for m in levels])
    if exp.outputs.emit_curve:
        write_csv(bundle.out / "curve.csv", header, rows)
        bundle.add("curve", "curve.csv")
    diag = {"lipschitz_hat": crv.lipschitz_hat,
            "lipschitz_bound": 1.0 / (1.0 + cfg.eps0),
            "levels": levels,
            "T_hat_range": [float(crv.T_hat.min()), float(crv.T_hat.max())]}
    try:
        diag["derivative_continuity"] = curve_mod.derivative_continuity(crv)
    except curve_mod.InsufficientCoverage as err:
        diag["derivative_continuity"] = str(err)
    write_json(bundle.out / "curve_diagnostics.json", diag)
    bundle.add("curve", "curve_diagnostics.json")
    st["lipschitz_hat"] = crv.lipschitz_hat
    bundle.say(f"curve: {crv.xs.size} abscissas, T_hat in [{crv.T_hat.min():.6f}, {crv.T_hat.max():.6f}], "
               f"lipschitz_hat={crv.lipschitz_hat:.4f}")
    return crv


def _center(exp, crv):
    x = exp.outputs.rate_x
    if x is None and exp.outputs.emit_profile:
        x = exp.outputs.emit_profile.get("x0")
    if x is None:
        x = 0.0
    return float(crv.xs[int(np.argmin(np.abs(crv.xs - x)))])


def stage_rates(exp, bundle, sol, crv, seed=0, informational=False):
    cfg = exp.problem
    st = bundle.stage("rates", "informational" if informational else "ok")
    x = _center(exp, crv)
    fit = analysis.fit_rate_exponent(sol, crv, x, eps0=cfg.eps0)
    two = analysis.check_two_sided(sol, crv, cfg.p, cfg.eps0)
    dom = analysis.check_gradient_domination(sol, cfg.eps0)
    rng = np.random.default_rng(seed)
    sandwich_fail = 0
    for _ in range(100):
        xi = rng.uniform(crv.xs[0], crv.xs[-1])
        ti = rng.uniform(0.0, crv(xi))
        d = curve_mod.distance_to_curve(crv, xi, ti)
        gap = crv(xi) - ti
        if not (gap / math.sqrt(2) - 1e-12 <= d <= gap + 1e-12):
            sandwich_fail += 1
    doc = {"x": x, "fit": fit.to_dict(), "two_sided": two.to_dict(),
           "gradient_domination": {"phi_margin": dom.phi_margin, "phi_at": dom.phi_at,
                                   "psi_margin": dom.psi_margin, "psi_at": dom.psi_at,
                                   "slack_constant": dom.slack_constant, "flags": dom.flags},
           "distance_sandwich": {"probes": 100, "failures": sandwich_fail, "seed": seed}}
    if cfg.picard_iterations > 0:
        its = picard_iterates(cfg, exp.data, cfg.picard_iterations)
        bad = analysis.check_picard_monotone(its)
        doc["picard_monotone"] = "pass" if bad is None else vars(bad)
    write_json(bundle.out / "rates.json", doc)
    bundle.add("rates", "rates.json")
    write_csv(bundle.out / "violations.csv", ["x", "t", "quantity", "bound", "value"],
              [(v.x, v.t, v.quantity, v.bound, v.value) for v in two.violations])
    bundle.add("rates", "violations.csv")
    bundle.say(f"rates at x={x:g}: q_hat={fit.q_hat:.4f} (paper {fit.q_paper:.4f}), "
               f"violations {two.counts() or 'none'}")
    return fit


def stage_profile(exp, bundle, sol, crv, informational=False):
    cfg = exp.problem
    st = bundle.stage("profile", "informational" if informational else "ok")
    opts = exp.outputs.emit_profile or {}
    x0 = _center(exp, crv)
    lambdas = opts.get("lambdas", [0.1, 0.05, 0.025])
    prof, rows, slopes = selfsimilar.profile_convergence(sol, crv, x0, lambdas, mu=cfg.mu, h=cfg.h)
    write_csv(bundle.out / "profile.csv", ["lambda", "sup_error", "damping_contribution"],
              [(r.lam, r.sup_error, r.damping_contribution) for r in rows])
    bundle.add("profile", "profile.csv")
    doc = prof.to_dict()
    doc.update(x0=x0, slope_left=slopes[0], slope_right=slopes[1])
    write_json(bundle.out / "profile.json", doc)
    bundle.add("profile", "profile.json")
    bundle.say("profile errors: " + ", ".join(f"{r.lam:g}: {r.sup_error:.4g}" for r in rows))
    return rows


def stage_convergence(exp, bundle):
    """Blow-up time and field at h, h/2, h/4 with a ladder frozen at the coarse h."""
    base = exp.problem
    st = bundle.stage("convergence")
    levels = base.ladder()
    results = []
    for m in (1, 2, 4):
        cfg = ProblemConfig(**{**base.to_dict(), "h": base.h / m, "thresholds": levels})
        sol = solve_characteristic(cfg, exp.data)
        crv = curve_mod.curve_extract(sol, cfg)
        x = _center(exp, crv)
        T = crv(x)
        t_probe = 0.5 * T if not results else results[0][3]
        k = int(round(t_probe / cfg.h))
        y = float(sol.total[k, sol.lattice.index(x)])
        results.append((cfg.h, x, T, k * cfg.h, y))
    Ts = [r[2] for r in results]
    ys = [r[4] for r in results]

    def order(v):
        a, b = abs(v[0] - v[1]), abs(v[1] - v[2])
        return math.log2(a / b) if a > 0 and b > 0 else float("nan")

    write_csv(bundle.out / "convergence.csv", ["h", "x", "T_hat", "t_probe", "y_probe"], results)
    bundle.add("convergence", "convergence.csv")
    st.update(order_T_hat=order(Ts), order_field=order(ys), levels=levels)
    bundle.say(f"observed order: T_hat {order(Ts):.3f}, field {order(ys):.3f}")
    return st


# -------------------------------------------------------------- dispatch

PIPELINES = {
    "assumptions": ("assumptions",),
    "ode": ("ode",),
    "solve": ("assumptions", "solve"),
    "curve": ("assumptions", "solve", "curve"),
    "rates": ("assumptions", "solve", "curve", "rates"),
    "profile": ("assumptions", "solve", "curve", "profile"),
    "convergence": ("assumptions", "convergence"),
    "run": ("assumptions", "solve", "curve", "rates", "profile"),
}


def execute(command, exp: ExperimentConfig, out: Path, quiet=False, seed=0):
    """Run a pipeline; returns (exit code, manifest)."""
    bundle = Bundle(out, quiet)
    steps = PIPELINES[command]
    full = command == "run"
    sol = crv = None
    soft = False
    try:
        for step in steps:
            if step == "assumptions":
                rep = stage_assumptions(exp, bundle)
                soft = not (rep["A4"].satisfied and rep["A5"].satisfied)
            elif step == "ode":
                stage_ode(exp, bundle)
            elif step == "solve":
                sol = stage_solve(exp, bundle, soft)
            elif step == "curve":
                if full and not exp.outputs.emit_curve and not (exp.outputs.emit_rates or exp.outputs.emit_profile):
                    continue
                crv = stage_curve(exp, bundle, sol, soft)
            elif step == "rates":
                if full and not exp.outputs.emit_rates:
                    continue
                stage_rates(exp, bundle, sol, crv, seed, soft)
            elif step == "profile":
                if full and not exp.outputs.emit_profile:
                    continue
                stage_profile(exp, bundle, sol, crv, soft)
            elif step == "convergence":
                stage_convergence(exp, bundle)
    except HardFailure as err:
        bundle.status = "aborted"
        bundle.say(f"aborted: {err}")
        return 1, bundle.write_manifest(exp.raw)
    except (PreconditionError, ValueError, ArithmeticError, RuntimeError) as err:
        bundle.status = "failed"
        bundle.stages.setdefault("error", {"status": "failed", "files": {}})["message"] = str(err)
        bundle.say(f"failed: {err}")
        return 1, bundle.write_manifest(exp.raw)
    if soft:
        bundle.status = "ok (informational: A4/A5 not satisfied)"
    return 0, bundle.write_manifest(exp.raw)


def build_parser():
    ap = argparse.ArgumentParser(prog="blowup-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="JSON experiment configuration")
        sp.add_argument("--out", help="output directory (default: outputs.dir of the config)")
        sp.add_argument("--quiet", action="store_true")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for randomized probes; never affects the solver")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        exp = ExperimentConfig.load(args.config)
    except (OSError, json.JSONDecodeError, ConfigError, DataError, TypeError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = Path(args.out or exp.outputs.dir)
    code, _ = execute(args.command, exp, out, args.quiet, args.seed)
    return code


if __name__ == "__main__":
    sys.exit(main())
