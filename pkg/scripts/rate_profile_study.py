"""Rate exponent, two-sided bound violations and profile convergence for one config.

    python scripts/rate_profile_study.py configs/bump_p2.json --x0 0.0
"""

import argparse

from blowup_lab.analysis import check_two_sided, fit_rate_exponent, proof_rate_constants
from blowup_lab.cli import ExperimentConfig
from blowup_lab.curve import curve_extract
from blowup_lab.selfsimilar import CoverageError, profile_convergence
from blowup_lab.solver import solve_characteristic


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--x0", type=float, default=0.0)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    a = ap.parse_args()
    exp = ExperimentConfig.load(a.config)
    cfg = exp.problem
    sol = solve_characteristic(cfg, exp.data)
    crv = curve_extract(sol, cfg)
    x0 = float(crv.xs[abs(crv.xs - a.x0).argmin()])
    rep = fit_rate_exponent(sol, crv, x0, eps0=cfg.eps0)
    print(f"x0={x0:g}  T_hat={crv(x0):.8f}  q_hat={rep.q_hat:.4f} (q={rep.q_paper:.4f})  r2={rep.r2:.6f}")
    for name, consts in (("published", None), ("proof", proof_rate_constants(cfg.p, cfg.eps0))):
        two = check_two_sided(sol, crv, cfg.p, cfg.eps0, constants=consts)
        print(f"  {name} constants: {two.checked} nodes checked, violations {two.counts() or 'none'}")
    try:
        prof, rows, slopes = profile_convergence(sol, crv, x0, a.lambdas, mu=cfg.mu, h=cfg.h)
    except CoverageError as err:
        # the probe set reaches s = -2, so every lambda needs T_hat(x0) > 2 lambda
        print(f"profile: {err}")
        return
    print(f"profile alpha={prof.alpha:.4f}  one-sided slopes {slopes[0]:.4f} / {slopes[1]:.4f}")
    for r in rows:
        print(f"  lambda={r.lam:<6g} sup_error={r.sup_error:.5f}  damping={r.damping_contribution:.5f}")


if __name__ == "__main__":
    main()
