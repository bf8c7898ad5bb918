"""Blow-up time at h, h/2, h/4, ... for one config, with a ladder frozen across grids.

    python scripts/refinement_study.py configs/reference_p2.json --levels 4
"""

import argparse
import math

from blowup_lab.cli import ExperimentConfig
from blowup_lab.curve import curve_extract
from blowup_lab.model import ProblemConfig
from blowup_lab.solver import solve_characteristic


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--x", type=float, default=0.0)
    ap.add_argument("--order", type=int, choices=(1, 2), default=None)
    ap.add_argument("--corrector", default=None)
    a = ap.parse_args()
    exp = ExperimentConfig.load(a.config)
    base = exp.problem.to_dict()
    base["thresholds"] = exp.problem.ladder()
    if a.order:
        base["ladder_order"] = a.order
    if a.corrector:
        base["corrector"] = a.corrector
    print(f"ladder {base['thresholds']}")
    Ts = []
    for m in range(a.levels):
        cfg = ProblemConfig(**{**base, "h": exp.problem.h / 2**m})
        sol = solve_characteristic(cfg, exp.data)
        crv = curve_extract(sol, cfg, xs=[a.x - 0.01, a.x, a.x + 0.01])
        Ts.append(crv(a.x))
        line = f"h={cfg.h:.6g}  T_hat={Ts[-1]:.12f}"
        if len(Ts) >= 3:
            d1, d2 = abs(Ts[-3] - Ts[-2]), abs(Ts[-2] - Ts[-1])
            line += f"  order={math.log2(d1 / d2):.3f}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
