#!/usr/bin/env python3
"""Compare the learned region against the quadratic-Lyapunov baseline.

Usage: python scripts/compare_baseline.py scenarios/case_a.yaml
"""

import sys

from microgrid_tsa import learn_function, linearize, load_scenario
from microgrid_tsa.baseline import monte_carlo_volumes, quadratic_region, solve_lyapunov_equation
from microgrid_tsa.region import sr_est


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 2
    sc = load_scenario(argv[1])
    cert = learn_function(sc.system, sc.train_cfg, sc.fals_cfg, sc.n_i)
    region = sr_est(cert, n_sr=sc.n_sr, seed=sc.seed)

    P = solve_lyapunov_equation(linearize(sc.system).A)
    quad = quadratic_region(sc.system, P, sc.fals_cfg)
    vols = monte_carlo_volumes(region, quad, seed=sc.seed)
    print(f"[{sc.name}] neural d* = {region.d_star:.4f}, quadratic d_q = {quad.d_q:.4f}"
          f"{' (u_q capped at u_max)' if quad.capped else ''}")
    print(f"[{sc.name}] MC volume neural / quadratic = "
          f"{vols['neural_volume']:.5f} / {vols['quadratic_volume']:.5f} "
          f"(ratio {vols['ratio']:.2f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
