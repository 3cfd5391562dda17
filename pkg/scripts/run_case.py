#!/usr/bin/env python3
"""Run the full assessment pipeline for one bundled scenario.

Usage: python scripts/run_case.py scenarios/case_a.yaml [outdir]
"""

import pathlib
import sys

import numpy as np

from microgrid_tsa import learn_function, linearize, is_asymptotically_stable, load_scenario
from microgrid_tsa.region import contains, sr_est, write_level_set_csv


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 2
    sc = load_scenario(argv[1])
    outdir = pathlib.Path(argv[2] if len(argv) > 2 else f"out_{sc.name}")
    outdir.mkdir(parents=True, exist_ok=True)

    stable, eig = is_asymptotically_stable(linearize(sc.system).A, sc.stability_margin)
    print(f"[{sc.name}] linearized spectrum max Re = {max(np.real(eig)):.4f} "
          f"({'stable' if stable else 'UNSTABLE'})")
    if not stable:
        return 3

    cert = learn_function(sc.system, sc.train_cfg, sc.fals_cfg, sc.n_i)
    cert.save(outdir / "certificate.json")
    print(f"[{sc.name}] certified after {cert.audit['updates']} updates")

    region = sr_est(cert, n_sr=sc.n_sr, seed=sc.seed)
    print(f"[{sc.name}] d* = {region.d_star:.6f} "
          f"({region.stats['converged']}/{region.stats['n_sr']} starts converged)")
    if sc.system.m >= 2:
        write_level_set_csv(outdir / "level_set.csv", cert, region.d_star, sc.u)

    if sc.initial_condition is not None:
        x0 = sc.initial_condition
        inside = contains(region, x0)
        print(f"[{sc.name}] V(x0) = {cert.value(x0):.4f} vs d* = {region.d_star:.4f} "
              f"-> x0 {'inside' if inside else 'OUTSIDE'} the security region")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
