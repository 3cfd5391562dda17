#!/usr/bin/env python3
"""Sweep training seeds for a scenario and report which ones certify.

Usage: python scripts/seed_sweep.py scenarios/case_a.yaml [n_seeds]
"""

import dataclasses
import sys
import time

from microgrid_tsa import learn_function, load_scenario
from microgrid_tsa.errors import LearnFailure


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 2
    sc = load_scenario(argv[1])
    n_seeds = int(argv[2]) if len(argv) > 2 else 5
    ok = 0
    for seed in range(n_seeds):
        tc = dataclasses.replace(sc.train_cfg, seed=seed)
        t0 = time.perf_counter()
        try:
            cert = learn_function(sc.system, tc, sc.fals_cfg, sc.n_i)
            ok += 1
            print(f"seed {seed}: certified after {cert.audit['updates']} updates "
                  f"({time.perf_counter() - t0:.1f} s)")
        except LearnFailure as exc:
            print(f"seed {seed}: failed ({time.perf_counter() - t0:.1f} s): {exc}")
    print(f"{ok}/{n_seeds} seeds certified")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
