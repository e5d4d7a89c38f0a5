"""Print a median/IQR table of the average discrepancy for a simulation preset.

    python scripts/run_simulation.py --preset desk-trend --replicates 20 --workers 4
"""

import argparse
import time

from wtgrad.simulation import PRESETS, preset, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="desk-trend", choices=sorted(PRESETS))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    cases = preset(args.preset, seed=args.seed, replicates=args.replicates)
    start = time.perf_counter()
    summary = run_experiment(cases, workers=args.workers)
    print(f"{'N':>5} {'n':>5} {'delta':>10} {'median':>9} {'q25':>9} {'q75':>9} {'failed':>6}")
    for case in summary.cases:
        c, q = case.config, case.quantiles()
        print(f"{c.n_dists:>5} {c.n_obs:>5} {c.delta:>10.3g} {q[0.5]:>9.4f} {q[0.25]:>9.4f} "
              f"{q[0.75]:>9.4f} {case.n_failed:>6}")
    print(f"{time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
