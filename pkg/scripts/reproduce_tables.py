#!/usr/bin/env python3
"""Reproduce the six error tables (medians over seeds) and the figure data grids.

    python scripts/reproduce_tables.py --out results --seeds 10
    python scripts/reproduce_tables.py --examples 1 3 --no-figures
"""

import argparse
import time
from pathlib import Path

from parasource.experiments import EXAMPLE_IDS, TABLE_EPSILONS, example_config, run_figures, run_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--examples", nargs="*", default=list(EXAMPLE_IDS))
    ap.add_argument("--freq-unit", default="cycles", choices=("cycles", "angular"))
    ap.add_argument("--delta-max-policy", default="set", choices=("set", "case"))
    ap.add_argument("--no-figures", action="store_true")
    args = ap.parse_args()

    for ex in args.examples:
        cfg = example_config(ex, freq_unit=args.freq_unit)
        t = time.perf_counter()
        tab = run_table(cfg, TABLE_EPSILONS, range(args.seeds), delta_max_policy=args.delta_max_policy)
        path = tab.write_csv(args.out / f"table{cfg.source.id[2:]}.csv")
        print(f"{cfg.source.id}: {path} ({time.perf_counter() - t:.1f} s)")
        print(f"  {'eps':>8s} {'R1':>9s} {'R2':>9s} {'R3':>9s} {'unreg':>10s}")
        for row in tab.rows:
            e = row.errors
            print(f"  {row.epsilon:8.0e} {e['r1']:9.4f} {e['r2']:9.4f} {e['r3']:9.4f} {row.unregularized_error:10.4g}")
        if not args.no_figures:
            n = len(run_figures(cfg, args.out / "figures"))
            print(f"  {n} figure grids written")


if __name__ == "__main__":
    main()
