"""Size and power tables for the simulation models.

Writes one report CSV and prints the three tables (null, sparse, dense).
The default grid is a quick pass; ``--full`` runs p up to 1000 with 1000
replicates, which takes hours on one core.
"""

import argparse
import sys
from dataclasses import replace

from hdindep.simulation import FULL_P_GRID, SimulationConfig, report_tables, run_grid, write_report_csv


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--p", default="50,100,200", help="comma-separated dimensions")
    parser.add_argument("--reps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--m", type=int, default=None, help="tail table size (default max(1e6, 100 p^2))")
    parser.add_argument("--rank-m", type=int, default=None, help="Spearman tail table size")
    parser.add_argument("--full", action="store_true", help="p in 50..1000 and 1000 replicates")
    parser.add_argument("--out", default="simulation_report.csv")
    args = parser.parse_args(argv)

    p_grid = list(FULL_P_GRID) if args.full else [int(v) for v in args.p.split(",")]
    config = SimulationConfig(n=200, alpha=0.05, reps=args.reps, seed=args.seed, m=args.m, rank_m=args.rank_m)
    if args.full:
        config = replace(config, reps=1000)

    report = run_grid(["1a", "1b", "2a", "2b", "3a", "3b"], p_grid, config=config)
    write_report_csv(report, args.out)
    print(report_tables(report))
    print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
