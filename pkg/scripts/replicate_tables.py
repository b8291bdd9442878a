"""Replicate both iteration-count tables and judge them against the reference counts.

    python scripts/replicate_tables.py                      # 2^6 and 2^8
    python scripts/replicate_tables.py --max-exponent 12    # full ladder
"""

import argparse
from pathlib import Path

from mgrit_advection.experiments import CI_MAX_EXPONENT, replicate_table
from mgrit_advection.harness import judge_table_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-exponent", type=int, default=CI_MAX_EXPONENT)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    misses = 0
    for table in (1, 2):
        text = replicate_table(table, args.max_exponent, seed=args.seed,
                               allow_large=args.max_exponent > CI_MAX_EXPONENT)
        (outdir / f"table{table}.csv").write_text(text)
        print(text)
        for v in judge_table_csv(table, text):
            print("  " + v.line())
            misses += not v.ok
    print(f"{misses} cell(s) outside the tolerance policy")


if __name__ == "__main__":
    main()
