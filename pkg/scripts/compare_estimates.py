"""Worst-case convergence estimates for rediscretized and optimized coarse operators.

Prints, for the implicit third-order scheme, the maximum over spatial modes of
the LFA estimate, the coarse-level bound and the dense block norms, next to the
measured iteration count.
"""

import argparse

from mgrit_advection.experiments import ExperimentConfig, build_operators, estimate_sweep, run


def worst_lines(text):
    return [ln[len("# worst-case "):] for ln in text.splitlines() if ln.startswith("# worst-case")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()
    for relax in ("F", "FCF"):
        for m in (2, 4):
            for coarse in ("redisc", "nls"):
                cfg = ExperimentConfig(n_x=args.n, relax=relax, m=m, coarse=coarse)
                ops = build_operators(cfg)
                report, _ = run(cfg, ops)
                summary = ", ".join(worst_lines(estimate_sweep(cfg, ops, dense=args.n <= 64)))
                print(f"{relax:>3} m={m} {coarse:>6}: {report.count_label():>3} iterations | {summary}")


if __name__ == "__main__":
    main()
