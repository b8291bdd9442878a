"""Effect of the starting point on the nonlinear coarse-operator fit (implicit scheme).

Compares starting from the rediscretized operator with starting from the
weighted rational linear fit: objective before/after and resulting iterations.
"""

import argparse

from mgrit_advection.experiments import ExperimentConfig, build_operators, objective_of, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--exponents", type=int, nargs="+", default=[6, 8])
    args = ap.parse_args()
    print("grid relax m init    objective(redisc)  start      final      evals  status               iters")
    for e in args.exponents:
        for relax in ("F", "FCF"):
            for m in (2, 4):
                base = ExperimentConfig(n_x=2**e, relax=relax, m=m)
                redisc = build_operators(base)
                ref = objective_of(base, redisc.phi, redisc.psi)
                for init in ("redisc", "lls"):
                    cfg = base.replace(coarse="nls", nls_init=init)
                    ops = build_operators(cfg)
                    rep, _ = run(cfg, ops)
                    r = ops.nls
                    print(f"2^{e:<2} {relax:>4} {m} {init:>6}  {ref:17.4e}  {r.objective_initial:9.3e}"
                          f"  {r.objective:9.3e}  {r.n_evals:5d}  {r.message:<20} {rep.count_label():>4}")


if __name__ == "__main__":
    main()
