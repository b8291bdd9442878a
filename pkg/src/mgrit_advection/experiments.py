"""Experiment drivers behind the command line: runs, table sweeps, estimate sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mgrit_advection.circulant import TimeStepper, power_column, stepper_spectrum
from mgrit_advection.discretization import (
    ProblemSpec,
    build_time_stepper,
    default_order,
    rediscretized_coarse,
    spatial_stencil,
    tableau,
)
from mgrit_advection.estimates import (
    DENSE_CAP,
    coarse_block,
    dense_block_norms,
    lfa_values,
    per_mode_values,
    spectral_norm,
)
from mgrit_advection.optimize import (
    NlsContext,
    NlsResult,
    SparsityPattern,
    WeightVector,
    nls_objective,
    nls_solve,
    penalised_bounds,
    read_operator,
    truncated_coarse,
    weighted_lls,
    write_operator,
)
from mgrit_advection.solver import ConvergenceReport, SolverConfig, mgrit_solve

log = logging.getLogger(__name__)

COARSE_MODES = ("redisc", "trunc", "lls", "nls", "exact", "file")
GRID_EXPONENTS = (6, 8, 10, 12)
CI_MAX_EXPONENT = 8

EXIT_CONVERGED, EXIT_ERROR, EXIT_DNC, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    scheme: str = "sdirk3"
    order: int | None = None
    n_x: int = 64
    n_t: int | None = None
    cfl: float = 1.0
    a: float = 1.0
    m: int = 2
    relax: str = "F"
    coarse: str = "redisc"
    weight_power: float | None = None
    nls_init: str = "lls"
    pattern: str = "fine"
    max_evals: int = 4000
    tol: float = 1e-10
    max_iter: int = 50
    seed: int = 0
    operator_file: str | None = None
    output: str | None = None

    def __post_init__(self):
        self.scheme = self.scheme.lower()
        self.relax = self.relax.upper()
        self.coarse = self.coarse.lower()
        if self.order is None:
            self.order = default_order(self.scheme)
        if self.n_t is None:
            self.n_t = self.n_x
        if self.weight_power is None:
            self.weight_power = 40.0 if self.order == 2 else 20.0
        self.validate()

    def validate(self):
        tab = tableau(self.scheme)
        if self.coarse not in COARSE_MODES:
            raise ValueError(f"coarse mode must be one of {COARSE_MODES}")
        if self.coarse in ("trunc", "lls") and not tab.is_explicit:
            raise ValueError(f"coarse mode {self.coarse!r} needs an explicit scheme; "
                             f"{self.scheme} is implicit")
        if self.coarse == "file" and not self.operator_file:
            raise ValueError("coarse mode 'file' needs operator_file")
        if self.pattern not in ("fine", "full"):
            raise ValueError("pattern must be 'fine' or 'full'")
        if self.nls_init not in ("lls", "redisc"):
            raise ValueError("nls_init must be 'lls' or 'redisc'")
        if self.m < 2 or self.n_t % self.m:
            raise ValueError(f"n_t={self.n_t} must be a multiple of m={self.m} >= 2")

    @property
    def problem(self) -> ProblemSpec:
        return ProblemSpec.from_cfl(self.n_x, self.n_t, self.cfl, self.a)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.n_x, self.n_t, self.m, self.relax, self.tol,
                            self.max_iter, self.seed)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # flat key = value text
    def dumps(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n"
                       for f in dataclasses.fields(self))

    @classmethod
    def parse_value(cls, name: str, raw: str):
        ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
        raw = raw.strip()
        if raw in ("None", ""):
            return None
        if "int" in ftype:
            return int(raw)
        if "float" in ftype:
            return float(raw)
        return raw

    @classmethod
    def loads(cls, text: str, **overrides) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in names:
                raise ValueError(f"line {lineno}: expected 'key = value' with a known key")
            values[key] = cls.parse_value(key, raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class Operators:
    problem: ProblemSpec
    phi: TimeStepper
    psi: TimeStepper
    nls: NlsResult | None = None


def fine_operator(cfg: ExperimentConfig):
    problem = cfg.problem
    L = spatial_stencil(cfg.order, problem.a, problem.dx, problem.n_x)
    tab = tableau(cfg.scheme)
    return problem, L, tab, build_time_stepper(L, tab, problem.dt)


def coarse_pattern(cfg: ExperimentConfig, stencil) -> SparsityPattern:
    """Sparsity of the coarse operator: the fine stepper's own, or every offset."""
    if cfg.pattern == "full":
        return SparsityPattern.full(stencil.n)
    return SparsityPattern.of(stencil)


def nls_context(cfg: ExperimentConfig, phi: TimeStepper, L=None, tab=None) -> NlsContext:
    pattern_e = coarse_pattern(cfg, phi.explicit)
    pattern_i = None if phi.is_explicit else SparsityPattern.of(phi.implicit)
    init = None
    if cfg.nls_init == "redisc":
        init = rediscretized_coarse(L, tab, cfg.m, phi.dt)
    return NlsContext(phi, cfg.m, cfg.n_t, cfg.relax, pattern_e, pattern_i, init=init,
                      weights=WeightVector.eigen_power(phi, cfg.weight_power),
                      max_evals=cfg.max_evals)


def build_operators(cfg: ExperimentConfig) -> Operators:
    problem, L, tab, phi = fine_operator(cfg)
    mode = cfg.coarse
    nls = None
    if mode == "redisc":
        psi = rediscretized_coarse(L, tab, cfg.m, problem.dt)
    elif mode == "exact":
        psi = TimeStepper.from_explicit(power_column(phi, cfg.m), label="exact")
    elif mode == "trunc":
        pattern = coarse_pattern(cfg, phi.explicit)
        psi = TimeStepper.from_explicit(truncated_coarse(phi, cfg.m, pattern), label="trunc")
    elif mode == "lls":
        pattern = coarse_pattern(cfg, phi.explicit)
        w = WeightVector.eigen_power(phi, cfg.weight_power)
        psi = TimeStepper.from_explicit(weighted_lls(phi, cfg.m, pattern, w), label="lls")
    elif mode == "nls":
        nls = nls_solve(nls_context(cfg, phi, L, tab))
        psi = nls.stepper
    else:
        psi, _ = read_operator(cfg.operator_file)
        if psi.n != cfg.n_x:
            raise ValueError(f"operator file is for n_x={psi.n}, config has {cfg.n_x}")
    return Operators(problem, phi, psi, nls)


def run(cfg: ExperimentConfig, ops: Operators | None = None) -> tuple[ConvergenceReport, int]:
    """Build operators, solve, and write ``<output>.json`` / ``<output>.csv`` if requested."""
    ops = ops or build_operators(cfg)
    report, _ = mgrit_solve(cfg.solver_config(), ops.phi, ops.psi,
                            ops.problem.initial_condition())
    if cfg.output:
        base = Path(cfg.output)
        payload = {"config": dataclasses.asdict(cfg), "report": report.to_dict()}
        if ops.nls is not None:
            payload["nls"] = {"objective_initial": ops.nls.objective_initial,
                              "objective": ops.nls.objective, "evaluations": ops.nls.n_evals,
                              "converged": ops.nls.converged}
        base.with_suffix(".json").write_text(json.dumps(payload, indent=2))
        base.with_suffix(".csv").write_text(report.history_csv())
    return report, EXIT_CONVERGED if report.converged else EXIT_DNC


# -- table replication ----------------------------------------------------

TABLE_COLUMNS = {
    1: [("heun2", 0.4, "FCF", 2, "lls"), ("heun2", 0.4, "FCF", 2, "nls"),
        ("ssprk3", 1.4, "FCF", 2, "lls"), ("ssprk3", 1.4, "FCF", 2, "nls")],
    2: [("sdirk3", 1.0, relax, m, mode)
        for relax in ("F", "FCF") for m in (2, 4) for mode in ("redisc", "nls")],
}


def column_label(col) -> str:
    scheme, _, relax, m, mode = col
    return f"{scheme}/{relax}/m{m}/{mode}"


def table_cell(which: int, col, exponent: int, seed: int = 0,
               coarse_override: str | None = None, **overrides) -> ConvergenceReport:
    scheme, cfl, relax, m, mode = col
    n = 2**exponent
    cfg = ExperimentConfig(scheme=scheme, n_x=n, n_t=n, cfl=cfl, m=m, relax=relax,
                           coarse=coarse_override or mode, seed=seed, **overrides)
    report, _ = run(cfg)
    return report


def replicate_table(which: int, max_exponent: int = CI_MAX_EXPONENT, seed: int = 0,
                    coarse_override: str | None = None, allow_large: bool = False) -> str:
    """CSV with one row per grid ``2^e x 2^e``; DNC cells are marked ``DNC``."""
    if which not in TABLE_COLUMNS:
        raise ValueError("table must be 1 or 2")
    if max_exponent > 12:
        raise ValueError("grid exponent is capped at 12")
    if max_exponent > CI_MAX_EXPONENT and not allow_large:
        raise ValueError(f"exponents above {CI_MAX_EXPONENT} need allow_large=True")
    cols = TABLE_COLUMNS[which]
    buf = io.StringIO()
    buf.write(f"# iteration-table v1 table={which} seed={seed}"
              f"{' coarse=' + coarse_override if coarse_override else ''}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid"] + [column_label(c) for c in cols])
    for e in GRID_EXPONENTS:
        if e > max_exponent:
            break
        row = [f"2^{e}x2^{e}"]
        for col in cols:
            rep = table_cell(which, col, e, seed, coarse_override)
            row.append(rep.count_label())
            log.info("table %d %s 2^%d: %s", which, column_label(col), e, row[-1])
        w.writerow(row)
    return buf.getvalue()


# -- estimate sweep --------------------------------------------------------

def _fmt(v: float) -> str:
    if np.isinf(v):
        return "inf"
    return repr(float(v))


def estimate_sweep(cfg: ExperimentConfig, ops: Operators | None = None,
                   dense: bool = True) -> str:
    """Per-mode eigenvalues, LFA estimate, coarse-level bound, and dense oracle norms."""
    ops = ops or build_operators(cfg)
    lam = stepper_spectrum(ops.phi).values
    mu = stepper_spectrum(ops.psi).values
    n = lam.size
    k = np.arange(-(n // 2), n - n // 2)
    relax, m, n_t = cfg.relax, cfg.m, cfg.n_t
    lfa = lfa_values(lam, mu, relax) if m == 2 else np.full(n, np.nan)
    dob, flags = per_mode_values(lam, mu, f"Dobrev-{relax}", m, n_t)
    dob = np.where(flags, penalised_bounds(lam, mu, m, n_t, relax), dob)
    dense_ok = dense and n * n_t <= DENSE_CAP
    if dense_ok:
        coarse = np.array([spectral_norm(coarse_block(l, u, m, n_t, relax))
                           for l, u in zip(lam, mu)])
        fine = dense_block_norms(ops.phi, ops.psi, m, n_t, relax)
    buf = io.StringIO()
    buf.write(f"# estimate-sweep v1 scheme={cfg.scheme} order={cfg.order} n_x={cfg.n_x} "
              f"n_t={n_t} cfl={cfg.cfl} m={m} relax={relax} coarse={cfg.coarse}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = ["k", "lam_re", "lam_im", "mu_re", "mu_im", "abs_lam", "abs_mu",
              "lfa", "dobrev", "dobrev_flag"]
    if dense_ok:
        header += ["dense_coarse", "dense_fine", "dobrev_over_dense"]
    w.writerow(header)
    for i in range(n):
        row = [int(k[i]), _fmt(lam[i].real), _fmt(lam[i].imag), _fmt(mu[i].real),
               _fmt(mu[i].imag), _fmt(abs(lam[i])), _fmt(abs(mu[i])),
               "" if np.isnan(lfa[i]) else _fmt(lfa[i]), _fmt(dob[i]), int(flags[i])]
        if dense_ok:
            ratio = dob[i] / coarse[i] if coarse[i] > 0 else (1.0 if dob[i] == 0 else np.inf)
            row += [_fmt(coarse[i]), _fmt(fine[i]), _fmt(ratio)]
        w.writerow(row)
    summary = {"lfa": lfa, "dobrev": dob}
    if dense_ok:
        summary.update(dense_coarse=coarse, dense_fine=fine)
    for name, v in summary.items():
        if np.all(np.isnan(v)):
            continue
        vv = np.where(np.isnan(v), -np.inf, v)
        j = int(np.argmax(vv))
        buf.write(f"# worst-case {name} max={_fmt(vv[j])} k={int(k[j])}\n")
    return buf.getvalue()


# -- operator optimization ---------------------------------------------------

def objective_of(cfg: ExperimentConfig, phi: TimeStepper, psi: TimeStepper) -> float:
    ctx = NlsContext(phi, cfg.m, cfg.n_t, cfg.relax, SparsityPattern.of(psi.explicit),
                     None if psi.is_explicit else SparsityPattern.of(psi.implicit))
    p = nls_objective(ctx.to_params(psi), ctx)
    return float(p @ p)


def optimize_op(cfg: ExperimentConfig, path) -> int:
    """Write the coarse operator for ``cfg.coarse`` in {trunc, lls, nls} to ``path``."""
    if cfg.coarse not in ("trunc", "lls", "nls"):
        raise ValueError("optimize-op supports coarse modes trunc, lls and nls")
    ops = build_operators(cfg)
    meta = {"scheme": cfg.scheme, "order": cfg.order, "cfl": cfg.cfl, "n_t": cfg.n_t,
            "m": cfg.m, "relax": cfg.relax, "mode": cfg.coarse,
            "weight_power": cfg.weight_power}
    code = EXIT_CONVERGED
    if ops.nls is not None:
        meta.update(objective_before=repr(ops.nls.objective_initial),
                    objective_after=repr(ops.nls.objective),
                    evaluations=ops.nls.n_evals, converged=ops.nls.converged)
        if not ops.nls.converged:
            code = EXIT_BUDGET
    else:
        obj = objective_of(cfg, ops.phi, ops.psi)
        meta.update(objective_before=repr(obj), objective_after=repr(obj))
    write_operator(path, ops.psi, meta)
    return code
