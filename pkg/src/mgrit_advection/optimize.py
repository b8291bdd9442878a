"""Synthesis of sparse coarse-grid time steppers.

Three strategies, in increasing cost:

* ``truncated_coarse``: keep the entries of ``Phi^m`` inside a sparsity pattern;
* ``weighted_lls``: fit the spectrum of ``Phi^m`` in a weighted two-norm;
* ``nls_solve``: minimise the sum of squared per-mode coarse-level bounds
  over the entries of ``Psi_E`` and ``Psi_I`` with a Levenberg-Marquardt loop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mgrit_advection.circulant import (
    CirculantStencil,
    TimeStepper,
    power_column,
    stepper_spectrum,
)
from mgrit_advection.estimates import dobrev_values

log = logging.getLogger(__name__)

LLS_IMAG_TOL = 1e-8
PENALTY_SCALE = 1e3
MIN_FD_STEP = 1e-13


class IllPosedPatternError(ValueError):
    pass


class ConventionError(ValueError):
    pass


@dataclass(frozen=True)
class SparsityPattern:
    """Column offsets (mod n) allowed to be nonzero, in a fixed order."""

    n: int
    offsets: tuple[int, ...]

    def __post_init__(self):
        offs = tuple(int(d) % self.n for d in self.offsets)
        if not offs:
            raise ValueError("sparsity pattern is empty")
        if len(set(offs)) != len(offs):
            raise ValueError("sparsity pattern has repeated offsets")
        object.__setattr__(self, "offsets", offs)

    @property
    def size(self) -> int:
        return len(self.offsets)

    @classmethod
    def of(cls, stencil: CirculantStencil) -> "SparsityPattern":
        return cls(stencil.n, tuple(stencil.nonzero_offsets().tolist()))

    @classmethod
    def full(cls, n: int) -> "SparsityPattern":
        return cls(n, tuple(range(n)))

    def restrict(self, column: np.ndarray) -> np.ndarray:
        return np.asarray(column)[list(self.offsets)]

    def embed(self, values: np.ndarray) -> CirculantStencil:
        c = np.zeros(self.n)
        c[list(self.offsets)] = values
        return CirculantStencil(c)

    def restriction_matrix(self) -> np.ndarray:
        R = np.zeros((self.size, self.n))
        R[np.arange(self.size), list(self.offsets)] = 1.0
        return R

    def fourier_basis(self) -> np.ndarray:
        """``exp(i d theta_k)`` for natural-order k (rows) and pattern offsets d."""
        k = np.arange(self.n)
        return np.exp(2j * np.pi * np.outer(k, self.offsets) / self.n)


@dataclass(frozen=True)
class WeightVector:
    """Positive per-mode weights in natural (FFT) wavenumber order."""

    natural: np.ndarray
    power: float | None = None

    def __post_init__(self):
        w = np.asarray(self.natural, dtype=float)
        if np.any(~(w > 0)):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "natural", w)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.ones(n), 0.0)

    @classmethod
    def eigen_power(cls, phi: TimeStepper, p: float) -> "WeightVector":
        """``w_k = |lambda_k|^p``, floored at the smallest positive double."""
        lam = np.abs(stepper_spectrum(phi).natural)
        return cls(np.maximum(lam**p, np.finfo(float).tiny), p)


def truncated_coarse(phi: TimeStepper, m: int, pattern: SparsityPattern) -> CirculantStencil:
    col = power_column(phi, m)
    return pattern.embed(pattern.restrict(col.coeffs))


def weighted_lls(phi: TimeStepper, m: int, pattern: SparsityPattern,
                 w: WeightVector | None = None) -> CirculantStencil:
    """Minimise ``sum_k w_k |lambda_k^m - mu_k|^2`` over explicit ``Psi`` in ``pattern``."""
    n = phi.n
    if pattern.n != n or pattern.size > n:
        raise ValueError("pattern does not fit the grid")
    w = WeightVector.uniform(n) if w is None else w
    sw = np.sqrt(w.natural / np.max(w.natural))
    target = stepper_spectrum(phi).natural ** m
    X = sw[:, None] * pattern.fourier_basis()
    y = sw * target
    sol, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < pattern.size:
        raise IllPosedPatternError(
            f"normal matrix is rank deficient ({rank} < {pattern.size}); "
            "weights vanish on too many modes for this pattern")
    resid = np.max(np.abs(sol.imag))
    if resid > LLS_IMAG_TOL * max(1.0, np.max(np.abs(sol.real))):
        raise ConventionError(f"least-squares solution has imaginary part {resid:.3e}")
    return pattern.embed(sol.real)


# -- nonlinear least squares ----------------------------------------------

@dataclass
class NlsContext:
    """Problem data for the nonlinear coarse-operator fit.

    ``pattern_i`` of None means an explicit target (``Psi_I = I``).  When it
    is given, it must contain offset 0, whose entry is pinned to one.
    """

    phi: TimeStepper
    m: int
    n_t: int
    relax: str
    pattern_e: SparsityPattern
    pattern_i: SparsityPattern | None = None
    init: TimeStepper | None = None
    weights: WeightVector | None = None
    max_evals: int = 4000
    gtol: float = 1e-12
    ftol: float = 1e-14
    xtol: float = 1e-14
    damping: float = 1e-3
    fd_step: float = 1e-7
    _lam: np.ndarray = field(init=False, repr=False)
    _basis_e: np.ndarray = field(init=False, repr=False)
    _basis_i: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        self.relax = self.relax.upper()
        if self.m < 1 or self.n_t % self.m:
            raise ValueError(f"n_t={self.n_t} must be divisible by m={self.m}")
        if self.pattern_i is not None and 0 not in self.pattern_i.offsets:
            raise ValueError("implicit pattern must contain offset 0 (pinned to 1)")
        self._lam = stepper_spectrum(self.phi).natural
        self._basis_e = self.pattern_e.fourier_basis()
        if self.pattern_i is None:
            self._basis_i = None
        else:
            self._free_i = [d for d in self.pattern_i.offsets if d != 0]
            free = SparsityPattern(self.phi.n, tuple(self._free_i)) if self._free_i else None
            self._basis_i = free.fourier_basis() if free else np.zeros((self.phi.n, 0))

    @property
    def explicit_target(self) -> bool:
        return self.pattern_i is None

    @property
    def n_params(self) -> int:
        return self.pattern_e.size + (0 if self.explicit_target else len(self._free_i))

    def mu(self, params: np.ndarray) -> np.ndarray:
        """Natural-order eigenvalues of the candidate ``Psi``."""
        ne = self.pattern_e.size
        num = self._basis_e @ params[:ne]
        if self.explicit_target:
            return num
        den = 1.0 + self._basis_i @ params[ne:]
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    def to_params(self, psi: TimeStepper) -> np.ndarray:
        """Parameters of an existing stepper, rescaled so ``(Psi_I)_0 = 1``."""
        scale = psi.implicit.coeffs[0]
        if scale == 0:
            raise ValueError("cannot pin (Psi_I)_0 = 1: entry is zero")
        e = self.pattern_e.restrict(psi.explicit.coeffs) / scale
        if self.explicit_target:
            return e
        i = np.asarray(psi.implicit.coeffs)[self._free_i] / scale
        return np.concatenate([e, i])

    def to_stepper(self, params: np.ndarray, label: str = "nls") -> TimeStepper:
        ne = self.pattern_e.size
        explicit = self.pattern_e.embed(params[:ne])
        if self.explicit_target:
            return TimeStepper.from_explicit(explicit, label=label)
        c = np.zeros(self.phi.n)
        c[0] = 1.0
        c[self._free_i] = params[ne:]
        return TimeStepper(CirculantStencil(c), explicit, label=label)


def penalised_bounds(lam: np.ndarray, mu: np.ndarray, m: int, n_t: int, relax: str,
                     scale: float = PENALTY_SCALE) -> np.ndarray:
    """Per-mode bound, continued past ``|mu| = 1`` with a linear penalty.

    Beyond the unit circle the bound is taken at ``mu / |mu|`` and
    ``scale * (|mu| - 1)`` is added, so the residual stays finite and
    continuous across the stability boundary.
    """
    amu = np.abs(mu)
    bad = ~np.isfinite(mu) | (amu > 1)
    out_side = np.where(bad & np.isfinite(mu), mu / np.where(amu > 0, amu, 1), mu)
    vals = dobrev_values(lam, np.where(np.isfinite(out_side), out_side, 1.0), m, n_t, relax)
    over = np.where(np.isfinite(amu), np.maximum(amu - 1, 0.0), np.inf)
    with np.errstate(invalid="ignore"):
        pen = np.where(bad, vals + scale * over, vals)
    return np.where(np.isnan(pen), np.inf, pen)


def nls_objective(params: np.ndarray, ctx: NlsContext) -> np.ndarray:
    """Residual vector ``p`` (length n_x, centred k order); ``||p||^2`` is minimised."""
    params = np.asarray(params, dtype=float)
    if params.size != ctx.n_params:
        raise ValueError(f"expected {ctx.n_params} parameters, got {params.size}")
    p = penalised_bounds(ctx._lam, ctx.mu(params), ctx.m, ctx.n_t, ctx.relax)
    return np.fft.fftshift(p)


@dataclass
class NlsResult:
    stepper: TimeStepper
    params: np.ndarray
    initial_params: np.ndarray
    objective_initial: float
    objective: float
    grad_norm: float
    n_evals: int
    converged: bool
    history: list[float]
    message: str = ""


def _jacobian(fun, x, r, step):
    J = np.empty((r.size, x.size))
    for j in range(x.size):
        h = step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xp[j] += h
        J[:, j] = (fun(xp) - r) / h
    return J


def levenberg_marquardt(fun, x0: np.ndarray, *, max_evals: int = 4000, gtol: float = 1e-12,
                        ftol: float = 1e-14, xtol: float = 1e-14, damping: float = 1e-3,
                        fd_step: float = 1e-7):
    """Minimise ``||fun(x)||^2`` with Marquardt-scaled damping and FD Jacobians.

    Steps are accepted only if they lower the objective, so the returned point
    is the best iterate seen.  Returns ``(x, f, grad_norm, evals, converged,
    history, message)``.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    evals = 1
    f = float(r @ r)
    history = [f]
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the initial guess")
    mu = damping
    step_h = fd_step
    g_norm = np.inf
    while evals + x.size + 1 <= max_evals:
        J = _jacobian(fun, x, r, step_h)
        evals += x.size
        g = J.T @ r
        g_norm = float(np.linalg.norm(g, np.inf))
        if g_norm <= gtol * max(f, 1e-300) or f == 0.0:
            return x, f, g_norm, evals, True, history, "gradient tolerance"
        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-30)
        while evals < max_evals:
            try:
                step = np.linalg.solve(JtJ + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            x_new = x + step
            r_new = fun(x_new)
            evals += 1
            f_new = float(r_new @ r_new)
            if np.isfinite(f_new) and f_new < f:
                rel_drop = (f - f_new) / f
                x, r, f = x_new, r_new, f_new
                history.append(f)
                mu = max(mu / 3, 1e-15)
                if rel_drop <= ftol:
                    return x, f, g_norm, evals, True, history, "objective tolerance"
                if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
                    return x, f, g_norm, evals, True, history, "step tolerance"
                break
            mu *= 4
            if mu > 1e16:
                # |.|-type residuals: the difference step may straddle a kink
                if step_h > MIN_FD_STEP:
                    step_h = max(step_h / 100, MIN_FD_STEP)
                    mu = damping
                    break
                return x, f, g_norm, evals, True, history, "damping saturated"
    return x, f, g_norm, evals, False, history, "evaluation budget exhausted"


def rational_lls(ctx: NlsContext) -> np.ndarray:
    """Linearised rational fit: minimise ``sum_k w_k |Psi_I(k) lambda_k^m - Psi_E(k)|^2``.

    With ``(Psi_I)_0`` pinned to one this is a linear least squares problem in
    the free parameters; for explicit targets it reduces to ``weighted_lls``.
    """
    n = ctx.phi.n
    w = WeightVector.uniform(n) if ctx.weights is None else ctx.weights
    sw = np.sqrt(w.natural / np.max(w.natural))
    target = ctx._lam ** ctx.m
    X = np.hstack([ctx._basis_e, -target[:, None] * ctx._basis_i]) * sw[:, None]
    y = sw * target
    # real unknowns: fit real and imaginary parts jointly
    sol, _, rank, _ = np.linalg.lstsq(np.vstack([X.real, X.imag]),
                                      np.concatenate([y.real, y.imag]), rcond=None)
    if rank < X.shape[1]:
        raise IllPosedPatternError(f"rational fit is rank deficient ({rank} < {X.shape[1]})")
    return sol


def initial_params(ctx: NlsContext) -> np.ndarray:
    """Starting point: ``ctx.init`` if given, else the weighted (rational) LLS fit."""
    if ctx.init is not None:
        return ctx.to_params(ctx.init)
    if ctx.explicit_target:
        col = weighted_lls(ctx.phi, ctx.m, ctx.pattern_e, ctx.weights)
        return ctx.pattern_e.restrict(col.coeffs)
    return rational_lls(ctx)


def nls_solve(ctx: NlsContext) -> NlsResult:
    x0 = initial_params(ctx)

    def fun(x):
        return nls_objective(x, ctx)

    x, f, g_norm, evals, ok, hist, msg = levenberg_marquardt(
        fun, x0, max_evals=ctx.max_evals, gtol=ctx.gtol, ftol=ctx.ftol, xtol=ctx.xtol,
        damping=ctx.damping, fd_step=ctx.fd_step)
    log.info("nls: %s after %d evaluations, objective %.3e -> %.3e", msg, evals, hist[0], f)
    return NlsResult(ctx.to_stepper(x), x, x0, hist[0], f, g_norm, evals, ok, hist, msg)


# -- operator files -------------------------------------------------------

OPERATOR_HEADER = "# coarse-operator v1"


def write_operator(path, psi: TimeStepper, meta: dict | None = None) -> None:
    """Text format: header, ``key = value`` metadata, then one ``[implicit]``
    and one ``[explicit]`` section of ``offset hexfloat decimal`` lines."""
    lines = [OPERATOR_HEADER, f"n_x = {psi.n}"]
    for k, v in (meta or {}).items():
        lines.append(f"{k} = {v}")
    for name, st in (("implicit", psi.implicit), ("explicit", psi.explicit)):
        lines.append(f"[{name}]")
        for d in st.nonzero_offsets():
            v = float(st.coeffs[d])
            lines.append(f"{int(d)} {v.hex()} {v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_operator(path) -> tuple[TimeStepper, dict]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != OPERATOR_HEADER:
        raise ValueError(f"{path}: not a coarse-operator file")
    meta: dict[str, str] = {}
    cols: dict[str, dict[int, float]] = {}
    section = None
    for line in text[1:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            section = line.strip("[]")
            cols[section] = {}
        elif section is None:
            k, _, v = line.partition("=")
            meta[k.strip()] = v.strip()
        else:
            d, hexval, *_ = line.split()
            cols[section][int(d)] = float.fromhex(hexval)
    n = int(meta["n_x"])
    return TimeStepper(CirculantStencil.from_offsets(n, cols.get("implicit", {})),
                       CirculantStencil.from_offsets(n, cols.get("explicit", {})),
                       label=meta.get("mode", "")), meta
