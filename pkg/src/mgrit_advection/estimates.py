"""Per-mode convergence estimates for two-level MGRIT.

Two families are provided: the closed-form LFA estimates for factor-two
coarsening, and the coarse-level bounds with geometric sums in ``|mu|``
(valid for any ``m``).  ``dense_block_norms`` assembles the exact
``n_t x n_t`` error propagator of every spatial Fourier mode and is meant
as a validation oracle for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mgrit_advection.circulant import Spectrum, TimeStepper, stepper_spectrum

ESTIMATORS = ("LFA-F", "LFA-FCF", "Dobrev-F", "Dobrev-FCF")
UNIT_TOL = 1e-14
CONSISTENCY_TOL = 1e-12
DENSE_CAP = 2**14


class SingularEstimateError(ValueError):
    pass


class AssumptionViolationError(ValueError):
    pass


class SizeCapError(ValueError):
    pass


def _check_relax(relax: str) -> str:
    relax = relax.upper()
    if relax not in ("F", "FCF"):
        raise ValueError(f"relaxation must be 'F' or 'FCF', got {relax!r}")
    return relax


def lfa_values(lam, mu, relax: str = "F") -> np.ndarray:
    """Vectorised LFA estimate; ``inf`` where ``|mu| >= 1``.

    Modes with ``lam**2 == mu`` give 0 (the 2x2 block vanishes).  So does the
    constant mode of a consistent pair, where ``lam`` and ``mu`` both equal one
    up to rounding and the closed form would divide noise by noise.
    """
    relax = _check_relax(relax)
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    amu = np.abs(mu)
    defect = np.abs(lam**2 - mu)
    consistent = (np.abs(1 - amu) <= CONSISTENCY_TOL) & (defect <= CONSISTENCY_TOL)
    defect = np.where(consistent, 0.0, defect)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(1 + np.abs(lam) ** 2) * defect / (1 - amu)
    val = np.where(amu >= 1, np.inf, val)
    val = np.where(defect == 0, 0.0, val)
    if relax == "FCF":
        val = np.abs(lam) ** 2 * val
    return val


def lfa_estimate(lam: complex, mu: complex, relax: str = "F") -> float:
    """sup over theta of the nonzero singular value of the 2x2 LFA block (m = 2)."""
    if abs(mu) >= 1 and lfa_values(lam, mu, relax) != 0:
        raise SingularEstimateError(f"LFA estimate is singular for |mu| = {abs(mu):.3g} >= 1")
    return float(lfa_values(lam, mu, relax))


def lfa_block(lam: complex, mu: complex, theta: float, relax: str = "F") -> np.ndarray:
    """The 2x2 LFA symbol of the two-level iteration at temporal frequency theta."""
    relax = _check_relax(relax)
    block = (lam**2 - mu) / (np.exp(1j * theta) - mu) * np.array([[1, 0], [lam, 0]], dtype=complex)
    if relax == "FCF":
        block = lam**2 * np.exp(-1j * theta) * block
    return block


def geometric_sum(r, count):
    """``sum_{j < count} r**j`` for ``r >= 0``, using the limit value near ``r = 1``."""
    r = np.asarray(r, dtype=float)
    near = np.abs(1 - r) < UNIT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (1 - r**count) / (1 - r)
    return np.where(near, float(count), val)


def dobrev_values(lam, mu, m: int, n_t: int, relax: str = "F") -> np.ndarray:
    """Vectorised coarse-level bound without any domain checks."""
    relax = _check_relax(relax)
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    n_c = n_t // m
    defect = np.abs(lam**m - mu)
    if relax == "F":
        return defect * geometric_sum(np.abs(mu), n_c)
    return np.abs(lam) ** m * defect * geometric_sum(np.abs(mu), n_c - 1)


def dobrev_valid(lam, mu) -> np.ndarray:
    return (np.abs(np.asarray(lam)) < 1 + UNIT_TOL) & (np.abs(np.asarray(mu)) < 1 + UNIT_TOL)


def dobrev_bound(lam: complex, mu: complex, m: int, n_t: int, relax: str = "F") -> float:
    """Bound on the coarse-level error propagator norm of one spatial mode.

    Requires ``|lam|, |mu| < 1``; magnitudes within 1e-14 of one are taken at
    the limit of the geometric sum.
    """
    if m < 1 or n_t % m:
        raise ValueError(f"n_t={n_t} must be divisible by m={m}")
    if not dobrev_valid(lam, mu):
        raise AssumptionViolationError(
            f"bound assumes |lambda|, |mu| < 1; got {abs(lam):.6g}, {abs(mu):.6g}")
    return float(dobrev_values(lam, mu, m, n_t, relax))


@dataclass
class WorstCaseReport:
    estimator: str
    wavenumbers: np.ndarray
    values: np.ndarray
    flagged: np.ndarray

    @property
    def max_value(self) -> float:
        return float(np.max(self.values))

    @property
    def argmax(self) -> int:
        v = self.values
        hits = self.wavenumbers[v == np.max(v)]
        # ties: smallest |k|, then the smaller k
        return int(min(hits, key=lambda k: (abs(k), k)))

    @property
    def any_flagged(self) -> bool:
        return bool(np.any(self.flagged))


def _centred(s) -> np.ndarray:
    if isinstance(s, Spectrum):
        return s.values
    return np.asarray(s, dtype=complex)


def per_mode_values(lam, mu, estimator: str, m: int = 2, n_t: int | None = None):
    """Estimates and precondition flags for arrays of eigenvalues."""
    family, _, relax = estimator.partition("-")
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    if family == "LFA":
        if m != 2:
            raise ValueError("LFA estimates are derived for m = 2 only")
        vals = lfa_values(lam, mu, relax)
        flags = np.isinf(vals)
    elif family == "Dobrev":
        if n_t is None:
            raise ValueError("Dobrev bounds need n_t")
        flags = ~dobrev_valid(lam, mu)
        vals = np.where(flags, np.inf, dobrev_values(lam, mu, m, n_t, relax))
    else:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    return vals, flags


def worst_case(lam, mu, estimator: str, m: int = 2, n_t: int | None = None) -> WorstCaseReport:
    """Per-mode estimates in centred wavenumber order and their maximum.

    Modes violating an estimator's preconditions are reported as +inf and
    flagged rather than dropped.
    """
    lam_c, mu_c = _centred(lam), _centred(mu)
    if lam_c.shape != mu_c.shape:
        raise ValueError("spectra differ in length")
    n = lam_c.size
    vals, flags = per_mode_values(lam_c, mu_c, estimator, m, n_t)
    k = np.arange(-(n // 2), n - n // 2)
    return WorstCaseReport(estimator, k, vals, flags)


# -- dense oracle ---------------------------------------------------------

def _f_relax_matrix(lam: complex, m: int, n_t: int) -> np.ndarray:
    # unknowns are time levels 1..n_t; level 0 carries no error
    S = np.zeros((n_t, n_t), dtype=complex)
    for t in range(1, n_t + 1):
        c = m * (t // m)
        if c == t:
            S[t - 1, t - 1] = 1.0
        elif c > 0:
            S[t - 1, c - 1] = lam ** (t - c)
    return S


def _c_relax_matrix(lam: complex, m: int, n_t: int) -> np.ndarray:
    S = np.eye(n_t, dtype=complex)
    for t in range(m, n_t + 1, m):
        S[t - 1, t - 1] = 0.0
        S[t - 1, t - 2] = lam
    return S


def _bidiagonal(v: complex, size: int) -> np.ndarray:
    return np.eye(size, dtype=complex) - v * np.eye(size, k=-1, dtype=complex)


def _injection(m: int, n_t: int) -> np.ndarray:
    R = np.zeros((n_t // m, n_t))
    R[np.arange(n_t // m), np.arange(m - 1, n_t, m)] = 1.0
    return R


def _ideal_interpolation(lam: complex, m: int, n_t: int) -> np.ndarray:
    P = np.zeros((n_t, n_t // m), dtype=complex)
    for i in range(n_t // m):
        c = (i + 1) * m
        for t in range(c, min(c + m, n_t + 1)):
            P[t - 1, i] = lam ** (t - c)
    return P


def two_level_block(lam: complex, mu: complex, m: int, n_t: int, relax: str = "F") -> np.ndarray:
    """``[I - P (A_c)^{-1} R A] S`` for one spatial mode, ``n_t x n_t``."""
    relax = _check_relax(relax)
    if n_t % m:
        raise ValueError("n_t must be divisible by m")
    S = _f_relax_matrix(lam, m, n_t)
    if relax == "FCF":
        S = S @ _c_relax_matrix(lam, m, n_t) @ S
    A = _bidiagonal(lam, n_t)
    A_c = _bidiagonal(mu, n_t // m)
    P = _ideal_interpolation(lam, m, n_t)
    R = _injection(m, n_t)
    T = np.eye(n_t) - P @ np.linalg.solve(A_c, R @ A)
    return T @ S


def coarse_block(lam: complex, mu: complex, m: int, n_t: int, relax: str = "F") -> np.ndarray:
    """Coarse-level error propagator: Toeplitz with entries ``mu^j (lam^m - mu)``.

    For FCF the C-relaxation contributes a factor ``lam^m`` and a shift.
    """
    relax = _check_relax(relax)
    n_c = n_t // m
    i, j = np.indices((n_c, n_c))
    lag = i - j - (1 if relax == "F" else 2)
    with np.errstate(invalid="ignore"):
        T = np.where(lag >= 0, (lam**m - mu) * mu ** np.maximum(lag, 0), 0.0).astype(complex)
    if relax == "FCF":
        T *= lam**m
    return T


def spectral_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def dense_block_norms(phi: TimeStepper, psi: TimeStepper, m: int, n_t: int,
                      relax: str = "F", cap: int = DENSE_CAP) -> np.ndarray:
    """Two-norm of each mode's fine-grid error propagator, centred k order."""
    n_x = phi.n
    if n_x * n_t > cap:
        raise SizeCapError(f"n_x * n_t = {n_x * n_t} exceeds the dense cap {cap}")
    lam = stepper_spectrum(phi).values
    mu = stepper_spectrum(psi).values
    return np.array([spectral_norm(two_level_block(l, u, m, n_t, relax))
                     for l, u in zip(lam, mu)])


def dense_two_level_norm(phi: TimeStepper, psi: TimeStepper, m: int, n_t: int, n_x: int,
                         relax: str = "F", cap: int = DENSE_CAP) -> float:
    """``||T||_2`` of the full space-time two-level iteration matrix."""
    if phi.n != n_x or psi.n != n_x:
        raise ValueError("stepper size does not match n_x")
    return float(np.max(dense_block_norms(phi, psi, m, n_t, relax, cap)))


def dense_space_time_matrix(phi: TimeStepper, psi: TimeStepper, m: int, n_t: int,
                            relax: str = "F", cap: int = 2**10) -> np.ndarray:
    """Real ``n_x n_t`` square iteration matrix assembled without Fourier splitting."""
    n_x = phi.n
    if n_x * n_t > cap:
        raise SizeCapError(f"n_x * n_t = {n_x * n_t} exceeds the cap {cap}")
    relax = _check_relax(relax)
    Phi = np.linalg.solve(phi.implicit.dense(), phi.explicit.dense())
    Psi = np.linalg.solve(psi.implicit.dense(), psi.explicit.dense())
    I = np.eye(n_x)

    pow_ = np.linalg.matrix_power

    N = n_t // m
    S = np.zeros((n_t, n_t, n_x, n_x))
    for t in range(1, n_t + 1):
        c = m * (t // m)
        if c == t:
            S[t - 1, t - 1] = I
        elif c > 0:
            S[t - 1, c - 1] = pow_(Phi, t - c)
    if relax == "FCF":
        C = np.zeros_like(S)
        for t in range(1, n_t + 1):
            if t % m:
                C[t - 1, t - 1] = I
            else:
                C[t - 1, t - 2] = Phi
        S = _bmul(_bmul(S, C), S)
    A = np.zeros_like(S)
    for t in range(n_t):
        A[t, t] = I
        if t:
            A[t, t - 1] = -Phi
    A_c = np.zeros((N, N, n_x, n_x))
    for i in range(N):
        A_c[i, i] = I
        if i:
            A_c[i, i - 1] = -Psi
    P = np.zeros((n_t, N, n_x, n_x))
    for i in range(N):
        c = (i + 1) * m
        for t in range(c, min(c + m, n_t + 1)):
            P[t - 1, i] = pow_(Phi, t - c)
    R = np.zeros((N, n_t, n_x, n_x))
    for i in range(N):
        R[i, (i + 1) * m - 1] = I
    T = np.eye(n_t * n_x) - _flatten(P) @ np.linalg.solve(_flatten(A_c), _flatten(R) @ _flatten(A))
    return T @ _flatten(S)


def _bmul(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("ikab,kjbc->ijac", X, Y)


def _flatten(B: np.ndarray) -> np.ndarray:
    r, c, a, b = B.shape
    return B.transpose(0, 2, 1, 3).reshape(r * a, c * b)
