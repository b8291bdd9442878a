"""Spectral algebra for real circulant operators.

A circulant operator is stored by its first column ``c`` and acts as

    (L u)_j = sum_d c_d u_{(j - d) mod n}.

Wavenumber ``k`` (``-n/2 <= k < n/2``) is assigned the eigenvalue
``sum_d c_d exp(i d theta_k)`` with ``theta_k = 2 pi k / n``, i.e. the
action of the unnormalised Fourier matrix on the first column.  Arrays
in "natural" order are indexed ``k mod n`` (FFT order); public
``Spectrum.values`` use the centred order ``k = -n/2 ... n/2 - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IMAG_TOL = 1e-10
_DIRECT_MAX_NNZ = 5


class SingularStepperError(ValueError):
    pass


class ConjugateSymmetryError(ValueError):
    pass


@dataclass(frozen=True)
class CirculantStencil:
    """First column of a real ``n x n`` circulant matrix."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("stencil must be a non-empty 1-D array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    @classmethod
    def from_offsets(cls, n: int, offsets: dict[int, float]) -> "CirculantStencil":
        c = np.zeros(n)
        for d, v in offsets.items():
            c[d % n] += v
        return cls(c)

    @classmethod
    def unit(cls, n: int, d: int = 0) -> "CirculantStencil":
        """Column ``e_d``: the identity for ``d = 0``, a shift otherwise."""
        return cls.from_offsets(n, {d: 1.0})

    def nonzero_offsets(self) -> np.ndarray:
        return np.flatnonzero(self.coeffs)

    def dense(self) -> np.ndarray:
        n = self.n
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return self.coeffs[idx]


@dataclass(frozen=True)
class TimeStepper:
    """Rational circulant stepper ``Phi = Phi_I^{-1} Phi_E``."""

    implicit: CirculantStencil
    explicit: CirculantStencil
    dt: float = float("nan")
    label: str = ""

    def __post_init__(self):
        if self.implicit.n != self.explicit.n:
            raise ValueError("implicit and explicit parts differ in size")

    @property
    def n(self) -> int:
        return self.explicit.n

    @property
    def is_explicit(self) -> bool:
        c = self.implicit.coeffs
        return c[0] == 1.0 and not np.any(c[1:])

    @classmethod
    def from_explicit(cls, column: CirculantStencil, dt: float = float("nan"),
                      label: str = "") -> "TimeStepper":
        return cls(CirculantStencil.unit(column.n), column, dt, label)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a circulant operator, one per wavenumber."""

    natural: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.natural, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "natural", v)

    @property
    def n(self) -> int:
        return self.natural.size

    @property
    def values(self) -> np.ndarray:
        """Eigenvalues ordered by ``k = -n/2, ..., n/2 - 1``."""
        return np.fft.fftshift(self.natural)

    @property
    def wavenumbers(self) -> np.ndarray:
        n = self.n
        return np.arange(-(n // 2), n - n // 2)

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * self.wavenumbers / self.n

    def __getitem__(self, k: int) -> complex:
        """Eigenvalue at wavenumber ``k`` (any integer, taken mod n)."""
        return complex(self.natural[k % self.n])

    def __len__(self):
        return self.n

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        """Build from values in centred wavenumber order."""
        return cls(np.fft.ifftshift(np.asarray(values, dtype=complex)))


def spectrum(c: CirculantStencil) -> Spectrum:
    return Spectrum(c.n * np.fft.ifft(c.coeffs))


def column_from_natural(values: np.ndarray, tol: float = IMAG_TOL) -> CirculantStencil:
    """Inverse of :func:`spectrum` for natural-order eigenvalues.

    Raises ConjugateSymmetryError if the column is not real to ``tol``.
    """
    values = np.asarray(values, dtype=complex)
    col = np.fft.fft(values) / values.size
    resid = np.max(np.abs(col.imag), initial=0.0)
    if resid > tol:
        raise ConjugateSymmetryError(
            f"imaginary residue {resid:.3e} exceeds {tol:.0e}; "
            "eigenvalues are not conjugate symmetric")
    return CirculantStencil(col.real)


def column_from_spectrum(s: Spectrum, tol: float = IMAG_TOL) -> CirculantStencil:
    return column_from_natural(s.natural, tol)


def apply(c: CirculantStencil, u: np.ndarray) -> np.ndarray:
    """Apply ``c`` to ``u`` along the last axis.

    Sparse stencils use direct rolls, dense ones a spectral product.
    """
    u = np.asarray(u)
    if u.shape[-1] != c.n:
        raise ValueError(f"length mismatch: stencil {c.n}, vector {u.shape[-1]}")
    nz = c.nonzero_offsets()
    if nz.size <= _DIRECT_MAX_NNZ:
        return apply_direct(c, u)
    return apply_spectral(c, u)


def apply_direct(c: CirculantStencil, u: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(u.shape), dtype=np.result_type(u, float))
    for d in c.nonzero_offsets():
        out += c.coeffs[d] * np.roll(u, int(d), axis=-1)
    return out


def apply_spectral(c: CirculantStencil, u: np.ndarray) -> np.ndarray:
    prod = np.fft.fft(c.coeffs) * np.fft.fft(u, axis=-1)
    out = np.fft.ifft(prod, axis=-1)
    if np.isrealobj(u):
        return out.real
    return out


def stepper_spectrum(phi: TimeStepper) -> Spectrum:
    den = spectrum(phi.implicit).natural
    if np.any(den == 0):
        k = int(np.flatnonzero(den == 0)[0])
        raise SingularStepperError(f"implicit part has a zero eigenvalue at mode index {k}")
    return Spectrum(spectrum(phi.explicit).natural / den)


def power_column(phi: TimeStepper, m: int) -> CirculantStencil:
    """First column of ``Phi^m``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1 and phi.is_explicit:
        return phi.explicit
    return column_from_natural(stepper_spectrum(phi).natural ** m)
