"""Upwind stencils, Runge-Kutta tableaus and rational circulant time steppers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from mgrit_advection.circulant import (
    CirculantStencil,
    TimeStepper,
    column_from_natural,
    spectrum,
    stepper_spectrum,
)

# Root of x^3 - 3x^2 + 3x/2 - 1/6 in (0, 1): the L-stable SDIRK3 diagonal.
SDIRK3_ZETA = 0.43586652150845899941601945

SCHEMES = ("heun2", "ssprk3", "sdirk3")


class StencilOverlapError(ValueError):
    pass


def default_initial_condition(x: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * x)


@dataclass(frozen=True)
class ProblemSpec:
    """Periodic advection problem on x in (-1, 1), t in (0, T_f)."""

    a: float
    n_x: int
    n_t: int
    t_final: float
    g: Callable[[np.ndarray], np.ndarray] = field(default=default_initial_condition,
                                                  compare=False)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("wavespeed must be positive")
        if self.n_x < 2 or self.n_x % 2:
            raise ValueError("n_x must be a positive even integer")
        if self.n_t < 1 or not self.t_final > 0:
            raise ValueError("need n_t >= 1 and t_final > 0")

    @classmethod
    def from_cfl(cls, n_x: int, n_t: int, cfl: float, a: float = 1.0,
                 g=default_initial_condition) -> "ProblemSpec":
        dt = cfl * (2.0 / n_x) / a
        return cls(a, n_x, n_t, n_t * dt, g)

    @property
    def dx(self) -> float:
        return 2.0 / self.n_x

    @property
    def dt(self) -> float:
        return self.t_final / self.n_t

    @property
    def cfl(self) -> float:
        return self.a * self.dt / self.dx

    @property
    def x(self) -> np.ndarray:
        return -1.0 + self.dx * np.arange(self.n_x)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t + 1)

    def initial_condition(self) -> np.ndarray:
        return np.asarray(self.g(self.x), dtype=float)

    def check_coarsening(self, m: int):
        if m < 1 or self.n_t % m:
            raise ValueError(f"n_t={self.n_t} is not divisible by m={m}")


@dataclass(frozen=True)
class ButcherTableau:
    """RK tableau plus its stability function ``R = P / Q``.

    ``numerator`` and ``denominator`` hold polynomial coefficients in
    ascending powers of z.
    """

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    numerator: tuple[float, ...]
    denominator: tuple[float, ...]

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def is_explicit(self) -> bool:
        return not np.any(np.triu(self.A))

    def stability(self, z):
        """Evaluate R(z) from the hard-coded numerator and denominator."""
        z = np.asarray(z, dtype=complex)
        return _polyval(self.numerator, z) / _polyval(self.denominator, z)

    def stagewise(self, z: complex) -> complex:
        """One step of y' = (z/dt) y from y = 1, solving the stage equations."""
        s = self.stages
        k = np.linalg.solve(np.eye(s) - z * self.A, z * np.ones(s))
        return complex(1.0 + self.b @ k)


def _polyval(coeffs, z):
    out = np.zeros_like(z, dtype=complex)
    for a in reversed(coeffs):
        out = out * z + a
    return out


def _make_tableau(name: str) -> ButcherTableau:
    if name == "heun2":
        A = [[0, 0], [1, 0]]
        b = [0.5, 0.5]
        c = [0, 1]
        num, den = (1.0, 1.0, 0.5), (1.0,)
    elif name == "ssprk3":
        A = [[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]]
        b = [1 / 6, 1 / 6, 2 / 3]
        c = [0, 1, 0.5]
        num, den = (1.0, 1.0, 0.5, 1 / 6), (1.0,)
    elif name == "sdirk3":
        z = SDIRK3_ZETA
        alpha, beta = (1 + z) / 2, (1 - z) / 2
        gamma = -1.5 * z**2 + 4 * z - 0.25
        eps = 1.5 * z**2 - 5 * z + 1.25
        A = [[z, 0, 0], [beta, z, 0], [gamma, eps, z]]
        b = [gamma, eps, z]
        c = [z, alpha, 1]
        # (1 - z w)^3 R(w) = 1 + (1 - 3z) w + (1/2 - 3z + 3z^2) w^2; the cubic
        # term vanishes because z solves the order-3 condition.
        num = (1.0, 1 - 3 * z, 0.5 - 3 * z + 3 * z**2)
        den = (1.0, -3 * z, 3 * z**2, -(z**3))
    else:
        raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    return ButcherTableau(name, np.array(A, dtype=float), np.array(b, dtype=float),
                          np.array(c, dtype=float), num, den)


@lru_cache(maxsize=None)
def tableau(name: str) -> ButcherTableau:
    tab = _make_tableau(name.lower())
    for w in (-0.7 + 0.2j, -2.5 + 1.1j, 0.3j):
        if abs(tab.stability(w) - tab.stagewise(w)) > 1e-12 * max(1.0, abs(tab.stagewise(w))):
            raise RuntimeError(f"stability polynomials of {name} disagree with its tableau")
    return tab


def spatial_stencil(order: int, a: float, dx: float, n_x: int) -> CirculantStencil:
    """Upwind discretisation of d/dx (a u) as a circulant column."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    if n_x < 5:
        raise StencilOverlapError(f"n_x={n_x} is too small for the upwind stencil")
    if order == 2:
        s = a / (2 * dx)
        offsets = {0: 3 * s, 1: -4 * s, 2: s}
    elif order == 3:
        s = a / (6 * dx)
        offsets = {0: 3 * s, 1: -6 * s, 2: s, -1: 2 * s}
    else:
        raise ValueError(f"unsupported spatial order {order}")
    return CirculantStencil.from_offsets(n_x, offsets)


def _support(base: set[int], degree: int, n: int) -> np.ndarray:
    """Offsets reachable by polynomials of ``degree`` in a stencil with offsets ``base``."""
    reach = {0}
    out = {0}
    for _ in range(degree):
        reach = {(r + d) % n for r in reach for d in base}
        out |= reach
    return np.array(sorted(out))


def _poly_column(L: CirculantStencil, coeffs, dt: float) -> CirculantStencil:
    z = -dt * spectrum(L).natural
    col = column_from_natural(_polyval(coeffs, z))
    keep = _support(set(L.nonzero_offsets().tolist()), len(coeffs) - 1, L.n)
    snapped = np.zeros(L.n)
    snapped[keep] = col.coeffs[keep]
    return CirculantStencil(snapped)


def build_time_stepper(L: CirculantStencil, tab: ButcherTableau, dt: float) -> TimeStepper:
    """Stepper for u' = -L u: ``Phi_E = P(-dt L)``, ``Phi_I = Q(-dt L)``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    explicit = _poly_column(L, tab.numerator, dt)
    if len(tab.denominator) == 1:
        implicit = CirculantStencil.unit(L.n)
    else:
        implicit = _poly_column(L, tab.denominator, dt)
    return TimeStepper(implicit, explicit, dt, tab.name)


def rediscretized_coarse(L: CirculantStencil, tab: ButcherTableau, m: int,
                         dt: float) -> TimeStepper:
    if m < 1:
        raise ValueError("m must be >= 1")
    return build_time_stepper(L, tab, m * dt)


def fine_stepper(problem: ProblemSpec, scheme: str, order: int) -> TimeStepper:
    L = spatial_stencil(order, problem.a, problem.dx, problem.n_x)
    return build_time_stepper(L, tableau(scheme), problem.dt)


def default_order(scheme: str) -> int:
    return 2 if scheme.lower() == "heun2" else 3


def max_abs_eig(phi: TimeStepper) -> float:
    return float(np.max(np.abs(stepper_spectrum(phi).natural)))


__all__ = [
    "SDIRK3_ZETA",
    "SCHEMES",
    "ButcherTableau",
    "ProblemSpec",
    "StencilOverlapError",
    "build_time_stepper",
    "default_order",
    "fine_stepper",
    "max_abs_eig",
    "rediscretized_coarse",
    "spatial_stencil",
    "tableau",
]
