"""Two-level MGRIT / Parareal for 1-D periodic linear advection.

Fourier-based convergence estimates and least-squares synthesis of
coarse-grid time steppers.
"""

from mgrit_advection.circulant import (
    CirculantStencil,
    Spectrum,
    TimeStepper,
    apply,
    power_column,
    spectrum,
    stepper_spectrum,
)
from mgrit_advection.discretization import (
    ButcherTableau,
    ProblemSpec,
    build_time_stepper,
    rediscretized_coarse,
    spatial_stencil,
    tableau,
)

__version__ = "0.1.0"

__all__ = [
    "ButcherTableau",
    "CirculantStencil",
    "ProblemSpec",
    "Spectrum",
    "TimeStepper",
    "apply",
    "build_time_stepper",
    "power_column",
    "rediscretized_coarse",
    "spatial_stencil",
    "spectrum",
    "stepper_spectrum",
    "tableau",
]
