import numpy as np
import pytest

from mgrit_advection.circulant import CirculantStencil, TimeStepper, stepper_spectrum
from mgrit_advection.discretization import ProblemSpec, fine_stepper


def naive_eigenvalues(c):
    """Direct O(n^2) sum over k = -n/2 .. n/2-1 of c_d exp(i d theta_k)."""
    n = len(c)
    k = np.arange(-(n // 2), n - n // 2)
    d = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, d) / n) @ np.asarray(c, dtype=float)


def random_stable_explicit(rng, n, nnz=None, radius=0.95):
    c = np.zeros(n)
    idx = np.arange(n) if nnz is None else rng.choice(n, nnz, replace=False)
    c[idx] = rng.normal(size=idx.size)
    st = TimeStepper.from_explicit(CirculantStencil(c))
    scale = np.max(np.abs(stepper_spectrum(st).natural)) / radius
    return TimeStepper.from_explicit(CirculantStencil(c / scale))


def random_pairs(rng, count, r_max):
    """Complex pairs (lam, mu) with magnitudes uniform in [0, r_max]."""
    r = rng.uniform(0, r_max, size=(count, 2))
    a = rng.uniform(-np.pi, np.pi, size=(count, 2))
    z = r * np.exp(1j * a)
    return z[:, 0], z[:, 1]


@pytest.fixture
def rng():
    return np.random.default_rng(20190412)


@pytest.fixture
def sdirk_small():
    p = ProblemSpec.from_cfl(8, 16, 1.0)
    return p, fine_stepper(p, "sdirk3", 3)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
