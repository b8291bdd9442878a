import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from conftest import random_pairs
from mgrit_advection.circulant import CirculantStencil, TimeStepper, power_column, stepper_spectrum
from mgrit_advection.discretization import ProblemSpec, fine_stepper, rediscretized_coarse, spatial_stencil, tableau
from mgrit_advection.estimates import (
    AssumptionViolationError,
    SingularEstimateError,
    SizeCapError,
    coarse_block,
    dense_block_norms,
    dense_space_time_matrix,
    dense_two_level_norm,
    dobrev_bound,
    lfa_block,
    lfa_estimate,
    spectral_norm,
    two_level_block,
    worst_case,
)


def lfa_grid_oracle(lam, mu, relax, n_grid=1024):
    """max over a theta grid of the 2x2 block's top singular value, then refined."""
    def sv(t):
        return np.linalg.svd(lfa_block(lam, mu, t, relax), compute_uv=False)[0]
    grid = np.linspace(-np.pi, np.pi, n_grid, endpoint=False)
    vals = np.array([sv(t) for t in grid])
    j = int(np.argmax(vals))
    h = 2 * np.pi / n_grid
    res = minimize_scalar(lambda t: -sv(t), bounds=(grid[j] - h, grid[j] + h),
                          method="bounded", options={"xatol": 1e-12})
    return max(vals[j], -res.fun)


def scalar_toeplitz_fine(lam, mu, m, n_t):
    """Fine block as P T_c R S with T_c the scalar Toeplitz coarse propagator."""
    n_c = n_t // m
    Tc = coarse_block(lam, mu, m, n_t, "F")
    # map input time levels: F-relax copies lam^s times the previous C-point into interval
    S = np.zeros((n_t, n_t), dtype=complex)
    for t in range(1, n_t + 1):
        c = m * (t // m)
        if c == t:
            S[t - 1, t - 1] = 1
        elif c > 0:
            S[t - 1, c - 1] = lam ** (t - c)
    P = np.zeros((n_t, n_c), dtype=complex)
    for i in range(n_c):
        c = (i + 1) * m
        for t in range(c, min(c + m, n_t + 1)):
            P[t - 1, i] = lam ** (t - c)
    R = np.zeros((n_c, n_t))
    for i in range(n_c):
        R[i, (i + 1) * m - 1] = 1
    return P @ Tc @ R @ S


def test_lfa_examples():
    assert lfa_estimate(0.9, 0.81) == 0.0
    assert lfa_estimate(0.0, 0.5) == pytest.approx(1.0, abs=1e-15)
    val = lfa_estimate(0.9, 0.8)
    assert val == pytest.approx(0.067268, abs=5e-7)
    assert val == pytest.approx(lfa_grid_oracle(0.9, 0.8, "F"), abs=1e-6)


def test_lfa_singular():
    with pytest.raises(SingularEstimateError):
        lfa_estimate(0.5, 1.0)
    with pytest.raises(ValueError):
        lfa_estimate(0.5, 0.2, "C")


def test_lfa_closed_form_matches_theta_grid(rng):
    lam, mu = random_pairs(rng, 25, 0.9)
    for l, u in zip(lam, mu):
        for relax in ("F", "FCF"):
            assert lfa_estimate(l, u, relax) == pytest.approx(
                lfa_grid_oracle(l, u, relax), abs=1e-6)


@given(st.complex_numbers(max_magnitude=1.2), st.complex_numbers(max_magnitude=0.9))
def test_lfa_fcf_is_scaled_f(lam, mu):
    f = lfa_estimate(lam, mu, "F")
    assert lfa_estimate(lam, mu, "FCF") == pytest.approx(abs(lam) ** 2 * f, rel=1e-14, abs=0)


def test_dobrev_examples():
    assert dobrev_bound(0.5, 0.25, 2, 8) == 0.0
    for n_t in (2, 8, 64):
        assert dobrev_bound(0.5, 0.0, 2, n_t) == pytest.approx(0.25, abs=1e-16)
    expected = 0.01 * (1 - 0.8**4) / 0.2
    assert dobrev_bound(0.9, 0.8, 2, 8) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.029520, abs=1e-7)


def test_dobrev_limit_at_unit_modulus():
    # the constant spatial mode has lam = mu = 1 for consistent schemes
    assert dobrev_bound(1.0, 1.0, 2, 16) == 0.0
    assert dobrev_bound(0.5, 1.0, 2, 16) == pytest.approx(0.75 * 8)


def test_dobrev_assumption_violation():
    with pytest.raises(AssumptionViolationError):
        dobrev_bound(1.01, 0.5, 2, 8)
    with pytest.raises(AssumptionViolationError):
        dobrev_bound(0.5, -1.01, 2, 8)
    with pytest.raises(ValueError):
        dobrev_bound(0.5, 0.2, 3, 8)


def test_bound_domination_suite(rng):
    lam, mu = random_pairs(rng, 200, 0.95)
    for i, (l, u) in enumerate(zip(lam, mu)):
        m = (2, 4)[i % 2]
        n_t = (8, 16)[(i // 2) % 2]
        for relax in ("F", "FCF"):
            coarse = spectral_norm(coarse_block(l, u, m, n_t, relax))
            fine = spectral_norm(two_level_block(l, u, m, n_t, relax))
            assert coarse <= dobrev_bound(l, u, m, n_t, relax) + 1e-10
            assert fine <= np.sqrt(m) * coarse + 1e-10


@settings(max_examples=50)
@given(st.floats(0, 0.95), st.floats(0, 0.95), st.floats(-np.pi, np.pi))
def test_dobrev_grows_with_n_t(r_lam, r_mu, angle):
    lam, mu = r_lam, r_mu * np.exp(1j * angle)
    vals = [dobrev_bound(lam, mu, 2, n_t) for n_t in (4, 8, 16, 32)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


def test_block_matches_scalar_toeplitz(rng):
    lam, mu = random_pairs(rng, 20, 0.95)
    for l, u in zip(lam, mu):
        for m in (2, 4):
            assert np.allclose(two_level_block(l, u, m, 16, "F"),
                               scalar_toeplitz_fine(l, u, m, 16), atol=1e-10, rtol=0)


def test_exact_coarse_block_vanishes(rng):
    lam, _ = random_pairs(rng, 5, 0.95)
    for l in lam:
        for relax in ("F", "FCF"):
            assert spectral_norm(two_level_block(l, l**2, 2, 16, relax)) <= 1e-12


def test_single_coarse_interval():
    for relax in ("F", "FCF"):
        assert spectral_norm(two_level_block(0.7 + 0.2j, 0.1, 4, 4, relax)) <= 1e-12


def test_dense_norm_exact_coarse(sdirk_small):
    _, phi = sdirk_small
    psi = TimeStepper.from_explicit(power_column(phi, 2))
    assert dense_two_level_norm(phi, psi, 2, 16, 8) <= 1e-12


@pytest.mark.parametrize("relax", ["F", "FCF"])
def test_dense_space_time_matrix_matches_blocks(sdirk_small, relax):
    p, phi = sdirk_small
    L = spatial_stencil(3, p.a, p.dx, p.n_x)
    psi = rediscretized_coarse(L, tableau("sdirk3"), 2, p.dt)
    full = spectral_norm(dense_space_time_matrix(phi, psi, 2, 16, relax))
    assert full == pytest.approx(dense_two_level_norm(phi, psi, 2, 16, 8, relax), abs=1e-10)


def test_dense_cap():
    phi = TimeStepper.from_explicit(CirculantStencil.unit(64))
    with pytest.raises(SizeCapError):
        dense_block_norms(phi, phi, 2, 512, cap=2**14)


def test_worst_case_exact_and_flagged():
    lam = np.array([0.5, 0.9, 1.0, 0.3], dtype=complex)
    rep = worst_case(lam, lam**2, "Dobrev-F", 2, 8)
    assert rep.max_value == 0 and not rep.any_flagged
    mu = lam**2
    mu[1] = -1.0
    rep = worst_case(lam, mu, "LFA-F")
    assert rep.max_value == np.inf and rep.any_flagged
    assert rep.argmax == -1  # centred wavenumbers -2..1, bad mode at index 1


def test_worst_case_ties_prefer_small_wavenumber():
    lam = np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)
    rep = worst_case(lam, np.zeros(4), "Dobrev-F", 2, 8)
    assert rep.argmax == 0


def test_worst_case_matches_scalar_scan():
    p = ProblemSpec.from_cfl(64, 64, 1.0)
    phi = fine_stepper(p, "sdirk3", 3)
    psi = rediscretized_coarse(spatial_stencil(3, p.a, p.dx, p.n_x), tableau("sdirk3"), 2, p.dt)
    lam, mu = stepper_spectrum(phi), stepper_spectrum(psi)
    for est in ("Dobrev-F", "Dobrev-FCF"):
        relax = est.split("-")[1]
        scan = max(dobrev_bound(lam[k], mu[k], 2, 64, relax) for k in range(-32, 32))
        assert worst_case(lam, mu, est, 2, 64).max_value == pytest.approx(scan, abs=1e-12)
    scan = max(lfa_estimate(lam[k], mu[k]) for k in range(-32, 32))
    assert worst_case(lam, mu, "LFA-F").max_value == pytest.approx(scan, abs=1e-12)


def test_worst_case_rejects_lfa_for_m4():
    with pytest.raises(ValueError):
        worst_case(np.zeros(4), np.zeros(4), "LFA-F", 4)


def test_lfa_constant_mode_rounding():
    from mgrit_advection.estimates import lfa_values
    assert lfa_values(1 + 7e-16, 1 - 1e-16) == 0.0
    assert lfa_values(1.0, 1 + 1e-16) == 0.0
    assert np.isinf(lfa_values(0.9, 1.0))
