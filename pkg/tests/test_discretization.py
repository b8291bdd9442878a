import numpy as np
import pytest

from mgrit_advection.circulant import CirculantStencil, apply, spectrum, stepper_spectrum
from mgrit_advection.discretization import (
    SDIRK3_ZETA,
    ProblemSpec,
    StencilOverlapError,
    build_time_stepper,
    fine_stepper,
    max_abs_eig,
    rediscretized_coarse,
    spatial_stencil,
    tableau,
)


def test_order2_stencil():
    c = spatial_stencil(2, 1.0, 1.0, 8).coeffs
    assert c.tolist() == [1.5, -2.0, 0.5, 0, 0, 0, 0, 0]


def test_order3_stencil():
    c = spatial_stencil(3, 1.0, 1.0, 8).coeffs
    assert np.allclose(c, [0.5, -1.0, 1 / 6, 0, 0, 0, 0, 1 / 3], rtol=0, atol=1e-16)


def test_zero_wavespeed():
    assert not np.any(spatial_stencil(2, 0.0, 1.0, 8).coeffs)


def test_stencil_overlap():
    with pytest.raises(StencilOverlapError):
        spatial_stencil(3, 1.0, 0.5, 4)


@pytest.mark.parametrize("order", [2, 3])
@pytest.mark.parametrize("n", [8, 64, 1024])
def test_stencil_rows_sum_to_zero(order, n):
    c = spatial_stencil(order, 1.3, 2.0 / n, n).coeffs
    assert abs(c.sum()) <= 1e-14 * np.max(np.abs(c))


def test_heun_and_ssprk_tableaus():
    h = tableau("heun2")
    assert h.A.tolist() == [[0, 0], [1, 0]] and h.b.tolist() == [0.5, 0.5]
    s = tableau("SSPRK3")
    assert s.A.tolist() == [[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]]
    assert np.allclose(s.b, [1 / 6, 1 / 6, 2 / 3])


def test_sdirk_tableau():
    t = tableau("sdirk3")
    assert np.allclose(np.diag(t.A), 0.4358665215, atol=1e-10)
    z = SDIRK3_ZETA
    assert abs(z**3 - 3 * z**2 + 1.5 * z - 1 / 6) < 1e-15
    assert t.c[1] == pytest.approx((1 + z) / 2)


@pytest.mark.parametrize("name", ["heun2", "ssprk3", "sdirk3"])
def test_tableau_invariants(name):
    t = tableau(name)
    assert np.allclose(t.A.sum(axis=1), t.c, atol=1e-15)
    assert t.b.sum() == pytest.approx(1.0, abs=1e-15)


def test_unknown_tableau():
    with pytest.raises(ValueError):
        tableau("rk4")


@pytest.mark.parametrize("name", ["heun2", "ssprk3", "sdirk3"])
def test_stability_function_matches_stage_solve(name, rng):
    t = tableau(name)
    for z in rng.normal(size=20) + 1j * rng.normal(size=20):
        assert t.stability(z) == pytest.approx(t.stagewise(z), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("name", ["heun2", "ssprk3", "sdirk3"])
def test_zero_step_is_identity(name):
    L = spatial_stencil(3, 1.0, 0.25, 8)
    phi = build_time_stepper(L, tableau(name), 0.0)
    assert np.allclose(phi.explicit.coeffs, CirculantStencil.unit(8).coeffs, atol=1e-16)
    assert np.allclose(phi.implicit.coeffs, CirculantStencil.unit(8).coeffs, atol=1e-16)


@pytest.mark.parametrize("name,order", [("heun2", 2), ("ssprk3", 3), ("sdirk3", 3)])
def test_mode_ratio_is_stability_function(name, order):
    p = ProblemSpec.from_cfl(32, 32, 0.4)
    L = spatial_stencil(order, p.a, p.dx, p.n_x)
    phi = build_time_stepper(L, tableau(name), p.dt)
    ell = spectrum(L).values
    oracle = np.array([tableau(name).stagewise(-p.dt * e) for e in ell])
    assert np.allclose(stepper_spectrum(phi).values, oracle, atol=1e-12, rtol=0)


@pytest.mark.parametrize("name,order", [("heun2", 2), ("ssprk3", 3), ("sdirk3", 3)])
def test_constants_are_preserved(name, order):
    p = ProblemSpec.from_cfl(16, 16, 0.8)
    phi = fine_stepper(p, name, order)
    u = np.full(16, 2.5)
    stepped = np.linalg.solve(phi.implicit.dense(), apply(phi.explicit, u))
    assert np.allclose(stepped, u, atol=1e-13)


def test_explicit_steppers_have_identity_implicit_part():
    p = ProblemSpec.from_cfl(16, 16, 0.4)
    assert fine_stepper(p, "heun2", 2).is_explicit
    assert not fine_stepper(p, "sdirk3", 3).is_explicit


@pytest.mark.parametrize("cfl,stable", [(0.4, True), (0.49, True), (0.51, False)])
def test_heun_cfl_limit(cfl, stable):
    phi = fine_stepper(ProblemSpec.from_cfl(64, 64, cfl), "heun2", 2)
    assert (max_abs_eig(phi) <= 1 + 1e-12) == stable


@pytest.mark.parametrize("cfl,stable", [(1.4, True), (1.7, False)])
def test_ssprk_cfl_limit(cfl, stable):
    phi = fine_stepper(ProblemSpec.from_cfl(64, 64, cfl), "ssprk3", 3)
    assert (max_abs_eig(phi) <= 1 + 1e-12) == stable


def test_rediscretized_m1_is_fine_stepper():
    p = ProblemSpec.from_cfl(16, 16, 1.0)
    L = spatial_stencil(3, p.a, p.dx, p.n_x)
    tab = tableau("sdirk3")
    a = build_time_stepper(L, tab, p.dt)
    b = rediscretized_coarse(L, tab, 1, p.dt)
    assert np.array_equal(a.explicit.coeffs, b.explicit.coeffs)
    assert np.array_equal(a.implicit.coeffs, b.implicit.coeffs)


def test_rediscretized_explicit_coarse_is_unstable():
    p = ProblemSpec.from_cfl(64, 64, 1.4)
    L = spatial_stencil(3, p.a, p.dx, p.n_x)
    psi = rediscretized_coarse(L, tableau("ssprk3"), 2, p.dt)
    assert psi.dt * p.a / p.dx == pytest.approx(2.8)
    assert max_abs_eig(psi) > 1


@pytest.mark.parametrize("m", [2, 4, 16, 64])
def test_rediscretized_sdirk_is_stable(m):
    p = ProblemSpec.from_cfl(64, 64, 1.0)
    L = spatial_stencil(3, p.a, p.dx, p.n_x)
    # coefficients grow like m^3, so roundoff in the ratio grows too
    assert max_abs_eig(rediscretized_coarse(L, tableau("sdirk3"), m, p.dt)) <= 1 + 1e-10


def test_problem_spec():
    p = ProblemSpec.from_cfl(64, 32, 0.5, a=2.0)
    assert p.dx == pytest.approx(1 / 32)
    assert p.cfl == pytest.approx(0.5)
    assert p.x[0] == -1.0 and p.x.size == 64
    assert p.initial_condition() == pytest.approx(np.sin(np.pi * p.x))
    with pytest.raises(ValueError):
        p.check_coarsening(3)
    with pytest.raises(ValueError):
        ProblemSpec(0.0, 8, 8, 1.0)
