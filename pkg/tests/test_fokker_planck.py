import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density
from fene import diagnostics as dg
from fene.core import PhaseDensity, PotentialParams, build_config_grid, equilibrium_cells, quadrature
from fene.errors import ConfigError, ConvergenceError, StepSizeError
from fene.fokker_planck import VelocityGradient, assemble_step_operator, get_solver, steady_state, step
from fene.stress import kramers_stress

SHEAR = np.array([[0.0, 0.5], [0.0, 0.0]])


def test_velocity_gradient_trace():
    VelocityGradient([[0.1, 1.0], [0.0, -0.1]])
    with pytest.raises(ConfigError):
        VelocityGradient([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ConfigError):
        VelocityGradient(np.zeros(3))


def test_equilibrium_is_fixed_point(grid32, params):
    eq = PhaseDensity.equilibrium(grid32, params)
    out = step(eq, np.zeros((2, 2)), 0.1, params)
    assert np.max(np.abs(out.values - eq.values)) <= 1e-12 * eq.values.max()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2))
def test_mass_and_positivity_random_kappa(seed, a, b, c):
    p = PotentialParams(k=1.0)
    g = build_config_grid(16, 16)
    psi = random_density(g, p, seed, floor=0.0)
    kappa = np.array([[a, b], [c, -a]])
    solver = get_solver(g, p)
    dt = min(0.05, 0.9 * solver.max_stable_dt(kappa))
    out = solver.advance(psi, kappa, dt)
    assert abs(quadrature(out, g) - 1.0) <= 1e-12
    assert out.min() >= -1e-13


def test_cfl_violation(grid32, params):
    with pytest.raises(StepSizeError):
        assemble_step_operator(np.array([[0.0, 100.0], [0.0, 0.0]]), 1.0, grid32, params)
    with pytest.raises(StepSizeError):
        assemble_step_operator(np.zeros((2, 2)), 0.0, grid32, params)


def test_step_operator_is_linear(grid32, params):
    op = assemble_step_operator(SHEAR, 0.01, grid32, params)
    a, b = random_density(grid32, params, 1), random_density(grid32, params, 2)
    assert np.allclose(op(2 * a + b), 2 * op(a) + op(b), rtol=1e-12, atol=1e-14)


def test_relative_entropy_decreases_and_relaxes(grid32, params):
    psi = random_density(grid32, params, 7)
    solver = get_solver(grid32, params)
    H = [dg.relative_entropy(psi, grid32, params)]
    for _ in range(100):
        psi = solver.advance(psi, np.zeros((2, 2)), 0.05)
        H.append(dg.relative_entropy(psi, grid32, params))
    assert np.all(np.diff(H) <= 1e-15)
    eq = equilibrium_cells(grid32, params)
    assert quadrature(np.abs(psi - eq), grid32) < 1e-6


def test_central_bump_relaxes(grid64, params):
    eq = equilibrium_cells(grid64, params)
    bump = np.where(grid64.r_centers[:, None] < 0.1, 1.0, 0.0) * np.ones(grid64.shape)
    psi = bump / quadrature(bump, grid64)
    solver = get_solver(grid64, params)
    for _ in range(1000):
        psi = solver.advance(psi, np.zeros((2, 2)), 0.01)
    assert quadrature(np.abs(psi - eq), grid64) < 1e-6


def test_rotation_equivariance(params):
    g = build_config_grid(32, 32)
    psi = random_density(g, params, 3)
    solver = get_solver(g, params)
    a = solver.advance(np.roll(psi, 5, axis=1), np.zeros((2, 2)), 0.02)
    b = np.roll(solver.advance(psi, np.zeros((2, 2)), 0.02), 5, axis=1)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_steady_state_zero_kappa(grid32, params):
    s = steady_state(np.zeros((2, 2)), 1e-10, grid32, params)
    assert np.allclose(s.values, equilibrium_cells(grid32, params), atol=1e-9)


def test_steady_state_extension_sign(grid32, params):
    for eps in (0.05, -0.05):
        tau = kramers_stress(steady_state(np.diag([eps, -eps]), 1e-10, grid32, params), grid32, params).tau
        assert np.sign(tau[0, 0] - tau[1, 1]) == np.sign(eps)


def test_steady_state_independent_of_start(grid32, params):
    tol = 1e-9
    a = steady_state(SHEAR, tol, grid32, params, initial=random_density(grid32, params, 11))
    b = steady_state(SHEAR, tol, grid32, params, initial=random_density(grid32, params, 12))
    assert quadrature(np.abs(a.values - b.values), grid32) <= 2 * tol


def test_steady_state_budget(grid32, params):
    with pytest.raises(ConvergenceError):
        steady_state(SHEAR, 1e-14, grid32, params, max_iter=3)


def test_shear_stress_converges_first_order(params):
    vals = [kramers_stress(steady_state(SHEAR, 1e-10, build_config_grid(n, n), params), build_config_grid(n, n), params).tau for n in (16, 32, 64)]
    d1 = np.abs(vals[1] - vals[0]).max()
    d2 = np.abs(vals[2] - vals[1]).max()
    assert 1.4 < d1 / d2 < 3.0
    assert vals[2][0, 1] > 0


def test_batched_advance_matches_loop(grid32, params):
    solver = get_solver(grid32, params)
    psis = np.stack([random_density(grid32, params, s) for s in range(4)]).reshape(2, 2, *grid32.shape)
    kap = np.stack([SHEAR, -SHEAR, np.diag([0.2, -0.2]), np.zeros((2, 2))]).reshape(2, 2, 2, 2)
    out = solver.advance(psis, kap, 0.01)
    for i in range(2):
        for j in range(2):
            assert np.allclose(out[i, j], solver.advance(psis[i, j], kap[i, j], 0.01), rtol=1e-13, atol=1e-15)
