import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fene.core import (
    PhaseDensity,
    PotentialParams,
    build_config_grid,
    equilibrium_cell_mass,
    equilibrium_cells,
    equilibrium_density,
    partition_function,
    potential_gradient,
    potential_value,
    quadrature,
    stress_kernels,
)
from fene.errors import ConfigError, DomainError, ShapeError


def test_potential_examples():
    p = PotentialParams(k=1.0)
    assert potential_value([0.0, 0.0], p) == 0.0
    assert np.isclose(potential_value([0.5, 0.0], p), -np.log(0.75))
    assert np.allclose(potential_gradient([0.5, 0.0], p), [4.0 / 3.0, 0.0])
    with pytest.raises(DomainError):
        potential_value([1.0, 0.0], p)
    with pytest.raises(DomainError):
        potential_gradient([[0.6, 0.8]], p)
    with pytest.raises(ShapeError):
        potential_value([0.1, 0.2, 0.3], p)


@pytest.mark.parametrize("bad", [dict(k=0.0), dict(k=-1.0), dict(nu=0.0), dict(beta=2.0), dict(r0=0.5)])
def test_params_windows(bad):
    with pytest.raises(ConfigError):
        PotentialParams(**bad)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.7])
def test_partition_function_against_quadrature(k):
    val, _ = integrate.quad(lambda r: 2 * np.pi * r * (1 - r**2) ** k, 0, 1)
    assert np.isclose(partition_function(PotentialParams(k=k)), val, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.0, 0.99), th=st.floats(0, 2 * np.pi), k=st.floats(0.3, 5.0))
def test_gradient_matches_finite_difference(r, th, k):
    p = PotentialParams(k=k)
    R = np.array([r * np.cos(th), r * np.sin(th)])
    h = 1e-6 * (1 - r)
    fd = [(potential_value(R + h * e, p) - potential_value(R - h * e, p)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(potential_gradient(R, p), fd, rtol=1e-5, atol=1e-7)


def test_equilibrium_vanishes_on_circle():
    p = PotentialParams(k=2.0)
    assert equilibrium_density([1.0, 0.0], p) == 0.0
    assert np.isclose(equilibrium_density([0.0, 0.0], p), 1 / partition_function(p))


def test_grid_geometry():
    g = build_config_grid(16, 24)
    assert g.shape == (16, 24)
    assert np.isclose(g.cell_areas.sum(), np.pi, rtol=1e-14)
    assert np.allclose(g.r_centers, (np.arange(16) + 0.5) / 16)
    assert len(g.radial_faces["left"]) == 15 * 24
    assert len(g.angular_faces["left"]) == 16 * 24
    assert g.max_cell_diameter < 0.3
    with pytest.raises(ConfigError):
        build_config_grid(3, 16)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.5])
def test_equilibrium_cell_mass_exact(k):
    g = build_config_grid(8, 8)
    m = equilibrium_cell_mass(g, k)
    assert np.isclose(m.sum(), 1.0, rtol=1e-14)
    Z = np.pi / (k + 1)
    ring, _ = integrate.quad(lambda r: r * (1 - r**2) ** k / Z, g.r_edges[3], g.r_edges[4])
    assert np.isclose(m[3, 0], ring * g.dtheta, rtol=1e-12)


def test_stress_kernels_against_dblquad():
    k = 1.5
    g = build_config_grid(6, 6)
    K = stress_kernels(g, k)
    Z = np.pi / (k + 1)
    i, j = 5, 2
    ra, rb = g.r_edges[i], g.r_edges[i + 1]
    ta, tb = g.theta_edges[j], g.theta_edges[j + 1]

    def kern(c):
        def f(r, t):
            R = (r * np.cos(t), r * np.sin(t))
            a, b = {0: (0, 0), 1: (0, 1), 2: (1, 1)}[c]
            return r * 2 * k * (1 - r**2) ** (k - 1) / Z * R[a] * R[b]

        return integrate.dblquad(f, ta, tb, ra, rb, epsabs=1e-13)[0]

    assert np.allclose(K[:, i, j], [kern(c) for c in range(3)], rtol=1e-9, atol=1e-13)


def test_phase_density_checks():
    g = build_config_grid(8, 8)
    p = PotentialParams()
    eq = PhaseDensity.equilibrium(g, p)
    assert np.isclose(eq.mass, 1.0)
    assert np.isclose(PhaseDensity(3 * eq.values, g).normalized().mass, 1.0)
    with pytest.raises(ConfigError):
        PhaseDensity(-eq.values, g)
    with pytest.raises(ShapeError):
        PhaseDensity(np.ones((4, 4)), g)
    assert np.allclose(quadrature(equilibrium_cells(g, p), g), 1.0)
