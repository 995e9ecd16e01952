import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fene.core import PotentialParams, build_config_grid, equilibrium_cells, quadrature
from fene.errors import ConfigError, StepSizeError
from fene.macro_flow import (
    CoupledSystem,
    FlowProtocol,
    MacroState,
    advect,
    build_spectral_grid,
    kinetic_energy,
    ns_step,
    protocol_kappa,
    stress_work,
    viscous_dissipation,
)

PARAMS = PotentialParams()


def taylor_green(grid, amp=1.0):
    x, y = grid.coordinates()
    return MacroState.from_velocity(amp * np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]), grid)


def random_state(grid, seed, amp=1.0):
    rng = np.random.default_rng(seed)
    return MacroState.from_velocity(amp * rng.standard_normal((2,) + grid.shape), grid)


def test_protocols():
    assert np.array_equal(protocol_kappa(FlowProtocol("steady_shear", 1.0), 3.0).kappa, [[0, 1], [0, 0]])
    assert np.array_equal(protocol_kappa(FlowProtocol("planar_extension", 0.5), 0.0).kappa, np.diag([0.5, -0.5]))
    k = protocol_kappa(FlowProtocol("time_periodic_shear", 1.0, omega=2 * np.pi), 0.25).kappa
    assert abs(k[0, 1]) < 1e-15
    with pytest.raises(ConfigError):
        FlowProtocol("couette")
    with pytest.raises(ConfigError):
        protocol_kappa(FlowProtocol("coupled"), 0.0)


def test_taylor_green_decay():
    grid = build_spectral_grid(64, 64)
    s = taylor_green(grid)
    e0 = kinetic_energy(s)
    dt = 0.01
    for _ in range(100):
        s = ns_step(s, None, dt, PARAMS)
    assert abs(kinetic_energy(s) / e0 - np.exp(-4.0)) <= 1e-6 * np.exp(-4.0)


def test_constant_stress_keeps_rest():
    grid = build_spectral_grid(16, 16)
    tau = np.broadcast_to(np.array([[2.0, 0.3], [0.3, 1.0]]), grid.shape + (2, 2))
    s = ns_step(MacroState.zeros(grid), tau, 0.1, PARAMS)
    assert np.abs(s.velocity()).max() < 1e-15


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_divergence_free_and_mean_preserved(seed):
    grid = build_spectral_grid(16, 16)
    s = random_state(grid, seed, 0.3)
    rng = np.random.default_rng(seed + 1)
    tau = rng.standard_normal(grid.shape + (2, 2))
    tau = tau + np.swapaxes(tau, -1, -2)
    s1 = ns_step(s, tau, 0.01, PARAMS)
    assert s1.divergence_max() <= 1e-12
    assert np.allclose(s1.uhat[:, 0, 0], s.uhat[:, 0, 0], atol=1e-12)
    assert np.isrealobj(s1.velocity())


def test_cfl_violation():
    grid = build_spectral_grid(16, 16)
    with pytest.raises(StepSizeError):
        ns_step(taylor_green(grid, 100.0), None, 1.0, PARAMS)


def test_hyperviscosity_damps_top_mode_faster():
    grid = build_spectral_grid(32, 32)
    s0 = random_state(grid, 3, 0.1)
    plain, hyper = s0, s0
    proto = FlowProtocol("coupled", hyper_strength=1e-3)
    for _ in range(20):
        plain = ns_step(plain, None, 0.005, PARAMS)
        hyper = ns_step(hyper, None, 0.005, PARAMS, proto)
    kmax = np.sqrt(grid.k2) * grid.dealias
    top = kmax >= 0.95 * kmax.max()
    assert np.all(np.abs(hyper.uhat[:, top]) < np.abs(plain.uhat[:, top]))
    assert viscous_dissipation(s0, PARAMS, proto) > viscous_dissipation(s0, PARAMS)


def test_energy_identity_first_order():
    grid = build_spectral_grid(16, 16)
    s0 = random_state(grid, 4, 0.5)
    rng = np.random.default_rng(5)
    tau = rng.standard_normal(grid.shape + (2, 2))
    tau = 0.5 * (tau + np.swapaxes(tau, -1, -2))
    res = []
    for dt in (4e-3, 2e-3, 1e-3):
        s1 = ns_step(s0, tau, dt, PARAMS)
        lhs = kinetic_energy(s1) - kinetic_energy(s0)
        rate = 0.5 * (viscous_dissipation(s0, PARAMS) + viscous_dissipation(s1, PARAMS) + stress_work(s0, tau) + stress_work(s1, tau))
        res.append(abs(lhs + dt * rate))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.5)


def test_advection_conserves_and_is_monotone():
    grid = build_spectral_grid(16, 16)
    s = random_state(grid, 6, 1.0)
    rho = np.random.default_rng(7).random(grid.shape)
    lo, hi = rho.min(), rho.max()
    total = rho.sum()
    for _ in range(50):
        rho = advect(rho, s, 0.005)
        assert abs(rho.sum() - total) <= 1e-12 * total
        assert rho.min() >= lo - 1e-14 and rho.max() <= hi + 1e-14


def test_coupled_rest_state_is_stationary():
    grid = build_spectral_grid(8, 8)
    cfg = build_config_grid(16, 16)
    system = CoupledSystem(grid, cfg, PARAMS)
    eq = equilibrium_cells(cfg, PARAMS)
    micro = 1.7 * np.broadcast_to(eq, grid.shape + cfg.shape)
    macro = MacroState.zeros(grid)
    for _ in range(10):
        macro, micro = system.step(macro, micro, 0.01)
    assert np.abs(macro.velocity()).max() <= 1e-12
    assert np.abs(micro - 1.7 * eq).max() <= 1e-12


def test_coupled_polymer_mass():
    grid = build_spectral_grid(8, 8)
    cfg = build_config_grid(16, 16)
    system = CoupledSystem(grid, cfg, PARAMS)
    rng = np.random.default_rng(8)
    eq = equilibrium_cells(cfg, PARAMS)
    micro = eq * (0.5 + rng.random(grid.shape + cfg.shape))
    macro = taylor_green(grid, 0.5)
    m0 = quadrature(micro, cfg).sum()
    for _ in range(10):
        macro, micro = system.step(macro, micro, 0.01)
        m = quadrature(micro, cfg).sum()
        assert abs(m - m0) <= 1e-10 * m0
    with pytest.raises(ConfigError):
        system.step(macro, micro[:4], 0.01)
