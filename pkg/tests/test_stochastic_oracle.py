import numpy as np
import pytest
from scipy import stats

from fene.core import PotentialParams
from fene.errors import BDStepError, ConfigError
from fene.macro_flow import FlowProtocol
from fene.stochastic_oracle import BDEnsemble, _unit_root, bd_run, bd_step, estimate_stress, make_rng, sample_equilibrium

PARAMS = PotentialParams()
REST = FlowProtocol("steady_shear", 0.0)


def ensemble(M, seed=0, params=PARAMS):
    rng = make_rng(seed)
    return BDEnsemble(sample_equilibrium(M, params, rng), rng)


def radial_ks(R):
    r = np.linalg.norm(R, axis=1)
    return stats.kstest(r, lambda x: 2 * x**2 - x**4).statistic


def test_unit_root_solves_cubic():
    v = np.concatenate([[0.0, 1e-12], np.geomspace(1e-6, 1e6, 200)])
    for c in (1.0 + 1e-6, 1.001, 1.5):
        rho = _unit_root(v, c)
        assert np.all((rho >= 0) & (rho < 1))
        assert np.allclose(((rho - v) * rho - c) * rho + v, 0, atol=1e-12 * np.maximum(1, v))


def test_equilibrium_sampler_matches_cdf():
    R = sample_equilibrium(20000, PARAMS, make_rng(1))
    assert radial_ks(R) < 3 / np.sqrt(len(R))


@pytest.mark.parametrize("scheme", ["predictor_corrector", "euler"])
def test_zero_dt_is_identity(scheme):
    ens = ensemble(100)
    before = ens.paths.copy()
    bd_step(ens, np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0, PARAMS, scheme)
    assert np.array_equal(ens.paths, before)


@pytest.mark.parametrize("scheme", ["predictor_corrector", "euler"])
def test_seeded_runs_identical(scheme):
    a, b = ensemble(500, 9), ensemble(500, 9)
    kap = np.array([[0.0, 2.0], [0.0, 0.0]])
    for _ in range(20):
        bd_step(a, kap, 0.01, PARAMS, scheme)
        bd_step(b, kap, 0.01, PARAMS, scheme)
    assert np.array_equal(a.paths, b.paths)


@pytest.mark.parametrize("scheme", ["predictor_corrector", "euler"])
def test_confined_under_strong_extension(scheme):
    ens = ensemble(2000, 2)
    for _ in range(50):
        bd_step(ens, np.diag([5.0, -5.0]), 0.01, PARAMS, scheme)
    assert np.all(np.einsum("ij,ij->i", ens.paths, ens.paths) < 1)


def test_equilibrium_long_run_cdf_and_stress():
    recs = bd_run(REST, 10000, 10.0, 5e-3, seed=4, record_every=500)
    t, tau, se = recs[-1]
    assert t == pytest.approx(10.0)
    assert np.all(np.abs(tau.tau - np.eye(2)) <= 3 * se)


def test_equilibrium_radial_cdf_after_run():
    ens = ensemble(10000, 5)
    for _ in range(1000):
        bd_step(ens, np.zeros((2, 2)), 5e-3, PARAMS)
    assert radial_ks(ens.paths) < 3 / np.sqrt(ens.size)


def test_second_moments_match_quadrature():
    ens = ensemble(20000, 6)
    for _ in range(400):
        bd_step(ens, np.zeros((2, 2)), 5e-3, PARAMS)
    R = ens.paths
    s = R[:, :, None] * R[:, None, :]
    mean, se = s.mean(0), s.std(0, ddof=1) / np.sqrt(ens.size)
    # <x^2> = <y^2> = <r^2> / 2 = 1/6 for k = 1
    assert np.all(np.abs(mean - np.eye(2) / 6) <= 3 * se)


def test_all_at_origin():
    ens = BDEnsemble(np.zeros((10, 2)), make_rng(0))
    tau, se = estimate_stress(ens, PARAMS)
    assert np.all(tau.tau == 0) and np.all(se == 0)


def test_stderr_scaling():
    # the stress weight has a log-divergent second moment, so single
    # standard errors are erratic; compare medians over replicates
    small = np.median([estimate_stress(ensemble(20000, s), PARAMS)[1] for s in range(25)], axis=0)
    large = np.median([estimate_stress(ensemble(40000, 100 + s), PARAMS)[1] for s in range(25)], axis=0)
    assert np.all(np.abs(large / small * np.sqrt(2) - 1) <= 0.2)


def test_zero_horizon_single_record():
    recs = bd_run(REST, 50, 0.0, 1e-3, seed=0)
    assert len(recs) == 1 and recs[0][0] == 0.0


def test_bad_inputs():
    with pytest.raises(BDStepError):
        BDEnsemble(np.array([[1.0, 0.0]]), make_rng(0))
    with pytest.raises(ConfigError):
        bd_step(ensemble(4), np.zeros((2, 2)), 0.1, PARAMS, "milstein")
    with pytest.raises(ConfigError):
        estimate_stress(BDEnsemble(np.zeros((1, 2)), make_rng(0)), PARAMS)


def test_extension_matches_fokker_planck():
    from fene.core import build_config_grid
    from fene.fokker_planck import steady_state
    from fene.stress import kramers_stress

    g = build_config_grid(32, 32)
    ref = kramers_stress(steady_state(np.diag([0.25, -0.25]), 1e-10, g, PARAMS), g, PARAMS).tau
    t, tau, se = bd_run(FlowProtocol("planar_extension", 0.25), 20000, 3.0, 1e-3, seed=3)[-1]
    assert np.all(np.abs(tau.tau - ref) <= 3 * se)
