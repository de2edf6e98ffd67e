"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import triadda


@pytest.fixture(scope="module")
def spec():
    return triadda.regime_spec(1)


def test_triad_spec_shape(spec):
    assert spec.d == 3
    lam = spec.Lambda
    assert lam.shape == (3, 3)
    assert lam[0, 0] == pytest.approx(-0.2)
    spec.validate()


def test_bilinear_energy_conservation(spec):
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = rng.normal(size=3)
        b = triadda.bilinear_B(spec, u, u)
        assert abs(float(u @ b)) < 1e-12 * (1 + np.linalg.norm(u) ** 3)


def test_observation_functions(spec):
    z = np.ones(3)
    hm = triadda.H_m(spec, z)
    np.testing.assert_allclose(hm, [1.0, -0.6, -0.4], atol=1e-14)
    hv = triadda.H_v(spec, z)
    assert hv[0, 0] == pytest.approx(2.0)
    # Euler homogeneity: z . grad H_m = 2 H_m.
    grad = triadda.grad_H_m(spec, z)
    np.testing.assert_allclose(grad @ z, 2 * hm, atol=1e-13)


def test_truth_run_and_moments(spec):
    params = triadda.regime_params(1)
    truth = triadda.run_truth(
        spec, params.u0_mean, params.r0_var, 1e-3, 0.05, 500, 42, [0.02]
    )
    assert len(truth["times"]) == 51
    assert truth["mean"].shape == (51, 3)
    snap = truth["snapshots"][0.02]
    mom = triadda.empirical_moments(snap)
    assert mom["cov"].shape == (3, 3)
    assert np.all(np.isfinite(mom["mean"]))


def test_truth_reproducibility(spec):
    params = triadda.regime_params(1)
    args = (spec, params.u0_mean, params.r0_var, 1e-3, 0.02, 300, 7, [])
    a = triadda.run_truth(*args)
    b = triadda.run_truth(*args)
    np.testing.assert_array_equal(a["mean"], b["mean"])
    np.testing.assert_array_equal(a["cov_flat"], b["cov_flat"])


def test_filter_pipeline(spec):
    params = triadda.regime_params(1)
    truth = triadda.run_truth(
        spec, params.u0_mean, params.r0_var, 1e-3, 0.1, 2000, 11, []
    )
    obs = triadda.make_observations(truth, 1e-3, 3)
    gamma_m, gamma_v = triadda.default_noise(1, 50)
    run = triadda.run_filter(
        spec,
        params.u0_mean,
        np.diag(params.r0_var),
        obs,
        n_samples=50,
        t_final=0.1,
        gamma_m=gamma_m,
        gamma_v=gamma_v,
        seed=1,
        snapshot_times=[],
    )
    assert run["method"] == "highorder"
    assert run["stats"]["mean"].shape == (101, 3)
    assert len(run["diagnostics"]) == 100
    # The assimilated mean should track the truth reasonably on this window.
    err = triadda.rmse_series(run["stats"]["mean"], truth["mean"])
    assert math.isfinite(err)


def test_enkf_runs(spec):
    params = triadda.regime_params(1)
    truth = triadda.run_truth(
        spec, params.u0_mean, params.r0_var, 1e-3, 0.05, 1000, 13, []
    )
    obs = triadda.make_observations(truth, 1e-3, 3)
    gamma_m, gamma_v = triadda.default_noise(1, 40)
    run = triadda.run_enkf(
        spec,
        params.u0_mean,
        np.diag(params.r0_var),
        obs,
        n_samples=40,
        t_final=0.05,
        gamma_m=gamma_m,
        gamma_v=gamma_v,
        seed=2,
        snapshot_times=[],
    )
    assert run["method"] == "enkf"


def test_relative_entropy_identity():
    rng = np.random.default_rng(1)
    samples = rng.normal(size=(2000, 3))
    value, regularized = triadda.relative_entropy(samples, samples)
    assert value == pytest.approx(0.0, abs=1e-9)
    assert not regularized


def test_contract_errors(spec):
    with pytest.raises(ValueError):
        triadda.bilinear_B(spec, np.ones(2), np.ones(3))
    p = triadda.regime_params(1)
    p.B = [1.0, -0.5, -0.4]
    with pytest.raises(ValueError):
        triadda.build_triad_spec(p)
