import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.assimilation import (
    AssimilationSetup, Observation, alpha_lower, check_h_condition, check_mu_condition,
    condition_report, make_observation, make_stage_observations, minimal_mu, nudging_term, step_assimilated,
)
from models.exceptions import ConfigurationError
from models.interpolants import Interpolant, apply
from models.spectral_grid import Grid, SpectralField, first_eigenvalue, l2_norm
from models.temperature_dynamics import StepParams, SystemState, step_with_stages


@pytest.fixture
def grid():
    return Grid(2.0, 1.0, 16, 1, 16)


@pytest.fixture
def lowpass(grid):
    return Interpolant("FOURIER_LOWPASS", 0.1, grid)


def make_setup(interpolant, **kwargs):
    values = dict(mu=100.0, Ra=10.0)
    values.update(kwargs)
    return AssimilationSetup(interpolant=interpolant, **values)


class TestSetup:

    @pytest.mark.parametrize("field, value", [
        ("mu", -1.0), ("Ra", -1.0), ("gamma", -0.1), ("noise_level", -1e-3), ("c_universal", 0.0),
    ])
    def test_invalid(self, lowpass, field, value):
        with pytest.raises(ConfigurationError):
            make_setup(lowpass, **{field: value})

    def test_given_c0_is_not_re_estimated(self, lowpass):
        assert make_setup(lowpass, c0=0.42).measured_c0() == 0.42


class TestObservation:

    def test_noise_free_observation_is_the_interpolant(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        obs = make_observation(theta, make_setup(lowpass), t=0.25)
        assert isinstance(obs, Observation)
        assert np.array_equal(obs.coeffs, apply(lowpass, theta).coeffs)
        assert obs.interpolant == lowpass
        assert obs.t == 0.25

    def test_noise_level_and_subspace(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        setup = make_setup(lowpass, noise_level=0.01)
        clean = apply(lowpass, theta)
        obs = make_observation(theta, setup)
        assert_allclose(l2_norm(obs - clean), 0.01 * l2_norm(clean), rtol=1e-10)
        # the noise never leaves the observed modes
        assert np.all(obs.coeffs[~lowpass.lowpass_mask] == 0.0)

    def test_noise_stream_restarts_from_the_seed(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        setup = make_setup(lowpass, noise_level=0.05, noise_seed=3)
        first = make_observation(theta, setup)
        second = make_observation(theta, setup)
        assert not np.array_equal(first.coeffs, second.coeffs)
        setup.reset_noise()
        assert np.array_equal(make_observation(theta, setup).coeffs, first.coeffs)

    def test_zero_signal_stays_zero(self, lowpass, grid):
        obs = make_observation(SpectralField.zeros(grid), make_setup(lowpass, noise_level=0.1))
        assert l2_norm(obs) == 0.0


class TestNudgingTerm:

    def test_value(self, lowpass, random_theta, grid):
        eta, theta = random_theta(grid), random_theta(grid)
        setup = make_setup(lowpass, mu=7.0)
        term = nudging_term(eta, make_observation(theta, setup), setup)
        expected = (apply(lowpass, eta) - apply(lowpass, theta)) * -7.0
        assert_allclose(term.coeffs, expected.coeffs, atol=1e-14)

    def test_vanishes_on_synchronized_fields(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        setup = make_setup(lowpass)
        assert l2_norm(nudging_term(theta, make_observation(theta, setup), setup)) == 0.0

    def test_producer_mismatch(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        other = Interpolant("FOURIER_LOWPASS", 0.2, grid)
        obs = make_observation(theta, make_setup(other))
        with pytest.raises(ConfigurationError):
            nudging_term(theta, obs, make_setup(lowpass))

    def test_plain_field_accepted(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        plain = apply(lowpass, theta)
        assert l2_norm(nudging_term(theta, plain, make_setup(lowpass))) == 0.0


class TestConditions:

    def test_mu_condition_without_inertia(self, lowpass):
        # 6 + pi^2/2 >= 2*1*1 + 4*1, slack pi^2/2
        ok, margin = check_mu_condition(make_setup(lowpass, mu=6.0, Ra=1.0, c_universal=1.0), np.pi ** 2)
        assert ok
        assert_allclose(margin, np.pi ** 2 / 2)

    def test_mu_condition_with_inertia(self, lowpass):
        setup = make_setup(lowpass, mu=10.0, Ra=2.0, gamma=0.5, c_universal=0.1)
        lam = np.pi ** 2
        expected = 20.0 + lam - (2 * 0.1 * 16 / 0.5 + 2 * 0.1 * 0.5 * (1 + 1 / lam) ** 2)
        ok, margin = check_mu_condition(setup, lam)
        assert_allclose(margin, expected)
        assert ok == (expected >= 0)

    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_minimal_mu_is_the_threshold(self, lowpass, gamma):
        lam = np.pi ** 2
        base = make_setup(lowpass, Ra=50.0, gamma=gamma, c_universal=0.01)
        mu_star = minimal_mu(base, lam)
        assert mu_star > 0
        at, margin = check_mu_condition(make_setup(lowpass, mu=mu_star, Ra=50.0, gamma=gamma, c_universal=0.01), lam)
        assert abs(margin) <= 1e-9 * mu_star
        below, _ = check_mu_condition(make_setup(lowpass, mu=0.99 * mu_star, Ra=50.0, gamma=gamma,
                                                 c_universal=0.01), lam)
        assert not below

    def test_minimal_mu_floor(self, lowpass):
        assert minimal_mu(make_setup(lowpass, Ra=0.1, c_universal=0.01), np.pi ** 2) == 0.0

    def test_acceptance_configuration_passes(self, grid):
        setup = make_setup(Interpolant("FOURIER_LOWPASS", 0.05, grid), mu=250.0, Ra=50.0, c_universal=0.01)
        ok, _ = check_mu_condition(setup, first_eigenvalue(grid))
        assert ok

    def test_h_condition(self, grid):
        assert check_h_condition(make_setup(Interpolant("FOURIER_LOWPASS", 0.1, grid), mu=100.0), c0=1.0)
        assert not check_h_condition(make_setup(Interpolant("FOURIER_LOWPASS", 0.2, grid), mu=100.0), c0=1.0)

    def test_alpha_lower(self, lowpass):
        lam = np.pi ** 2
        setup = make_setup(lowpass, mu=300.0, Ra=50.0, c_universal=0.01)
        assert_allclose(alpha_lower(setup, lam, 0.5), 300.0 + lam / 2 - 100.0 - 0.01 * 2500 * 0.25)
        inertial = make_setup(lowpass, mu=300.0, Ra=5.0, gamma=2.0, c_universal=0.01)
        # the relaxation time caps the rate
        assert alpha_lower(inertial, lam, 0.5) == 0.5

    def test_report_logs_failures(self, grid, caplog):
        setup = make_setup(Interpolant("FOURIER_LOWPASS", 0.2, grid), mu=1.0, Ra=50.0, c0=10.0)
        with caplog.at_level(logging.WARNING, logger="models.assimilation"):
            report = condition_report(setup, first_eigenvalue(grid))
        assert not report["mu_condition"]
        assert not report["h_condition"]
        assert report["c0"] == 10.0
        assert "nudging-strength" in caplog.text

    def test_report_names_a_non_default_constant(self, lowpass, caplog):
        setup = make_setup(lowpass, mu=250.0, Ra=50.0, c_universal=0.01, c0=1.0)
        with caplog.at_level(logging.WARNING, logger="models.assimilation"):
            report = condition_report(setup, np.pi ** 2)
        assert report["c_universal"] == 0.01
        assert "c=0.01" in caplog.text

    def test_strict_report_raises(self, grid):
        setup = make_setup(Interpolant("FOURIER_LOWPASS", 0.2, grid), mu=100.0, c0=1.0, strict=True)
        with pytest.raises(ConfigurationError):
            condition_report(setup, first_eigenvalue(grid))


class TestStepAssimilated:

    def test_time_mismatch(self, lowpass, random_theta, grid):
        setup = make_setup(lowpass)
        obs = make_observation(random_theta(grid), setup, t=0.5)
        with pytest.raises(ConfigurationError):
            step_assimilated(SystemState.zeros(grid), obs, setup, 1e-3)

    def test_zero_data_keep_a_zero_state(self, lowpass, grid):
        setup = make_setup(lowpass)
        state = SystemState.zeros(grid)
        for step in range(5):
            obs = make_observation(SpectralField.zeros(grid), setup, t=state.t)
            state = step_assimilated(state, obs, setup, 1e-3)
        assert l2_norm(state.theta) == 0.0
        assert state.t == pytest.approx(5e-3)

    def test_one_step_moves_toward_the_data(self, lowpass, random_theta, grid):
        theta = random_theta(grid, 0.5)
        setup = make_setup(lowpass, mu=500.0)
        state = SystemState.zeros(grid)
        after = step_assimilated(state, make_observation(theta, setup, t=0.0), setup, 1e-3)
        assert l2_norm(after.theta - theta) < l2_norm(theta)

    @pytest.mark.parametrize("gamma", [0.0, 0.5])
    def test_synchronized_start_stays_synchronized(self, lowpass, random_theta, grid, gamma):
        setup = make_setup(lowpass, gamma=gamma)
        dt = 1e-3
        params = StepParams(setup.Ra, gamma, dt)
        reference = SystemState.from_temperature(random_theta(grid, 0.5), setup.Ra, gamma)
        assimilated = reference.copy()
        for _ in range(20):
            next_reference, stages = step_with_stages(reference, params)
            observations = make_stage_observations(stages, setup, assimilated.t, dt)
            assimilated = step_assimilated(assimilated, observations, setup, dt)
            reference = next_reference
        assert l2_norm(assimilated.theta - reference.theta) <= 1e-12 * l2_norm(reference.theta)
        for v, u in zip(assimilated.u.components, reference.u.components):
            assert l2_norm(v - u) <= 1e-12 * l2_norm(reference.theta) * setup.Ra

    def test_stage_observations_share_one_noise_draw(self, lowpass, random_theta, grid):
        theta = random_theta(grid)
        setup = make_setup(lowpass, noise_level=0.05)
        observations = make_stage_observations([theta, theta, theta], setup, 0.0, 3e-3)
        assert [obs.t for obs in observations] == pytest.approx([0.0, 1e-3, 2e-3])
        assert all(np.array_equal(obs.coeffs, observations[0].coeffs) for obs in observations)
        setup.reset_noise()
        assert np.array_equal(make_observation(theta, setup).coeffs, observations[0].coeffs)

    def test_stage_count_is_checked(self, lowpass, random_theta, grid):
        setup = make_setup(lowpass)
        theta = random_theta(grid)
        with pytest.raises(ConfigurationError):
            make_stage_observations([theta, theta], setup, 0.0, 1e-3)
        pair = (make_observation(theta, setup, t=0.0),) * 2
        with pytest.raises(ConfigurationError):
            step_assimilated(SystemState.zeros(grid), pair, setup, 1e-3)

    def test_stage_time_mismatch(self, lowpass, random_theta, grid):
        setup = make_setup(lowpass)
        theta = random_theta(grid)
        observations = make_stage_observations([theta, theta, theta], setup, 0.0, 2e-3)
        with pytest.raises(ConfigurationError):
            step_assimilated(SystemState.zeros(grid), observations, setup, 1e-3)
