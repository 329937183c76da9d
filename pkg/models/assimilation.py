"""Temperature-only nudging of the convection model.

The assimilated pair (v, eta) obeys the same equations as the reference with an
extra feedback term in the temperature equation,

    d eta/dt - Laplacian eta + (v . grad) eta - v . k = -mu (I_h(eta) - I_h(theta)),

so the only data it ever sees are coarse temperature observations I_h(theta).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import config
from models.exceptions import ConfigurationError
from models.interpolants import Interpolant, apply, estimate_c0
from models.spectral_grid import TEMPERATURE, SpectralField, l2_norm
from models.temperature_dynamics import STAGE_FRACTIONS, Nudge, StepParams, step_temperature

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Observation(SpectralField):
    """I_h(theta) at time t, tagged with the interpolant that produced it"""
    interpolant: Optional[Interpolant] = None
    t: Optional[float] = None


@dataclass(eq=False)
class AssimilationSetup:
    mu: float
    interpolant: Interpolant
    Ra: float
    gamma: float = config.DEFAULT_GAMMA
    noise_level: float = config.DEFAULT_NOISE_LEVEL
    noise_seed: int = config.DEFAULT_NOISE_SEED
    c_universal: float = config.DEFAULT_C_UNIVERSAL
    strict: bool = False
    c0: Optional[float] = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not self.mu >= 0:
            raise ConfigurationError(f"mu must be non-negative, got {self.mu}")
        if not self.Ra >= 0:
            raise ConfigurationError(f"Ra must be non-negative, got {self.Ra}")
        if not self.gamma >= 0:
            raise ConfigurationError(f"gamma must be non-negative, got {self.gamma}")
        if not self.noise_level >= 0:
            raise ConfigurationError(f"noise_level must be non-negative, got {self.noise_level}")
        if not self.c_universal > 0:
            raise ConfigurationError(f"c_universal must be positive, got {self.c_universal}")
        self.reset_noise()

    @property
    def h(self):
        return self.interpolant.h

    def reset_noise(self):
        """Restart the observation-noise stream from noise_seed"""
        self.rng = np.random.default_rng(self.noise_seed)

    def measured_c0(self, trials=config.DEFAULT_C0_TRIALS):
        if self.c0 is None:
            self.c0 = estimate_c0(self.interpolant, trials)
        return self.c0


@dataclass
class ConvergenceDiagnostics:
    alpha_lower: float
    fitted_rate: float
    t0_estimate: Optional[float]
    monotone: bool = True


def _check_observation(observed, setup):
    if observed.grid != setup.interpolant.grid:
        raise ConfigurationError("Observation and interpolant live on different grids")
    if observed.parity != TEMPERATURE:
        raise ConfigurationError(f"Observations carry temperature parity, got {observed.parity}")
    producer = getattr(observed, "interpolant", None)
    if producer is not None and producer != setup.interpolant:
        raise ConfigurationError(
            f"Observation was produced by {producer.kind.value} at h={producer.h}, "
            f"but the model nudges with {setup.interpolant.kind.value} at h={setup.interpolant.h}")


def nudging_term(eta, observed, setup):
    """-mu (I_h(eta) - observed)"""
    _check_observation(observed, setup)
    return Nudge(setup.mu, setup.interpolant, observed).term(eta)


def _observation_noise(grid, rng):
    white = rng.standard_normal(grid.shape)
    return SpectralField(grid, TEMPERATURE, np.where(grid.admissible_mask(TEMPERATURE), white, 0.0))


def _draw_noise(setup, grid):
    # drawn even when the signal vanishes so the stream stays aligned with the step count
    if setup.noise_level > 0:
        return apply(setup.interpolant, _observation_noise(grid, setup.rng))
    return None


def _observe(theta_ref, setup, noise, t):
    i = setup.interpolant
    observed = apply(i, theta_ref)
    if noise is not None:
        noise_norm = l2_norm(noise)
        target = setup.noise_level * l2_norm(observed)
        if noise_norm > 0 and target > 0:
            observed = observed + noise * (target / noise_norm)
    return Observation(observed.grid, observed.parity, observed.coeffs, i, None if t is None else float(t))


def make_observation(theta_ref, setup, t=None):
    """I_h(theta) plus, for noise_level > 0, Gaussian noise inside the observed subspace"""
    return _observe(theta_ref, setup, _draw_noise(setup, theta_ref.grid), t)


def make_stage_observations(stages, setup, t, dt):
    """Observations of the reference at each Runge-Kutta stage of one step.

    One noise draw per step, scaled to noise_level at every stage.
    """
    stages = tuple(stages)
    if len(stages) != len(STAGE_FRACTIONS):
        raise ConfigurationError(f"Expected {len(STAGE_FRACTIONS)} stage temperatures, got {len(stages)}")
    noise = _draw_noise(setup, stages[0].grid)
    return tuple(_observe(theta, setup, noise, t + fraction * dt)
                 for theta, fraction in zip(stages, STAGE_FRACTIONS))


def check_mu_condition(setup, lambda1):
    """Nudging-strength condition for synchronization; returns (satisfied, slack)

    gamma = 0:  mu + lambda1/2 >= 2 c Ra^2 + 4 Ra
    gamma > 0:  2 mu + lambda1 >= 2 c Ra^4 / gamma + 2 c gamma (1 + 1/lambda1)^2
    """
    c, Ra, gamma = setup.c_universal, setup.Ra, setup.gamma
    if gamma == 0:
        margin = setup.mu + lambda1 / 2 - (2 * c * Ra ** 2 + 4 * Ra)
    else:
        margin = 2 * setup.mu + lambda1 - (2 * c * Ra ** 4 / gamma + 2 * c * gamma * (1 + 1 / lambda1) ** 2)
    return bool(margin >= 0), float(margin)


def minimal_mu(setup, lambda1):
    """Smallest mu that passes check_mu_condition (0 if every mu does)"""
    c, Ra, gamma = setup.c_universal, setup.Ra, setup.gamma
    if gamma == 0:
        threshold = 2 * c * Ra ** 2 + 4 * Ra - lambda1 / 2
    else:
        threshold = (2 * c * Ra ** 4 / gamma + 2 * c * gamma * (1 + 1 / lambda1) ** 2 - lambda1) / 2
    return max(0.0, float(threshold))


def check_h_condition(setup, c0=None):
    """mu c0^2 h^2 <= 1 with the measured c0"""
    c0 = setup.measured_c0() if c0 is None else c0
    # relative slack absorbs the round-off in mu*h^2 at the boundary
    return bool(setup.mu * c0 ** 2 * setup.h ** 2 <= 1 + 1e-12)


def alpha_lower(setup, lambda1, theta_sup):
    """Decay coefficient of the error inequality given M = running max of ||theta||_inf

    gamma = 0:  mu + lambda1/2 - 2 Ra - c Ra^2 M^2                      (for ||xi||^2)
    gamma > 0:  min{1/gamma, 2 mu + lambda1 - c Ra^4/gamma - c gamma (1/lambda1 + M^2)^2}
                                                                        (for ||w||^4 + ||xi||^4)
    """
    c, Ra, gamma = setup.c_universal, setup.Ra, setup.gamma
    if gamma == 0:
        return float(setup.mu + lambda1 / 2 - 2 * Ra - c * Ra ** 2 * theta_sup ** 2)
    return float(min(1 / gamma,
                     2 * setup.mu + lambda1 - c * Ra ** 4 / gamma - c * gamma * (1 / lambda1 + theta_sup ** 2) ** 2))


def condition_report(setup, lambda1):
    """Evaluate both hypotheses; in strict mode a failed h-condition is fatal"""
    mu_ok, mu_margin = check_mu_condition(setup, lambda1)
    c0 = setup.measured_c0()
    if setup.c_universal != config.DEFAULT_C_UNIVERSAL:
        logger.warning("Nudging-strength condition evaluated with c=%g, not c=%g",
                       setup.c_universal, config.DEFAULT_C_UNIVERSAL)
    h_ok = check_h_condition(setup, c0)
    if not mu_ok:
        logger.warning("mu=%g misses the nudging-strength condition by %.6g (c=%g)",
                       setup.mu, -mu_margin, setup.c_universal)
    if not h_ok:
        message = f"mu c0^2 h^2 = {setup.mu * c0 ** 2 * setup.h ** 2:.6g} > 1 (c0={c0:.4g}, h={setup.h})"
        if setup.strict:
            raise ConfigurationError(message)
        logger.warning(message)
    return {"mu_condition": mu_ok, "mu_margin": mu_margin, "h_condition": h_ok, "c0": c0,
            "c_universal": setup.c_universal}


def step_assimilated(state, observation, setup, dt):
    """One nudged step of (v, eta); velocity from Darcy (gamma = 0) or its relaxation (gamma > 0)

    observation is I_h(theta) at the step start, held over the step, or the
    output of make_stage_observations for stage-consistent nudging.
    """
    observations = (observation,) if isinstance(observation, SpectralField) else tuple(observation)
    for obs, fraction in zip(observations, STAGE_FRACTIONS):
        _check_observation(obs, setup)
        obs_time = getattr(obs, "t", None)
        expected = state.t + fraction * dt
        if obs_time is not None and abs(obs_time - expected) > 1e-9 * max(1.0, dt):
            raise ConfigurationError(f"Observation at t={obs_time:.6g} does not match the stage time {expected:.6g}")
    params = StepParams(setup.Ra, setup.gamma, dt, Nudge(setup.mu, setup.interpolant, observation))
    return step_temperature(state, params)
