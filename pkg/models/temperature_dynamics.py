"""Advection-diffusion of the temperature fluctuation and the full reference stepper.

    d theta/dt - Laplacian theta + (u . grad) theta - u . k = 0

Diffusion is diagonal in the basis and is integrated exactly with the factor
E(tau) = exp(-|k|^2 tau). Everything else (advection, the u3 source and, when
present, the nudging feedback) goes through a three-stage third-order
Runge-Kutta scheme (Heun) written in integrating-factor form. Its stage times
0, dt/3, 2dt/3 are nondecreasing, so every factor that appears is a decaying
exponential. Heun's scheme stands in for SSP-RK3 on purpose: the SSP stage
times 0, dt, dt/2 would need the growing factor exp(+|k|^2 dt/2).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

import config
from models.darcy_solver import (
    VelocityField, leray_project_buoyancy, step_velocity_gamma,
)
from models.exceptions import ConfigurationError, StepRejectedError
from models.spectral_grid import (
    TEMPERATURE, SpectralField, PhysicalField, dealias, differentiate, forward_transform,
    from_function, h1_seminorm, inverse_transform, l2_norm, max_abs, random_field,
)

logger = logging.getLogger(__name__)

# stage times of the Runge-Kutta scheme as fractions of dt
STAGE_FRACTIONS = (0.0, 1.0 / 3.0, 2.0 / 3.0)


@dataclass
class SystemState:
    """(u, theta) at time t, for the reference (u, theta) or the assimilated (v, eta) system"""
    t: float
    u: VelocityField
    theta: SpectralField

    def __post_init__(self):
        if self.theta.parity != TEMPERATURE:
            raise ConfigurationError(f"Temperature must have parity {TEMPERATURE}, got {self.theta.parity}")
        if self.u.grid != self.theta.grid:
            raise ConfigurationError("Velocity and temperature live on different grids")

    @property
    def grid(self):
        return self.theta.grid

    @classmethod
    def from_temperature(cls, theta, Ra, gamma=0.0, t=0.0, u=None):
        """Start from theta; the velocity is slaved for gamma = 0 and defaults to the Darcy equilibrium otherwise"""
        if gamma == 0 or u is None:
            u = leray_project_buoyancy(theta, Ra)
        return cls(t, u, theta)

    @classmethod
    def zeros(cls, grid, t=0.0):
        return cls(t, VelocityField.zeros(grid), SpectralField.zeros(grid, TEMPERATURE))

    def copy(self):
        return SystemState(self.t, self.u.copy(), self.theta.copy())


@dataclass
class Nudge:
    """Feedback -mu (I_h(theta) - observed).

    observed is either one field, held fixed over the step, or one field per
    Runge-Kutta stage (at t, t + dt/3, t + 2dt/3). Stage observations taken
    from a reference advanced with the same stepper make theta = reference an
    exact fixed point of the nudged step.
    """
    mu: float
    interpolant: object
    observed: Union[SpectralField, Sequence[SpectralField]]

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigurationError(f"mu must be non-negative, got {self.mu}")
        if isinstance(self.observed, SpectralField):
            fields = (self.observed,)
        else:
            fields = tuple(self.observed)
            if len(fields) != len(STAGE_FRACTIONS):
                raise ConfigurationError(
                    f"Stage observations need {len(STAGE_FRACTIONS)} fields, got {len(fields)}")
            self.observed = fields
        if any(f.grid != self.interpolant.grid for f in fields):
            raise ConfigurationError("Observation and interpolant live on different grids")

    def observed_at(self, stage):
        if isinstance(self.observed, SpectralField):
            return self.observed
        return self.observed[stage]

    def term(self, theta, stage=0):
        if theta.grid != self.interpolant.grid:
            raise ConfigurationError("Nudged field and interpolant live on different grids")
        if self.mu == 0:
            return SpectralField.zeros(theta.grid, theta.parity)
        return (self.interpolant.apply(theta) - self.observed_at(stage)) * (-self.mu)


@dataclass
class StepParams:
    Ra: float
    gamma: float
    dt: float
    nudge: Optional[Nudge] = None
    cfl_limit: float = config.CFL_LIMIT

    def __post_init__(self):
        if not self.Ra > 0:
            raise ConfigurationError(f"Ra must be positive, got {self.Ra}")
        if not self.gamma >= 0:
            raise ConfigurationError(f"gamma must be non-negative, got {self.gamma}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")

    def with_nudge(self, nudge):
        return StepParams(self.Ra, self.gamma, self.dt, nudge, self.cfl_limit)


def _physical(c):
    return inverse_transform(c).values


def advection_term(u, theta):
    """B(u, theta) = (u . grad) theta, pseudo-spectral product dealiased by the 2/3 rule"""
    if u.grid != theta.grid:
        raise ConfigurationError("Velocity and temperature live on different grids")
    grid = theta.grid
    product = np.zeros(grid.shape)
    for axis in grid.active_axes:
        component = u.components[axis]
        if not np.any(component.coeffs):
            continue
        product += _physical(dealias(component)) * _physical(differentiate(dealias(theta), axis))
    return dealias(forward_transform(PhysicalField(grid, product), theta.parity))


def _velocity_for(theta, u, params):
    # gamma = 0: slaved to the stage temperature; gamma > 0: frozen over the step
    if params.gamma == 0:
        return leray_project_buoyancy(theta, params.Ra)
    return u


def _rhs(theta, u, nudge, stage=0):
    # u3 already carries the temperature parity
    rhs = u.u3 - advection_term(u, theta)
    if nudge is not None:
        rhs = rhs + dealias(nudge.term(theta, stage))
    return dealias(rhs)


def temperature_rhs(state, params):
    """-B(u, theta) + u3 - mu (I_h(theta) - observed); diffusion is left to the integrating factor"""
    return _rhs(state.theta, state.u, params.nudge)


def cfl_number(u, dt):
    """dt * max_i max|u_i| / dx_i over the active axes"""
    grid = u.grid
    speeds = [np.max(np.abs(_physical(u.components[axis]))) / grid.spacing(axis) for axis in grid.active_axes]
    return float(dt * max(speeds))


def _check_step(state, params):
    if params.nudge is not None and params.nudge.mu * params.dt > 1:
        raise StepRejectedError(
            f"mu*dt = {params.nudge.mu * params.dt:.6g} exceeds 1; explicit nudging would be unstable")
    courant = cfl_number(state.u, params.dt)
    if courant > params.cfl_limit:
        raise StepRejectedError(f"CFL number {courant:.6g} exceeds {params.cfl_limit} at t={state.t:.6g}")
    return courant


def _decay(grid, tau):
    return np.exp(-grid.k_squared * tau)


def step_temperature(state, params):
    """Advance (u, theta) by one step of dt"""
    return step_with_stages(state, params)[0]


def step_with_stages(state, params):
    """Advance by one step; also return the stage temperatures at STAGE_FRACTIONS of dt"""
    _check_step(state, params)
    grid = state.grid
    dt = params.dt
    parity = state.theta.parity
    nudge = params.nudge
    e_third, e_two_thirds, e_full = _decay(grid, dt / 3), _decay(grid, 2 * dt / 3), _decay(grid, dt)
    theta0 = state.theta.coeffs

    k1 = _rhs(state.theta, _velocity_for(state.theta, state.u, params), nudge, 0).coeffs
    stage2 = SpectralField(grid, parity, e_third * (theta0 + dt / 3 * k1))

    k2 = _rhs(stage2, _velocity_for(stage2, state.u, params), nudge, 1).coeffs
    stage3 = SpectralField(grid, parity, e_two_thirds * theta0 + (2 * dt / 3) * e_third * k2)

    k3 = _rhs(stage3, _velocity_for(stage3, state.u, params), nudge, 2).coeffs
    theta_new = SpectralField(grid, parity, e_full * theta0 + dt / 4 * (e_full * k1 + 3 * e_third * k3))

    if params.gamma == 0:
        u_new = leray_project_buoyancy(theta_new, params.Ra)
    else:
        u_new = step_velocity_gamma(state.u, theta_new, params.Ra, params.gamma, dt)
    return SystemState(state.t + dt, u_new, theta_new), (state.theta, stage2, stage3)


def is_finite(state):
    return bool(np.all(np.isfinite(state.theta.coeffs))
                and all(np.all(np.isfinite(c.coeffs)) for c in state.u.components))


def integrate(state, params, t_final, record_every=config.DEFAULT_RECORD_EVERY, callback=None):
    """Step from state.t to t_final, recording (t, ||theta||, max|theta|) every record_every steps.

    Returns the final state and a DataFrame of the recorded rows. The callback,
    if given, is called with every recorded state.
    """
    if record_every < 1:
        raise ConfigurationError(f"record_every must be >= 1, got {record_every}")
    n_steps = int(round((t_final - state.t) / params.dt))
    if n_steps < 0:
        raise ConfigurationError(f"t_final={t_final} lies before the state time {state.t}")
    start = state.t
    rows = [_record(state)]
    for step in range(1, n_steps + 1):
        state = step_temperature(state, params)
        # re-anchor the clock so round-off does not accumulate over long runs
        state.t = start + step * params.dt
        if not is_finite(state):
            logger.error("Non-finite temperature at t=%.6g", state.t)
            break
        if step % record_every == 0 or step == n_steps:
            rows.append(_record(state))
            if callback is not None:
                callback(state)
    return state, pd.DataFrame(rows, columns=["t", "theta_l2", "theta_max"])


def _record(state):
    return (state.t, l2_norm(state.theta), max_abs(state.theta))


def energy_budget(state):
    """(1/2 ||theta||^2, ||A^{1/2} theta||^2, (u . k, theta)) of the energy law

    d/dt (1/2 ||theta||^2) = -||A^{1/2} theta||^2 + (u . k, theta)
    """
    theta = state.theta
    buoyancy_work = float(np.sum(state.u.u3.coeffs * theta.coeffs))
    return 0.5 * l2_norm(theta) ** 2, h1_seminorm(theta) ** 2, buoyancy_work


def initial_temperature(grid, profile="default", amplitude=config.DEFAULT_THETA0_AMPLITUDE, seed=None):
    """Named reference initial data satisfying the boundary conditions"""
    Lx = grid.Lx
    if profile == "default":
        # amplitude * sin(pi z) (cos(2 pi x / L) + 0.3 cos(4 pi x / L))
        def func(X, Y, Z):
            return amplitude * np.sin(np.pi * Z) * (np.cos(2 * np.pi * X / Lx) + 0.3 * np.cos(4 * np.pi * X / Lx))
    elif profile == "single_mode":
        def func(X, Y, Z):
            return amplitude * np.cos(np.pi * X / Lx) * np.sin(np.pi * Z)
    elif profile == "random":
        rng = np.random.default_rng(config.DEFAULT_FIELD_SEED if seed is None else seed)
        theta = random_field(grid, TEMPERATURE, rng)
        return theta * (amplitude / max_abs(theta))
    else:
        raise ConfigurationError(
            f"Unknown initial profile {profile!r}; expected one of {config.INITIAL_PROFILES} or snapshot:<path>")
    return from_function(grid, TEMPERATURE, func)


def check_max_principle(state, bound=1.0, tolerance=1e-3):
    """max|theta| <= bound + tolerance"""
    value = max_abs(state.theta)
    return value <= bound + tolerance, value