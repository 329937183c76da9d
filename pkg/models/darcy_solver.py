"""Velocity from temperature through Darcy's law.

gamma = 0:  u + grad p = Ra theta k, div u = 0   ->  u = Ra P_sigma(theta k)
gamma > 0:  gamma du/dt + u + grad p = Ra theta k ->  exponential relaxation toward it

In the cosine/sine basis the projection is algebraic per mode. With
u3 sharing the temperature parity, the solve reads

    p_hat  = -Ra kz theta_hat / |k|^2
    u1_hat = -Ra kx kz theta_hat / |k|^2
    u2_hat = -Ra ky kz theta_hat / |k|^2
    u3_hat =  Ra (kx^2 + ky^2) theta_hat / |k|^2
"""

from dataclasses import dataclass

import numpy as np

from models.exceptions import ConfigurationError
from models.spectral_grid import (
    PRESSURE, TEMPERATURE, VELOCITY, SpectralField, differentiate, h1_seminorm,
    inverse_transform, l2_norm,
)


@dataclass(eq=False)
class VelocityField:
    """(u1, u2, u3) with the wall-normal SIN parities"""
    u1: SpectralField
    u2: SpectralField
    u3: SpectralField

    def __post_init__(self):
        for component, parity in zip(self.components, VELOCITY):
            if component.parity != parity:
                raise ConfigurationError(f"Velocity component has parity {component.parity}, expected {parity}")
            if component.grid != self.u1.grid:
                raise ConfigurationError("Velocity components live on different grids")

    @property
    def components(self):
        return (self.u1, self.u2, self.u3)

    @property
    def grid(self):
        return self.u1.grid

    @classmethod
    def zeros(cls, grid):
        return cls(*(SpectralField.zeros(grid, parity) for parity in VELOCITY))

    def copy(self):
        return VelocityField(*(c.copy() for c in self.components))

    def __add__(self, other):
        return VelocityField(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VelocityField(*(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, scalar):
        return VelocityField(*(c * scalar for c in self.components))

    __rmul__ = __mul__


def _check_temperature(theta):
    if theta.parity != TEMPERATURE:
        raise ConfigurationError(f"Expected temperature parity {TEMPERATURE}, got {theta.parity}")


def _inverse_k_squared(grid):
    k2 = grid.k_squared
    with np.errstate(divide="ignore"):
        inverse = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    return inverse


def pressure_from_buoyancy(theta, Ra):
    """Solve -|k|^2 p_hat = Ra (d theta/dz)_hat with the pressure zero mode fixed to 0"""
    _check_temperature(theta)
    source = differentiate(theta, "z") * Ra
    return SpectralField(theta.grid, PRESSURE, -source.coeffs * _inverse_k_squared(theta.grid))


def leray_project_buoyancy(theta, Ra):
    """u = Ra P_sigma(theta k)"""
    _check_temperature(theta)
    p = pressure_from_buoyancy(theta, Ra)
    grad = [differentiate(p, axis) for axis in range(3)]
    u3 = theta * Ra - grad[2]
    return VelocityField(-grad[0], -grad[1], u3)


def step_velocity_gamma(u, theta, Ra, gamma, dt):
    """Exact exponential update of gamma du/dt + u = Ra P_sigma(theta k) with theta frozen"""
    if gamma <= 0:
        raise ConfigurationError("step_velocity_gamma needs gamma > 0; use leray_project_buoyancy for gamma = 0")
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    decay = np.exp(-dt / gamma)
    target = leray_project_buoyancy(theta, Ra)
    # -expm1 keeps 1 - e^{-dt/gamma} accurate for dt << gamma
    return u * decay + target * (-np.expm1(-dt / gamma))


def divergence(u):
    """div u in the pressure parity"""
    parts = [differentiate(component, axis) for axis, component in enumerate(u.components)]
    return parts[0] + parts[1] + parts[2]


def velocity_l2_norm(u):
    return float(np.sqrt(sum(l2_norm(c) ** 2 for c in u.components)))


def velocity_h1_seminorm(u):
    """||u||_V"""
    return float(np.sqrt(sum(h1_seminorm(c) ** 2 for c in u.components)))


def velocity_max_abs(u):
    """Node maximum of |u|"""
    values = [inverse_transform(c).values for c in u.components]
    return float(np.max(np.sqrt(sum(v ** 2 for v in values))))


def velocity_inner_product(u, w):
    return float(sum(np.sum(a.coeffs * b.coeffs) for a, b in zip(u.components, w.components)))
