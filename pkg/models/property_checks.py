"""Numerical property suite evaluated on a configured grid (the `verify` command)"""

import logging

import numpy as np
import pandas as pd

import config
from models.darcy_solver import (
    divergence, leray_project_buoyancy, velocity_h1_seminorm, velocity_inner_product, velocity_l2_norm,
)
from models.interpolants import Interpolant, InterpolantKind, approximation_ratio, estimate_c0
from models.spectral_grid import (
    TEMPERATURE, first_eigenvalue, forward_transform, h1_seminorm, inverse_transform, l2_norm,
    quadrature, random_field,
)
from models.temperature_dynamics import advection_term

logger = logging.getLogger(__name__)


def _fields(grid, trials, seed):
    rng = np.random.default_rng(seed)
    return [random_field(grid, TEMPERATURE, rng) for _ in range(trials)]


def _check(name, value, tolerance, passed=None):
    if passed is None:
        passed = bool(value <= tolerance)
    if not passed:
        logger.warning("Property check %s failed: %.3e (tolerance %.1e)", name, value, tolerance)
    return {"check": name, "value": float(value), "tolerance": float(tolerance), "passed": passed}


def check_parseval(fields):
    worst = 0.0
    for c in fields:
        physical = inverse_transform(c)
        physical.values = physical.values ** 2
        worst = max(worst, abs(l2_norm(c) ** 2 - quadrature(physical)) / l2_norm(c) ** 2)
    return _check("parseval", worst, 1e-10)


def check_round_trip(fields):
    worst = max(l2_norm(forward_transform(inverse_transform(c), TEMPERATURE) - c) / l2_norm(c) for c in fields)
    return _check("round_trip", worst, 1e-12)


def check_poincare(fields):
    lambda1 = first_eigenvalue(fields[0].grid)
    worst = max(lambda1 * l2_norm(c) ** 2 / h1_seminorm(c) ** 2 for c in fields)
    return _check("poincare", worst, 1.0)


def check_skew_symmetry(fields, Ra):
    worst = 0.0
    for theta, source in zip(fields, fields[1:] + fields[:1]):
        u = leray_project_buoyancy(source, Ra)
        scale = velocity_l2_norm(u) * l2_norm(theta) ** 2
        if scale > 0:
            worst = max(worst, abs(np.sum(advection_term(u, theta).coeffs * theta.coeffs)) / scale)
    return _check("skew_symmetry", worst, 1e-10)


def check_divergence(fields, Ra):
    worst = max(l2_norm(divergence(leray_project_buoyancy(c, Ra))) / (Ra * l2_norm(c)) for c in fields)
    return _check("divergence", worst, 1e-12)


def check_velocity_bound(fields, Ra):
    """||u||_V <= Ra ||theta||_V"""
    worst = max(velocity_h1_seminorm(leray_project_buoyancy(c, Ra)) / (Ra * h1_seminorm(c)) for c in fields)
    return _check("velocity_bound", worst, 1.0)


def check_darcy_energy(fields, Ra):
    """(u, u) = Ra (theta, u3)"""
    worst = 0.0
    for c in fields:
        u = leray_project_buoyancy(c, Ra)
        energy = velocity_inner_product(u, u)
        if energy > 0:
            worst = max(worst, abs(energy - Ra * np.sum(c.coeffs * u.u3.coeffs)) / energy)
    return _check("darcy_energy", worst, 1e-10)


def check_interpolant_bound(interpolant, trials, seed):
    """Measured c0 must bound a fresh set of trials"""
    c0 = estimate_c0(interpolant, max(trials, 100), seed)
    fresh = _fields(interpolant.grid, 2 * max(trials, 100), seed + 1)
    worst = max(approximation_ratio(interpolant, c) for c in fresh)
    rows = [_check(f"c0_bound[{interpolant.kind.value}]", worst, c0 * (1 + 1e-9), passed=worst <= c0 * (1 + 1e-9))]
    if interpolant.kind is InterpolantKind.FOURIER_LOWPASS:
        rows.append(_check("c0_lowpass", c0, 1.0))
    return rows


def verify(cfg, trials=config.DEFAULT_C0_TRIALS, seed=None):
    """Run every property check on the grid of cfg; returns a table with one row per check"""
    grid = cfg.grid()
    seed = cfg.field_seed if seed is None else seed
    fields = _fields(grid, trials, seed)
    rows = [
        check_parseval(fields),
        check_round_trip(fields),
        check_poincare(fields),
        check_skew_symmetry(fields, cfg.Ra),
        check_divergence(fields, cfg.Ra),
        check_velocity_bound(fields, cfg.Ra),
        check_darcy_energy(fields, cfg.Ra),
    ]
    kinds = [InterpolantKind.parse(cfg.interpolant)]
    if kinds[0] is not InterpolantKind.FOURIER_LOWPASS:
        kinds.append(InterpolantKind.FOURIER_LOWPASS)
    for kind in kinds:
        rows.extend(check_interpolant_bound(Interpolant(kind, cfg.h, grid), trials, seed))
    table = pd.DataFrame(rows)
    logger.info("verify: %d of %d checks passed", int(table["passed"].sum()), len(table))
    return table
