"""Coarse observation operators I_h and their approximation constants.

Type (3) kinds satisfy  ||phi - I_h phi|| <= c0 h ||A^{1/2} phi||:
    FOURIER_LOWPASS  orthogonal projection onto the modes with |k| <= 1/h
    VOLUME_AVERAGE   per-box means over boxes of side <= h

Type (4) kind satisfies ||phi - I_h phi|| <= c1 h ||A^{1/2} phi|| + c2 h^2 ||A phi||:
    NODAL            point values on a lattice of spacing h, extended piecewise constant

Piecewise-constant outputs are re-expanded in the temperature basis from their
collocation samples, so every I_h returns a temperature-parity SpectralField.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

import config
from models.exceptions import ConfigurationError
from models.spectral_grid import (
    TEMPERATURE, Grid, PhysicalField, SpectralField, evaluate, forward_transform,
    h1_seminorm, h2_seminorm, inverse_transform, l2_norm, random_field,
)

logger = logging.getLogger(__name__)


class InterpolantKind(str, Enum):
    FOURIER_LOWPASS = "FOURIER_LOWPASS"
    VOLUME_AVERAGE = "VOLUME_AVERAGE"
    NODAL = "NODAL"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigurationError(f"Unknown interpolant {value!r}; expected one of {config.INTERPOLANT_KINDS}")


# kinds whose coefficient-space operator is symmetric, so power iteration applies
SELF_ADJOINT_KINDS = (InterpolantKind.FOURIER_LOWPASS, InterpolantKind.VOLUME_AVERAGE)


@dataclass(frozen=True, eq=False)
class Interpolant:
    kind: InterpolantKind
    h: float
    grid: Grid

    def __post_init__(self):
        object.__setattr__(self, "kind", InterpolantKind.parse(self.kind))
        if not self.h > 0:
            raise ConfigurationError(f"h must be positive, got {self.h}")
        if self.kind is InterpolantKind.FOURIER_LOWPASS:
            k_max = float(np.sqrt(self.grid.k_squared.max()))
            if 1.0 / self.h > k_max:
                raise ConfigurationError(
                    f"h={self.h} asks for wavenumbers up to {1.0 / self.h:.4g}, beyond the grid's {k_max:.4g}")
        elif self.h < self.grid.max_spacing():
            raise ConfigurationError(
                f"h={self.h} is finer than the collocation spacing {self.grid.max_spacing():.4g}")

    def __eq__(self, other):
        return (isinstance(other, Interpolant) and self.kind is other.kind
                and self.h == other.h and self.grid == other.grid)

    def __hash__(self):
        return hash((self.kind, self.h, self.grid))

    @cached_property
    def lowpass_mask(self):
        return self.grid.k_squared <= 1.0 / self.h ** 2

    @cached_property
    def box_partition(self):
        """Per-axis box index of every collocation node and the box centres.

        Boxes start at 0 with side h; the last box on an axis is shorter when h
        does not divide the length. Collapsed axes (N=1) form a single box.
        """
        labels, centres = [], []
        for axis, (nodes, length) in enumerate(zip(self.grid.nodes(), self.grid.lengths)):
            if self.grid.shape[axis] == 1:
                labels.append(np.zeros(1, dtype=int))
                centres.append(np.array([length / 2]))
                continue
            n_boxes = int(np.ceil(length / self.h - 1e-12))
            edges = np.minimum(np.arange(n_boxes + 1) * self.h, length)
            labels.append(np.minimum((nodes / self.h).astype(int), n_boxes - 1))
            centres.append(0.5 * (edges[:-1] + edges[1:]))
        return labels, centres

    @cached_property
    def _flat_labels(self):
        labels, centres = self.box_partition
        L = np.meshgrid(*labels, indexing="ij")
        return np.ravel_multi_index(L, tuple(len(c) for c in centres)).ravel()

    def apply(self, theta):
        return apply(self, theta)


def _check_input(i, theta):
    if theta.parity != TEMPERATURE:
        raise ConfigurationError(f"Interpolants act on temperature-parity fields, got {theta.parity}")
    if theta.grid != i.grid:
        raise ConfigurationError("Field and interpolant live on different grids")


def _volume_average(i, theta):
    values = inverse_transform(theta).values.ravel()
    labels = i._flat_labels
    counts = np.bincount(labels)
    sums = np.bincount(labels, weights=values)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return means[labels].reshape(i.grid.shape)


def _nodal(i, theta):
    _, centres = i.box_partition
    shape = tuple(len(c) for c in centres)
    occupied = np.unique(i._flat_labels)
    index = np.unravel_index(occupied, shape)
    points = [centres[axis][index[axis]] for axis in range(3)]
    samples = np.zeros(int(np.prod(shape)))
    samples[occupied] = evaluate(theta, *points)
    return samples[i._flat_labels].reshape(i.grid.shape)


def apply(i, theta):
    """I_h(theta) as a temperature-parity field"""
    _check_input(i, theta)
    if i.kind is InterpolantKind.FOURIER_LOWPASS:
        return SpectralField(theta.grid, TEMPERATURE, np.where(i.lowpass_mask, theta.coeffs, 0.0))
    if i.kind is InterpolantKind.VOLUME_AVERAGE:
        values = _volume_average(i, theta)
    else:
        values = _nodal(i, theta)
    return forward_transform(PhysicalField(theta.grid, values), TEMPERATURE)


def approximation_ratio(i, phi):
    """||phi - I_h phi|| / (h ||A^{1/2} phi||), 0 for the zero field"""
    denominator = i.h * h1_seminorm(phi)
    if denominator == 0:
        return 0.0
    return l2_norm(phi - apply(i, phi)) / denominator


def _trial_fields(grid, trials, seed):
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        yield random_field(grid, TEMPERATURE, rng, smoothness=rng.uniform(0.5, 3.0))


def _refine_c0(i, start, iterations=config.C0_REFINE_ITERATIONS):
    """Power iteration on A^{-1/2} (I - P)^2 A^{-1/2} from a starting field; yields the best ratio seen"""
    grid = i.grid
    band = grid.admissible_mask(TEMPERATURE) & grid.dealias_mask
    inv_sqrt = np.where(band, 1.0 / np.sqrt(np.where(band, grid.k_squared, 1.0)), 0.0)
    best = approximation_ratio(i, start)
    psi = np.sqrt(grid.k_squared) * start.coeffs * band
    for _ in range(iterations):
        norm = np.linalg.norm(psi)
        if norm == 0:
            break
        phi = SpectralField(grid, TEMPERATURE, inv_sqrt * psi / norm)
        residual = phi - apply(i, phi)
        best = max(best, approximation_ratio(i, phi))
        back = residual - apply(i, residual)
        psi = inv_sqrt * back.coeffs
    return best


def estimate_c0(i, trials=config.DEFAULT_C0_TRIALS, seed=config.DEFAULT_FIELD_SEED, refine=True):
    """max over random band-limited fields of ||phi - I_h phi|| / (h ||A^{1/2} phi||)"""
    if trials < 100:
        raise ConfigurationError(f"estimate_c0 needs at least 100 trials, got {trials}")
    best, best_field = 0.0, None
    for phi in _trial_fields(i.grid, trials, seed):
        ratio = approximation_ratio(i, phi)
        if ratio > best:
            best, best_field = ratio, phi
    if refine and best_field is not None and i.kind in SELF_ADJOINT_KINDS:
        refined = _refine_c0(i, best_field)
        logger.debug("c0 for %s: random max %.6g, refined %.6g", i.kind.value, best, refined)
        best = max(best, refined)
    return float(best)


def estimate_c1_c2(i, trials=config.DEFAULT_C0_TRIALS, seed=config.DEFAULT_FIELD_SEED):
    """Smallest common c = c1 = c2 with ||phi - I_h phi|| <= c (h ||A^{1/2} phi|| + h^2 ||A phi||) on the trials"""
    if trials < 100:
        raise ConfigurationError(f"estimate_c1_c2 needs at least 100 trials, got {trials}")
    best = 0.0
    for phi in _trial_fields(i.grid, trials, seed):
        denominator = i.h * h1_seminorm(phi) + i.h ** 2 * h2_seminorm(phi)
        if denominator > 0:
            best = max(best, l2_norm(phi - apply(i, phi)) / denominator)
    return float(best), float(best)
