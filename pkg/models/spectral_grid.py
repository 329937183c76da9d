"""Cosine/sine tensor-product spectral representation on the box [0,Lx]x[0,Ly]x[0,1].

Every scalar field is expanded in the L2-orthonormal basis

    phi_ijk(x, y, z) = b_i(x) b_j(y) b_k(z),

where each factor is either sqrt(2/L) cos(n pi s / L) (n=0 weight sqrt(1/L)) or
sqrt(2/L) sin(n pi s / L) depending on the axis parity. These are the
eigenfunctions of A = -Laplacian under the insulated-wall / fixed-temperature
boundary conditions, so diffusion and the Leray projection are diagonal and
coefficients are inner products.

Coefficient arrays are indexed by the mode number n on every axis; on SIN axes
index 0 is not part of the basis and is kept identically zero. Physical values
live on the midpoint (DCT-II/DST-II) collocation nodes s_j = (j + 1/2) L / N.
"""

import os
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.fft

import config
from models.exceptions import ConfigurationError

AXES = {"x": 0, "y": 1, "z": 2}


def thread_count():
    """Worker count for transforms and sweeps, taken from the environment"""
    raw = os.environ.get(config.THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{config.THREADS_ENV_VAR} must be an integer, got {raw!r}")


class AxisParity(str, Enum):
    COS = "COS"
    SIN = "SIN"

    def flipped(self):
        return AxisParity.SIN if self is AxisParity.COS else AxisParity.COS


@dataclass(frozen=True)
class Parity:
    """Per-axis basis tag of a scalar field"""
    x: AxisParity
    y: AxisParity
    z: AxisParity

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def __getitem__(self, axis):
        return (self.x, self.y, self.z)[axis]

    def flip(self, axis):
        tags = list(self)
        tags[axis] = tags[axis].flipped()
        return Parity(*tags)

    def __str__(self):
        return ",".join(tag.value for tag in self)

    @classmethod
    def from_string(cls, text):
        tags = [part.strip().upper() for part in text.split(",")]
        if len(tags) != 3:
            raise ConfigurationError(f"Parity needs three tags, got {text!r}")
        try:
            return cls(*(AxisParity(tag) for tag in tags))
        except ValueError:
            raise ConfigurationError(f"Unknown parity tag in {text!r}")


COS, SIN = AxisParity.COS, AxisParity.SIN

# Neumann laterally, Dirichlet at z=0,1
TEMPERATURE = Parity(COS, COS, SIN)
PRESSURE = Parity(COS, COS, COS)
# SIN in the wall-normal direction gives u.n = 0 on every face
VELOCITY = (Parity(SIN, COS, COS), Parity(COS, SIN, COS), Parity(COS, COS, SIN))


@dataclass(frozen=True)
class Grid:
    """Box [0,Lx]x[0,Ly]x[0,Lz] with Nx, Ny, Nz modes per axis (Ny=1 is the y-invariant slice)"""
    Lx: float
    Ly: float
    Nx: int
    Ny: int
    Nz: int
    Lz: float = config.LZ

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise ConfigurationError(f"Domain lengths must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        if self.Lz != config.LZ:
            raise ConfigurationError(f"Lz is fixed to {config.LZ}, got {self.Lz}")
        for name, n in (("Nx", self.Nx), ("Nz", self.Nz)):
            if int(n) != n or n < config.MIN_MODES:
                raise ConfigurationError(f"{name} must be an integer >= {config.MIN_MODES}, got {n}")
        if int(self.Ny) != self.Ny or not (self.Ny == 1 or self.Ny >= config.MIN_MODES):
            raise ConfigurationError(f"Ny must be 1 (slice) or an integer >= {config.MIN_MODES}, got {self.Ny}")

    @property
    def shape(self):
        return (self.Nx, self.Ny, self.Nz)

    @property
    def lengths(self):
        return (self.Lx, self.Ly, self.Lz)

    @property
    def slice2d(self):
        return self.Ny == 1

    @property
    def active_axes(self):
        return tuple(axis for axis, n in enumerate(self.shape) if n > 1)

    @property
    def cell_volume(self):
        return float(np.prod(self.lengths) / np.prod(self.shape))

    def spacing(self, axis):
        return self.lengths[axis] / self.shape[axis]

    def max_spacing(self):
        return max(self.spacing(axis) for axis in self.active_axes)

    def min_spacing(self):
        return min(self.spacing(axis) for axis in self.active_axes)

    def wavenumbers(self, axis):
        """Mode wavenumbers n*pi/L, n = 0..N-1, along one axis"""
        return np.arange(self.shape[axis]) * np.pi / self.lengths[axis]

    def dealias_cutoff(self, axis):
        """Largest kept mode index: 3n < 2N, so triple products stay exactly integrable"""
        return int(np.ceil(2 * self.shape[axis] / 3)) - 1

    @cached_property
    def k_squared(self):
        kx, ky, kz = (self.wavenumbers(axis) for axis in range(3))
        return kx[:, None, None] ** 2 + ky[None, :, None] ** 2 + kz[None, None, :] ** 2

    @cached_property
    def dealias_mask(self):
        masks = [np.arange(n) <= self.dealias_cutoff(axis) for axis, n in enumerate(self.shape)]
        return masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]

    def admissible_mask(self, parity):
        """Modes that belong to the basis of the given parity"""
        mask = np.ones(self.shape, dtype=bool)
        for axis, tag in enumerate(parity):
            if tag is SIN:
                index = [slice(None)] * 3
                index[axis] = 0
                mask[tuple(index)] = False
        return mask

    def nodes(self):
        """Midpoint collocation coordinates per axis"""
        return tuple((np.arange(n) + 0.5) * L / n for n, L in zip(self.shape, self.lengths))

    def mesh(self):
        return np.meshgrid(*self.nodes(), indexing="ij")


@dataclass(eq=False)
class SpectralField:
    """Coefficients of a scalar field in the parity-tagged orthonormal basis"""
    grid: Grid
    parity: Parity
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != self.grid.shape:
            raise ConfigurationError(
                f"Coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid, parity=TEMPERATURE):
        return cls(grid, parity, np.zeros(grid.shape))

    def copy(self):
        return SpectralField(self.grid, self.parity, self.coeffs.copy())

    def _check_compatible(self, other):
        if other.grid != self.grid:
            raise ConfigurationError("Fields live on different grids")
        if other.parity != self.parity:
            raise ConfigurationError(f"Parity mismatch: {self.parity} vs {other.parity}")

    def __add__(self, other):
        self._check_compatible(other)
        return SpectralField(self.grid, self.parity, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return SpectralField(self.grid, self.parity, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.parity, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, self.parity, -self.coeffs)


@dataclass(eq=False)
class PhysicalField:
    """Samples of a field on the collocation nodes"""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"Sample shape {self.values.shape} does not match grid {self.grid.shape}")


def _check_parity(parity):
    if not isinstance(parity, Parity):
        raise ConfigurationError(f"Expected a Parity, got {parity!r}")


def forward_transform(f, parity):
    """Collocation samples -> basis coefficients (drops the unrepresentable SIN mode N)"""
    _check_parity(parity)
    if not isinstance(f, PhysicalField):
        raise ConfigurationError("forward_transform expects a PhysicalField")
    grid = f.grid
    workers = thread_count()
    data = f.values
    for axis, tag in enumerate(parity):
        if tag is COS:
            data = scipy.fft.dct(data, type=2, norm="ortho", axis=axis, workers=workers)
        else:
            data = scipy.fft.dst(data, type=2, norm="ortho", axis=axis, workers=workers)
            # dst output index m holds mode m+1
            data = np.roll(data, 1, axis=axis)
            data[_axis_index(axis, 0)] = 0.0
    return SpectralField(grid, parity, data * np.sqrt(grid.cell_volume))


def inverse_transform(c):
    """Basis coefficients -> collocation samples"""
    grid = c.grid
    workers = thread_count()
    data = c.coeffs / np.sqrt(grid.cell_volume)
    for axis, tag in enumerate(c.parity):
        if tag is COS:
            data = scipy.fft.idct(data, type=2, norm="ortho", axis=axis, workers=workers)
        else:
            data = np.roll(data, -1, axis=axis)
            data[_axis_index(axis, -1)] = 0.0
            data = scipy.fft.idst(data, type=2, norm="ortho", axis=axis, workers=workers)
    return PhysicalField(grid, data)


def _axis_index(axis, position):
    index = [slice(None)] * 3
    index[axis] = position
    return tuple(index)


def _axis_number(axis):
    if isinstance(axis, str):
        try:
            return AXES[axis]
        except KeyError:
            raise ConfigurationError(f"Unknown axis {axis!r}")
    if axis not in (0, 1, 2):
        raise ConfigurationError(f"Unknown axis {axis!r}")
    return axis


def differentiate(c, axis):
    """Exact derivative along one axis: d/ds cos(ks) = -k sin(ks), d/ds sin(ks) = k cos(ks)"""
    axis = _axis_number(axis)
    shape = [1, 1, 1]
    shape[axis] = -1
    k = c.grid.wavenumbers(axis).reshape(shape)
    sign = -1.0 if c.parity[axis] is COS else 1.0
    return SpectralField(c.grid, c.parity.flip(axis), sign * k * c.coeffs)


def laplacian_symbol(grid, parity):
    """|k|^2 of A = -Laplacian per mode, with the modes outside the basis masked"""
    _check_parity(parity)
    return np.ma.masked_array(grid.k_squared, mask=~grid.admissible_mask(parity))


def first_eigenvalue(grid, parity=TEMPERATURE):
    """lambda_1, the smallest admissible |k|^2"""
    return float(laplacian_symbol(grid, parity).min())


def l2_norm(c):
    return float(np.sqrt(np.sum(c.coeffs ** 2)))


def h1_seminorm(c):
    """||A^{1/2} c||"""
    return float(np.sqrt(np.sum(c.grid.k_squared * c.coeffs ** 2)))


def h2_seminorm(c):
    """||A c||"""
    return float(np.sqrt(np.sum(c.grid.k_squared ** 2 * c.coeffs ** 2)))


def inner_product(a, b):
    a._check_compatible(b)
    return float(np.sum(a.coeffs * b.coeffs))


def quadrature(f):
    """Midpoint-rule integral of the samples over the box"""
    return float(np.sum(f.values) * f.grid.cell_volume)


def max_abs(c):
    """Node maximum of |c|, the discrete sup norm"""
    return float(np.max(np.abs(inverse_transform(c).values)))


def dealias(c):
    return SpectralField(c.grid, c.parity, np.where(c.grid.dealias_mask, c.coeffs, 0.0))


def from_function(grid, parity, func):
    """Sample func(X, Y, Z) on the nodes and expand it"""
    X, Y, Z = grid.mesh()
    return forward_transform(PhysicalField(grid, func(X, Y, Z)), parity)


def random_field(grid, parity, rng, smoothness=2.0, amplitude=1.0):
    """Band-limited random field with spectrum decaying like (1+|k|^2)^(-smoothness/2)"""
    _check_parity(parity)
    coeffs = rng.standard_normal(grid.shape) * (1.0 + grid.k_squared) ** (-smoothness / 2.0)
    coeffs = np.where(grid.admissible_mask(parity) & grid.dealias_mask, coeffs, 0.0)
    field = SpectralField(grid, parity, coeffs)
    norm = l2_norm(field)
    return field * (amplitude / norm) if norm > 0 else field


def _basis_1d(tag, n, length, points):
    k = np.arange(n) * np.pi / length
    arg = np.outer(points, k)
    if tag is COS:
        weights = np.full(n, np.sqrt(2.0 / length))
        weights[0] = np.sqrt(1.0 / length)
        return np.cos(arg) * weights
    basis = np.sin(arg) * np.sqrt(2.0 / length)
    basis[:, 0] = 0.0
    return basis


def evaluate(c, x, y, z):
    """Evaluate the series at arbitrary points (arrays of equal shape)"""
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
    grid = c.grid
    bx = _basis_1d(c.parity.x, grid.Nx, grid.Lx, x.ravel())
    by = _basis_1d(c.parity.y, grid.Ny, grid.Ly, y.ravel())
    bz = _basis_1d(c.parity.z, grid.Nz, grid.Lz, z.ravel())
    values = np.einsum("pi,pj,pk,ijk->p", bx, by, bz, c.coeffs, optimize=True)
    return values.reshape(x.shape)
