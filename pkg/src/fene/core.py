"""FENE potential, equilibrium density and the polar configuration grid.

The configuration space is the open unit disk.  Densities are stored as
cell averages on a staggered polar grid of ``nr`` rings and ``ntheta``
sectors; array layout is ``(nr, ntheta)`` with the ring index first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

MIN_CELLS = 4


@dataclass(frozen=True)
class PotentialParams:
    """FENE spring strength ``k`` and fluid viscosity ``nu``.

    ``beta`` and ``r0`` are carried for completeness; both are pinned to 1.
    """

    k: float = 1.0
    nu: float = 1.0
    beta: float = 1.0
    r0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k <= 0:
            raise ConfigError(f"k must satisfy k > 0, got {self.k}")
        if not np.isfinite(self.nu) or self.nu <= 0:
            raise ConfigError(f"nu must satisfy nu > 0, got {self.nu}")
        if self.beta != 1.0:
            raise ConfigError(f"beta is fixed to 1, got {self.beta}")
        if self.r0 != 1.0:
            raise ConfigError(f"r0 is fixed to 1, got {self.r0}")


def _radius_sq(R):
    R = np.asarray(R, dtype=float)
    if R.shape[-1] != 2:
        raise ShapeError(f"points must have trailing dimension 2, got shape {R.shape}")
    return R, np.einsum("...i,...i->...", R, R)


def potential_value(R, params: PotentialParams):
    """``U(R) = -k log(1 - |R|^2)``; raises DomainError outside the open disk."""
    R, r2 = _radius_sq(R)
    if np.any(r2 >= 1.0):
        raise DomainError("potential_value requires |R| < 1")
    return -params.k * np.log1p(-r2)


def potential_gradient(R, params: PotentialParams):
    """Spring force ``2k R / (1 - |R|^2)``."""
    R, r2 = _radius_sq(R)
    if np.any(r2 >= 1.0):
        raise DomainError("potential_gradient requires |R| < 1")
    return (2.0 * params.k / (1.0 - r2))[..., None] * R


def partition_function(params: PotentialParams) -> float:
    """Normalisation of ``(1 - |R|^2)^k`` over the unit disk, ``pi / (k + 1)``."""
    return np.pi / (params.k + 1.0)


def equilibrium_density(R, params: PotentialParams):
    """Pointwise Maxwellian ``(1 - |R|^2)^k / Z``; zero on and outside the circle."""
    R, r2 = _radius_sq(R)
    w = np.clip(1.0 - r2, 0.0, None) ** params.k
    return w / partition_function(params)


@dataclass(frozen=True, eq=False)
class ConfigGrid:
    """Staggered polar finite-volume grid on the unit disk.

    Face arrays are flattened-cell index pairs.  Radial faces join ring ``i``
    to ring ``i + 1`` at radius ``r_face``; angular faces join sector ``j``
    to ``j + 1`` (periodic) along the ray ``theta_face``.  The circle
    ``r = 1`` and the origin carry no faces.
    """

    nr: int
    ntheta: int
    r_edges: np.ndarray
    theta_edges: np.ndarray
    r_centers: np.ndarray
    theta_centers: np.ndarray
    cell_areas: np.ndarray
    radial_faces: dict = field(repr=False)
    angular_faces: dict = field(repr=False)

    @property
    def shape(self):
        return (self.nr, self.ntheta)

    @property
    def ncells(self):
        return self.nr * self.ntheta

    @property
    def dr(self):
        return 1.0 / self.nr

    @property
    def dtheta(self):
        return 2.0 * np.pi / self.ntheta

    @property
    def points(self):
        """Cell-centre coordinates, shape ``(nr, ntheta, 2)``."""
        r = self.r_centers[:, None]
        t = self.theta_centers[None, :]
        return np.stack(np.broadcast_arrays(r * np.cos(t), r * np.sin(t)), axis=-1)

    @property
    def max_cell_diameter(self):
        ra, rb = self.r_edges[-2], self.r_edges[-1]
        chord = 2.0 * rb * np.sin(self.dtheta / 2.0)
        diag = np.sqrt(ra**2 + rb**2 - 2.0 * ra * rb * np.cos(self.dtheta))
        return max(chord, diag, self.dr)


def _assemble_faces(nr, ntheta, r_edges, theta_edges, r_centers):
    dth = 2.0 * np.pi / ntheta
    idx = np.arange(nr * ntheta).reshape(nr, ntheta)

    i = np.repeat(np.arange(nr - 1), ntheta)
    j = np.tile(np.arange(ntheta), nr - 1)
    r_face = r_edges[i + 1]
    radial = dict(
        left=idx[i, j],
        right=idx[i + 1, j],
        r=r_face,
        theta_lo=theta_edges[j],
        theta_hi=theta_edges[j + 1],
        length=r_face * dth,
        distance=np.full(i.shape, 1.0 / nr),
    )

    i = np.repeat(np.arange(nr), ntheta)
    j = np.tile(np.arange(ntheta), nr)
    angular = dict(
        left=idx[i, j],
        right=idx[i, (j + 1) % ntheta],
        theta=theta_edges[j + 1],
        r_lo=r_edges[i],
        r_hi=r_edges[i + 1],
        length=np.full(i.shape, 1.0 / nr),
        distance=r_centers[i] * dth,
    )
    return radial, angular


@lru_cache(maxsize=32)
def build_config_grid(nr: int, ntheta: int) -> ConfigGrid:
    """Uniform staggered polar grid; centres at ``r = (i + 1/2) / nr``."""
    if int(nr) != nr or int(ntheta) != ntheta:
        raise ConfigError("grid counts must be integers")
    nr, ntheta = int(nr), int(ntheta)
    if nr < MIN_CELLS or ntheta < MIN_CELLS:
        raise ConfigError(f"need nr >= {MIN_CELLS} and ntheta >= {MIN_CELLS}, got ({nr}, {ntheta})")
    r_edges = np.arange(nr + 1) / nr
    theta_edges = np.arange(ntheta + 1) * (2.0 * np.pi / ntheta)
    r_centers = (np.arange(nr) + 0.5) / nr
    theta_centers = (np.arange(ntheta) + 0.5) * (2.0 * np.pi / ntheta)
    ring = 0.5 * (r_edges[1:] ** 2 - r_edges[:-1] ** 2) * (2.0 * np.pi / ntheta)
    areas = np.repeat(ring[:, None], ntheta, axis=1)
    radial, angular = _assemble_faces(nr, ntheta, r_edges, theta_edges, r_centers)
    for arr in (r_edges, theta_edges, r_centers, theta_centers, areas):
        arr.flags.writeable = False
    return ConfigGrid(nr, ntheta, r_edges, theta_edges, r_centers, theta_centers, areas, radial, angular)


def quadrature(values, grid: ConfigGrid):
    """Midpoint rule ``sum(values * cell_areas)`` over the trailing two axes."""
    values = np.asarray(values, dtype=float)
    if values.shape[-2:] != grid.shape:
        raise ShapeError(f"values shape {values.shape} does not end with grid shape {grid.shape}")
    return np.einsum("...ij,ij->...", values, grid.cell_areas)


@lru_cache(maxsize=64)
def equilibrium_cell_mass(grid: ConfigGrid, k: float) -> np.ndarray:
    """Exact integral of the Maxwellian over each cell; sums to 1."""
    s = 1.0 - grid.r_edges**2
    ring = (s[:-1] ** (k + 1.0) - s[1:] ** (k + 1.0)) * grid.dtheta / (2.0 * np.pi)
    out = np.repeat(ring[:, None], grid.ntheta, axis=1)
    out.flags.writeable = False
    return out


def equilibrium_cells(grid: ConfigGrid, params: PotentialParams) -> np.ndarray:
    """Cell averages of the Maxwellian; the discrete equilibrium state."""
    return equilibrium_cell_mass(grid, params.k) / grid.cell_areas


def equilibrium_samples(grid: ConfigGrid, params: PotentialParams) -> np.ndarray:
    """Point values of the Maxwellian at the cell centres."""
    return equilibrium_density(grid.points, params)


@lru_cache(maxsize=64)
def stress_kernels(grid: ConfigGrid, k: float) -> np.ndarray:
    """Per-cell integrals of ``2k psi_inf R_i R_j / (1 - |R|^2)``.

    Returned as shape ``(3, nr, ntheta)`` for the (11, 12, 22) components.
    The radial factor is integrated in closed form so the outermost ring
    never evaluates the singular weight.
    """
    s = 1.0 - grid.r_edges**2
    prim = s**k / k - s ** (k + 1.0) / (k + 1.0)
    radial = 0.5 * (prim[:-1] - prim[1:])
    ta, tb = grid.theta_edges[:-1], grid.theta_edges[1:]
    half = 0.5 * grid.dtheta
    sin2 = 0.25 * (np.sin(2 * tb) - np.sin(2 * ta))
    cc = half + sin2
    ss = half - sin2
    sc = 0.5 * (np.sin(tb) ** 2 - np.sin(ta) ** 2)
    pref = 2.0 * k * (k + 1.0) / np.pi
    out = pref * radial[None, :, None] * np.stack([cc, sc, ss])[:, None, :]
    out.flags.writeable = False
    return out


@dataclass
class PhaseDensity:
    """Nonnegative configuration density stored as cell averages."""

    values: np.ndarray
    grid: ConfigGrid
    mass: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ShapeError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("density contains non-finite values")
        scale = max(1.0, float(np.max(np.abs(self.values), initial=0.0)))
        if np.min(self.values) < -1e-13 * scale:
            raise ConfigError("density must be nonnegative")
        self.mass = float(quadrature(self.values, self.grid))

    @classmethod
    def equilibrium(cls, grid, params, mass=1.0):
        return cls(mass * equilibrium_cells(grid, params), grid)

    def normalized(self):
        if self.mass <= 0:
            raise ConfigError("cannot normalise a zero-mass density")
        return PhaseDensity(self.values / self.mass, self.grid)
