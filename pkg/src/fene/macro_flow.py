"""Macroscopic flow: prescribed homogeneous protocols and a periodic NS solver.

The velocity lives on the torus ``[0, 2 pi)^2`` as ``rfft2`` coefficients of
shape ``(2, nx, ny // 2 + 1)``.  Nonlinear terms are dealiased with the 2/3
rule and every update is Leray-projected.  Viscosity and the optional
hyperviscosity ``(1/n) Laplacian^(2 k_h)`` are integrated exactly with an
integrating factor; advection and ``div tau`` use Heun's method.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import ConfigGrid, PotentialParams
from .errors import ConfigError, StepSizeError
from .fokker_planck import VelocityGradient, get_solver
from .stress import components_to_tensor, stress_components

KINDS = ("steady_shear", "planar_extension", "time_periodic_shear", "coupled")
DIV_TOL = 1e-12


@dataclass(frozen=True)
class FlowProtocol:
    kind: str = "steady_shear"
    rate: float = 1.0
    omega: float = 0.0
    hyper_strength: float = 0.0
    hyper_exponent: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown protocol kind {self.kind!r}; expected one of {KINDS}")
        if self.hyper_strength < 0:
            raise ConfigError("hyperviscosity strength must be >= 0")
        if int(self.hyper_exponent) != self.hyper_exponent or self.hyper_exponent < 1:
            raise ConfigError("hyperviscosity exponent must be a positive integer")


def protocol_kappa(protocol: FlowProtocol, t) -> VelocityGradient:
    """Homogeneous velocity gradient prescribed by ``protocol`` at time ``t``."""
    if t < 0:
        raise ConfigError("t must be nonnegative")
    kind, rate = protocol.kind, protocol.rate
    if kind == "steady_shear":
        return VelocityGradient([[0.0, rate], [0.0, 0.0]])
    if kind == "planar_extension":
        return VelocityGradient([[rate, 0.0], [0.0, -rate]])
    if kind == "time_periodic_shear":
        return VelocityGradient([[0.0, rate * np.cos(protocol.omega * t)], [0.0, 0.0]])
    raise ConfigError(f"protocol kind {kind!r} does not prescribe a homogeneous gradient")


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    nx: int
    ny: int
    kx: np.ndarray = field(repr=False)
    ky: np.ndarray = field(repr=False)
    dkx: np.ndarray = field(repr=False)
    dky: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    dealias: np.ndarray = field(repr=False)

    @property
    def dx(self):
        return 2.0 * np.pi / self.nx

    @property
    def dy(self):
        return 2.0 * np.pi / self.ny

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def spectral_shape(self):
        return (self.nx, self.ny // 2 + 1)

    def coordinates(self):
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def forward(self, f):
        return np.fft.rfft2(f, axes=(-2, -1))

    def inverse(self, fh):
        return np.fft.irfft2(fh, s=self.shape, axes=(-2, -1))


@lru_cache(maxsize=16)
def build_spectral_grid(nx: int, ny: int) -> SpectralGrid:
    if nx < 4 or ny < 4 or nx % 2 or ny % 2:
        raise ConfigError(f"spatial grid must be even and >= 4, got ({nx}, {ny})")
    kx1 = np.fft.fftfreq(nx, 1.0 / nx)
    ky1 = np.fft.rfftfreq(ny, 1.0 / ny)
    kx, ky = np.meshgrid(kx1, ky1, indexing="ij")
    # derivative wavenumbers with the Nyquist rows zeroed keep fields real
    dkx = np.where(np.abs(kx) == nx // 2, 0.0, kx)
    dky = np.where(np.abs(ky) == ny // 2, 0.0, ky)
    dealias = (np.abs(kx) < nx / 3.0) & (np.abs(ky) < ny / 3.0)
    return SpectralGrid(nx, ny, kx, ky, dkx, dky, kx**2 + ky**2, dealias)


@dataclass
class MacroState:
    uhat: np.ndarray
    grid: SpectralGrid
    time: float = 0.0

    @classmethod
    def from_velocity(cls, u, grid: SpectralGrid, time=0.0):
        """Project a physical field ``(2, nx, ny)`` onto divergence-free retained modes."""
        uhat = grid.forward(np.asarray(u, dtype=float)) * grid.dealias
        return cls(leray_project(uhat, grid), grid, time)

    @classmethod
    def zeros(cls, grid: SpectralGrid):
        return cls(np.zeros((2,) + grid.spectral_shape, dtype=complex), grid)

    def velocity(self):
        return self.grid.inverse(self.uhat)

    def divergence_max(self):
        g = self.grid
        return float(np.max(np.abs(g.dkx * self.uhat[0] + g.dky * self.uhat[1]), initial=0.0))

    def copy(self):
        return MacroState(self.uhat.copy(), self.grid, self.time)


def leray_project(fhat, grid: SpectralGrid):
    kx, ky = grid.dkx, grid.dky
    k2 = kx**2 + ky**2
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    dot = (kx * fhat[0] + ky * fhat[1]) * inv
    return np.stack([fhat[0] - kx * dot, fhat[1] - ky * dot])


def velocity_gradient_hat(uhat, grid: SpectralGrid):
    """``d u_i / d x_j`` in spectral space, shape ``(2, 2, ...)``."""
    d = np.stack([1j * grid.dkx, 1j * grid.dky])
    return uhat[:, None] * d[None, :]


def velocity_gradient(state: MacroState):
    """Pointwise gradients ``kappa_ij = d u_i / d x_j``, shape ``(nx, ny, 2, 2)``, trace removed."""
    grad = state.grid.inverse(velocity_gradient_hat(state.uhat, state.grid))
    kappa = np.moveaxis(grad, (0, 1), (-2, -1)).copy()
    tr = 0.5 * (kappa[..., 0, 0] + kappa[..., 1, 1])
    kappa[..., 0, 0] -= tr
    kappa[..., 1, 1] -= tr
    return kappa


def stress_divergence_hat(tau_field, grid: SpectralGrid):
    """Spectral ``(div tau)_i = d_j tau_ij`` for ``tau_field`` of shape ``(nx, ny, 2, 2)``."""
    that = grid.forward(np.moveaxis(tau_field, (-2, -1), (0, 1)))
    return 1j * (grid.dkx * that[:, 0] + grid.dky * that[:, 1])


def kinetic_energy(state: MacroState):
    u = state.velocity()
    return 0.5 * float(np.sum(u**2)) * state.grid.cell_area


def viscous_dissipation(state: MacroState, params: PotentialParams, protocol: FlowProtocol | None = None):
    """``nu int |grad u|^2`` plus the hyperviscous ``(1/n) int |Laplacian^k_h u|^2``."""
    grid = state.grid
    grad = grid.inverse(velocity_gradient_hat(state.uhat, grid))
    out = params.nu * float(np.sum(grad**2)) * grid.cell_area
    if protocol is not None and protocol.hyper_strength > 0:
        lap = grid.inverse((-grid.k2) ** protocol.hyper_exponent * state.uhat)
        out += protocol.hyper_strength * float(np.sum(lap**2)) * grid.cell_area
    return out


def stress_work(state: MacroState, tau_field):
    """``int grad u : tau``."""
    kappa = velocity_gradient(state)
    return float(np.sum(kappa * tau_field)) * state.grid.cell_area


def _linear_rate(grid, params, protocol):
    rate = params.nu * grid.k2
    if protocol is not None and protocol.hyper_strength > 0:
        rate = rate + protocol.hyper_strength * grid.k2 ** (2 * protocol.hyper_exponent)
    return rate


def advective_courant(state: MacroState, dt):
    u = state.velocity()
    g = state.grid
    return dt * float(np.max(np.abs(u[0]) / g.dx + np.abs(u[1]) / g.dy))


def _rhs(uhat, forcing_hat, grid):
    u = grid.inverse(uhat)
    grad = grid.inverse(velocity_gradient_hat(uhat, grid))
    adv = np.einsum("jxy,ijxy->ixy", u, grad)
    nl = -grid.forward(adv) * grid.dealias
    return leray_project(nl + forcing_hat, grid)


def ns_step(state: MacroState, tau_field, dt, params: PotentialParams, protocol: FlowProtocol | None = None) -> MacroState:
    """Advance the velocity by ``dt`` with ``div tau`` frozen over the step."""
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    c = advective_courant(state, dt)
    if c > 1.0:
        raise StepSizeError(f"advective CFL violated: courant number {c:.3f} > 1")
    grid = state.grid
    if tau_field is None:
        forcing = 0.0
    else:
        forcing = stress_divergence_hat(np.asarray(tau_field, dtype=float), grid) * grid.dealias
    decay = np.exp(-_linear_rate(grid, params, protocol) * dt)
    u0 = state.uhat
    n0 = _rhs(u0, forcing, grid)
    u1 = decay * (u0 + dt * n0)
    n1 = _rhs(u1, forcing, grid)
    new = decay * (u0 + 0.5 * dt * n0) + 0.5 * dt * n1
    new = leray_project(new * grid.dealias, grid)
    return MacroState(new, grid, state.time + dt)


# -- spatial transport of the configuration density ------------------------------


def _corner_streamfunction(state: MacroState):
    g = state.grid
    uh = state.uhat
    omega = 1j * g.dkx * uh[1] - 1j * g.dky * uh[0]
    psi_s = np.divide(omega, g.k2, out=np.zeros_like(omega), where=g.k2 > 0)
    shift = np.exp(1j * (g.kx * g.dx / 2.0 + g.ky * g.dy / 2.0))
    shift = np.where((np.abs(g.kx) == g.nx // 2) | (np.abs(g.ky) == g.ny // 2), 0.0, shift)
    return g.inverse(psi_s * shift)


def face_fluxes(state: MacroState):
    """Volume fluxes through the east and north faces of every spatial cell.

    Built from the streamfunction at cell corners, so the discrete divergence
    of every cell is zero up to rounding.
    """
    g = state.grid
    corner = _corner_streamfunction(state)
    mean = state.uhat[:, 0, 0].real / (g.nx * g.ny)
    east = corner - np.roll(corner, 1, axis=1) + mean[0] * g.dy
    north = -(corner - np.roll(corner, 1, axis=0)) + mean[1] * g.dx
    return east, north


def transport_courant(state: MacroState, dt):
    east, north = face_fluxes(state)
    out = (
        np.clip(east, 0, None)
        + np.clip(-np.roll(east, 1, axis=0), 0, None)
        + np.clip(north, 0, None)
        + np.clip(-np.roll(north, 1, axis=1), 0, None)
    )
    return dt * float(np.max(out)) / state.grid.cell_area


def advect(field_values, state: MacroState, dt):
    """First-order upwind transport of ``(nx, ny, ...)`` cell values by ``u``."""
    c = transport_courant(state, dt)
    if c > 1.0:
        raise StepSizeError(f"transport CFL violated: courant number {c:.3f} > 1")
    east, north = face_fluxes(state)
    extra = (None,) * (np.ndim(field_values) - 2)
    e = east[(...,) + extra]
    n = north[(...,) + extra]
    f = field_values
    fe = np.where(e > 0, e * f, e * np.roll(f, -1, axis=0))
    fn = np.where(n > 0, n * f, n * np.roll(f, -1, axis=1))
    net = fe - np.roll(fe, 1, axis=0) + fn - np.roll(fn, 1, axis=1)
    return f - dt / state.grid.cell_area * net


# -- full micro-macro coupling --------------------------------------------------


class CoupledSystem:
    """Navier-Stokes on the torus coupled to a Fokker-Planck density per grid point."""

    def __init__(self, spatial: SpectralGrid, config: ConfigGrid, params: PotentialParams, protocol: FlowProtocol | None = None):
        self.spatial = spatial
        self.config = config
        self.params = params
        self.protocol = protocol or FlowProtocol(kind="coupled")
        self.solver = get_solver(config, params)

    def stress_field(self, micro):
        return components_to_tensor(stress_components(micro, self.config, self.params))

    def step(self, macro: MacroState, micro, dt):
        micro = np.asarray(micro, dtype=float)
        if micro.shape != self.spatial.shape + self.config.shape:
            raise ConfigError(f"micro array shape {micro.shape} does not match grids")
        tau = self.stress_field(micro)
        macro = ns_step(macro, tau, dt, self.params, self.protocol)
        moved = advect(micro, macro, dt)
        kappa = velocity_gradient(macro)
        micro = self.solver.advance(moved, kappa, dt)
        return macro, micro


def couple_step(macro: MacroState, micro, dt, config: ConfigGrid, params: PotentialParams, protocol: FlowProtocol | None = None):
    """One staggered step: stress from ``psi^n``, NS, x-transport, then R-space Fokker-Planck."""
    return CoupledSystem(macro.grid, config, params, protocol).step(macro, micro, dt)
