"""Kramers stress and the dissipation bound on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigGrid, PhaseDensity, PotentialParams, equilibrium_cells, quadrature, stress_kernels
from .errors import NumericalDomainError

PSD_TOL = 1e-12


@dataclass(frozen=True)
class StressTensor:
    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.shape != (2, 2):
            raise ValueError(f"stress must be 2x2, got {tau.shape}")
        object.__setattr__(self, "tau", tau)

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.tau)[0])

    def __array__(self, dtype=None, copy=None):
        return self.tau if dtype is None else self.tau.astype(dtype)


def _as_values(psi):
    return psi.values if isinstance(psi, PhaseDensity) else np.asarray(psi, dtype=float)


def stress_components(values, grid: ConfigGrid, params: PotentialParams):
    """Vectorised stress: ``(..., nr, ntheta)`` densities to ``(..., 3)`` (11, 12, 22)."""
    values = np.asarray(values, dtype=float)
    g = values / equilibrium_cells(grid, params)
    comps = np.einsum("...ij,cij->...c", g, stress_kernels(grid, params.k))
    if not np.all(np.isfinite(comps)):
        raise NumericalDomainError("non-finite value in stress integrand")
    return comps


def components_to_tensor(comps):
    comps = np.asarray(comps)
    out = np.empty(comps.shape[:-1] + (2, 2))
    out[..., 0, 0] = comps[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = comps[..., 1]
    out[..., 1, 1] = comps[..., 2]
    return out


def kramers_stress(psi, grid: ConfigGrid, params: PotentialParams) -> StressTensor:
    """``tau_ij = 2k int psi R_i R_j / (1 - |R|^2) dR``.

    ``psi / psi_inf`` is taken constant on each cell and the remaining
    weight is integrated exactly, so ``tau(psi_inf) = I`` to round-off.
    """
    return StressTensor(components_to_tensor(stress_components(_as_values(psi), grid, params)))


def sqrt_ratio_gradient_sq(values, grid: ConfigGrid, params: PotentialParams, shift=0.0):
    """``|grad sqrt((psi + shift psi_inf) / psi_inf)|^2`` per cell (see diagnostics)."""
    from .diagnostics import _grad_sq

    g = _as_values(values) / equilibrium_cells(grid, params) + shift
    return _grad_sq(np.sqrt(np.clip(g, 0.0, None)), grid, mask=g > 0)


def stress_bound_check(psi, grid: ConfigGrid, params: PotentialParams):
    """Both sides of the stress-by-dissipation bound.

    Returns ``(lhs, rhs, ratio)`` with ``lhs = |tau|^2`` (Frobenius),
    ``rhs = mass * int psi_inf |grad sqrt(psi/psi_inf)|^2`` and
    ``ratio = lhs / (mass * (dissipation + mass))``.  The augmented
    denominator keeps the ratio finite at equilibrium where the
    dissipation vanishes.
    """
    values = _as_values(psi)
    tau = kramers_stress(values, grid, params).tau
    lhs = float(np.sum(tau**2))
    mass = float(quadrature(values, grid))
    diss = float(quadrature(equilibrium_cells(grid, params) * sqrt_ratio_gradient_sq(values, grid, params), grid))
    rhs = mass * diss
    denom = mass * (diss + mass)
    ratio = lhs / denom if denom > 0 else 0.0
    return lhs, rhs, ratio
