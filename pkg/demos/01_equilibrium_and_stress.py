"""
Equilibrium density and the Kramers stress
==========================================

The spring potential, its Maxwellian, and the stress it carries.
"""
import numpy as np

from fene import PotentialParams, build_config_grid, equilibrium_cells, kramers_stress, potential_value, quadrature
from fene.stress import stress_bound_check

params = PotentialParams(k=2.0)
print("U at R = (0.5, 0):", potential_value(np.array([0.5, 0.0]), params))

# cell averages of the Maxwellian are exact, so its mass is 1 to round-off
grid = build_config_grid(64, 64)
eq = equilibrium_cells(grid, params)
print("mass of psi_inf:", quadrature(eq, grid))

# at equilibrium the stress is the identity, on any grid
print("tau(psi_inf):\n", kramers_stress(eq, grid, params).tau)

# a quadrupolar perturbation gives normal-stress differences
psi = eq * (1 + 0.4 * np.cos(2 * grid.theta_centers))[None, :]
print("tau(perturbed):\n", kramers_stress(psi, grid, params).tau)

# |tau|^2 against mass times (dissipation + mass)
lhs, rhs, ratio = stress_bound_check(psi, grid, params)
print(f"|tau|^2 = {lhs:.4f}, mass * dissipation = {rhs:.4f}, ratio = {ratio:.4f}")
