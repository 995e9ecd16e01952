"""Configuration-space Fokker-Planck solver at a single spatial point.

Solves ``d_t psi = div_R[-kappa R psi + psi_inf grad(psi / psi_inf)]`` on the
unit disk with zero flux through ``|R| = 1``.  Diffusion is written for
``g = psi / psi_inf`` and taken implicitly, with the face weight ``psi_inf``
the geometric mean of the two neighbouring cells, so the discrete
Maxwellian is an exact steady state.  The drift ``kappa R`` is integrated
exactly over every face and upwinded explicitly.

All state arrays accept leading batch axes, ``(..., nr, ntheta)``, so one
solver advances every spatial point of a coupled run in a single call.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    ConfigGrid,
    PhaseDensity,
    PotentialParams,
    build_config_grid,
    equilibrium_cell_mass,
)
from .errors import ConfigError, ConvergenceError, SchemeViolationError, StepSizeError

NEGATIVE_TOL = 1e-13
KAPPA_TRACE_TOL = 1e-14


class VelocityGradient:
    """Trace-free 2x2 velocity gradient ``kappa_ij = d u_i / d x_j``."""

    def __init__(self, kappa):
        kappa = np.array(kappa, dtype=float)
        if kappa.shape != (2, 2):
            raise ConfigError(f"kappa must be 2x2, got shape {kappa.shape}")
        scale = max(1.0, float(np.abs(kappa).max()))
        if abs(np.trace(kappa)) > KAPPA_TRACE_TOL * scale:
            raise ConfigError(f"kappa must be trace free, trace = {np.trace(kappa):.3e}")
        kappa.flags.writeable = False
        self.kappa = kappa

    def __array__(self, dtype=None, copy=None):
        return self.kappa if dtype is None else self.kappa.astype(dtype)

    def __repr__(self):
        return f"VelocityGradient({self.kappa.tolist()})"


def _kappa_array(kappa):
    if isinstance(kappa, VelocityGradient):
        return kappa.kappa
    return np.asarray(kappa, dtype=float)


class StepOperator:
    """One IMEX step at fixed ``kappa`` and ``dt``; call it on cell values."""

    def __init__(self, solver, kappa, dt):
        self.solver = solver
        self.kappa = _kappa_array(kappa)
        self.dt = float(dt)
        solver.check_cfl(self.kappa, self.dt)

    def __call__(self, values):
        return self.solver.advance(values, self.kappa, self.dt)


class FokkerPlanckSolver:
    """Holds the grid geometry, diffusion matrix and per-``dt`` factorisations."""

    def __init__(self, grid: ConfigGrid, params: PotentialParams):
        self.grid = grid
        self.params = params
        n = grid.ncells
        self.areas = grid.cell_areas.ravel()
        self.eq = equilibrium_cell_mass(grid, params.k).ravel() / self.areas
        # same rounding as values * areas, so g = 1 solves the equilibrium exactly
        self.eq_mass = self.eq * self.areas

        rf, af = grid.radial_faces, grid.angular_faces
        self.left = np.concatenate([rf["left"], af["left"]])
        self.right = np.concatenate([rf["right"], af["right"]])
        geo = np.sqrt(self.eq[self.left] * self.eq[self.right])
        length = np.concatenate([rf["length"], af["length"]])
        dist = np.concatenate([rf["distance"], af["distance"]])
        self.face_weight = geo * length / dist
        nf = self.left.size

        w = self.face_weight
        rows = np.concatenate([self.left, self.right, self.left, self.right])
        cols = np.concatenate([self.left, self.right, self.right, self.left])
        vals = np.concatenate([w, w, -w, -w])
        self.laplacian = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

        faces = np.arange(nf)
        self.divergence = sp.csr_matrix(
            (np.concatenate([-np.ones(nf), np.ones(nf)]), (np.concatenate([self.left, self.right]), np.concatenate([faces, faces]))),
            shape=(n, nf),
        )
        self._gather_left = sp.csr_matrix((np.ones(nf), (self.left, faces)), shape=(n, nf))
        self._gather_right = sp.csr_matrix((np.ones(nf), (self.right, faces)), shape=(n, nf))
        self.velocity_basis = self._velocity_basis()
        self._factor_cache = {}

    def _velocity_basis(self):
        """Exact face integrals of ``kappa R . n`` for the four entries of ``kappa``.

        Columns follow ``(k11, k12, k21, k22)``; positive values point from
        ``left`` to ``right`` (outward for radial faces, increasing angle
        for angular faces).
        """
        rf, af = self.grid.radial_faces, self.grid.angular_faces
        ta, tb, r = rf["theta_lo"], rf["theta_hi"], rf["r"]
        half = 0.5 * (tb - ta)
        s2 = 0.25 * (np.sin(2 * tb) - np.sin(2 * ta))
        cc, ss = half + s2, half - s2
        sc = 0.5 * (np.sin(tb) ** 2 - np.sin(ta) ** 2)
        radial = (r**2)[:, None] * np.stack([cc, sc, sc, ss], axis=1)

        t = af["theta"]
        c, s = np.cos(t), np.sin(t)
        span = 0.5 * (af["r_hi"] ** 2 - af["r_lo"] ** 2)
        angular = span[:, None] * np.stack([-s * c, -s * s, c * c, s * c], axis=1)
        return np.concatenate([radial, angular])

    # -- drift -------------------------------------------------------------
    def face_velocities(self, kappa):
        k = np.asarray(kappa, dtype=float)
        return k.reshape(k.shape[:-2] + (4,)) @ self.velocity_basis.T

    def _outflow(self, v):
        """Per-cell sum of outgoing face velocity integrals, shape ``(..., ncells)``."""
        pos, neg = np.clip(v, 0, None), np.clip(-v, 0, None)
        flat_p = pos.reshape(-1, pos.shape[-1])
        flat_n = neg.reshape(-1, neg.shape[-1])
        out = np.asarray(self._gather_left @ flat_p.T + self._gather_right @ flat_n.T).T
        return out.reshape(v.shape[:-1] + (self.grid.ncells,))

    def max_stable_dt(self, kappa):
        v = self.face_velocities(kappa)
        out = np.max(self._outflow(np.atleast_2d(v)) / self.areas)
        return np.inf if out == 0 else 1.0 / out

    def check_cfl(self, kappa, dt):
        if dt <= 0:
            raise StepSizeError(f"dt must be positive, got {dt}")
        v = np.atleast_2d(self.face_velocities(kappa))
        c = dt * np.max(self._outflow(v) / self.areas)
        if c > 1.0:
            raise StepSizeError(f"drift CFL violated: courant number {c:.3f} > 1 at dt = {dt}")

    def drift_fluxes(self, values_flat, kappa):
        """Upwind face fluxes of ``kappa R psi``, shape ``(..., nfaces)``."""
        v = self.face_velocities(kappa)
        if v.ndim < values_flat.ndim:
            v = np.broadcast_to(v, values_flat.shape[:-1] + v.shape[-1:])
        return np.where(v > 0, v * values_flat[..., self.left], v * values_flat[..., self.right])

    def _div(self, fluxes):
        return np.asarray(self.divergence @ fluxes.T).T

    # -- implicit diffusion -------------------------------------------------
    def _factor(self, dt):
        key = float(dt)
        lu = self._factor_cache.get(key)
        if lu is None:
            if len(self._factor_cache) > 8:
                self._factor_cache.clear()
            mat = (sp.diags(self.eq_mass) + dt * self.laplacian).tocsc()
            lu = spla.splu(mat)
            self._factor_cache[key] = lu
        return lu

    def advance(self, values, kappa, dt, check=True):
        """Advance cell values ``(..., nr, ntheta)`` by one step.

        ``kappa`` is a single ``(2, 2)`` matrix or one per batch entry.
        """
        values = np.asarray(values, dtype=float)
        shape = values.shape
        n = self.grid.ncells
        flat = values.reshape(-1, n)
        kappa = np.asarray(kappa, dtype=float)
        if kappa.ndim > 2:
            kappa = kappa.reshape(-1, 2, 2)
        if check:
            self.check_cfl(kappa, dt)
        mass = flat * self.areas
        if np.any(kappa):
            mass = mass + dt * self._div(self.drift_fluxes(flat, kappa))
        g = self._factor(dt).solve(np.ascontiguousarray(mass.T))
        out = (g.T * self.eq).reshape(shape)
        if check and out.size:
            scale = max(1.0, float(np.max(np.abs(values))))
            if np.min(out) < -NEGATIVE_TOL * scale:
                raise SchemeViolationError(f"negative density {np.min(out):.3e} after step")
        return out

    def step_operator(self, kappa, dt):
        return StepOperator(self, kappa, dt)

    def step(self, psi: PhaseDensity, kappa, dt) -> PhaseDensity:
        return PhaseDensity(self.advance(psi.values, _kappa_array(kappa), dt), self.grid)

    # -- discrete entropy budget ---------------------------------------------
    def entropy_production(self, values):
        """Dissipation of the discrete diffusion, ``sum c_f dg dlog g`` (>= 0)."""
        g = np.asarray(values, dtype=float).reshape(np.shape(values)[:-2] + (-1,)) / self.eq
        lg = np.log(np.clip(g, 1e-300, None))
        dg = g[..., self.right] - g[..., self.left]
        dl = lg[..., self.right] - lg[..., self.left]
        return np.sum(self.face_weight * dg * dl, axis=-1)

    def drift_work(self, values, kappa):
        """Entropy change rate due to the upwinded drift (the discrete ``kappa : tau``)."""
        flat = np.asarray(values, dtype=float).reshape(np.shape(values)[:-2] + (-1,))
        lg = np.log(np.clip(flat / self.eq, 1e-300, None))
        f = self.drift_fluxes(flat, kappa)
        return np.sum(f * (lg[..., self.right] - lg[..., self.left]), axis=-1)

    # -- steady state -------------------------------------------------------
    def steady_state(self, kappa, tol, initial=None, dt=None, max_iter=200_000):
        """Iterate steps until ``||psi_{n+1} - psi_n||_1 / dt < tol``; mass-1 result."""
        if tol <= 0:
            raise ConfigError("tol must be positive")
        kappa = _kappa_array(kappa)
        if dt is None:
            dt = min(0.05, 0.5 * self.max_stable_dt(kappa))
        if initial is None:
            values = self.eq.reshape(self.grid.shape).copy()
        else:
            values = np.asarray(initial.values if isinstance(initial, PhaseDensity) else initial, dtype=float)
            values = values / np.sum(values * self.grid.cell_areas)
        self.check_cfl(kappa, dt)
        for _ in range(max_iter):
            new = self.advance(values, kappa, dt, check=False)
            change = np.sum(np.abs(new - values) * self.grid.cell_areas) / dt
            values = new
            if change < tol:
                return PhaseDensity(values / np.sum(values * self.grid.cell_areas), self.grid)
        raise ConvergenceError(f"steady state not reached in {max_iter} steps (last change {change:.3e})")


_solvers = {}


def get_solver(grid: ConfigGrid, params: PotentialParams) -> FokkerPlanckSolver:
    key = (grid.nr, grid.ntheta, params.k)
    solver = _solvers.get(key)
    if solver is None:
        solver = _solvers[key] = FokkerPlanckSolver(grid, params)
    return solver


def assemble_step_operator(kappa, dt, grid: ConfigGrid, params: PotentialParams) -> StepOperator:
    """Linear map advancing cell values one step; raises StepSizeError on CFL violation."""
    return get_solver(grid, params).step_operator(kappa, dt)


def step(psi: PhaseDensity, kappa, dt, params: PotentialParams) -> PhaseDensity:
    return get_solver(psi.grid, params).step(psi, kappa, dt)


def steady_state(kappa, tol, grid=None, params=None, **kwargs) -> PhaseDensity:
    grid = grid or build_config_grid(64, 64)
    params = params or PotentialParams()
    return get_solver(grid, params).steady_state(kappa, tol, **kwargs)
