"""A-priori functionals along trajectories: free energy, dissipation, N2.

Homogeneous states are ``(nr, ntheta)`` arrays; coupled fields carry two
leading spatial axes ``(nx, ny, nr, ntheta)`` and are integrated over the
periodic box with the rectangle rule.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigGrid, PhaseDensity, PotentialParams, equilibrium_cells, quadrature
from .errors import ConfigError

ZERO_CUTOFF = 1e-300
DEFAULT_SHIFT = 8.0


class ReducedAccuracyWarning(UserWarning):
    """Gradient stencil fell back to one-sided differences around empty cells."""


def _values(psi):
    return psi.values if isinstance(psi, PhaseDensity) else np.asarray(psi, dtype=float)


def _xlogx(x):
    out = np.zeros_like(x)
    pos = x > ZERO_CUTOFF
    out[pos] = x[pos] * np.log(x[pos])
    return out


def _space_integral(per_point, spatial):
    per_point = np.asarray(per_point, dtype=float)
    if spatial is None:
        return float(np.sum(per_point)) if per_point.ndim else float(per_point)
    return float(np.sum(per_point)) * spatial.cell_area


# -- gradients on the polar grid -------------------------------------------------
def _radial_derivative(f, dr):
    d = np.empty_like(f)
    d[..., 1:-1, :] = (f[..., 2:, :] - f[..., :-2, :]) / (2 * dr)
    d[..., 0, :] = (-3 * f[..., 0, :] + 4 * f[..., 1, :] - f[..., 2, :]) / (2 * dr)
    d[..., -1, :] = (3 * f[..., -1, :] - 4 * f[..., -2, :] + f[..., -3, :]) / (2 * dr)
    return d


def _masked_derivative(f, mask, axis, spacing, periodic):
    """Centred difference where both neighbours are valid, one-sided otherwise, zero if isolated."""
    fwd_f = np.roll(f, -1, axis=axis)
    bwd_f = np.roll(f, 1, axis=axis)
    fwd_m = np.roll(mask, -1, axis=axis)
    bwd_m = np.roll(mask, 1, axis=axis)
    if not periodic:
        idx = [slice(None)] * f.ndim
        idx[axis] = -1
        fwd_m[tuple(idx)] = False
        idx[axis] = 0
        bwd_m[tuple(idx)] = False
    both = fwd_m & bwd_m
    d = np.zeros_like(f)
    d = np.where(both, (fwd_f - bwd_f) / (2 * spacing), d)
    d = np.where(fwd_m & ~bwd_m, (fwd_f - f) / spacing, d)
    d = np.where(bwd_m & ~fwd_m, (f - bwd_f) / spacing, d)
    return np.where(mask, d, 0.0)


def _grad_sq(f, grid: ConfigGrid, mask=None):
    """``|grad f|^2`` per cell for ``f`` of shape ``(..., nr, ntheta)``.

    Centred differences in ``r`` and ``theta`` with second-order one-sided
    closure on the innermost and outermost rings.  Where ``mask`` is False
    the cell is skipped and its neighbours fall back to one-sided
    differences; a ReducedAccuracyWarning is issued.
    """
    f = np.asarray(f, dtype=float)
    r = grid.r_centers[:, None]
    if mask is None or np.all(mask):
        fr = _radial_derivative(f, grid.dr)
        ft = (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * grid.dtheta)
        return fr**2 + (ft / r) ** 2
    mask = np.broadcast_to(mask, f.shape)
    warnings.warn("zero cells present; gradient uses one-sided differences there", ReducedAccuracyWarning, stacklevel=3)
    fr = _masked_derivative(f, mask, -2, grid.dr, periodic=False)
    ft = _masked_derivative(f, mask, -1, grid.dtheta, periodic=True)
    return fr**2 + (ft / r) ** 2


# -- free energy ----------------------------------------------------------------
def relative_entropy(psi, grid: ConfigGrid, params: PotentialParams, reference="density", spatial=None):
    """``int psi log(psi / (rho psi_inf)) - psi + rho psi_inf`` (``reference="density"``).

    With ``reference="equilibrium"`` the comparison density is ``psi_inf``
    itself.  Summed over spatial points when ``spatial`` is given.
    """
    values = _values(psi)
    eq = equilibrium_cells(grid, params)
    if reference == "density":
        rho = quadrature(values, grid)[..., None, None]
    elif reference == "equilibrium":
        rho = np.ones(values.shape[:-2] + (1, 1))
    else:
        raise ConfigError(f"unknown entropy reference {reference!r}")
    ref = rho * eq
    x = np.where(ref > 0, values / np.where(ref > 0, ref, 1.0), 0.0)
    integrand = ref * (_xlogx(x) - x + 1.0)
    return _space_integral(quadrature(integrand, grid), spatial)


def free_energy(psi, grid: ConfigGrid, params: PotentialParams, macro=None, spatial=None, reference="density"):
    """Relative entropy plus kinetic energy ``int |u|^2 / 2``.

    Homogeneous densities take no ``macro``; for coupled fields pass the
    MacroState (its grid is used for the spatial integral).
    """
    from .macro_flow import kinetic_energy

    if macro is not None and spatial is None:
        spatial = macro.grid
    out = relative_entropy(psi, grid, params, reference, spatial)
    if macro is not None:
        out += kinetic_energy(macro)
    return out


def entropy_dissipation(psi, grid: ConfigGrid, params: PotentialParams, spatial=None):
    """``4 int psi_inf |grad sqrt(psi / psi_inf)|^2``, from centred differences."""
    values = _values(psi)
    eq = equilibrium_cells(grid, params)
    g = values / eq
    mask = g > ZERO_CUTOFF
    gs = _grad_sq(np.sqrt(np.clip(g, 0.0, None)), grid, None if np.all(mask) else mask)
    return _space_integral(4.0 * quadrature(eq * gs, grid), spatial)


def scheme_dissipation(psi, grid: ConfigGrid, params: PotentialParams, spatial=None):
    """The same dissipation as the Fokker-Planck diffusion matrix sees it.

    ``sum_f c_f (g_R - g_L)(log g_R - log g_L)``, the discrete counterpart of
    ``int psi_inf grad g . grad log g``; this is what a step removes from the
    relative entropy, so balance residuals built on it are not polluted by
    the spatial error of the gradient stencil.
    """
    from .fokker_planck import get_solver

    values = _values(psi)
    return _space_integral(get_solver(grid, params).entropy_production(values), spatial)


def scheme_work(psi, kappa, grid: ConfigGrid, params: PotentialParams):
    """Entropy supplied by the upwinded drift, the discrete ``kappa : tau``."""
    from .fokker_planck import get_solver

    return float(np.sum(get_solver(grid, params).drift_work(_values(psi), kappa)))


# -- shifted density and N2 -------------------------------------------------------
def shift_positivity_margin(a, samples=400):
    """Smallest value of the two brackets that must stay nonnegative for the shift ``a``.

    Both are functions of ``lam >= sqrt(a)`` and a ratio ``lam' / lam >= 1``;
    they are scanned on logarithmic grids.  A negative return means ``a`` is
    too small for the log-squared dissipation to control gradient defects.
    """
    lam = np.sqrt(a) * np.geomspace(1.0, 1e6, samples)[:, None]
    eps = np.geomspace(1e-6, 1e6, samples)[None, :]
    q = np.sqrt(1.0 + np.log1p(eps) / np.log(lam))
    first = 1.0 + eps + 1.0 / (1.0 + eps) + 2.0 - 2.0 * q - 2.0 / q
    ratio = (1.0 + eps) * q**2
    third = ratio + 1.0 / ratio + 2.0 - 2.0 * q - 2.0 / q
    return float(min(first.min(), third.min()))


@dataclass
class ShiftedDensity:
    """``psi + a psi_inf`` for a shift ``a > 1``, bounded below by ``a psi_inf``."""

    values: np.ndarray
    grid: ConfigGrid
    params: PotentialParams
    a: float = DEFAULT_SHIFT

    def __post_init__(self):
        if not self.a > 1:
            raise ConfigError(f"shift must satisfy a > 1, got {self.a}")
        psi = _values(self.values)
        if np.min(psi) < 0:
            raise ConfigError("density must be nonnegative")
        self.values = psi + self.a * equilibrium_cells(self.grid, self.params)
        if shift_positivity_margin(self.a) < -1e-12:
            warnings.warn(f"shift a = {self.a} is below the size the log-squared estimate needs", RuntimeWarning, stacklevel=2)

    @property
    def ratio(self):
        return self.values / equilibrium_cells(self.grid, self.params)


def _n2_integrand(x):
    lx = np.log(x)
    return x * (lx**2 - 2.0 * lx + 2.0)


def n2_norm(psi, a, grid: ConfigGrid, params: PotentialParams):
    """``sqrt(int psi~ [log^2(psi~/psi_inf) - 2 log(psi~/psi_inf) + 2])`` per spatial point."""
    shifted = ShiftedDensity(_values(psi), grid, params, a)
    eq = equilibrium_cells(grid, params)
    return np.sqrt(quadrature(eq * _n2_integrand(shifted.ratio), grid))


def n1_norm(psi, a, grid: ConfigGrid, params: PotentialParams):
    """``int psi~ log(psi~ / psi_inf)`` per spatial point."""
    shifted = ShiftedDensity(_values(psi), grid, params, a)
    x = shifted.ratio
    return quadrature(equilibrium_cells(grid, params) * x * np.log(x), grid)


def log_weighted_dissipation(psi, a, grid: ConfigGrid, params: PotentialParams):
    """``int psi_inf |grad sqrt(psi~/psi_inf)|^2 log(psi~/psi_inf)`` per spatial point."""
    shifted = ShiftedDensity(_values(psi), grid, params, a)
    x = shifted.ratio
    eq = equilibrium_cells(grid, params)
    return quadrature(eq * _grad_sq(np.sqrt(x), grid) * np.log(x), grid)


# -- ledgers --------------------------------------------------------------------
LEDGER_COLUMNS = ("t", "free_energy", "kinetic", "rel_entropy", "diss_u", "diss_psi", "n1", "n2", "residual")


@dataclass
class DiagnosticsLedger:
    """Time series of the free-energy budget, one row per record.

    ``work`` holds the energy injected by an imposed flow (zero for closed
    coupled runs).  ``residual`` of row ``n + 1`` compares the change of the
    free energy with the trapezoidal average of ``dissipation - work``.
    """

    a: float = DEFAULT_SHIFT
    rows: list = field(default_factory=list)
    work: list = field(default_factory=list)

    def record(self, t, rel_entropy, kinetic=0.0, diss_u=0.0, diss_psi=0.0, n1=0.0, n2=0.0, work=0.0):
        if diss_u < 0 or diss_psi < -1e-14 * max(1.0, abs(rel_entropy)):
            raise ConfigError("dissipation must be nonnegative")
        row = dict(t=float(t), free_energy=float(rel_entropy + kinetic), kinetic=float(kinetic), rel_entropy=float(rel_entropy),
                   diss_u=float(diss_u), diss_psi=float(max(diss_psi, 0.0)), n1=float(n1), n2=float(n2), residual=0.0)
        if self.rows:
            row["residual"] = balance_residual(self.rows[-1], row, self.work[-1], work)
        self.rows.append(row)
        self.work.append(float(work))
        return row

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)


def balance_residual(prev, cur, work_prev=0.0, work_cur=0.0):
    """``|F_{n+1} - F_n + dt (D_u + D_psi - W)|`` with trapezoidal rates between two rows."""
    dt = cur["t"] - prev["t"]
    if dt <= 0:
        raise ConfigError("ledger records must be strictly increasing in time")
    rate = 0.5 * (prev["diss_u"] + prev["diss_psi"] - work_prev + cur["diss_u"] + cur["diss_psi"] - work_cur)
    return abs(cur["free_energy"] - prev["free_energy"] + dt * rate)


def homogeneous_record(ledger: DiagnosticsLedger, t, psi, grid, params, kappa=None):
    """Append the state of a single-point run, using the scheme's own dissipation and work."""
    values = _values(psi)
    work = 0.0 if kappa is None or not np.any(kappa) else scheme_work(values, kappa, grid, params)
    return ledger.record(
        t,
        relative_entropy(values, grid, params),
        diss_psi=scheme_dissipation(values, grid, params),
        n1=float(n1_norm(values, ledger.a, grid, params)),
        n2=float(n2_norm(values, ledger.a, grid, params)),
        work=work,
    )


def coupled_record(ledger: DiagnosticsLedger, t, field_values, macro, grid, params, protocol=None):
    """Append the state of a coupled run; the closed system injects no work."""
    from .macro_flow import kinetic_energy, viscous_dissipation

    spatial = macro.grid
    values = _values(field_values)
    return ledger.record(
        t,
        relative_entropy(values, grid, params, spatial=spatial),
        kinetic=kinetic_energy(macro),
        diss_u=viscous_dissipation(macro, params, protocol),
        diss_psi=scheme_dissipation(values, grid, params, spatial=spatial),
        n1=_space_integral(n1_norm(values, ledger.a, grid, params), spatial),
        n2=_space_integral(n2_norm(values, ledger.a, grid, params), spatial),
    )


@dataclass
class Log2Report:
    times: np.ndarray
    n2: np.ndarray
    dissipation_integral: np.ndarray
    lhs: np.ndarray
    forcing_integral: np.ndarray
    fitted_constant: float
    bounded: bool
    monotone: bool


def log2_ledger_check(times, snapshots, a, grid: ConfigGrid, params: PotentialParams, grad_u_sq=None, spatial=None, monotone_tol=1e-10):
    """Track ``N2(t) + int_0^t J / N2`` against ``N2(0) + C int_0^t |grad u|^2``.

    ``snapshots`` are densities at ``times`` (homogeneous or fields);
    ``grad_u_sq`` gives ``int |grad u|^2`` at each time (``|kappa|^2`` for an
    imposed flow, zero for relaxation).  ``C`` is fitted as the smallest
    constant for which the bound holds on the recorded trajectory, so the
    report is a measurement rather than a check of a known constant.
    """
    times = np.asarray(times, dtype=float)
    n = len(times)
    if n < 1 or len(snapshots) != n:
        raise ConfigError("need one snapshot per time")
    n2 = np.empty(n)
    rate = np.empty(n)
    for i, s in enumerate(snapshots):
        v = _values(s)
        n2_pt = n2_norm(v, a, grid, params)
        j_pt = log_weighted_dissipation(v, a, grid, params)
        n2[i] = _space_integral(n2_pt, spatial)
        rate[i] = _space_integral(j_pt / n2_pt, spatial)
    dts = np.diff(times)
    diss_int = np.concatenate([[0.0], np.cumsum(0.5 * dts * (rate[1:] + rate[:-1]))])
    lhs = n2 + diss_int
    g = np.zeros(n) if grad_u_sq is None else np.broadcast_to(np.asarray(grad_u_sq, dtype=float), (n,))
    forcing = np.concatenate([[0.0], np.cumsum(0.5 * dts * (g[1:] + g[:-1]))])
    excess = lhs - lhs[0]
    driven = forcing > 0
    fitted = float(np.max(excess[driven] / forcing[driven])) if np.any(driven) else 0.0
    fitted = max(fitted, 0.0)
    bound = lhs[0] + fitted * forcing
    bounded = bool(np.all(lhs <= bound + 1e-12 * (1 + np.abs(bound))))
    monotone = bool(np.all(np.diff(n2) <= monotone_tol))
    return Log2Report(times, n2, diss_int, lhs, forcing, fitted, bounded, monotone)
