"""Numerical checks of weighted Hardy-type inequalities near ``x = 0``.

All one-dimensional quantities live on ``(0, 1]`` where ``x`` plays the role
of the distance ``1 - |R|`` to the boundary of the configuration disk.  A
profile ``psi`` is sampled on a grid uniform in ``s = log x``; with
``h = sqrt(psi / x^k)`` the dissipation is

    D = int x^k |h'(x)|^2 dx = int x^(k-1) |dh/ds|^2 ds,

so derivatives are centred differences in ``s``.  Integrals are
trapezoidal in ``s`` and the piece on ``(0, x_min)`` is added in closed
form from the local power law of the integrand.  When that power is not
integrable the side is flagged divergent and its truncated value kept.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigGrid, PhaseDensity, PotentialParams, equilibrium_cells, quadrature
from .errors import ConfigError

DEFAULT_X_MIN = 1e-8
DEFAULT_PER_DECADE = 32
LOG_SHIFT = np.e
DIVERGENCE_EXPONENT = 1e-3
TAGS = ("hardy1", "hardy_inter", "hardy_inter2", "hardy_inter_log", "stress_corollary", "wsi")


# -- grids and profiles -----------------------------------------------------------
def graded_grid(x_min=DEFAULT_X_MIN, per_decade=DEFAULT_PER_DECADE):
    """Nodes geometric in ``x`` from ``x_min`` to 1, ``per_decade`` intervals per decade."""
    if not 0 < x_min < 1:
        raise ConfigError(f"x_min must lie in (0, 1), got {x_min}")
    n = int(round(-np.log10(x_min) * per_decade))
    return np.exp(np.linspace(np.log(x_min), 0.0, max(n, 2) + 1))


def refinement_levels(n_levels=4, base_per_decade=8):
    """``(x_min, per_decade)`` pairs: the inner node drops four decades and the density doubles per level."""
    return [(10.0 ** (-4 * (l + 1)), base_per_decade * 2**l) for l in range(n_levels)]


@dataclass
class RadialProfile:
    """Samples of a nonnegative profile on a strictly increasing grid in ``(0, 1]``."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.values.shape or self.x.size < 3:
            raise ConfigError("profile needs matching 1-d x and values with at least 3 nodes")
        if self.x[0] <= 0 or self.x[-1] > 1 or np.any(np.diff(self.x) <= 0):
            raise ConfigError("profile grid must be strictly increasing inside (0, 1]")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ConfigError("profile samples must be finite and nonnegative")

    @classmethod
    def from_function(cls, f, x_min=DEFAULT_X_MIN, per_decade=DEFAULT_PER_DECADE):
        x = graded_grid(x_min, per_decade)
        return cls(x, f(x))

    def scaled(self, c):
        return RadialProfile(self.x, c * self.values)


# -- inequality kinds -----------------------------------------------------------------
@dataclass(frozen=True)
class InequalityKind:
    """Which inequality and its parameters; windows are checked on use."""

    tag: str
    k: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    p: float = 3.0

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ConfigError(f"unknown inequality {self.tag!r}; expected one of {TAGS}")

    def window_violation(self):
        """Text naming the violated condition, or None inside the window."""
        k, b = self.k, self.beta
        if self.tag == "hardy1" and not k > 1:
            return f"hardy1 requires k > 1, got k = {k}"
        if self.tag in ("hardy_inter", "stress_corollary") and not k > 0:
            return f"{self.tag} requires k > 0, got k = {k}"
        if self.tag in ("hardy_inter2", "hardy_inter_log") and not (-1 <= b < k <= 1):
            return f"{self.tag} requires -1 <= beta < k <= 1, got beta = {b}, k = {k}"
        if self.tag == "hardy_inter_log" and not self.gamma >= 0:
            return f"hardy_inter_log requires gamma >= 0, got {self.gamma}"
        if self.tag == "wsi" and not self.p > 2:
            return f"wsi requires p > 2, got p = {self.p}"
        return None

    def check(self, override=False):
        """Raise ConfigError outside the window unless ``override``; returns whether the result is diagnostic only."""
        msg = self.window_violation()
        if msg is None:
            return False
        if not override:
            raise ConfigError(msg + " (pass override=True for a diagnostic-only evaluation)")
        return True


@dataclass
class Sides:
    """Both sides of an inequality (without the constant) plus divergence flags."""

    lhs: float
    rhs: float
    lhs_divergent: bool = False
    rhs_divergent: bool = False
    diagnostic_only: bool = False

    def __iter__(self):
        yield self.lhs
        yield self.rhs

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else 0.0

    @property
    def admissible(self):
        return not self.rhs_divergent


# -- one-dimensional integrals ---------------------------------------------------------
def _log_integral(q, s):
    """``int q ds`` over the grid plus the power-law tail toward ``s = -inf``.

    Returns ``(value, divergent)``.  The tail uses the exponent of ``q``
    between the second and third nodes (the first may carry a one-sided
    derivative); a nonpositive exponent means the integral does not
    converge at ``x = 0``.
    """
    body = float(np.trapezoid(q, s))
    q0, q1, q2 = q[0], q[1], q[2]
    if q0 <= 0 or q1 <= 0 or q2 <= 0:
        return body, False
    slope = (np.log(q2) - np.log(q1)) / (s[2] - s[1])
    if slope <= DIVERGENCE_EXPONENT:
        return body, True
    return body + q0 / slope, False


def _weighted(psi, x, s, weight):
    return _log_integral(psi * weight * x, s)


def _dissipation(psi, x, s, k):
    h = np.sqrt(psi / x**k)
    hs = np.gradient(h, s, edge_order=2)
    return _log_integral(x ** (k - 1.0) * hs**2, s)


def _log_factor(psi, x, k, power):
    if power == 0:
        return np.ones_like(psi)
    return np.log(LOG_SHIFT + psi / x**k) ** power


def evaluate_sides(kind: InequalityKind, profile, k=None, override=False, grid: ConfigGrid | None = None, params: PotentialParams | None = None) -> Sides:
    """Left side and right side without the constant for one profile.

    ``profile`` is a RadialProfile for the one-dimensional kinds and a
    PhaseDensity (with ``params``) for ``stress_corollary`` and ``wsi``.
    ``k`` overrides ``kind.k`` when given.
    """
    if k is not None and k != kind.k:
        kind = InequalityKind(kind.tag, k, kind.beta, kind.gamma, kind.p)
    diagnostic = kind.check(override)
    if kind.tag in ("stress_corollary", "wsi"):
        if not isinstance(profile, PhaseDensity):
            raise ConfigError(f"{kind.tag} is evaluated on a PhaseDensity")
        params = params or PotentialParams(k=kind.k)
        if kind.tag == "wsi":
            lhs, rhs = wsi_sides(profile, kind.p, profile.grid, params)
            return Sides(lhs, rhs, diagnostic_only=diagnostic)
        from .stress import stress_bound_check

        lhs, _, ratio = stress_bound_check(profile, profile.grid, params)
        return Sides(lhs, lhs / ratio if ratio > 0 else 0.0, diagnostic_only=diagnostic)

    if not isinstance(profile, RadialProfile):
        raise ConfigError(f"{kind.tag} is evaluated on a RadialProfile")
    x, psi = profile.x, profile.values
    if not np.any(psi > 0):
        return Sides(0.0, 0.0, diagnostic_only=diagnostic)
    s = np.log(x)
    kk, b, g = kind.k, kind.beta, kind.gamma
    mass, _ = _weighted(psi, x, s, 1.0)
    diss, diss_div = _dissipation(psi, x, s, kk)
    energy = diss + mass
    if kind.tag == "hardy1":
        lhs, div = _weighted(psi, x, s, x**-2.0)
        rhs = energy
    elif kind.tag == "hardy_inter":
        first, div = _weighted(psi, x, s, 1.0 / x)
        lhs = first**2
        rhs = mass * energy
    elif kind.tag == "hardy_inter2":
        lhs, div = _weighted(psi, x, s, x ** -(1.0 + b))
        rhs = mass ** ((1 - b) / 2) * energy ** ((1 + b) / 2)
    else:
        lhs, div = _weighted(psi * _log_factor(psi, x, kk, g), x, s, x ** -(1.0 + b))
        logmass, _ = _weighted(psi * _log_factor(psi, x, kk, 2 * g / (1 - b)), x, s, 1.0)
        rhs = logmass ** ((1 - b) / 2) * energy ** ((1 + b) / 2)
    return Sides(float(lhs), float(rhs), div, diss_div, diagnostic)


# -- families and sweeps ------------------------------------------------------------------
def default_family(k, n_monomials=12):
    """At least twenty profiles: monomials, boundary bumps and oscillating modulations.

    Returns ``[(label, callable), ...]``; every callable maps ``x`` to
    nonnegative samples.
    """
    fam = []
    for a in np.linspace(k / 2, 4 * k, n_monomials):
        fam.append((f"x^{a:.4g}", lambda x, a=a: x**a))
    for w in (0.3, 0.1, 0.03, 0.01, 1e-3):
        fam.append((f"bump(w={w:g})", lambda x, w=w: x**k * np.exp(-x / w)))
    for m in (1, 3, 7):
        fam.append((f"osc(m={m})", lambda x, m=m: x**k * (1.0 + 0.5 * np.sin(2 * np.pi * m * x))))
    fam.append(("x^k(1-x)^2", lambda x: x**k * (1.0 - x) ** 2))
    return fam


def bump_family(k, widths=(0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4)):
    """Profiles ``x^k exp(-x / w)`` concentrating toward ``x = 0`` as ``w`` shrinks."""
    return [(f"bump(w={w:g})", lambda x, w=w: x**k * np.exp(-x / w)) for w in widths]


def monomial_family(k, n=20):
    return [(f"x^{a:.4g}", lambda x, a=a: x**a) for a in np.linspace(k / 2, 4 * k, n)]


def _workers():
    try:
        return max(1, int(os.environ.get("FENE_THREADS", "1")))
    except ValueError:
        raise ConfigError("FENE_THREADS must be a positive integer") from None


@dataclass
class EmpiricalReport:
    kind: InequalityKind
    levels: list
    sups: np.ndarray
    argmax: list
    relative_change: float
    growth: np.ndarray
    divergent: list
    diagnostic_only: bool = False
    details: list = field(default_factory=list, repr=False)

    @property
    def stable(self):
        return bool(np.isfinite(self.relative_change) and self.relative_change <= 0.05)


def empirical_constant(kind: InequalityKind, family, k=None, refinements=None, override=False) -> EmpiricalReport:
    """Sup of ``lhs / rhs`` over admissible members of ``family`` at each refinement level.

    ``family`` is ``[(label, f), ...]`` with ``f(x) >= 0``; members whose
    right side diverges are skipped.  ``relative_change`` compares the two
    finest levels; ``growth`` holds the ratios of consecutive sups.
    """
    if k is not None and k != kind.k:
        kind = InequalityKind(kind.tag, k, kind.beta, kind.gamma, kind.p)
    diagnostic = kind.check(override)
    levels = list(refinements or refinement_levels())
    if len(levels) < 2:
        raise ConfigError("need at least two refinement levels")

    def run(item):
        label, f = item
        return label, [evaluate_sides(kind, RadialProfile.from_function(f, xm, pd), override=override) for xm, pd in levels]

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(run, family))

    sups, argmax, divergent = [], [], []
    for li in range(len(levels)):
        best, who, div = 0.0, None, []
        for label, sides in results:
            sd = sides[li]
            if not sd.admissible:
                continue
            if sd.lhs_divergent:
                div.append(label)
            if sd.ratio > best:
                best, who = sd.ratio, label
        sups.append(best)
        argmax.append(who)
        divergent.append(div)
    sups = np.array(sups)
    change = abs(sups[-1] - sups[-2]) / sups[-2] if sups[-2] > 0 else np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = sups[1:] / sups[:-1]
    return EmpiricalReport(kind, levels, sups, argmax, float(change), growth, divergent, diagnostic, results)


# -- weighted Sobolev inequality on the disk ------------------------------------------------
def wsi_sides(psi, p, grid: ConfigGrid, params: PotentialParams):
    """``(int g^(p/2) psi_inf)^(1/p)`` and ``(int psi_inf |grad sqrt g|^2 + psi)^(1/2)`` with ``g = psi / psi_inf``."""
    from .diagnostics import _grad_sq

    if not p > 2:
        raise ConfigError(f"wsi requires p > 2, got p = {p}")
    values = psi.values if isinstance(psi, PhaseDensity) else np.asarray(psi, dtype=float)
    eq = equilibrium_cells(grid, params)
    g = np.clip(values / eq, 0.0, None)
    lhs = float(quadrature(eq * g ** (p / 2), grid)) ** (1.0 / p)
    mask = g > 0
    diss = float(quadrature(eq * _grad_sq(np.sqrt(g), grid, None if np.all(mask) else mask), grid))
    rhs = (diss + float(quadrature(values, grid))) ** 0.5
    return lhs, rhs


def wsi_family(grid: ConfigGrid, params: PotentialParams, amplitudes=(0.3, 0.6, 0.9), modes=(1, 2, 4)):
    """Perturbations ``psi_inf (1 + a cos(m theta) r^m)`` and radial tilts ``psi_inf (1 + a r^2)``."""
    eq = equilibrium_cells(grid, params)
    r = grid.r_centers[:, None]
    th = grid.theta_centers[None, :]
    out = []
    for a in amplitudes:
        for m in modes:
            out.append((f"cos{m}(a={a})", eq * (1.0 + a * r**m * np.cos(m * th))))
        out.append((f"tilt(a={a})", eq * (1.0 + 4.0 * a * r**2)))
    return out


def wsi_exponent(ps=(2.1, 2.5, 3.0), k=1.0, resolutions=((32, 32), (64, 64)), tol=0.05):
    """Largest ``p`` whose sup ratio over the perturbation family is stable under grid refinement.

    Returns ``(p_best, table)`` where ``table[p] = [sup per resolution]``;
    ``p_best`` is None when no exponent passes.
    """
    from .core import build_config_grid

    params = PotentialParams(k=k)
    table = {}
    for p in ps:
        sups = []
        for nr, nt in resolutions:
            grid = build_config_grid(nr, nt)
            sups.append(max(a / b for a, b in (wsi_sides(v, p, grid, params) for _, v in wsi_family(grid, params))))
        table[p] = sups
    stable = [p for p in ps if abs(table[p][-1] - table[p][-2]) <= tol * table[p][-2]]
    return (max(stable) if stable else None), table
