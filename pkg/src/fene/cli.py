"""``fene <mode> --config <path> [--out <dir>] [--seed <u64>]``.

Exit status 0 on success, 1 for usage or configuration errors, 2 when a
solver reports a numerical failure.  ``FENE_THREADS`` caps the worker pool
used by inequality sweeps.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import diagnostics as dg
from .core import build_config_grid, equilibrium_cells, quadrature
from .errors import ConfigError, FeneError, FormatError, NumericalFailure
from .fokker_planck import get_solver
from .io import MODES, checkpoint_read, checkpoint_write, parse_config, write_csv, write_timeseries
from .macro_flow import CoupledSystem, MacroState, build_spectral_grid, protocol_kappa

BD_HEADER = ("t", "tau11", "tau12", "tau22", "se11", "se12", "se22")
INEQ_HEADER = ("kind", "k", "beta", "gamma", "level", "x_min", "per_decade", "sup", "argmax", "relative_change", "diagnostic_only")


def _random_density(spec, grid, rng, shape=()):
    eq = equilibrium_cells(grid, spec.params)
    v = eq * (0.2 + rng.random(shape + grid.shape))
    return v / quadrature(v, grid)[..., None, None]


def initial_state(spec):
    """``(psi, macro)`` at ``t = 0``; ``macro`` is None for single-point runs."""
    grid = build_config_grid(spec.nr, spec.ntheta)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    eq = equilibrium_cells(grid, spec.params)
    if not spec.nx:
        psi = eq.copy() if spec.init == "equilibrium" else _random_density(spec, grid, rng)
        return psi, None
    spatial = build_spectral_grid(spec.nx, spec.ny)
    if spec.init == "random":
        psi = _random_density(spec, grid, rng, spatial.shape)
    else:
        psi = np.broadcast_to(eq, spatial.shape + grid.shape).copy()
    if spec.init == "taylor_green":
        x, y = spatial.coordinates()
        macro = MacroState.from_velocity(np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]), spatial)
    else:
        macro = MacroState.zeros(spatial)
    return psi, macro


def run_simulation(spec, psi=None, macro=None, t0=0.0):
    """Integrate the configured run; returns ``(ledger, psi, macro, t)``."""
    grid = build_config_grid(spec.nr, spec.ntheta)
    params = spec.params
    if psi is None:
        psi, macro = initial_state(spec)
    ledger = dg.DiagnosticsLedger(spec.a)
    t = t0
    if macro is None:
        solver = get_solver(grid, params)
        kappa = protocol_kappa(spec.flow, t).kappa
        dg.homogeneous_record(ledger, t, psi, grid, params, kappa)
        for n in range(1, spec.nsteps + 1):
            psi = solver.advance(psi, kappa, spec.dt)
            t = t0 + n * spec.dt
            kappa = protocol_kappa(spec.flow, t).kappa
            if n % spec.record_every == 0 or n == spec.nsteps:
                dg.homogeneous_record(ledger, t, psi, grid, params, kappa)
        return ledger, psi, None, t
    system = CoupledSystem(macro.grid, grid, params, spec.flow)
    dg.coupled_record(ledger, t, psi, macro, grid, params, spec.flow)
    for n in range(1, spec.nsteps + 1):
        macro, psi = system.step(macro, psi, spec.dt)
        t = t0 + n * spec.dt
        if n % spec.record_every == 0 or n == spec.nsteps:
            dg.coupled_record(ledger, t, psi, macro, grid, params, spec.flow)
    return ledger, psi, macro, t


def run_bd(spec):
    from .stochastic_oracle import bd_run

    recs = bd_run(spec.flow, spec.paths, spec.T, spec.dt, spec.seed, spec.params, record_every=spec.record_every)
    return [(t, tau.tau[0, 0], tau.tau[0, 1], tau.tau[1, 1], se[0, 0], se[0, 1], se[1, 1]) for t, tau, se in recs]


def inequality_table(spec):
    """Empirical-constant rows for every kind in its window (``k`` from the config where it applies)."""
    from .inequality_lab import InequalityKind, default_family, empirical_constant

    kinds = [
        InequalityKind("hardy1", max(spec.k, 1.5)),
        InequalityKind("hardy_inter", spec.k),
        InequalityKind("hardy_inter2", 1.0, 0.5),
        InequalityKind("hardy_inter2", 0.8, 0.3),
        InequalityKind("hardy_inter_log", 1.0, 0.5, 0.5),
        InequalityKind("hardy_inter_log", 1.0, 0.5, 1.0),
    ]
    rows = []
    for kind in kinds:
        rep = empirical_constant(kind, default_family(kind.k))
        for i, ((xm, pd), sup) in enumerate(zip(rep.levels, rep.sups)):
            rows.append((kind.tag, kind.k, kind.beta, kind.gamma, float(i), xm, float(pd), sup, str(rep.argmax[i]), rep.relative_change, str(rep.diagnostic_only)))
    return rows


def diagnose(spec):
    """Ledger row for a stored state."""
    grid = build_config_grid(spec.nr, spec.ntheta)
    expect = (spec.nr, spec.ntheta, spec.nx, spec.ny)
    psi, macro, t = checkpoint_read(spec.checkpoint, expect=expect)
    ledger = dg.DiagnosticsLedger(spec.a)
    if macro is None:
        dg.homogeneous_record(ledger, t, psi, grid, spec.params, protocol_kappa(spec.flow, t).kappa)
    else:
        dg.coupled_record(ledger, t, psi, macro, grid, spec.params, spec.flow)
    return ledger


def execute(spec, out):
    os.makedirs(out, exist_ok=True)
    if spec.mode == "simulate":
        ledger, psi, macro, t = run_simulation(spec)
        write_timeseries(ledger, os.path.join(out, "timeseries.csv"))
        checkpoint_write(psi, macro, os.path.join(out, "state.fene"), time=t)
    elif spec.mode == "bd-oracle":
        write_csv(run_bd(spec), BD_HEADER, os.path.join(out, "bd_stress.csv"))
    elif spec.mode == "validate-inequalities":
        write_csv(inequality_table(spec), INEQ_HEADER, os.path.join(out, "inequalities.csv"))
    else:
        write_timeseries(diagnose(spec), os.path.join(out, "diagnostics.csv"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def main(argv=None):
    parser = _Parser(prog="fene", description="FENE micro-macro simulator and checks")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out")
    parser.add_argument("--seed", type=int)
    try:
        args = parser.parse_args(argv)
        with open(args.config) as fh:
            spec = parse_config(fh.read())
        if spec.mode != args.mode:
            raise ConfigError(f"command line asks for {args.mode!r} but the config sets mode = {spec.mode!r}")
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
        execute(spec, args.out or spec.out)
    except NumericalFailure as exc:
        print(f"fene: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, FormatError, FeneError, OSError) as exc:
        print(f"fene: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
