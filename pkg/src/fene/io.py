"""Run configuration, CSV time series and binary checkpoints.

Config files are flat ``key = value`` lines with ``#`` comments.  CSVs use
17 significant digits so every float64 round-trips, and ``\\n`` line ends.

Checkpoint layout (all little-endian)::

    b"FENE1"
    u32 nr, u32 ntheta, u32 nx, u32 ny
    f64 psi      (nr, ntheta) if nx == ny == 0, else (nx, ny, nr, ntheta)
    f64 time
    f64 uhat     only if nx > 0: (2, nx, ny // 2 + 1) complex as (re, im) pairs
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .core import MIN_CELLS, PotentialParams
from .errors import ConfigError, FormatError
from .macro_flow import KINDS, FlowProtocol, MacroState, build_spectral_grid

MODES = ("simulate", "bd-oracle", "validate-inequalities", "diagnose")
INITS = ("equilibrium", "random", "taylor_green")
MAGIC = b"FENE1"
CSV_HEADER = ("t", "free_energy", "kinetic", "rel_entropy", "diss_u", "diss_psi", "n1", "n2", "residual")
U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RunSpec:
    """Everything a run needs; ``nx = ny = 0`` selects a single-point (homogeneous) run."""

    mode: str
    k: float = 1.0
    nu: float = 1.0
    a: float = 8.0
    nr: int = 64
    ntheta: int = 64
    nx: int = 0
    ny: int = 0
    dt: float = 1e-3
    T: float = 1.0
    record_every: int = 1
    seed: int = 0
    protocol: str = "steady_shear"
    rate: float = 0.0
    omega: float = 0.0
    hyper_strength: float = 0.0
    hyper_exponent: int = 1
    paths: int = 10000
    init: str = "equilibrium"
    checkpoint: str = ""
    out: str = "."

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.params  # validates k and nu
        if not self.a > 1:
            raise ConfigError(f"a must satisfy a > 1, got {self.a}")
        if self.nr < MIN_CELLS or self.ntheta < MIN_CELLS:
            raise ConfigError(f"nr and ntheta must be >= {MIN_CELLS}")
        if (self.nx == 0) != (self.ny == 0):
            raise ConfigError("nx and ny must both be 0 (homogeneous) or both positive")
        if self.nx and (self.nx < 4 or self.ny < 4 or self.nx % 2 or self.ny % 2):
            raise ConfigError("nx and ny must be even and >= 4")
        if self.nx and self.protocol != "coupled":
            raise ConfigError("a spatial grid (nx, ny > 0) requires protocol = coupled")
        if not self.nx and self.protocol == "coupled" and self.mode == "simulate":
            raise ConfigError("protocol = coupled requires nx, ny > 0")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must satisfy dt > 0, got {self.dt}")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ConfigError(f"T must satisfy T > 0, got {self.T}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if not 0 <= self.seed <= U64_MAX:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.paths < 2:
            raise ConfigError("paths must be >= 2")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}, got {self.init!r}")
        if self.mode == "diagnose" and not self.checkpoint:
            raise ConfigError("diagnose needs a checkpoint path")
        self.flow

    @property
    def params(self):
        return PotentialParams(k=self.k, nu=self.nu)

    @property
    def flow(self):
        return FlowProtocol(self.protocol, self.rate, self.omega, self.hyper_strength, self.hyper_exponent)

    @property
    def nsteps(self):
        return int(round(self.T / self.dt))


_TYPES = {f.name: f.type for f in fields(RunSpec)}


def _convert(key, raw, lineno):
    kind = _TYPES[key]
    try:
        if kind == "int":
            v = int(raw, 0)
        elif kind == "float":
            v = float(raw)
        else:
            return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot read {key} = {raw!r} as {kind}") from None
    return v


def parse_config(text) -> RunSpec:
    """Parse ``key = value`` lines; unknown keys and repeats are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: {key} given twice")
        values[key] = _convert(key, raw, lineno)
    if "mode" not in values:
        raise ConfigError("mode is mandatory")
    return RunSpec(**values)


def serialize(spec: RunSpec) -> str:
    """Inverse of parse_config; floats in shortest round-trip form."""
    return "".join(f"{f.name} = {getattr(spec, f.name)!r}\n" if f.type == "float" else f"{f.name} = {getattr(spec, f.name)}\n" for f in fields(spec))


# -- CSV ------------------------------------------------------------------------
def format_float(v):
    return f"{float(v):.17g}"


def write_csv(rows, header, path):
    """Write rows (mappings or sequences) under ``header`` with 17-digit floats."""
    lines = [",".join(header)]
    for row in rows:
        vals = [row[h] for h in header] if isinstance(row, dict) else list(row)
        lines.append(",".join(v if isinstance(v, str) else format_float(v) for v in vals))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_timeseries(ledger, path):
    """Free-energy ledger to CSV under the fixed column header."""
    rows = getattr(ledger, "rows", ledger)
    if not rows:
        raise ConfigError("ledger is empty")
    write_csv(rows, CSV_HEADER, path)


def read_csv(path):
    """Header tuple and float array of a CSV written here."""
    with open(path) as fh:
        header = tuple(fh.readline().rstrip("\n").split(","))
        data = [[float(v) for v in line.rstrip("\n").split(",")] for line in fh if line.strip()]
    return header, np.array(data)


# -- checkpoints --------------------------------------------------------------------
def checkpoint_write(psi_field, macro, path, time=None):
    """Binary checkpoint of a density (field) and optional MacroState."""
    psi = np.ascontiguousarray(psi_field, dtype="<f8")
    if macro is None:
        if psi.ndim != 2:
            raise FormatError("a homogeneous checkpoint stores a (nr, ntheta) density")
        nx = ny = 0
        nr, nt = psi.shape
        t = 0.0 if time is None else float(time)
    else:
        if psi.ndim != 4:
            raise FormatError("a coupled checkpoint stores a (nx, ny, nr, ntheta) field")
        nx, ny, nr, nt = psi.shape
        if (nx, ny) != macro.grid.shape:
            raise FormatError(f"field spatial shape {(nx, ny)} does not match velocity grid {macro.grid.shape}")
        t = float(macro.time) if time is None else float(time)
    parts = [MAGIC, struct.pack("<4I", nr, nt, nx, ny), psi.tobytes(), struct.pack("<d", t)]
    if macro is not None:
        uh = np.ascontiguousarray(macro.uhat, dtype="<c16")
        parts.append(uh.view("<f8").tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def checkpoint_read(path, expect=None):
    """Return ``(psi, macro_or_None, time)``; ``expect`` = (nr, ntheta, nx, ny) to cross-check."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(MAGIC) + 16
    if len(blob) < head or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a FENE1 checkpoint")
    nr, nt, nx, ny = struct.unpack("<4I", blob[len(MAGIC) : head])
    if expect is not None and tuple(expect) != (nr, nt, nx, ny):
        raise FormatError(f"{path}: checkpoint dims (nr, ntheta, nx, ny) = {(nr, nt, nx, ny)} but run expects {tuple(expect)}")
    if (nx == 0) != (ny == 0):
        raise FormatError(f"{path}: inconsistent spatial dims {(nx, ny)}")
    npsi = nr * nt * (nx * ny if nx else 1)
    nu = 2 * nx * (ny // 2 + 1) * 2 if nx else 0
    need = head + 8 * (npsi + 1 + nu)
    if len(blob) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(blob)}")
    off = head
    psi = np.frombuffer(blob, "<f8", npsi, off).astype(float)
    off += 8 * npsi
    (t,) = struct.unpack("<d", blob[off : off + 8])
    off += 8
    if not nx:
        return psi.reshape(nr, nt), None, t
    psi = psi.reshape(nx, ny, nr, nt)
    flat = np.frombuffer(blob, "<f8", nu, off)
    uhat = flat.view("<c16").reshape(2, nx, ny // 2 + 1).astype(complex)
    return psi, MacroState(uhat, build_spectral_grid(nx, ny), t), t
