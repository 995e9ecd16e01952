import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fene import diagnostics as dg
from fene.core import equilibrium_cells
from fene.errors import ConfigError, FormatError
from fene.io import CSV_HEADER, RunSpec, checkpoint_read, checkpoint_write, parse_config, read_csv, serialize, write_timeseries
from fene.macro_flow import MacroState, build_spectral_grid

GOLDEN_HEADER = "t,free_energy,kinetic,rel_entropy,diss_u,diss_psi,n1,n2,residual"


def test_empty_config_needs_mode():
    with pytest.raises(ConfigError, match="mode"):
        parse_config("")


def test_defaults_and_override():
    spec = parse_config("mode = simulate\nk = 2  # stiffer\n\n")
    assert spec.k == 2.0
    assert (spec.nu, spec.a, spec.nr, spec.ntheta, spec.dt) == (1.0, 8.0, 64, 64, 1e-3)


@pytest.mark.parametrize(
    "text, match",
    [
        ("mode = simulate\nk = -1", "k > 0"),
        ("mode = simulate\nfoo = 1", "line 2.*unknown key"),
        ("mode = simulate\nk = 1\nk = 2", "line 3.*twice"),
        ("mode = simulate\nnr", "line 2"),
        ("mode = simulate\nnr = many", "line 2.*nr"),
        ("mode = fly", "mode"),
        ("mode = simulate\ndt = 0", "dt > 0"),
        ("mode = simulate\na = 1", "a > 1"),
        ("mode = simulate\nnx = 8", "nx and ny"),
        ("mode = diagnose", "checkpoint"),
        ("mode = simulate\nprotocol = couette", "protocol"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


specs = st.builds(
    RunSpec,
    mode=st.sampled_from(["simulate", "bd-oracle", "validate-inequalities"]),
    k=st.floats(0.05, 10),
    nu=st.floats(1e-3, 10),
    a=st.floats(1.01, 100),
    nr=st.integers(4, 256),
    ntheta=st.integers(4, 256),
    dt=st.floats(1e-6, 1),
    T=st.floats(1e-3, 100),
    record_every=st.integers(1, 100),
    seed=st.integers(0, 2**64 - 1),
    protocol=st.sampled_from(["steady_shear", "planar_extension", "time_periodic_shear"]),
    rate=st.floats(-5, 5),
    omega=st.floats(0, 10),
    paths=st.integers(2, 10**6),
    out=st.text("abc/_.", min_size=1, max_size=12),
)


@settings(max_examples=100)
@given(spec=specs)
def test_serialize_round_trip(spec):
    assert parse_config(serialize(spec)) == spec


def test_csv_header_and_equilibrium_row(tmp_path, grid32, params):
    ledger = dg.DiagnosticsLedger()
    dg.homogeneous_record(ledger, 0.0, equilibrium_cells(grid32, params), grid32, params)
    path = tmp_path / "ts.csv"
    write_timeseries(ledger, path)
    lines = path.read_bytes().split(b"\n")
    assert lines[0].decode() == GOLDEN_HEADER == ",".join(CSV_HEADER)
    assert lines[-1] == b"" and len(lines) == 3
    header, data = read_csv(path)
    assert data.shape == (1, 9) and abs(data[0, 1]) < 1e-14
    with pytest.raises(ConfigError):
        write_timeseries(dg.DiagnosticsLedger(), path)


def test_csv_round_trips_floats(tmp_path):
    ledger = dg.DiagnosticsLedger()
    rng = np.random.default_rng(0)
    for i in range(5):
        ledger.record(0.1 * (i + 1) / 3, *rng.random(6))
    path = tmp_path / "ts.csv"
    write_timeseries(ledger, path)
    _, data = read_csv(path)
    for name in CSV_HEADER:
        assert np.array_equal(data[:, CSV_HEADER.index(name)], ledger.column(name))


def test_write_error_names_path(tmp_path):
    ledger = dg.DiagnosticsLedger()
    ledger.record(0.0, 0.0)
    bad = tmp_path / "missing" / "ts.csv"
    with pytest.raises(OSError, match="missing"):
        write_timeseries(ledger, bad)


def test_homogeneous_checkpoint_round_trip(tmp_path):
    psi = np.random.default_rng(1).random((8, 12))
    path = tmp_path / "s.fene"
    checkpoint_write(psi, None, path, time=0.3)
    out, macro, t = checkpoint_read(path)
    assert macro is None and t == 0.3 and out.tobytes() == psi.tobytes()
    assert path.read_bytes()[:5] == b"FENE1"


def test_coupled_checkpoint_round_trip(tmp_path):
    spatial = build_spectral_grid(8, 6)
    rng = np.random.default_rng(2)
    macro = MacroState.from_velocity(rng.standard_normal((2, 8, 6)), spatial, time=1.25)
    psi = rng.random((8, 6, 4, 5))
    path = tmp_path / "c.fene"
    checkpoint_write(psi, macro, path)
    out, m2, t = checkpoint_read(path, expect=(4, 5, 8, 6))
    assert t == 1.25 and out.tobytes() == psi.tobytes()
    assert m2.uhat.tobytes() == macro.uhat.tobytes()
    checkpoint_write(out, m2, tmp_path / "d.fene")
    assert (tmp_path / "d.fene").read_bytes() == path.read_bytes()


def test_checkpoint_format_errors(tmp_path):
    psi = np.ones((4, 4))
    path = tmp_path / "s.fene"
    checkpoint_write(psi, None, path)
    blob = path.read_bytes()
    (tmp_path / "trunc.fene").write_bytes(blob[:-3])
    with pytest.raises(FormatError, match="bytes"):
        checkpoint_read(tmp_path / "trunc.fene")
    (tmp_path / "magic.fene").write_bytes(b"XENE1" + blob[5:])
    with pytest.raises(FormatError, match="FENE1"):
        checkpoint_read(tmp_path / "magic.fene")
    with pytest.raises(FormatError, match=r"\(4, 4, 0, 0\).*\(8, 8, 0, 0\)"):
        checkpoint_read(path, expect=(8, 8, 0, 0))
    with pytest.raises(FormatError):
        checkpoint_write(np.ones((2, 4, 4)), None, path)
