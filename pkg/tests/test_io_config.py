"""Snapshot format, CSV output and the run configuration grammar."""

from fractions import Fraction
from pathlib import Path
import struct

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from stressdiff import GridSpec, ParseError, State, ValidationError, equilibrium_b, seeded_random
from stressdiff import io
from stressdiff.config import DEFAULTS, OUTPUT_ROOT_ENV, config_from_dict, dump_config, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestSnapshots:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_round_trip_bits(self, tmp_path, dim):
        s = seeded_random(GridSpec(dim, 8), dim, time=0.123456789)
        path = tmp_path / "s.sdf"
        io.write_state(path, s)
        back = io.read_state(path)
        assert back.time == s.time
        for a, b in ((s.rho, back.rho), (s.u, back.u), (s.b, back.b)):
            assert a.tobytes() == b.tobytes()

    def test_special_values(self):
        a = np.array([0.0, -0.0, 5e-324, 1.7976931348623157e308, np.inf, np.nan, 1 / 3, -2.5])
        ((name, time, back),) = io.decode_fields(io.encode_field("x", a, 1.5))
        assert name == "x" and time == 1.5
        assert a.tobytes() == back.tobytes()

    def test_header_layout(self):
        data = io.encode_field("rho", np.arange(4.0), 2.0)
        magic, marker, dim, M, time, n = struct.unpack_from("<8sIIIdI", data)
        assert magic == b"SDFIELD\x01" and marker == 0x01020304
        assert (dim, M, time, n) == (1, 4, 2.0, 3)
        assert data[32:35] == b"rho"
        assert np.frombuffer(data[35:], "<f8").tolist() == [0.0, 1.0, 2.0, 3.0]
        assert len(data) == 32 + 3 + 4 * 8

    def test_row_major(self):
        a = np.arange(16.0).reshape(4, 4)
        data = io.encode_field("f", a, 0.0)
        assert np.frombuffer(data[33:], "<f8").tolist() == list(range(16))

    def test_unicode_name(self):
        ((name, _, _),) = io.decode_fields(io.encode_field("ρ_ü", np.zeros(2), 0.0))
        assert name == "ρ_ü"

    @pytest.mark.parametrize("corrupt", ["magic", "marker", "truncate"])
    def test_corrupt(self, corrupt):
        data = bytearray(io.encode_field("b", np.ones(4), 0.0))
        if corrupt == "magic":
            data[0] = 0
        elif corrupt == "marker":
            data[8:12] = (0x04030201).to_bytes(4, "little")
        else:
            data = data[:-3]
        with pytest.raises(io.SnapshotFormatError):
            io.decode_fields(bytes(data))

    def test_non_cube(self):
        with pytest.raises(ValueError):
            io.encode_field("x", np.zeros((2, 3)), 0.0)

    def test_missing_record(self, tmp_path):
        path = tmp_path / "s.sdf"
        path.write_bytes(io.encode_field("rho", np.ones(4), 0.0))
        with pytest.raises(io.SnapshotFormatError):
            io.read_state(path)

    def test_window(self, tmp_path):
        g = GridSpec(1, 8)
        for i in range(3):
            io.write_state(tmp_path / io.snapshot_name(i), seeded_random(g, i, time=0.1 * i))
        w = io.read_window(tmp_path, Fraction(1, 2))
        assert [s.time for s in w] == [0.0, 0.1, 0.2]
        assert w[0].grid.dealias_fraction == Fraction(1, 2)
        with pytest.raises(FileNotFoundError):
            io.read_window(tmp_path / "nothing")

    @given(st.lists(st.floats(allow_nan=False), min_size=1, max_size=16).map(lambda v: v + [0.0] * (len(v) % 2)))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, values):
        a = np.array(values)
        ((_, _, back),) = io.decode_fields(io.encode_field("v", a, 0.0))
        assert a.tobytes() == back.tobytes()


class TestCsv:
    def test_precision(self):
        text = io.format_csv(["a", "b", "c"], [[1 / 3, True, 7]])
        assert text.splitlines() == ["a,b,c", "0.33333333333333331,true,7"]
        assert float(text.splitlines()[1].split(",")[0]) == 1 / 3

    def test_row_length(self):
        with pytest.raises(ValueError):
            io.format_csv(["a"], [[1, 2]])

    def test_round_trip(self, tmp_path):
        rows = [[0.1, np.float64(2.5e-17), "x"], [np.nan, -1.0, "y"]]
        io.write_csv(tmp_path / "t.csv", ["p", "q", "r"], rows)
        header, back = io.read_csv(tmp_path / "t.csv")
        assert header == ["p", "q", "r"]
        assert float(back[0][1]) == 2.5e-17 and back[1][0] == "nan"


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.grid == GridSpec(2, 64)
        assert cfg.params.mu == DEFAULTS["parameters"]["mu"]
        assert cfg.params.lam == DEFAULTS["parameters"]["lambda"]
        assert cfg.initial.kind == "seeded-random" and cfg.run.dt is None
        assert cfg.theorem_mode

    def test_negative_lambda(self):
        with pytest.raises(ValidationError) as info:
            parse_config("[parameters]\nlambda = -1\n")
        assert "lambda must be >= 0" in info.value.violations

    def test_gamma_below_three(self):
        cfg = parse_config("[parameters]\ngamma = 2.5\n")
        assert cfg.theorem_mode is False

    def test_all_violations(self):
        text = "[grid]\npoints_per_axis = 15\nwidth = 3\n[parameters]\nmu = -1\nnu = 0\n[bogus]\nx = 1\n"
        with pytest.raises(ValidationError) as info:
            parse_config(text)
        v = info.value.violations
        assert len(v) == 5
        assert "unknown key grid.width" in v and "unknown table [bogus]" in v

    def test_wrong_type(self):
        with pytest.raises(ValidationError, match="wrong type"):
            parse_config("[run]\npicard = 1\n")

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_config("[grid]\ndim = 2\npoints_per_axis = = 3\n")
        assert info.value.line == 3 and info.value.column is not None

    def test_window_needs_dt(self):
        with pytest.raises(ValidationError, match="fixed run.dt"):
            parse_config("[diagnostics]\nevf_window = 5\n")

    @pytest.mark.parametrize("name", ["example.toml", "equilibrium.toml"])
    def test_round_trip(self, name):
        cfg = load_config(CONFIGS / name)
        assert parse_config(dump_config(cfg)) == cfg
        assert dump_config(parse_config(dump_config(cfg))) == dump_config(cfg)

    def test_round_trip_full(self):
        doc = {"grid": {"dim": 3, "points_per_axis": 16, "dealias_fraction": "1/2"},
               "parameters": {"m_cutoff": 4, "energy_model": "appendix", "epsilon": 1e-3},
               "initial": {"kind": "trig-perturbation", "b": 1.25, "mode": 2},
               "run": {"dt": 0.01, "picard": True, "snapshot_every": 3},
               "diagnostics": {"evf_window": 4, "rho_b_pair": True},
               "output": {"directory": "somewhere"},
               "mms": {"kind": "spatial", "points_per_axis": [8, 16, 32], "dt": [1e-5], "decay": 0.3}}
        cfg = config_from_dict(doc)
        assert parse_config(dump_config(cfg)) == cfg

    def test_equilibrium_b_default(self):
        cfg = load_config(CONFIGS / "equilibrium.toml")
        s = cfg.initial.build(cfg.grid, cfg.params)
        assert np.all(s.b == equilibrium_b(cfg.params))

    def test_output_resolution(self, monkeypatch):
        cfg = parse_config("")
        monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
        assert cfg.resolved_output() == "stressdiff-out"
        monkeypatch.setenv(OUTPUT_ROOT_ENV, "/data")
        assert cfg.resolved_output() == "/data/run"
        assert cfg.resolved_output("x") == "x"
        assert parse_config('[output]\ndirectory = "y"\n').resolved_output() == "y"

    def test_mms_rungs(self):
        cfg = parse_config("[mms]\npoints_per_axis = [16, 32, 64]\ndt = [1e-5]\n")
        assert cfg.mms.rungs() == [(16, 1e-5), (32, 1e-5), (64, 1e-5)]
        with pytest.raises(ValidationError):
            parse_config("[mms]\npoints_per_axis = [16, 32]\ndt = [1e-5]\n")

    @pytest.mark.parametrize("kind", ["uniform", "trig-perturbation", "seeded-random"])
    def test_initial_kinds(self, kind):
        cfg = parse_config(f'[grid]\npoints_per_axis = 8\n[initial]\nkind = "{kind}"\n')
        s = cfg.initial.build(cfg.grid, cfg.params)
        assert isinstance(s, State) and s.rho.shape == (8, 8)
