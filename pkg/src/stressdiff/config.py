"""Run configuration: TOML text <-> validated ``RunConfig``.

Grammar: a TOML document with the optional tables below. Every key may be
omitted; the value in ``DEFAULTS`` is then used. Unknown tables or keys are
rejected. ``null`` does not exist in TOML, so keys whose default is
``None`` are simply left out.

=============  ====================  ==================  =======================================
table          key                   default             meaning
=============  ====================  ==================  =======================================
grid           dim                   2                   1, 2 or 3
grid           points_per_axis       64                  even M
grid           dealias_fraction      "2/3"               fraction of M/2 kept, as "p/q" or float
parameters     mu                    0.1                 shear viscosity
parameters     lambda                0.05                bulk viscosity
parameters     nu                    1.0                 relaxation time
parameters     sigma                 0.05                capillarity of b
parameters     a0, a1, a2            1.0                 pressure and elastic energy weights
parameters     gamma                 4.0                 adiabatic exponent
parameters     alpha                 2.0                 elastic power
parameters     s                     2.0                 mobility exponent in the dissipation
parameters     epsilon               0.0                 artificial diffusion
parameters     m_cutoff              (none)              Galerkin cutoff mode
parameters     energy_model          "power-log"         power-log | linear-log | appendix
initial        kind                  "seeded-random"     uniform | trig-perturbation | seeded-random
initial        rho                   1.0                 base density
initial        b                     (equilibrium b)     base strain
initial        rho_amp, u_amp        0.1                 perturbation amplitudes
initial        b_amp                 0.1
initial        mode                  1                   trig-perturbation mode
initial        max_mode              3                   seeded-random band
initial        seed                  0
run            t_end                 1.0
run            dt                    (CFL)               fixed step; omit for CFL stepping
run            cfl                   0.4
run            picard                false               iterate the coupling to convergence
run            snapshot_every        0                   write a snapshot every n steps (0: off)
diagnostics    energy                true                energy.csv
diagnostics    norms                 true                norms.csv
diagnostics    evf_window            0                   snapshots in the EVF window (0: off)
diagnostics    renormalized          false               renormalized-continuity residual
diagnostics    rho_b_pair            false               rho-b pair residual
output         directory             (see below)         output directory
mms            kind                  "temporal"          spatial | temporal
mms            points_per_axis       [32]                one entry, or one per rung
mms            dt                    [4e-3, 2e-3, 1e-3]  one entry, or one per rung
mms            t_end                 0.2
mms            amplitude             0.2
mms            decay                 0.0                 0 for single modes, (0, 1) for analytic
mms            omega                 2.0                 time frequency (0: steady)
=============  ====================  ==================  =======================================

When ``output.directory`` is omitted the directory is
``$STRESSDIFF_OUTPUT_ROOT/run`` (or ``./stressdiff-out`` without the variable).
"""

from dataclasses import dataclass, field
from fractions import Fraction
import os
import re

import tomli
import tomli_w

from .constitutive import Parameters, equilibrium_b
from .errors import ParseError, ValidationError
from .grid import GridSpec

OUTPUT_ROOT_ENV = "STRESSDIFF_OUTPUT_ROOT"

INITIAL_KINDS = ("uniform", "trig-perturbation", "seeded-random")
MMS_KINDS = ("spatial", "temporal")

DEFAULTS = {
    "grid": {"dim": 2, "points_per_axis": 64, "dealias_fraction": "2/3"},
    "parameters": {
        "mu": 0.1, "lambda": 0.05, "nu": 1.0, "sigma": 0.05, "a0": 1.0, "a1": 1.0, "a2": 1.0,
        "gamma": 4.0, "alpha": 2.0, "s": 2.0, "epsilon": 0.0, "m_cutoff": None,
        "energy_model": "power-log",
    },
    "initial": {
        "kind": "seeded-random", "rho": 1.0, "b": None, "rho_amp": 0.1, "u_amp": 0.1,
        "b_amp": 0.1, "mode": 1, "max_mode": 3, "seed": 0,
    },
    "run": {"t_end": 1.0, "dt": None, "cfl": 0.4, "picard": False, "snapshot_every": 0},
    "diagnostics": {"energy": True, "norms": True, "evf_window": 0, "renormalized": False,
                    "rho_b_pair": False},
    "output": {"directory": None},
    "mms": {"kind": "temporal", "points_per_axis": [32], "dt": [4e-3, 2e-3, 1e-3], "t_end": 0.2,
            "amplitude": 0.2, "decay": 0.0, "omega": 2.0},
}

_NUMBER = (int, float)
_TYPES = {
    "grid": {"dim": int, "points_per_axis": int, "dealias_fraction": (str, int, float)},
    "parameters": {k: _NUMBER for k in DEFAULTS["parameters"]} | {"m_cutoff": int, "energy_model": str},
    "initial": {k: _NUMBER for k in DEFAULTS["initial"]} | {"kind": str, "mode": int, "max_mode": int,
                                                              "seed": int},
    "run": {"t_end": _NUMBER, "dt": _NUMBER, "cfl": _NUMBER, "picard": bool, "snapshot_every": int},
    "diagnostics": {"energy": bool, "norms": bool, "evf_window": int, "renormalized": bool,
                    "rho_b_pair": bool},
    "output": {"directory": str},
    "mms": {"kind": str, "points_per_axis": list, "dt": list, "t_end": _NUMBER, "amplitude": _NUMBER,
            "decay": _NUMBER, "omega": _NUMBER},
}


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "seeded-random"
    rho: float = 1.0
    b: float = None
    rho_amp: float = 0.1
    u_amp: float = 0.1
    b_amp: float = 0.1
    mode: int = 1
    max_mode: int = 3
    seed: int = 0

    def build(self, grid, p):
        from .state import seeded_random, trig_perturbation, uniform_state

        b = equilibrium_b(p) if self.b is None else self.b
        if self.kind == "uniform":
            return uniform_state(grid, self.rho, b)
        if self.kind == "trig-perturbation":
            return trig_perturbation(grid, self.rho, b, self.rho_amp, self.u_amp, self.b_amp, self.mode)
        return seeded_random(grid, self.seed, self.rho, b, self.rho_amp, self.u_amp, self.b_amp,
                             self.max_mode)


@dataclass(frozen=True)
class RunSettings:
    t_end: float = 1.0
    dt: float = None
    cfl: float = 0.4
    picard: bool = False
    snapshot_every: int = 0


@dataclass(frozen=True)
class DiagnosticsToggles:
    energy: bool = True
    norms: bool = True
    evf_window: int = 0
    renormalized: bool = False
    rho_b_pair: bool = False

    @property
    def needs_window(self):
        return self.evf_window > 0 or self.renormalized or self.rho_b_pair


@dataclass(frozen=True)
class MmsSettings:
    kind: str = "temporal"
    points_per_axis: tuple = (32,)
    dt: tuple = (4e-3, 2e-3, 1e-3)
    t_end: float = 0.2
    amplitude: float = 0.2
    decay: float = 0.0
    omega: float = 2.0

    def rungs(self):
        n = max(len(self.points_per_axis), len(self.dt))
        pts = self.points_per_axis * n if len(self.points_per_axis) == 1 else self.points_per_axis
        dts = self.dt * n if len(self.dt) == 1 else self.dt
        return list(zip(pts, dts))


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: Parameters
    initial: InitialCondition = field(default_factory=InitialCondition)
    run: RunSettings = field(default_factory=RunSettings)
    diagnostics: DiagnosticsToggles = field(default_factory=DiagnosticsToggles)
    output_directory: str = None
    mms: MmsSettings = field(default_factory=MmsSettings)

    @property
    def theorem_mode(self):
        return self.params.theorem_mode

    def resolved_output(self, override=None):
        if override:
            return override
        if self.output_directory:
            return self.output_directory
        root = os.environ.get(OUTPUT_ROOT_ENV)
        return os.path.join(root, "run") if root else "stressdiff-out"

    def to_dict(self):
        """Nested plain dict in the TOML layout; ``None`` values are dropped."""
        g = self.grid
        p = {("lambda" if k == "lam" else k): v for k, v in self.params.to_dict().items()}
        tables = {
            "grid": {"dim": g.dim, "points_per_axis": g.points_per_axis,
                     "dealias_fraction": str(g.dealias_fraction)},
            "parameters": p,
            "initial": dict(vars(self.initial)),
            "run": dict(vars(self.run)),
            "diagnostics": dict(vars(self.diagnostics)),
            "output": {"directory": self.output_directory},
            "mms": {k: list(v) if isinstance(v, tuple) else v for k, v in vars(self.mms).items()},
        }
        return {t: {k: v for k, v in body.items() if v is not None} for t, body in tables.items()}


def _parse_fraction(value, problems):
    try:
        if isinstance(value, str):
            return Fraction(value.strip())
        return Fraction(value).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError):
        problems.append(f"grid.dealias_fraction {value!r} is not a fraction")
        return None


def _check_types(doc, problems):
    merged = {}
    for table, body in doc.items():
        if table not in DEFAULTS:
            problems.append(f"unknown table [{table}]")
            continue
        if not isinstance(body, dict):
            problems.append(f"[{table}] must be a table")
            continue
        for key, value in body.items():
            if key not in DEFAULTS[table]:
                problems.append(f"unknown key {table}.{key}")
                continue
            want = _TYPES[table][key]
            ok = isinstance(value, want) and not (isinstance(value, bool) and want is not bool)
            if not ok:
                problems.append(f"{table}.{key} has wrong type {type(value).__name__}")
                continue
            merged.setdefault(table, {})[key] = value
    return {t: {**DEFAULTS[t], **merged.get(t, {})} for t in DEFAULTS}


def config_from_dict(doc):
    """Validate a nested dict and build a RunConfig, collecting every violation."""
    problems = []
    d = _check_types(doc, problems)

    grid = None
    frac = _parse_fraction(d["grid"]["dealias_fraction"], problems)
    dim, M = d["grid"]["dim"], d["grid"]["points_per_axis"]
    if dim not in (1, 2, 3):
        problems.append("grid.dim must be 1, 2 or 3")
    if M <= 0 or M % 2:
        problems.append("grid.points_per_axis must be a positive even integer")
    if frac is not None and not 0 < frac <= 1:
        problems.append("grid.dealias_fraction must lie in (0, 1]")
    if not problems:
        grid = GridSpec(dim, M, frac)

    pd = dict(d["parameters"])
    pd["lam"] = pd.pop("lambda")
    for k, v in pd.items():
        if isinstance(v, int) and k not in ("m_cutoff",):
            pd[k] = float(v)
    params = None
    try:
        params = Parameters(**pd)
    except ValidationError as exc:
        problems.extend(exc.violations)

    ini = d["initial"]
    if ini["kind"] not in INITIAL_KINDS:
        problems.append(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}")
    if ini["rho"] <= 0:
        problems.append("initial.rho must be > 0")
    if ini["b"] is not None and ini["b"] <= 0:
        problems.append("initial.b must be > 0")
    for k in ("rho_amp", "u_amp", "b_amp"):
        if ini[k] < 0:
            problems.append(f"initial.{k} must be >= 0")
    if ini["mode"] < 0 or ini["max_mode"] < 0:
        problems.append("initial.mode and initial.max_mode must be >= 0")
    if ini["seed"] < 0:
        problems.append("initial.seed must be >= 0")
    initial = InitialCondition(**{k: (float(v) if k in ("rho", "b", "rho_amp", "u_amp", "b_amp")
                                      and v is not None else v) for k, v in ini.items()})

    r = d["run"]
    if r["t_end"] < 0:
        problems.append("run.t_end must be >= 0")
    if r["dt"] is not None and r["dt"] <= 0:
        problems.append("run.dt must be > 0")
    if r["cfl"] <= 0:
        problems.append("run.cfl must be > 0")
    if r["snapshot_every"] < 0:
        problems.append("run.snapshot_every must be >= 0")
    run = RunSettings(float(r["t_end"]), None if r["dt"] is None else float(r["dt"]), float(r["cfl"]),
                      r["picard"], r["snapshot_every"])

    diag = DiagnosticsToggles(**d["diagnostics"])
    if diag.evf_window < 0:
        problems.append("diagnostics.evf_window must be >= 0")
    if 0 < diag.evf_window < 3:
        problems.append("diagnostics.evf_window must be 0 or >= 3")
    if diag.needs_window and run.dt is None:
        problems.append("window diagnostics (evf, renormalized, rho_b_pair) need a fixed run.dt")

    m = d["mms"]
    if m["kind"] not in MMS_KINDS:
        problems.append(f"mms.kind must be one of {', '.join(MMS_KINDS)}")
    pts, dts = m["points_per_axis"], m["dt"]
    if not pts or not all(isinstance(x, int) and not isinstance(x, bool) and x > 0 and x % 2 == 0
                          for x in pts):
        problems.append("mms.points_per_axis must list positive even integers")
    if not dts or not all(isinstance(x, _NUMBER) and not isinstance(x, bool) and x > 0 for x in dts):
        problems.append("mms.dt must list positive numbers")
    if len(pts) > 1 and len(dts) > 1 and len(pts) != len(dts):
        problems.append("mms.points_per_axis and mms.dt must have equal length or length 1")
    if max(len(pts), len(dts)) < 3:
        problems.append("mms ladder needs at least 3 rungs")
    if m["t_end"] <= 0:
        problems.append("mms.t_end must be > 0")
    if not 0 < m["amplitude"] <= 0.2:
        problems.append("mms.amplitude must lie in (0, 0.2]")
    if not 0 <= m["decay"] < 1:
        problems.append("mms.decay must lie in [0, 1)")
    mms = MmsSettings(m["kind"], tuple(pts), tuple(float(x) for x in dts), float(m["t_end"]),
                      float(m["amplitude"]), float(m["decay"]), float(m["omega"]))

    if problems:
        raise ValidationError(problems)
    return RunConfig(grid, params, initial, run, diag, d["output"]["directory"], mms)


_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


def parse_config(text):
    """Parse TOML text into a validated RunConfig.

    Raises ParseError (with line and column) for malformed text and
    ValidationError listing every violated rule.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"config is not UTF-8: {exc}", 0, 0) from None
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        if line is None:
            m = _POSITION.search(str(exc))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (0, 0)
        raise ParseError(getattr(exc, "msg", str(exc)), line, col) from None
    return config_from_dict(doc)


def load_config(path):
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def dump_config(cfg):
    """TOML text that parses back to an equal RunConfig."""
    return tomli_w.dumps(cfg.to_dict())
