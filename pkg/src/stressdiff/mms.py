"""Manufactured solutions: forcing that makes chosen smooth fields exact solutions.

The closed forms are trigonometric, so their spatial derivatives are
computed spectrally on the grid, which is exact for band-limited fields.
Time derivatives come from the closed form.
"""

from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from . import constitutive as cst
from .grid import GridSpec
from .solver import SolverOptions, run
from .state import State


@dataclass(frozen=True)
class Mode:
    """``amplitude * cos(omega t - time_phase) * profile(pi n . (x - shift) + phase)``.

    With ``decay = 0`` the profile is ``cos``, a single Fourier mode. With
    ``0 < decay < 1`` it is the analytic periodic function
    ``sum_{j>=1} decay^(j-1) cos(j theta)``, whose spectrum falls off
    geometrically; useful for exposing spectral convergence.
    """

    amplitude: float
    wavevector: Sequence[int]
    phase: float = 0.0
    omega: float = 0.0
    time_phase: float = 0.0
    decay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"decay must lie in [0, 1), got {self.decay}")

    def _spatial(self, coords, shift):
        arg = sum(math.pi * n * (x - s) for n, x, s in zip(self.wavevector, coords, shift))
        theta = arg + self.phase
        r = self.decay
        if r == 0.0:
            return np.cos(theta)
        # (P_r(theta) - 1) / (2 r) with the Poisson kernel P_r
        return (np.cos(theta) - r) / (1.0 - 2.0 * r * np.cos(theta) + r * r)

    def value(self, coords, t, shift):
        return self.amplitude * math.cos(self.omega * t - self.time_phase) * self._spatial(coords, shift)

    def rate(self, coords, t, shift):
        return -self.amplitude * self.omega * math.sin(self.omega * t - self.time_phase) * self._spatial(coords, shift)


@dataclass(frozen=True)
class ManufacturedSolution:
    """rho* = rho_base + sum(rho_modes), u*_i = sum(u_modes[i]), b* = b_base + sum(b_modes)."""

    dim: int
    rho_base: float = 1.0
    rho_modes: tuple = ()
    u_modes: tuple = ()
    b_base: float = 1.0
    b_modes: tuple = ()
    shift: tuple = field(default=None)

    def __post_init__(self):
        if self.shift is None:
            object.__setattr__(self, "shift", (0.0,) * self.dim)
        if self.u_modes == ():
            object.__setattr__(self, "u_modes", ((),) * self.dim)
        if len(self.u_modes) != self.dim:
            raise ValueError("u_modes needs one tuple of modes per component")

    def translated(self, shift):
        return ManufacturedSolution(self.dim, self.rho_base, self.rho_modes, self.u_modes,
                                    self.b_base, self.b_modes, tuple(shift))

    def _sum(self, modes, grid, t, rate):
        out = np.zeros(grid.shape)
        for m in modes:
            out += (m.rate if rate else m.value)(grid.coords, t, self.shift)
        return out

    def fields(self, grid, t):
        rho = self.rho_base + self._sum(self.rho_modes, grid, t, False)
        u = np.stack([self._sum(c, grid, t, False) for c in self.u_modes])
        b = self.b_base + self._sum(self.b_modes, grid, t, False)
        return rho, u, b

    def rates(self, grid, t):
        drho = self._sum(self.rho_modes, grid, t, True)
        du = np.stack([self._sum(c, grid, t, True) for c in self.u_modes])
        db = self._sum(self.b_modes, grid, t, True)
        return drho, du, db

    def state(self, grid, t):
        rho, u, b = self.fields(grid, t)
        return State(grid, t, rho, u, b)

    @property
    def is_steady(self):
        modes = list(self.rho_modes) + list(self.b_modes) + [m for c in self.u_modes for m in c]
        return all(m.omega == 0 for m in modes)


def default_solution(dim, p, steady=False, amplitude=0.2, omega=2.0, decay=0.0):
    """Single-mode perturbations of (1, 0, b_eq) with amplitudes <= 0.2.

    ``decay > 0`` swaps the cosines for the analytic profile of :class:`Mode`
    (the peak then grows to ``amplitude / (1 - decay)``).
    """
    w = 0.0 if steady else omega
    e1 = lambda i: tuple(1 if j == i else 0 for j in range(dim))
    rho = (Mode(amplitude, e1(0), phase=0.3, omega=w, decay=decay),)
    u = tuple((Mode(0.5 * amplitude, e1((i + 1) % dim), phase=0.7 + i, omega=w, time_phase=0.4,
                    decay=decay),)
              for i in range(dim))
    b = (Mode(amplitude, e1(dim - 1), phase=1.1, omega=w, time_phase=-0.5, decay=decay),)
    return ManufacturedSolution(dim, 1.0, rho, u, cst.equilibrium_b(p), b)


def random_solution(dim, p, seed, modes_per_field=2, amplitude=0.2, max_mode=2, omega=2.0):
    """Seeded multi-mode solution around (1, 0, b_eq).

    Each field (and velocity component) gets ``modes_per_field`` modes with
    random wavevectors in ``[-max_mode, max_mode]^dim``, phases and time
    phases; amplitudes are scaled so their sum is ``amplitude`` (relative
    to b_eq for b). The first velocity mode of every component reuses the
    wavevector of the first density mode, so momentum and density share
    Fourier content; without that overlap the leading time-discretisation
    defect of momentum-density pairings can cancel by orthogonality.
    """
    rng = np.random.default_rng(seed)
    b_eq = cst.equilibrium_b(p)

    def draw(scale, first=None):
        weights = rng.uniform(0.5, 1.0, modes_per_field)
        weights *= scale / weights.sum()
        out = []
        for i, w in enumerate(weights):
            n = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, dim))
            if not any(n):
                n = (1,) + n[1:]
            if i == 0 and first is not None:
                n = first
            out.append(Mode(float(w), n, float(rng.uniform(0, 2 * np.pi)), omega,
                            float(rng.uniform(0, 2 * np.pi))))
        return tuple(out)

    rho = draw(amplitude)
    u = tuple(draw(0.5 * amplitude, rho[0].wavevector) for _ in range(dim))
    b = draw(amplitude * b_eq)
    return ManufacturedSolution(dim, 1.0, rho, u, b_eq, b)


def forcing_fields(ms, grid, p, t):
    """Sources (f_rho, f_m, f_b) that make ``ms`` an exact solution of the regularised system.

    f_rho = d_t rho + Div(rho u) - eps lap rho
    f_m   = d_t(rho u) + Div(rho u (x) u) + grad(p_fl + p_el + 2/3 sigma b lap b)
            - Div S(grad u) + sigma Div K(grad b) - eps lap(rho u)
    f_b   = d_t b + u . grad b + (e'(b) - sigma lap b)/nu - 2/3 b Div u
    """
    g = grid
    rho, u, b = ms.fields(g, t)
    drho, du, db = ms.rates(g, t)
    mom = rho * u
    lap_b = g.laplacian(b)
    f_rho = drho + g.divergence(mom) - p.epsilon * g.laplacian(rho)
    pressure = cst.fluid_pressure(rho, p) + cst.elastic_pressure(b, p) + (2.0 / 3.0) * p.sigma * b * lap_b
    f_m = (drho * u + rho * du
           + g.divergence(mom[:, None] * u[None, :])
           + g.gradient(pressure)
           - g.divergence(cst.viscous_stress(g.gradient(u), p))
           + g.divergence(cst.korteweg_tensor(g.gradient(b), p))
           - p.epsilon * g.laplacian(mom))
    f_b = (db + np.sum(u * g.gradient(b), axis=0)
           + (cst.elastic_energy_prime(b, p) - p.sigma * lap_b) / p.nu
           - (2.0 / 3.0) * b * g.divergence(u))
    return f_rho, f_m, f_b


def make_forcing(ms, grid, p):
    """Callable ``t -> (f_rho, f_m, f_b)`` for the solver; steady forcing is computed once."""
    if ms.is_steady:
        cached = forcing_fields(ms, grid, p, 0.0)
        return lambda t: cached
    return lambda t: forcing_fields(ms, grid, p, t)


def forcing_power(state, forcing_now, p):
    """Rate at which the sources feed the total energy.

    int u.f_m - |u|^2/2 f_rho + Psi'(rho) f_rho + (e'(b) - sigma lap b) f_b.
    """
    g = state.grid
    f_rho, f_m, f_b = forcing_now
    speed2 = np.sum(state.u**2, axis=0)
    relax = cst.elastic_energy_prime(state.b, p) - p.sigma * g.laplacian(state.b)
    dens = (np.sum(state.u * f_m, axis=0) - 0.5 * speed2 * f_rho
            + cst.pressure_potential_prime(state.rho, p) * f_rho + relax * f_b)
    return float(g.integrate(dens))


# -- convergence studies -----------------------------------------------------------

@dataclass(frozen=True)
class Rung:
    points_per_axis: int
    dt: float


@dataclass
class ErrorRow:
    rung: int
    points_per_axis: int
    dt: float
    norm: str
    field: str
    error: float
    observed_order: float

    @classmethod
    def columns(cls):
        return ["rung", "points_per_axis", "dt", "norm", "field", "error", "observed_order"]

    def row(self):
        return [self.rung, self.points_per_axis, self.dt, self.norm, self.field, self.error,
                self.observed_order]


@dataclass
class ConvergenceTable:
    rows: list

    def errors(self, norm, field):
        return np.array([r.error for r in self.rows if r.norm == norm and r.field == field])

    def orders(self, norm, field):
        return np.array([r.observed_order for r in self.rows if r.norm == norm and r.field == field])


class RungFailure(RuntimeError):
    def __init__(self, rung, cause):
        super().__init__(f"rung {rung} failed: {cause}")
        self.rung = rung
        self.cause = cause


def field_errors(state, ms):
    """L-infinity and L2 errors of (rho, u, b) against the manufactured fields."""
    g = state.grid
    rho, u, b = ms.fields(g, state.time)
    du = np.sqrt(np.sum((state.u - u) ** 2, axis=0))
    out = {}
    for name, diff in (("rho", np.abs(state.rho - rho)), ("u", du), ("b", np.abs(state.b - b))):
        out[("linf", name)] = float(np.max(diff))
        out[("l2", name)] = float(np.sqrt(g.integrate(diff**2)))
    return out


def convergence_study(ms, p, rungs, t_end, t0=0.0, options=None, dealias_fraction=None):
    """Run the forced solver on every rung and tabulate errors at ``t_end``.

    Observed orders compare each rung with the previous one, in grid
    spacing when the resolution changes and in dt otherwise.
    """
    if len(rungs) < 3:
        raise ValueError("a convergence study needs at least 3 rungs")
    options = options or SolverOptions(track_energy=False)
    results = []
    for i, rung in enumerate(rungs):
        kw = {} if dealias_fraction is None else {"dealias_fraction": dealias_fraction}
        grid = GridSpec(ms.dim, rung.points_per_axis, **kw)
        try:
            res = run(ms.state(grid, t0), p, t_end, dt=rung.dt, options=options,
                      forcing=make_forcing(ms, grid, p))
        except Exception as exc:
            raise RungFailure(i, exc) from exc
        results.append(field_errors(res.final, ms))
    rows = []
    for i, (rung, errs) in enumerate(zip(rungs, results)):
        for (norm, name), err in errs.items():
            order = float("nan")
            if i > 0:
                prev, perr = rungs[i - 1], results[i - 1][(norm, name)]
                if prev.points_per_axis != rung.points_per_axis:
                    ratio = rung.points_per_axis / prev.points_per_axis
                else:
                    ratio = prev.dt / rung.dt
                if err > 0 and perr > 0 and ratio != 1:
                    order = math.log(perr / err) / math.log(ratio)
            rows.append(ErrorRow(i, rung.points_per_axis, rung.dt, norm, name, err, order))
    return ConvergenceTable(rows)
