"""Time integration of the epsilon-regularised Galerkin system.

The evolved unknowns are density, projected momentum ``Pi_m(rho u)`` and the
elastic strain ``b``. One step is a linearly implicit Euler update

    (I - dt J) (Y^{n+1} - Y^n) = dt F(Y^n),

where ``F`` is the full right-hand side and ``J`` is a constant-coefficient
operator, diagonal (or 2x2 block diagonal) in Fourier space, holding the
stiff linear parts: eps*lap on rho and momentum, the viscous operator
divided by a reference density, sigma/nu*lap plus e''(b_ref)/nu on b, and
the linearised capillary coupling between longitudinal momentum and b.
For the purely linear terms this is exactly backward Euler; everything
else is forward Euler, so the scheme is first order.
"""

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Callable, Optional

import numpy as np

from . import constitutive as cst
from .diagnostics import EnergyLedger, energy_ledger
from .errors import DegenerateDensity, NaNDetected, NonPositiveB, StepFailure
from .state import State

log = logging.getLogger(__name__)

__all__ = [
    "SolverOptions", "StepReport", "RunResult",
    "rhs_continuity", "rhs_momentum", "rhs_b", "advance", "run", "momentum_of",
]


@dataclass(frozen=True)
class SolverOptions:
    cfl: float = 0.4
    dt_max: Optional[float] = None
    b_floor: float = 1e-6
    rho_tol: float = 1e-12
    vacuum_floor: float = 1e-10
    picard: bool = False
    picard_tol: float = 1e-10
    max_picard: int = 20
    max_halvings: int = 12
    track_energy: bool = True


@dataclass
class StepReport:
    time: float
    dt_used: float
    picard_iterations: int
    energy_before: Optional[EnergyLedger]
    energy_after: Optional[EnergyLedger]
    rejected: bool = False
    reason: str = ""
    halvings: int = 0


@dataclass
class RunResult:
    final: State
    reports: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def times(self):
        return np.array([r.time for r in self.reports])

    @property
    def energies(self):
        return np.array([r.energy_after.total for r in self.reports])


# Forcing: callable t -> (f_rho, f_m, f_b) physical arrays (or None).
Forcing = Callable[[float], tuple]


def _galerkin_mask(grid, p):
    mask = grid.dealias_mask
    if p.m_cutoff is not None:
        mask = mask & grid.mode_mask(p.m_cutoff)
    return mask


def momentum_of(state, p):
    """Projected momentum Pi_m(rho u) with the dealiased product."""
    g = state.grid
    m = g.dealiased_product(state.rho[None], state.u)
    return g.ifft(g.fft(m) * _galerkin_mask(g, p))


def _velocity(grid, rho, mom, vacuum_floor):
    rmin = np.min(rho)
    if rmin < vacuum_floor:
        raise DegenerateDensity(f"min(rho) = {rmin:.3e} below vacuum floor {vacuum_floor:.1e}")
    return grid.dealias(mom / rho)


# -- right-hand sides --------------------------------------------------------

def rhs_continuity(state, p):
    """-Div(rho u) + eps lap rho."""
    g = state.grid
    flux = g.dealiased_product(state.rho[None], state.u)
    return -g.divergence(flux) + p.epsilon * g.laplacian(state.rho)


def _momentum_forces(grid, rho, u, b, p):
    """Pressure, Korteweg and convection forces (everything but viscosity and eps)."""
    g = grid
    m = g.dealiased_product(rho[None], u)
    conv = g.divergence(g.dealiased_product(m[:, None], u[None, :]))
    lap_b = g.laplacian(b)
    pressure = (cst.fluid_pressure(np.maximum(rho, 0.0), p) + cst.elastic_pressure(b, p)
                + (2.0 / 3.0) * p.sigma * g.dealiased_product(b, lap_b))
    grad_b = g.gradient(b)
    kort = g.dealiased_product(grad_b[:, None], grad_b[None, :])
    sq = np.trace(kort)
    kort = kort - 0.5 * sq * np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim)
    return -conv - g.gradient(g.dealias(pressure)) - p.sigma * g.divergence(kort)


def _viscous_force(grid, u, p):
    grad_u = grid.gradient(u)
    return grid.divergence(cst.viscous_stress(grad_u, p))


def rhs_momentum(state, p):
    """Right-hand side of the projected momentum equation, Pi_m applied to all terms."""
    g = state.grid
    rhs = (_momentum_forces(g, state.rho, state.u, state.b, p)
           + _viscous_force(g, state.u, p)
           + p.epsilon * g.laplacian(g.dealiased_product(state.rho[None], state.u)))
    return g.ifft(g.fft(rhs) * _galerkin_mask(g, p))


def rhs_b(state, p):
    """-u . grad b - (e'(b) - sigma lap b) / nu + 2/3 b Div u."""
    return _rhs_b(state.grid, state.u, state.b, p)


def _rhs_b(grid, u, b, p, b_transport=None):
    g = grid
    bt = b if b_transport is None else b_transport
    grad_b = g.gradient(bt)
    adv = np.sum(g.dealiased_product(u, grad_b), axis=0)
    comp = (2.0 / 3.0) * g.dealiased_product(bt, g.divergence(u))
    relax = (cst.elastic_energy_prime(b, p) - p.sigma * g.laplacian(b)) / p.nu
    return -adv - g.dealias(relax) + comp


# -- one step ---------------------------------------------------------------

class _ImplicitOperator:
    """(I - dt J)^{-1} for the stiff linear part, applied mode by mode."""

    def __init__(self, grid, p, dt, rho_ref, b_ref):
        k = grid.wavenumbers
        k2 = grid.k_squared
        kabs = np.sqrt(k2)
        self.grid = grid
        with np.errstate(divide="ignore", invalid="ignore"):
            self.khat = [np.where(kabs > 0, ki / kabs, 0.0) for ki in k]
        self.kabs = kabs
        e2 = float(cst.elastic_energy_second(b_ref, p))
        self.a_rho = 1.0 + dt * p.epsilon * k2
        self.a_t = 1.0 + dt * (p.epsilon + p.mu / rho_ref) * k2
        self.a_l = 1.0 + dt * (p.epsilon + (4.0 * p.mu / 3.0 + p.lam) / rho_ref) * k2
        self.c_b = 1.0 + dt * (p.sigma * k2 + e2) / p.nu
        self.beta = dt * (2.0 / 3.0) * p.sigma * b_ref * kabs**3
        self.gamma = dt * (2.0 / 3.0) * (b_ref / rho_ref) * kabs
        self.det = self.a_l * self.c_b + self.beta * self.gamma

    def solve(self, f_rho, f_m, f_b):
        d_rho = f_rho / self.a_rho
        f_l = sum(kh * fm for kh, fm in zip(self.khat, f_m))
        f_t = [fm - kh * f_l for kh, fm in zip(self.khat, f_m)]
        x_l = (self.c_b * f_l + 1j * self.beta * f_b) / self.det
        d_b = (self.a_l * f_b + 1j * self.gamma * f_l) / self.det
        d_m = np.stack([ft / self.a_t + kh * x_l for kh, ft in zip(self.khat, f_t)])
        return d_rho, d_m, d_b


def _tendencies(grid, p, rho, u, b, mom, forcing_now, coupled=None):
    """Full right-hand sides in Fourier space.

    ``coupled=(u_c, b_c)`` evaluates the cross-coupling terms (b-forces in the
    momentum equation, u-terms in the b equation) at another iterate.
    """
    g = grid
    u_c, b_c = (u, b) if coupled is None else coupled
    flux = g.dealiased_product(rho[None], u)
    f_rho = -g.divergence(flux) + p.epsilon * g.laplacian(rho)
    f_m = _momentum_forces(g, rho, u, b_c, p) + _viscous_force(g, u, p) + p.epsilon * g.laplacian(mom)
    f_b = _rhs_b(g, u_c, b, p)
    if forcing_now is not None:
        fr, fm, fb = forcing_now
        f_rho = f_rho + fr
        f_m = f_m + fm
        f_b = f_b + fb
    mask = g.dealias_mask
    return g.fft(f_rho) * mask, g.fft(f_m) * _galerkin_mask(g, p), g.fft(f_b) * mask


def _imex_step(state, p, dt, options, forcing):
    g = state.grid
    rho, u, b = state.rho, state.u, state.b
    mom = momentum_of(state, p)
    rho_h, mom_h, b_h = g.fft(rho), g.fft(mom), g.fft(b)
    op = _ImplicitOperator(g, p, dt, rho_ref=float(np.min(rho)), b_ref=float(np.max(b)))
    f_now = forcing(state.time) if forcing is not None else None

    def update(coupled):
        fr, fm, fb = _tendencies(g, p, rho, u, b, mom, f_now, coupled)
        d_rho, d_m, d_b = op.solve(dt * fr, dt * fm, dt * fb)
        new_rho = g.ifft((rho_h + d_rho) * g.dealias_mask)
        new_mom = g.ifft((mom_h + d_m) * _galerkin_mask(g, p))
        new_b = g.ifft((b_h + d_b) * g.dealias_mask)
        new_u = _velocity(g, new_rho, new_mom, options.vacuum_floor)
        return new_rho, new_u, new_b

    new_rho, new_u, new_b = update(None)
    iterations = 0
    if options.picard:
        for iterations in range(1, options.max_picard + 1):
            if np.min(new_b) <= 0:
                break
            prev_u, prev_b = new_u, new_b
            new_rho, new_u, new_b = update((prev_u, prev_b))
            change = max(np.max(np.abs(new_u - prev_u)), np.max(np.abs(new_b - prev_b)))
            if change < options.picard_tol:
                break
    return State(g, state.time + dt, new_rho, new_u, new_b), iterations


def _rejection_reason(new, options):
    if not (np.all(np.isfinite(new.rho)) and np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.b))):
        return "nan"
    if np.min(new.rho) < -options.rho_tol:
        return "negative density"
    if np.min(new.b) <= options.b_floor:
        return "b below floor"
    return ""


def advance(state, p, dt, options=None, forcing=None, energy_before=None):
    """One time step with reject-and-halve positivity guards.

    Returns ``(new_state, StepReport)``. The step actually taken may be
    shorter than ``dt``; see ``report.dt_used``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    options = options or SolverOptions()
    if options.track_energy and energy_before is None:
        energy_before = energy_ledger(state, p)
    trial = dt
    last_reason = ""
    for halvings in range(options.max_halvings + 1):
        try:
            with np.errstate(all="ignore"):
                new, iters = _imex_step(state, p, trial, options, forcing)
            reason = _rejection_reason(new, options)
        except DegenerateDensity:
            reason = "degenerate density"
        except NonPositiveB:
            reason = "b below floor"
        if not reason:
            after = energy_ledger(new, p) if options.track_energy else None
            return new, StepReport(new.time, trial, iters, energy_before, after, halvings=halvings)
        last_reason = reason
        log.debug("step at t=%.6g rejected (%s), halving dt=%.3e", state.time, reason, trial)
        trial *= 0.5
    if last_reason == "nan":
        raise NaNDetected(f"non-finite values at t={state.time:.6g} after {options.max_halvings} halvings",
                          time=state.time)
    raise StepFailure(f"step rejected at t={state.time:.6g} ({last_reason}) after "
                      f"{options.max_halvings} halvings", time=state.time)


def propose_dt(state, p, options=None):
    """CFL proposal cfl * h / (max|u| + c_max)."""
    options = options or SolverOptions()
    umax = float(np.max(np.sqrt(np.sum(state.u**2, axis=0))))
    cmax = float(cst.sound_speed(max(float(np.max(state.rho)), 0.0), p))
    dt = options.cfl * state.grid.spacing / (umax + cmax)
    if options.dt_max is not None:
        dt = min(dt, options.dt_max)
    return dt


def run(initial, p, t_end, callbacks=(), *, dt=None, options=None, forcing=None,
        snapshot_every=None, callback_every=1):
    """Advance ``initial`` to ``t_end``.

    With ``dt`` given the step is fixed (up to positivity halvings);
    otherwise each step uses the CFL proposal. Callbacks receive a copy of
    the state every ``callback_every`` accepted steps. With
    ``snapshot_every=k`` every k-th state (initial included) is stored.
    """
    options = options or SolverOptions()
    if t_end < initial.time:
        raise ValueError("t_end precedes the initial time")
    result = RunResult(final=initial, metadata={
        "theorem_mode": p.theorem_mode, "gamma": p.gamma, "alpha": p.alpha, "epsilon": p.epsilon})
    if not p.theorem_mode:
        log.info("gamma=%g, alpha=%g lie outside the existence-theorem hypotheses", p.gamma, p.alpha)
    if snapshot_every:
        result.snapshots.append(initial.copy())
    state = initial
    if t_end == initial.time:
        return result
    t0 = initial.time
    span = t_end - t0
    tiny = 1e-12 * max(1.0, abs(t_end))
    energy = energy_ledger(state, p) if options.track_energy else None
    step = 0
    while t_end - state.time > tiny:
        remaining = t_end - state.time
        trial = dt if dt is not None else propose_dt(state, p, options)
        if trial >= remaining - tiny:
            trial = remaining
        new, report = advance(state, p, trial, options, forcing, energy_before=energy)
        if dt is not None and report.dt_used == dt:
            # keep times on the exact lattice t0 + n dt
            n = round((new.time - t0) / dt)
            if abs(t0 + n * dt - new.time) < 1e-9 * dt:
                new = replace(new, time=min(t0 + n * dt, t_end))
        if abs(new.time - t_end) < tiny:
            new = replace(new, time=t_end)
        report.time = new.time
        state = new
        energy = report.energy_after
        result.reports.append(report)
        step += 1
        if snapshot_every and step % snapshot_every == 0:
            result.snapshots.append(state.copy())
        if callbacks and step % callback_every == 0:
            for cb in callbacks:
                cb(state.copy())
    if snapshot_every and step % snapshot_every:
        result.snapshots.append(state.copy())
    result.final = state
    result.metadata["steps"] = step
    result.metadata["span"] = span
    return result
