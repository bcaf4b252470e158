"""Energy bookkeeping, a-priori norms and identity residuals on snapshot windows.

A *window* is a sequence of ``State`` objects at uniformly spaced times.
Time integrals over a window use the trapezoidal rule.
"""

from dataclasses import dataclass, field, fields, astuple
import warnings

import numpy as np

from . import constitutive as cst
from .errors import PositivityWarning, WindowTooShort

__all__ = [
    "EnergyLedger", "energy_ledger", "energy_density", "energy_balance_residuals",
    "NormTracker", "EvfReport", "evf_identity", "renormalized_residual",
    "rho_b_pair_residual", "rho_b_residual_field", "continuity_residual_field",
    "b_residual_field",
]

VACUUM_DROP = 1e-14
VACUUM_WARN = 1e-8


# -- energy ------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyLedger:
    kinetic: float
    pressure_potential: float
    gradient_b: float
    elastic: float
    viscous_dissipation: float
    relaxation_dissipation: float

    @property
    def total(self):
        return self.kinetic + self.pressure_potential + self.gradient_b + self.elastic

    @property
    def dissipation(self):
        return self.viscous_dissipation + self.relaxation_dissipation

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)] + ["total"]

    def row(self):
        return list(astuple(self)) + [self.total]


def energy_density(state, p):
    """Pointwise total energy 1/2 rho|u|^2 + Psi(rho) + sigma/2 |grad b|^2 + e(b)."""
    g = state.grid
    grad_b = g.gradient(state.b)
    return (0.5 * state.rho * np.sum(state.u**2, axis=0)
            + cst.pressure_potential(np.maximum(state.rho, 0.0), p)
            + 0.5 * p.sigma * np.sum(grad_b**2, axis=0)
            + cst.elastic_energy(state.b, p))


def energy_ledger(state, p):
    g = state.grid
    rho, u, b = state.rho, state.u, state.b
    grad_b = g.gradient(b)
    grad_u = g.gradient(u)
    lap_b = g.laplacian(b)
    stress = cst.viscous_stress(grad_u, p)
    relax = cst.elastic_energy_prime(b, p) - p.sigma * lap_b
    return EnergyLedger(
        kinetic=float(g.integrate(0.5 * rho * np.sum(u**2, axis=0))),
        pressure_potential=float(g.integrate(cst.pressure_potential(np.maximum(rho, 0.0), p))),
        gradient_b=float(g.integrate(0.5 * p.sigma * np.sum(grad_b**2, axis=0))),
        elastic=float(g.integrate(cst.elastic_energy(b, p))),
        viscous_dissipation=float(g.integrate(np.einsum("ij...,ij...->...", stress, grad_u))),
        relaxation_dissipation=float(g.integrate(relax**2) / p.nu),
    )


def _window_dt(window, minimum=2):
    if len(window) < minimum:
        raise WindowTooShort(f"need at least {minimum} snapshots, got {len(window)}")
    t = np.array([s.time for s in window])
    steps = np.diff(t)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-8 * np.max(steps):
        raise ValueError("window snapshots must be uniformly spaced in time")
    return float(np.mean(steps)), t


def _trapezoid(values, dt):
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(dt * (v.sum() - 0.5 * (v[0] + v[-1])))


def energy_balance_residuals(window, p, ledgers=None):
    """Per-interval residual (E_{n+1} - E_n)/dt + (D_n + D_{n+1})/2 of the energy balance.

    D is the viscous plus relaxation dissipation. Zero for exact solutions
    of the unforced, eps = 0 system; first order in dt for the scheme.
    """
    dt, _ = _window_dt(window)
    if ledgers is None:
        ledgers = [energy_ledger(s, p) for s in window]
    e = np.array([l.total for l in ledgers])
    d = np.array([l.dissipation for l in ledgers])
    return np.diff(e) / dt + 0.5 * (d[1:] + d[:-1])


def cumulative_energy_residual(window, p, ledgers=None):
    """E(T) - E(0) + trapezoid integral of the dissipation over the window."""
    dt, _ = _window_dt(window)
    if ledgers is None:
        ledgers = [energy_ledger(s, p) for s in window]
    e = [l.total for l in ledgers]
    d = [l.dissipation for l in ledgers]
    return e[-1] - e[0] + _trapezoid(d, dt)


# -- a-priori norms ------------------------------------------------------------

INSTANT_NORMS = ("rho_L_gamma", "momentum_L_2gamma_over_gamma_plus_1", "b_L_alpha",
                 "grad_b_L2", "log_b_L1")
CUMULATIVE_NORMS = ("grad_u_L2L2", "relax_L2L2", "rho_L_gamma_plus_1", "b_L20", "grad_b_L10_3")


class NormTracker:
    """Monitor of the instantaneous and time-integrated norms of the a-priori bounds.

    Cumulative norms are ``(int_0^t int |f|^q)^(1/q)``; the raw accumulated
    integrals (q-th powers) are kept in ``integrals``.
    """

    def __init__(self):
        self.times = []
        self.instant = {k: [] for k in INSTANT_NORMS}
        self.integrals = {k: [] for k in CUMULATIVE_NORMS}
        self._last = None

    def _integrands(self, state, p):
        g = state.grid
        rho = np.abs(state.rho)
        grad_u = g.gradient(state.u)
        grad_b = g.gradient(state.b)
        relax = cst.elastic_energy_prime(state.b, p) - p.sigma * g.laplacian(state.b)
        gb = np.sqrt(np.sum(grad_b**2, axis=0))
        return {
            "grad_u_L2L2": g.integrate(np.sum(grad_u**2, axis=(0, 1))),
            "relax_L2L2": g.integrate(relax**2),
            "rho_L_gamma_plus_1": g.integrate(rho ** (p.gamma + 1.0)),
            "b_L20": g.integrate(np.abs(state.b) ** 20),
            "grad_b_L10_3": g.integrate(gb ** (10.0 / 3.0)),
        }

    @staticmethod
    def exponents(p):
        return {"grad_u_L2L2": 2.0, "relax_L2L2": 2.0, "rho_L_gamma_plus_1": p.gamma + 1.0,
                "b_L20": 20.0, "grad_b_L10_3": 10.0 / 3.0}

    def update(self, state, p):
        g = state.grid
        rho = np.abs(state.rho)
        mom = state.rho * state.u
        q = 2.0 * p.gamma / (p.gamma + 1.0)
        mnorm = np.sqrt(np.sum(mom**2, axis=0))
        grad_b = g.gradient(state.b)
        vals = {
            "rho_L_gamma": g.integrate(rho**p.gamma) ** (1.0 / p.gamma),
            "momentum_L_2gamma_over_gamma_plus_1": g.integrate(mnorm**q) ** (1.0 / q),
            "b_L_alpha": g.integrate(np.abs(state.b) ** p.alpha) ** (1.0 / p.alpha),
            "grad_b_L2": np.sqrt(g.integrate(np.sum(grad_b**2, axis=0))),
            "log_b_L1": g.integrate(np.abs(np.log(state.b))),
        }
        for k, v in vals.items():
            self.instant[k].append(float(v))
        integ = self._integrands(state, p)
        if self._last is None:
            for k in CUMULATIVE_NORMS:
                self.integrals[k].append(0.0)
        else:
            t_prev, prev = self._last
            h = state.time - t_prev
            for k in CUMULATIVE_NORMS:
                self.integrals[k].append(self.integrals[k][-1] + 0.5 * h * (prev[k] + integ[k]))
        self._last = (state.time, integ)
        self.times.append(state.time)
        return self.entry(-1, p)

    def cumulative(self, p):
        exps = self.exponents(p)
        return {k: np.asarray(v) ** (1.0 / exps[k]) for k, v in self.integrals.items()}

    def entry(self, i, p):
        exps = self.exponents(p)
        out = {"time": self.times[i]}
        out.update({k: v[i] for k, v in self.instant.items()})
        out.update({k: self.integrals[k][i] ** (1.0 / exps[k]) for k in CUMULATIVE_NORMS})
        return out

    @classmethod
    def columns(cls):
        return ["time", *INSTANT_NORMS, *CUMULATIVE_NORMS]

    def __len__(self):
        return len(self.times)


# -- effective viscous flux -------------------------------------------------------

@dataclass
class EvfReport:
    """Terms of the effective-viscous-flux identity over a window.

    ``lhs = i1 + ... + i7 + i_source + residual``; ``i_source`` collects
    the eps-regularisation and external-forcing contributions (zero for the
    unforced eps = 0 system).
    """

    lhs: float
    i1: float
    i2: float
    i3: float
    i4: float
    i5: float
    i6: float
    i7: float
    i_source: float
    residual: float
    combined_coefficient_field: np.ndarray = field(repr=False)

    @property
    def terms(self):
        return [self.i1, self.i2, self.i3, self.i4, self.i5, self.i6, self.i7]

    @classmethod
    def columns(cls):
        return ["lhs", "i1", "i2", "i3", "i4", "i5", "i6", "i7", "i_source", "residual"]

    def row(self):
        return [self.lhs, *self.terms, self.i_source, self.residual]


def combined_coefficient(b, p):
    """4 sigma b^2 / (9 nu) + 4 mu / 3 + lambda, pointwise."""
    return 4.0 * p.sigma * np.asarray(b) ** 2 / (9.0 * p.nu) + 4.0 * p.mu / 3.0 + p.lam


def _evf_integrands(state, p, forcing_now):
    g = state.grid
    rho, u, b = state.rho, state.u, state.b
    mom = rho * u
    drho = rho - g.mean(rho)
    phi = g.gradient(g.inverse_laplacian(drho))
    hess = g.hessian_inverse_laplacian(rho)
    lap_b = g.laplacian(b)
    div_u = g.divergence(u)
    kort = cst.korteweg_tensor(g.gradient(b), p)
    conv_potential = g.gradient(g.inverse_laplacian(g.divergence(mom), mean_tolerance=1e-8))
    vals = {
        "lhs": g.integrate(cst.fluid_pressure(np.maximum(rho, 0.0), p) * drho),
        "i1": g.integrate(np.sum(mom * phi, axis=0)),
        "i2": g.integrate(np.sum(mom * conv_potential, axis=0)),
        "i3": -g.integrate(np.einsum("i...,j...,ij...->...", mom, u, hess)),
        "i4": -g.integrate(cst.elastic_pressure(b, p) * drho),
        "i5": -g.integrate((2.0 / 3.0) * p.sigma * b * lap_b * drho),
        "i6": g.integrate((4.0 * p.mu / 3.0 + p.lam) * rho * div_u),
        "i7": -g.integrate(np.einsum("ij...,ij...->...", kort, hess)),
    }
    src = -2.0 * p.epsilon * g.integrate(np.sum(mom * g.gradient(rho), axis=0))
    if forcing_now is not None:
        f_rho, f_m, _ = forcing_now
        f_rho = f_rho - g.mean(f_rho)
        src -= g.integrate(np.sum(mom * g.gradient(g.inverse_laplacian(f_rho)), axis=0))
        src -= g.integrate(np.sum(f_m * phi, axis=0))
    vals["i_source"] = src
    return vals


def evf_identity(window, p, forcing=None):
    """Evaluate the effective-viscous-flux identity over a window of snapshots.

    The momentum balance is tested with grad lap^{-1}[rho - mean rho]. For
    solutions of the continuous system the residual vanishes; on solver
    output it measures the time-discretisation error. ``forcing(t)``, when
    given, must return the ``(f_rho, f_m, f_b)`` source fields the run used.
    """
    if len(window) < 3:
        raise WindowTooShort(f"evf_identity needs at least 3 snapshots, got {len(window)}")
    dt, _ = _window_dt(window, 3)
    per = [_evf_integrands(s, p, forcing(s.time) if forcing else None) for s in window]
    keys = ["lhs", "i2", "i3", "i4", "i5", "i6", "i7", "i_source"]
    tot = {k: _trapezoid([v[k] for v in per], dt) for k in keys}
    i1 = per[-1]["i1"] - per[0]["i1"]
    coeff = np.stack([combined_coefficient(s.b, p) for s in window])
    rhs = i1 + sum(tot[k] for k in ("i2", "i3", "i4", "i5", "i6", "i7")) + tot["i_source"]
    return EvfReport(lhs=tot["lhs"], i1=i1, i2=tot["i2"], i3=tot["i3"], i4=tot["i4"], i5=tot["i5"],
                     i6=tot["i6"], i7=tot["i7"], i_source=tot["i_source"],
                     residual=tot["lhs"] - rhs, combined_coefficient_field=coeff)


# -- renormalised continuity -------------------------------------------------------

def rho_log_rho(rho):
    return rho * np.log(rho), np.log(rho) + 1.0, 1.0 / rho


def renormalized_residual(window, p, beta=rho_log_rho, forcing=None):
    """Residual of the renormalised continuity balance integrated over the window.

    For beta(rho) = rho log rho the balance reads

        [int beta(rho)] + int int (beta'(rho) rho - beta(rho)) div u
            + eps int int beta''(rho) |grad rho|^2 - int int beta'(rho) f_rho = 0.

    ``beta`` returns ``(beta, beta', beta'')``. Cells with rho below 1e-14
    are dropped; a PositivityWarning is issued when min rho < 1e-8.
    """
    dt, _ = _window_dt(window, 2)
    g = window[0].grid
    rmin = min(float(np.min(s.rho)) for s in window)
    if rmin < VACUUM_WARN:
        warnings.warn(f"min(rho) = {rmin:.3e} is near vacuum; cells below {VACUUM_DROP:g} "
                      "are dropped from the log", PositivityWarning, stacklevel=2)
    totals, rates = [], []
    for s in window:
        keep = s.rho >= VACUUM_DROP
        rho = np.where(keep, s.rho, 1.0)
        b0, b1, b2 = beta(rho)
        b0, b1, b2 = (np.where(keep, x, 0.0) for x in (b0, b1, b2))
        div_u = g.divergence(s.u)
        rate = (b1 * rho - b0) * div_u + p.epsilon * b2 * np.sum(g.gradient(s.rho) ** 2, axis=0)
        if forcing is not None:
            rate = rate - b1 * forcing(s.time)[0]
        totals.append(g.integrate(b0))
        rates.append(g.integrate(rate))
    return float(totals[-1] - totals[0] + _trapezoid(rates, dt))


# -- rho*b product dynamics -------------------------------------------------------------

def continuity_residual_field(rho, u, drho_dt, grid, p, forcing=None):
    """d_t rho + Div(rho u) - eps lap rho - f_rho, pointwise."""
    r = drho_dt + grid.divergence(rho * u) - p.epsilon * grid.laplacian(rho)
    return r if forcing is None else r - forcing


def b_residual_field(rho, u, b, db_dt, grid, p, forcing=None):
    """d_t b + u.grad b + (e'(b) - sigma lap b)/nu - 2/3 b div u - f_b, pointwise."""
    r = (db_dt + np.sum(u * grid.gradient(b), axis=0)
         + (cst.elastic_energy_prime(b, p) - p.sigma * grid.laplacian(b)) / p.nu
         - (2.0 / 3.0) * b * grid.divergence(u))
    return r if forcing is None else r - forcing


def rho_b_residual_field(rho, u, b, drhob_dt, grid, p, include_eps=True):
    """d_t(rho b) + Div(rho b u) + (rho e'(b) - sigma rho lap b)/nu - 2/3 b rho div u - eps b lap rho."""
    g = grid
    r = (drhob_dt + g.divergence(rho * b * u)
         + rho * (cst.elastic_energy_prime(b, p) - p.sigma * g.laplacian(b)) / p.nu
         - (2.0 / 3.0) * b * rho * g.divergence(u))
    if include_eps:
        r = r - p.epsilon * b * g.laplacian(rho)
    return r


def rho_b_pair_residual(window, p, include_eps=True):
    """Space-time L2 norm of the rho*b product-equation residual over a window.

    The time derivative is the forward difference between consecutive
    snapshots; the other terms use the midpoint (average) fields.
    ``include_eps=False`` drops the eps b lap(rho) correction, leaving an
    O(eps) defect.
    """
    dt, _ = _window_dt(window, 2)
    g = window[0].grid
    total = 0.0
    for s0, s1 in zip(window[:-1], window[1:]):
        rho = 0.5 * (s0.rho + s1.rho)
        b = 0.5 * (s0.b + s1.b)
        u = 0.5 * (s0.u + s1.u)
        d = (s1.rho * s1.b - s0.rho * s0.b) / dt
        r = rho_b_residual_field(rho, u, b, d, g, p, include_eps)
        total += dt * g.integrate(r**2)
    return float(np.sqrt(total))
