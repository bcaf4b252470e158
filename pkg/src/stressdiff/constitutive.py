"""Pointwise constitutive laws: elastic energy, pressures, stresses, dissipation.

All functions accept scalars or numpy arrays and broadcast.
"""

from dataclasses import dataclass, fields, asdict
from typing import Optional

import numpy as np

from .errors import NegativeDensity, NonPositiveB, ValidationError

ENERGY_MODELS = ("power-log", "linear-log", "appendix")


@dataclass(frozen=True)
class Parameters:
    """Material constants and scheme knobs.

    ``energy_model`` picks the elastic energy:

    * ``power-log``  : a1 b**alpha - a2 log b   (default)
    * ``linear-log`` : a1 (b - 1) - a2 log b
    * ``appendix``   : 3 mu / 2 (b - 1 - log b)

    ``m_cutoff=None`` means no Galerkin truncation beyond dealiasing.
    """

    mu: float = 0.1
    lam: float = 0.05
    nu: float = 1.0
    sigma: float = 0.05
    a0: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    gamma: float = 4.0
    alpha: float = 2.0
    s: float = 2.0
    epsilon: float = 0.0
    m_cutoff: Optional[int] = None
    energy_model: str = "power-log"

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValidationError(problems)

    def violations(self):
        out = []
        checks = [
            (self.mu > 0, "mu must be > 0"),
            (self.lam >= 0, "lambda must be >= 0"),
            (self.nu > 0, "nu must be > 0"),
            (self.sigma > 0, "sigma must be > 0"),
            (self.a0 > 0, "a0 must be > 0"),
            (self.a1 > 0, "a1 must be > 0"),
            (self.a2 > 0, "a2 must be > 0"),
            (self.gamma > 1, "gamma must be > 1"),
            (self.alpha >= 1, "alpha must be >= 1"),
            (self.s >= 0, "s must be >= 0"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (self.m_cutoff is None or (isinstance(self.m_cutoff, int) and self.m_cutoff >= 0),
             "m_cutoff must be a non-negative integer or None"),
            (self.energy_model in ENERGY_MODELS,
             f"energy_model must be one of {', '.join(ENERGY_MODELS)}"),
        ]
        for ok, msg in checks:
            if not ok:
                out.append(msg)
        return out

    @property
    def theorem_mode(self):
        """True when gamma > 3 and alpha >= 1 (the existence-theorem hypotheses)."""
        return self.gamma > 3 and self.alpha >= 1

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return Parameters(**data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_b(b):
    b = np.asarray(b, dtype=float)
    if np.any(~(b > 0)):
        raise NonPositiveB(f"b must be positive, min(b) = {np.min(b):.6g}")
    return b


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise NegativeDensity(f"density must be non-negative, min = {np.min(rho):.6g}")
    return rho


# -- elastic energy --------------------------------------------------------

def elastic_energy(b, p):
    b = _check_b(b)
    if p.energy_model == "power-log":
        return p.a1 * b**p.alpha - p.a2 * np.log(b)
    if p.energy_model == "linear-log":
        return p.a1 * (b - 1.0) - p.a2 * np.log(b)
    return 1.5 * p.mu * (b - 1.0 - np.log(b))


def elastic_energy_prime(b, p):
    b = _check_b(b)
    if p.energy_model == "power-log":
        return p.a1 * p.alpha * b ** (p.alpha - 1.0) - p.a2 / b
    if p.energy_model == "linear-log":
        return p.a1 - p.a2 / b
    return 1.5 * p.mu * (1.0 - 1.0 / b)


def elastic_energy_second(b, p):
    b = _check_b(b)
    if p.energy_model == "power-log":
        return p.a1 * p.alpha * (p.alpha - 1.0) * b ** (p.alpha - 2.0) + p.a2 / b**2
    if p.energy_model == "linear-log":
        return p.a2 / b**2
    return 1.5 * p.mu / b**2


def equilibrium_b(p):
    """The minimiser b* of the elastic energy, where e'(b*) = 0."""
    if p.energy_model == "power-log":
        return (p.a2 / (p.a1 * p.alpha)) ** (1.0 / p.alpha)
    if p.energy_model == "linear-log":
        return p.a2 / p.a1
    return 1.0


def elastic_pressure(b, p):
    """p_el(b) = -e(b) - 2/3 b e'(b)."""
    b = _check_b(b)
    return -elastic_energy(b, p) - (2.0 / 3.0) * b * elastic_energy_prime(b, p)


# -- barotropic pressure ---------------------------------------------------

def fluid_pressure(rho, p):
    """p_fl = a0 rho**gamma."""
    rho = _check_rho(rho)
    return p.a0 * rho**p.gamma


def pressure_potential(rho, p):
    """Psi = a0 rho**gamma / (gamma - 1), so that rho Psi' - Psi = p_fl."""
    rho = _check_rho(rho)
    return p.a0 * rho**p.gamma / (p.gamma - 1.0)


def pressure_potential_prime(rho, p):
    rho = _check_rho(rho)
    return p.a0 * p.gamma / (p.gamma - 1.0) * rho ** (p.gamma - 1.0)


def sound_speed(rho, p):
    rho = _check_rho(rho)
    return np.sqrt(p.gamma * p.a0 * rho ** (p.gamma - 1.0))


# -- stresses --------------------------------------------------------------

def _identity_like(t):
    dim = t.shape[0]
    eye = np.eye(dim).reshape((dim, dim) + (1,) * (t.ndim - 2))
    return eye


def trace(t):
    return np.einsum("ii...->...", t)


def symmetric_part(t):
    return 0.5 * (t + np.swapaxes(t, 0, 1))


def deviatoric_part(t):
    """A - tr(A)/3 I (three-dimensional convention, also for dim < 3)."""
    return t - trace(t) / 3.0 * _identity_like(t)


def deviatoric_norm_sq(grad_u):
    """|D_dev|^2 for D = sym(grad u), with the flow embedded in three dimensions.

    For dim < 3 the out-of-plane diagonal entries of D_dev are -tr(D)/3,
    which keeps S : grad u = 2 mu |D_dev|^2 + lambda (div u)^2 in every dimension.
    """
    d = symmetric_part(np.asarray(grad_u, dtype=float))
    tr = trace(d)
    return np.einsum("ij...,ij...->...", d, d) - tr**2 / 3.0


def viscous_stress(grad_u, p):
    """S = mu (grad u + grad u^T - 2/3 div u I) + lambda div u I."""
    grad_u = np.asarray(grad_u, dtype=float)
    div = trace(grad_u)
    eye = _identity_like(grad_u)
    return p.mu * (grad_u + np.swapaxes(grad_u, 0, 1) - (2.0 / 3.0) * div * eye) + p.lam * div * eye


def korteweg_tensor(grad_b, p):
    """sigma (grad b (x) grad b - |grad b|^2 / 2 I)."""
    grad_b = np.asarray(grad_b, dtype=float)
    outer = grad_b[:, None] * grad_b[None, :]
    sq = np.sum(grad_b**2, axis=0)
    return p.sigma * (outer - 0.5 * sq * _identity_like(outer))


def rate_of_dissipation(grad_u, b, lap_b, p):
    """xi = 2 mu |D_dev|^2 + lambda (div u)^2 + (e'(b) - sigma lap b)^2 b**(2 - s) / nu."""
    grad_u = np.asarray(grad_u, dtype=float)
    b = _check_b(b)
    div = trace(grad_u)
    relax = elastic_energy_prime(b, p) - p.sigma * np.asarray(lap_b)
    return (2.0 * p.mu * deviatoric_norm_sq(grad_u)
            + p.lam * div**2
            + relax**2 * b ** (2.0 - p.s) / p.nu)
