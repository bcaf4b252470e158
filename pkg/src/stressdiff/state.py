"""The unknown trio (rho, u, b) at one time instant, plus initial-data builders."""

from dataclasses import dataclass, replace

import numpy as np

from .grid import GridSpec


@dataclass(frozen=True)
class State:
    """Density, velocity and spherical elastic strain on a grid.

    ``rho`` and ``b`` have shape ``grid.shape``; ``u`` has shape
    ``(dim, *grid.shape)``.
    """

    grid: GridSpec
    time: float
    rho: np.ndarray
    u: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        g = self.grid
        rho = np.asarray(self.rho, dtype=float)
        u = np.asarray(self.u, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if rho.shape != g.shape or b.shape != g.shape:
            raise ValueError(f"rho and b must have shape {g.shape}")
        if u.shape != (g.dim,) + g.shape:
            raise ValueError(f"u must have shape {(g.dim,) + g.shape}, got {u.shape}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "time", float(self.time))

    def copy(self):
        return replace(self, rho=self.rho.copy(), u=self.u.copy(), b=self.b.copy())

    @property
    def mass(self):
        return float(self.grid.integrate(self.rho))


def uniform_state(grid, rho=1.0, b=1.0, u=None, time=0.0):
    """Constant fields; ``u`` defaults to zero."""
    vel = np.zeros((grid.dim,) + grid.shape)
    if u is not None:
        vel += np.asarray(u, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    return State(grid, time, np.full(grid.shape, float(rho)), vel, np.full(grid.shape, float(b)))


def trig_perturbation(grid, rho=1.0, b=1.0, rho_amp=0.0, u_amp=0.0, b_amp=0.0, mode=1, time=0.0):
    """Single-mode cosine/sine perturbations of a uniform state.

    rho = rho + rho_amp cos(pi n x_0), b = b + b_amp cos(pi n x_0),
    u_i = u_amp sin(pi n x_i).
    """
    x = grid.coords
    k = np.pi * mode
    r = rho + rho_amp * np.cos(k * x[0])
    bb = b + b_amp * np.cos(k * x[0])
    u = np.stack([u_amp * np.sin(k * xi) for xi in x])
    return State(grid, time, r, u, bb)


def band_limited_random(grid, rng, max_mode=3):
    """Random real trigonometric polynomial with modes |n_i| <= max_mode, scaled to max|f| = 1."""
    shape = grid.spectral_shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coef = coef * grid.mode_mask(max_mode)
    coef[(0,) * grid.dim] = 0.0
    f = grid.ifft(coef)
    peak = np.max(np.abs(f))
    return f / peak if peak > 0 else f


def seeded_random(grid, seed, rho=1.0, b=1.0, rho_amp=0.1, u_amp=0.1, b_amp=0.1, max_mode=3, time=0.0):
    """Smooth random perturbation of a uniform state, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    r = rho + rho_amp * band_limited_random(grid, rng, max_mode)
    u = np.stack([u_amp * band_limited_random(grid, rng, max_mode) for _ in range(grid.dim)])
    bb = b + b_amp * band_limited_random(grid, rng, max_mode)
    return State(grid, time, r, u, bb)
