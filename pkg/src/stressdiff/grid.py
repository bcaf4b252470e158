"""Periodic grids on the torus [-1, 1]^dim and Fourier-spectral operators.

Fields are plain numpy arrays. A scalar field has shape ``grid.shape``;
vector and tensor fields carry their component axes in front, e.g. a
velocity is ``(dim, *grid.shape)`` and a velocity gradient is
``(dim, dim, *grid.shape)`` with ``grad_u[i, j] = d u_i / d x_j``.

Transforms use the real FFT, so the last spatial axis only stores
non-negative wavenumbers.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
import math

import numpy as np
import scipy.fft

from .errors import NonZeroMean

__all__ = ["GridSpec"]

PERIOD = 2.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``points_per_axis`` samples on each of ``dim`` axes.

    The torus is [-1, 1)^dim, so wavenumbers are ``pi * n`` for integer
    mode indices ``n`` in ``[-M/2, M/2 - 1]``.
    """

    dim: int
    points_per_axis: int
    dealias_fraction: Fraction = field(default=Fraction(2, 3))

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        M = self.points_per_axis
        if M <= 0 or M % 2:
            raise ValueError(f"points_per_axis must be a positive even integer, got {M}")
        frac = Fraction(self.dealias_fraction)
        if not 0 < frac <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {frac}")
        object.__setattr__(self, "dealias_fraction", frac)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def spectral_shape(self):
        M = self.points_per_axis
        return (M,) * (self.dim - 1) + (M // 2 + 1,)

    @property
    def spacing(self):
        return PERIOD / self.points_per_axis

    @property
    def volume(self):
        return PERIOD ** self.dim

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @cached_property
    def coords(self):
        """Tuple of ``dim`` coordinate arrays, each of shape ``self.shape``."""
        x = -1.0 + self.spacing * np.arange(self.points_per_axis)
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    # -- wavenumbers ------------------------------------------------------

    @cached_property
    def mode_indices(self):
        """Integer mode index per axis, broadcastable to ``spectral_shape``."""
        M = self.points_per_axis
        out = []
        for ax in range(self.dim):
            if ax == self.dim - 1:
                n = np.arange(M // 2 + 1)
            else:
                n = np.fft.fftfreq(M, 1.0 / M).astype(int)
            shape = [1] * self.dim
            shape[ax] = n.size
            out.append(n.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self):
        """Wavenumbers ``pi * n`` per axis (Nyquist kept)."""
        return tuple(np.pi * n.astype(float) for n in self.mode_indices)

    @cached_property
    def _ik(self):
        # Nyquist zeroed in odd derivatives so real fields stay real.
        M = self.points_per_axis
        out = []
        for n, k in zip(self.mode_indices, self.wavenumbers):
            out.append(1j * np.where(np.abs(n) == M // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k_squared(self):
        k2 = np.zeros(self.spectral_shape)
        for k in self.wavenumbers:
            k2 = k2 + k**2
        return k2

    @cached_property
    def _inv_k_squared(self):
        k2 = self.k_squared.copy()
        out = np.zeros_like(k2)
        nz = k2 > 0
        out[nz] = 1.0 / k2[nz]
        return out

    @cached_property
    def max_mode(self):
        """Largest retained mode index under the dealiasing rule."""
        return math.ceil(self.dealias_fraction * self.points_per_axis / 2) - 1

    @cached_property
    def dealias_mask(self):
        return self.mode_mask(self.max_mode)

    def mode_mask(self, m):
        """Boolean spectral mask keeping modes with every ``|n_i| <= m``."""
        mask = np.ones(self.spectral_shape, dtype=bool)
        for n in self.mode_indices:
            mask = mask & (np.abs(n) <= m)
        return mask

    # -- transforms -------------------------------------------------------

    def fft(self, f):
        return scipy.fft.rfftn(f, axes=self.axes)

    def ifft(self, fh):
        return scipy.fft.irfftn(fh, s=self.shape, axes=self.axes)

    # -- differential operators ------------------------------------------

    def gradient(self, f):
        """Spectral gradient; adds a trailing component axis before the grid axes.

        Scalar ``(*grid)`` -> vector ``(dim, *grid)``; vector ``(dim, *grid)``
        -> tensor ``(dim, dim, *grid)`` with ``[i, j] = d_j f_i``.
        """
        f = np.asarray(f, dtype=float)
        fh = self.fft(f)
        return np.stack([self.ifft(ik * fh) for ik in self._ik], axis=f.ndim - self.dim)

    def divergence(self, v):
        """Contract the last component axis with the gradient.

        Vector -> scalar, tensor ``T`` -> vector ``(Div T)_i = sum_j d_j T_ij``.
        """
        v = np.asarray(v, dtype=float)
        lead = v.ndim - self.dim - 1
        if lead < 0 or v.shape[lead] != self.dim:
            raise ValueError(f"expected a component axis of length {self.dim}, got shape {v.shape}")
        vh = self.fft(v)
        acc = 0
        for j, ik in enumerate(self._ik):
            acc = acc + ik * np.take(vh, j, axis=lead)
        return self.ifft(acc)

    def laplacian(self, f):
        return self.ifft(-self.k_squared * self.fft(f))

    def inverse_laplacian(self, f, mean_tolerance=1e-10):
        """Solve ``lap(g) = f`` for mean-zero ``g``; ``f`` must have zero mean.

        The tolerance is relative to ``max|f|``.
        """
        f = np.asarray(f, dtype=float)
        scale = np.max(np.abs(f)) if f.size else 0.0
        mean = self.mean(f)
        if np.any(np.abs(mean) > mean_tolerance * max(scale, np.finfo(float).tiny)):
            raise NonZeroMean(f"field mean {np.max(np.abs(mean)):.3e} exceeds tolerance "
                              f"{mean_tolerance:.1e} x max|f| = {mean_tolerance * scale:.3e}")
        return self.ifft(-self._inv_k_squared * self.fft(f))

    def hessian_inverse_laplacian(self, f):
        """``grad grad lap^{-1}[f - mean f]`` as a tensor field (double Riesz transform)."""
        fh = self.fft(f) * self._inv_k_squared
        out = np.empty((self.dim, self.dim) + np.shape(f))
        for i in range(self.dim):
            for j in range(i, self.dim):
                # (i k_i)(i k_j)(-1/|k|^2) = k_i k_j / |k|^2
                out[i, j] = self.ifft(-(self._ik[i] * self._ik[j]) * fh)
                out[j, i] = out[i, j]
        return out

    # -- projections and products ----------------------------------------

    def galerkin_project(self, f, m):
        """Zero every mode with some axis index of magnitude above ``m``."""
        if not 0 <= m <= self.points_per_axis // 2:
            raise ValueError(f"m must lie in [0, {self.points_per_axis // 2}], got {m}")
        return self.ifft(self.fft(f) * self.mode_mask(m))

    def dealias(self, f):
        """Truncate ``f`` to the modes kept by the dealiasing rule."""
        return self.ifft(self.fft(f) * self.dealias_mask)

    def dealiased_product(self, f, g):
        """Pointwise product with inputs and output truncated to the dealiased band.

        Exact for the retained modes: aliases of a product of two fields in
        ``|n| < f M / 2`` never land back inside that band when ``f <= 2/3``.
        """
        return self.dealias(self.dealias(f) * self.dealias(g))

    # -- quadrature -------------------------------------------------------

    def integrate(self, f):
        """Integral over the torus (exact for trigonometric polynomials below Nyquist)."""
        return np.sum(f, axis=self.axes) * self.cell_volume

    def mean(self, f):
        return np.mean(f, axis=self.axes)

    def inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def norm_l2(self, f):
        return np.sqrt(self.integrate(np.asarray(f) ** 2))

    def norm_l2_spectral(self, f):
        """L2 norm from Fourier coefficients (Parseval), accounting for the half spectrum."""
        fh = self.fft(f)
        M = self.points_per_axis
        w = np.full(fh.shape[-1], 2.0)
        w[0] = 1.0
        w[-1] = 1.0  # Nyquist column of the real transform
        power = np.sum(np.abs(fh) ** 2 * w, axis=self.axes)
        return np.sqrt(power * self.volume) / M**self.dim
