"""Angular-spectrum free-space propagation.

A field is Fourier transformed, each plane-wave component is delayed by
``exp(-i kz d)`` with the full non-paraxial ``kz = sqrt(k**2 - kx**2 - ky**2)``,
and the result is transformed back. Evanescent components are dropped.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import InvalidArgument
from .optics import Field, Grid, make_grid

FFT_WORKERS = 1


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    grid: Grid
    distance: float
    phase: np.ndarray
    evanescent: np.ndarray


def _angular_k2(grid: Grid) -> np.ndarray:
    kx = 2 * np.pi * grid.fx
    ky = 2 * np.pi * grid.fy
    return ky[:, None] ** 2 + kx[None, :] ** 2


@lru_cache(maxsize=64)
def _kernel_cached(grid: Grid, distance: float) -> SpectralKernel:
    k2 = (2 * np.pi / grid.wavelength) ** 2
    kperp2 = _angular_k2(grid)
    evanescent = kperp2 > k2
    kz = np.sqrt(np.where(evanescent, 0.0, k2 - kperp2))
    phase = np.where(evanescent, 0.0, np.exp(-1j * kz * distance))
    phase.flags.writeable = False
    evanescent.flags.writeable = False
    return SpectralKernel(grid, distance, phase, evanescent)


_cache_lock = threading.Lock()


def make_kernel(grid: Grid, distance: float) -> SpectralKernel:
    """Transfer function for propagation over ``distance`` [m] (may be negative)."""
    if not np.isfinite(distance):
        raise InvalidArgument(f"distance must be finite, got {distance!r}")
    with _cache_lock:
        return _kernel_cached(grid, float(distance))


def propagate_array(amp: np.ndarray, grid: Grid, distance: float, guard: int = 1) -> np.ndarray:
    """Propagate raw amplitudes of shape ``(..., ny, nx)``.

    ``guard > 1`` embeds the field in a zero-padded grid ``guard`` times larger
    while propagating, which suppresses wrap-around, then crops back.
    """
    if distance == 0.0:
        return np.array(amp, dtype=np.complex128)
    if guard == 1:
        kern = make_kernel(grid, distance).phase
        spec = sfft.fft2(amp, workers=FFT_WORKERS)
        spec *= kern
        return sfft.ifft2(spec, workers=FFT_WORKERS)
    if guard < 1 or int(guard) != guard:
        raise InvalidArgument(f"guard factor must be a positive integer, got {guard!r}")
    big = make_grid(grid.nx * guard, grid.ny * guard, grid.pitch, grid.wavelength)
    y0 = big.ny // 2 - grid.ny // 2
    x0 = big.nx // 2 - grid.nx // 2
    pad = np.zeros(amp.shape[:-2] + big.shape, dtype=np.complex128)
    pad[..., y0 : y0 + grid.ny, x0 : x0 + grid.nx] = amp
    out = propagate_array(pad, big, distance)
    return out[..., y0 : y0 + grid.ny, x0 : x0 + grid.nx]


def propagate(field: Field, distance: float, guard: int = 1) -> Field:
    """Free-space propagation of ``field`` over ``distance`` [m]."""
    return Field(field.grid, propagate_array(field.amplitude, field.grid, distance, guard))


def band_limit(field: Field) -> Field:
    """Remove evanescent spectral content (makes propagation exactly invertible)."""
    kern = make_kernel(field.grid, 0.0)
    spec = sfft.fft2(field.amplitude)
    spec[kern.evanescent] = 0
    return Field(field.grid, sfft.ifft2(spec))
