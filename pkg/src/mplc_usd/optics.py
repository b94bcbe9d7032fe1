"""Sampling grids, scalar fields and the mode families built on them.

Fields are complex amplitudes sampled on a centered, square-pixel grid.
Norms and overlaps are plain Riemann sums weighted by ``pitch**2`` so that
they agree exactly with the energy bookkeeping of the FFT propagator.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite as _herm

from .errors import InvalidArgument, ResolutionWarning

# resolution / containment guards for generated modes
MIN_WAIST_PIXELS = 4.0
MIN_EXTENT_WAISTS = 6.0


@dataclass(frozen=True)
class Grid:
    """Centered transverse sampling grid.

    Attributes
    ----------
    nx, ny : int
        Pixel counts along x (columns) and y (rows).
    pitch : float
        Pixel size [m].
    wavelength : float
        Optical wavelength [m].
    """

    nx: int
    ny: int
    pitch: float
    wavelength: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical size (x, y) [m]."""
        return (self.nx * self.pitch, self.ny * self.pitch)

    @property
    def x(self) -> np.ndarray:
        """Pixel-center x coordinates, zero at column ``nx // 2``."""
        return (np.arange(self.nx) - self.nx // 2) * self.pitch

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.pitch

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` coordinate arrays of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    @property
    def fx(self) -> np.ndarray:
        """Spatial frequencies along x [cycles/m] in standard FFT order
        (zero first, then positive, then negative; see ``numpy.fft.fftfreq``)."""
        return np.fft.fftfreq(self.nx, d=self.pitch)

    @property
    def fy(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, d=self.pitch)

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        hx = self.nx * self.pitch / 2 - margin
        hy = self.ny * self.pitch / 2 - margin
        return -hx < x < hx and -hy < y < hy

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "pitch": self.pitch, "wavelength": self.wavelength}


def make_grid(nx: int, ny: int, pitch: float, wavelength: float) -> Grid:
    """Validate and build a :class:`Grid`.

    Pixel counts must be even and at least 2 so the zero coordinate and the
    zero frequency both fall on a sample.
    """
    for name, n in (("nx", nx), ("ny", ny)):
        if int(n) != n or n < 2 or n % 2:
            raise InvalidArgument(f"{name} must be an even integer >= 2, got {n!r}")
    if not (pitch > 0 and math.isfinite(pitch)):
        raise InvalidArgument(f"pitch must be positive, got {pitch!r}")
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise InvalidArgument(f"wavelength must be positive, got {wavelength!r}")
    return Grid(int(nx), int(ny), float(pitch), float(wavelength))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex scalar amplitude on a grid. Immutable."""

    grid: Grid
    amplitude: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=np.complex128)
        if amp.shape != self.grid.shape:
            raise InvalidArgument(
                f"amplitude shape {amp.shape} does not match grid {self.grid.shape}"
            )
        amp.flags.writeable = False
        object.__setattr__(self, "amplitude", amp)

    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.grid.pitch**2)

    def norm(self) -> float:
        return math.sqrt(self.power())

    def normalized(self) -> "Field":
        n = self.norm()
        if n == 0:
            raise InvalidArgument("cannot normalize a zero field")
        return Field(self.grid, self.amplitude / n)

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def _check(self, other: "Field") -> None:
        if other.grid != self.grid:
            raise InvalidArgument("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.amplitude + other.amplitude)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.amplitude - other.amplitude)

    def __mul__(self, scalar: complex) -> "Field":
        return Field(self.grid, self.amplitude * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.amplitude)


@dataclass(frozen=True)
class ModeBasis:
    """Ordered orthonormal set of fields with a label per element."""

    fields: tuple[Field, ...]
    labels: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        labels = tuple(self.labels) if self.labels else tuple(range(len(self.fields)))
        if len(labels) != len(self.fields):
            raise InvalidArgument("one label per basis field is required")
        object.__setattr__(self, "labels", labels)
        if not self.fields:
            raise InvalidArgument("empty mode basis")
        g = self.fields[0].grid
        if any(f.grid != g for f in self.fields):
            raise InvalidArgument("basis fields live on different grids")

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, i: int) -> Field:
        return self.fields[i]

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    def gram(self) -> np.ndarray:
        return gram_matrix(self.fields)

    def check_orthonormal(self, tol: float = 1e-6) -> None:
        err = np.max(np.abs(self.gram() - np.eye(len(self))))
        if err >= tol:
            raise InvalidArgument(f"basis is not orthonormal (max Gram error {err:.2e})")

    def project(self, f: Field) -> np.ndarray:
        """Coefficients ``<b_k|f>``."""
        return np.array([inner_product(b, f) for b in self.fields])


def _guard_waist(grid: Grid, waist: float, strict: bool) -> None:
    problems = []
    if waist < MIN_WAIST_PIXELS * grid.pitch:
        problems.append(f"waist {waist:.3g} m is below {MIN_WAIST_PIXELS:g} pixels")
    if min(grid.extent) < MIN_EXTENT_WAISTS * waist:
        problems.append(f"grid extent is smaller than {MIN_EXTENT_WAISTS:g} waists")
    if problems:
        msg = "; ".join(problems)
        if strict:
            raise InvalidArgument(msg)
        warnings.warn(msg, ResolutionWarning, stacklevel=3)


def _hg_1d(u: np.ndarray, order: int, waist: float) -> np.ndarray:
    c = np.zeros(order + 1)
    c[order] = 1.0
    return _herm.hermval(math.sqrt(2.0) * u / waist, c) * np.exp(-(u**2) / waist**2)


def hermite_gaussian(
    grid: Grid,
    m: int,
    n: int,
    waist: float,
    center: tuple[float, float] = (0.0, 0.0),
    strict: bool = False,
) -> Field:
    """Hermite-Gaussian mode HG_mn at its waist plane.

    ``m`` is the order along x and ``n`` along y. Physicists' Hermite
    polynomials are used, so every mode has a positive lobe at large +x/+y.
    The result is normalized on the grid (discrete norm exactly 1).
    """
    if m < 0 or n < 0 or int(m) != m or int(n) != n:
        raise InvalidArgument(f"mode indices must be non-negative integers, got ({m}, {n})")
    if not waist > 0:
        raise InvalidArgument(f"waist must be positive, got {waist!r}")
    _guard_waist(grid, waist, strict)
    ux = _hg_1d(grid.x - center[0], int(m), waist)
    uy = _hg_1d(grid.y - center[1], int(n), waist)
    return Field(grid, np.outer(uy, ux)).normalized()


def gaussian_spot(
    grid: Grid, waist: float, center: tuple[float, float], strict: bool = False
) -> Field:
    """Normalized fundamental Gaussian displaced to ``center`` (x, y) [m].

    The center must sit at least one waist inside the grid boundary.
    """
    cx, cy = center
    if not grid.contains(cx, cy, margin=waist):
        raise InvalidArgument(f"spot center {center} is not contained by the grid")
    return hermite_gaussian(grid, 0, 0, waist, center=(cx, cy), strict=strict)


def inner_product(f: Field, g: Field) -> complex:
    """``<f|g>``, conjugate-linear in ``f``."""
    if f.grid != g.grid:
        raise InvalidArgument("inner product of fields on different grids")
    return complex(np.vdot(f.amplitude, g.amplitude) * f.grid.pitch**2)


def gram_matrix(fields: Sequence[Field]) -> np.ndarray:
    """Matrix ``G[i, j] = <f_i|f_j>``."""
    g = fields[0].grid
    stack = np.stack([f.amplitude.ravel() for f in fields])
    return stack.conj() @ stack.T * g.pitch**2


def superpose(coeffs, basis: ModeBasis) -> Field:
    """``sum_k coeffs[k] * basis[k]``."""
    c = np.asarray(coeffs, dtype=np.complex128).ravel()
    if c.size != len(basis):
        raise InvalidArgument(f"{c.size} coefficients for a basis of {len(basis)} modes")
    amp = np.zeros(basis.grid.shape, dtype=np.complex128)
    for ck, fk in zip(c, basis.fields):
        amp += ck * fk.amplitude
    return Field(basis.grid, amp)


def hg_family(order: int) -> list[tuple[int, int]]:
    """All (m, n) with ``m + n == order`` in lexicographic order."""
    if order < 0:
        raise InvalidArgument("mode order must be non-negative")
    return [(m, order - m) for m in range(order + 1)]


def hg_basis(grid: Grid, order: int, waist: float, strict: bool = False) -> ModeBasis:
    """The ``order + 1`` HG modes of a single mode group, lexicographic (m, n)."""
    idx = hg_family(order)
    return ModeBasis(tuple(hermite_gaussian(grid, m, n, waist, strict=strict) for m, n in idx), tuple(idx))


def spot_layout(
    count: int, radius: float, center: tuple[float, float] = (0.0, 0.0)
) -> list[tuple[float, float]]:
    """``count`` points equally spaced on a circle, first at 90 degrees,
    proceeding counterclockwise."""
    if count < 1 or int(count) != count:
        raise InvalidArgument(f"count must be a positive integer, got {count!r}")
    if radius < 0:
        raise InvalidArgument(f"radius must be non-negative, got {radius!r}")
    cx, cy = center
    out = []
    for k in range(int(count)):
        a = math.pi / 2 + 2 * math.pi * k / count
        out.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))
    return out


# -- serialization -----------------------------------------------------------


def _write_matrix_csv(path: Path, a: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def save_field(f: Field, stem) -> list[Path]:
    """Write ``<stem>.re.csv``, ``<stem>.im.csv`` and ``<stem>.json``."""
    stem = Path(stem)
    paths = [stem.with_suffix(".re.csv"), stem.with_suffix(".im.csv"), stem.with_suffix(".json")]
    _write_matrix_csv(paths[0], f.amplitude.real)
    _write_matrix_csv(paths[1], f.amplitude.imag)
    paths[2].write_text(json.dumps(f.grid.to_dict(), indent=2))
    return paths


def load_field(stem) -> Field:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    grid = make_grid(meta["nx"], meta["ny"], meta["pitch"], meta["wavelength"])
    re = np.loadtxt(stem.with_suffix(".re.csv"), delimiter=",", ndmin=2)
    im = np.loadtxt(stem.with_suffix(".im.csv"), delimiter=",", ndmin=2)
    return Field(grid, re + 1j * im)
