"""Virtual USD experiments: sorter design, detection, data processing.

A sorter for dimension ``d`` takes ``d`` symmetric states encoded on the
``d + 1`` Hermite-Gaussian modes of order ``d`` and sends them to ``d + 1``
Gaussian spots on a circle, the last spot being the inconclusive outcome.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .mplc import MPLCSystem, WFMOptions, WFMReport, wavefront_match
from .optics import (
    Field,
    Grid,
    ModeBasis,
    gaussian_spot,
    gram_matrix,
    hg_basis,
    make_grid,
    spot_layout,
    superpose,
)
from .states import (
    SymmetricStateSet,
    USDMeasurement,
    mesd_bound,
    symmetric_states,
    theta_for_fidelity,
    usd_measurement,
)

log = logging.getLogger(__name__)


@dataclass
class Geometry:
    """Simulation grid, MPLC layout and mode sizes (SI units)."""

    nx: int = 256
    ny: int = 256
    pitch: float = 8e-6
    wavelength: float = 633e-9
    n_planes: int = 4
    plane_spacing: float = 17e-3
    lead_in: float = 17e-3
    lead_out: float = 17e-3
    hg_waist: float = 40e-6
    spot_waist: float = 34e-6
    spot_radius: float | None = None
    detector_factor: float = 1.5
    guard: int = 1

    #: default circle radius in spot waists when ``spot_radius`` is None
    RADIUS_WAISTS = 3.2
    #: minimum gap between neighbouring detector disks, in disk radii
    DISK_GAP = 0.5

    def grid(self) -> Grid:
        return make_grid(self.nx, self.ny, self.pitch, self.wavelength)

    def system(self) -> MPLCSystem:
        return MPLCSystem(
            self.grid(), self.n_planes, self.plane_spacing, self.lead_in, self.lead_out, guard=self.guard
        )

    def radius_for(self, count: int) -> float:
        """Spot-circle radius for ``count`` outcomes.

        An explicit ``spot_radius`` is used as given. Otherwise the radius is
        ``RADIUS_WAISTS`` spot waists, grown where needed so that neighbouring
        detector disks keep a gap of ``DISK_GAP`` disk radii.
        """
        if self.spot_radius is not None:
            return self.spot_radius
        disk = self.detector_factor * self.spot_waist
        needed = (1 + self.DISK_GAP / 2) * disk / math.sin(math.pi / count) if count > 1 else 0.0
        return max(self.RADIUS_WAISTS * self.spot_waist, needed)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def spot_centers(grid: Grid, count: int, radius: float) -> list[tuple[float, float]]:
    """Circle layout snapped to pixel centers, so every spot and every
    detector disk is sampled identically."""
    out = []
    for x, y in spot_layout(count, radius):
        out.append((round(x / grid.pitch) * grid.pitch, round(y / grid.pitch) * grid.pitch))
    return out


@dataclass(eq=False)
class SorterDesign:
    d: int
    fidelity: float
    theta: float
    branch: str
    geometry: Geometry
    states: SymmetricStateSet | None
    measurement: USDMeasurement
    basis: ModeBasis
    spots: list[Field]
    centers: list[tuple[float, float]]
    inputs: list[Field]
    targets: list[Field]
    system: MPLCSystem | None = None
    report: WFMReport | None = None

    def params(self) -> dict:
        return {
            "d": self.d,
            "fidelity": self.fidelity,
            "theta": self.theta,
            "branch": self.branch,
            "geometry": self.geometry.to_dict(),
        }


def usd_targets(measurement: USDMeasurement, spots: list[Field]) -> list[Field]:
    """Output fields that realise the measurement: input ``i`` goes to
    ``sum_k <outcome_k|psi_i> spot_k`` (inconclusive spot last)."""
    amps = measurement.amplitudes()
    spot_basis = ModeBasis(tuple(spots))
    return [superpose(amps[i], spot_basis).normalized() for i in range(measurement.d)]


def sorter_fields(d: int, fidelity: float, geometry: Geometry | None = None, branch: str = "+") -> SorterDesign:
    """Inputs, targets and measurement of a sorter, without training."""
    geometry = geometry or Geometry()
    if int(d) != d or not 2 <= d <= 8:
        raise InvalidArgument(f"dimension must be an integer in [2, 8], got {d!r}")
    if not 0.0 <= fidelity < 1.0:
        raise InvalidArgument(f"fidelity must lie in [0, 1), got {fidelity!r}")
    d = int(d)
    theta = theta_for_fidelity(d, fidelity, branch)
    states = symmetric_states(d, theta)
    meas = usd_measurement(states)
    grid = geometry.grid()
    basis = hg_basis(grid, d, geometry.hg_waist)
    inputs = [superpose(v, basis).normalized() for v in meas.states]
    centers = spot_centers(grid, d + 1, geometry.radius_for(d + 1))
    spots = [gaussian_spot(grid, geometry.spot_waist, c) for c in centers]
    targets = usd_targets(meas, spots)
    return SorterDesign(d, fidelity, theta, branch, geometry, states, meas, basis, spots, centers, inputs, targets)


def build_sorter(
    d: int,
    fidelity: float,
    geometry: Geometry | None = None,
    wfm_opts: WFMOptions | None = None,
    branch: str = "+",
) -> SorterDesign:
    """Design and train the MPLC sorter for ``d`` states of pairwise fidelity ``fidelity``."""
    design = sorter_fields(d, fidelity, geometry, branch)
    design.system, design.report = wavefront_match(
        design.geometry.system(), design.inputs, design.targets, wfm_opts
    )
    return design


# -- detection ---------------------------------------------------------------


@dataclass(eq=False)
class DetectorLayout:
    grid: Grid
    centers: list[tuple[float, float]]
    radius: float
    masks: np.ndarray  # (n_outcomes, ny, nx) bool


def make_detector(grid: Grid, centers, radius: float) -> DetectorLayout:
    """Circular integration disks, one per outcome."""
    if not radius > 0:
        raise InvalidArgument("detector radius must be positive")
    c = np.asarray(centers, dtype=float)
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            if np.hypot(*(c[i] - c[j])) <= 2 * radius:
                raise InvalidArgument(f"detector disks {i} and {j} overlap")
    X, Y = grid.mesh()
    masks = np.stack([(X - x) ** 2 + (Y - y) ** 2 <= radius**2 for x, y in c])
    return DetectorLayout(grid, [tuple(p) for p in c], float(radius), masks)


def detector_for(design: SorterDesign) -> DetectorLayout:
    g = design.geometry
    return make_detector(g.grid(), design.centers, g.detector_factor * g.spot_waist)


def integrate(detector: DetectorLayout, fields) -> np.ndarray:
    """Power collected by each disk for each field, shape ``(n_fields, n_outcomes)``."""
    inten = np.stack([np.abs(f.amplitude if isinstance(f, Field) else f) ** 2 for f in fields])
    flat = detector.masks.reshape(len(detector.masks), -1).astype(float)
    return inten.reshape(len(inten), -1) @ flat.T * detector.grid.pitch**2


def normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    s = m.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        raise InvalidArgument("a row carries no detected power")
    return m / s


@dataclass
class Outcomes:
    raw: np.ndarray
    normalized: np.ndarray


def simulate_outcomes(design: SorterDesign, detector: DetectorLayout | None = None, ideal: bool = False) -> Outcomes:
    """Detected power per (input, outcome).

    With ``ideal=True`` the MPLC is bypassed and the target fields are
    detected directly.
    """
    detector = detector or detector_for(design)
    if ideal:
        out = [t.amplitude for t in design.targets]
    else:
        if design.system is None:
            raise InvalidArgument("design has not been trained")
        out = design.system.forward_array(np.stack([f.amplitude for f in design.inputs]))
    raw = integrate(detector, out)
    return Outcomes(raw, normalize_rows(raw))


# -- data processing ---------------------------------------------------------


def correction_vector(measured: np.ndarray, ideal: np.ndarray) -> np.ndarray:
    """Per-outcome scale factors: diagonal ratios, then the ratio of the
    inconclusive-column sums."""
    E = np.asarray(measured, dtype=float)
    M = np.asarray(ideal, dtype=float)
    if E.shape != M.shape or E.shape[1] != E.shape[0] + 1:
        raise InvalidArgument(f"expected two d x (d+1) matrices, got {E.shape} and {M.shape}")
    d = E.shape[0]
    diag = np.diag(M[:, :d])
    amb = M[:, d].sum()
    if np.any(diag == 0) or amb == 0:
        raise InvalidArgument("ideal matrix has a zero diagonal or inconclusive-column sum")
    return np.append(np.diag(E[:, :d]) / diag, E[:, d].sum() / amb)


def apply_correction(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Column-wise scaling ``m[i, j] * v[j]``."""
    return np.asarray(m, dtype=float) * np.asarray(v, dtype=float)[None, :]


def confusion_matrix(m: np.ndarray) -> np.ndarray:
    """Drop the inconclusive column and renormalize each row."""
    m = np.asarray(m, dtype=float)
    c = m[:, :-1]
    s = c.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        bad = int(np.flatnonzero(s.ravel() <= 0)[0])
        raise InvalidArgument(f"row {bad} is entirely inconclusive; confusion row undefined")
    return c / s


def classification_accuracy(m: np.ndarray) -> float:
    """Mean fraction of conclusive light landing in the correct outcome."""
    return float(np.mean(np.diag(confusion_matrix(m))))


def error_probability(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-row probability of a wrong conclusive outcome, and its mean."""
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    conclusive = m[:, :d]
    per_row = conclusive.sum(axis=1) - np.diag(conclusive)
    return per_row, float(per_row.mean())


def corrected_matrix(raw: np.ndarray, ideal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Undo mode-dependent loss: divide each column of the measured matrix by
    its correction factor, then renormalize rows. Returns ``(matrix, v)``."""
    v = correction_vector(raw, ideal)
    safe = np.where(v > 0, v, 1.0)
    return normalize_rows(apply_correction(raw, 1.0 / safe)), v


@dataclass
class ReportRow:
    d: int
    fidelity: float
    p_err: float
    bound: float
    below_bound: bool
    eta: float | None = None

    def radius_for(self, count: int) -> float:
        """Spot-circle radius for ``count`` outcomes.

        An explicit ``spot_radius`` is used as given. Otherwise the radius is
        ``RADIUS_WAISTS`` spot waists, grown where needed so that neighbouring
        detector disks keep a gap of ``DISK_GAP`` disk radii.
        """
        if self.spot_radius is not None:
            return self.spot_radius
        disk = self.detector_factor * self.spot_waist
        needed = (1 + self.DISK_GAP / 2) * disk / math.sin(math.pi / count) if count > 1 else 0.0
        return max(self.RADIUS_WAISTS * self.spot_waist, needed)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def usd_vs_mesd_report(entries) -> list[ReportRow]:
    """Compare error probabilities with the minimum-error bound.

    ``entries`` holds ``(d, F, normalized_matrix)`` or
    ``(d, F, normalized_matrix, eta)`` tuples.
    """
    rows = []
    for e in entries:
        d, F, m = e[0], e[1], e[2]
        eta = e[3] if len(e) > 3 else None
        _, p = error_probability(m)
        b = mesd_bound(F)
        rows.append(ReportRow(int(d), float(F), p, b, bool(p < b), eta))
    return rows


def run_report(design: SorterDesign, outcomes: Outcomes) -> dict:
    """JSON-ready summary of one simulated sorter."""
    from .states import ideal_outcome_matrix

    ideal = ideal_outcome_matrix(design.measurement)
    corr, v = corrected_matrix(outcomes.raw, ideal)
    per_row, p = error_probability(outcomes.normalized)
    out = {
        "params": design.params(),
        "eta_trace": design.report.eta_trace if design.report else [],
        "raw": outcomes.raw.tolist(),
        "normalized": outcomes.normalized.tolist(),
        "ideal": ideal.tolist(),
        "correction_vector": v.tolist(),
        "corrected": corr.tolist(),
        "confusion": confusion_matrix(outcomes.normalized).tolist(),
        "p_err_rows": per_row.tolist(),
        "p_err": p,
        "mesd_bound": mesd_bound(design.fidelity),
    }
    if design.report:
        out["wfm"] = design.report.to_dict()
    return out


# -- overlapping images ------------------------------------------------------


@dataclass(eq=False)
class ImageSortResult:
    design: SorterDesign
    gram: np.ndarray
    fidelities: np.ndarray
    outcomes: Outcomes | None
    accuracy: float | None


def image_fidelities(images) -> np.ndarray:
    g = gram_matrix(images)
    return np.abs(g) ** 2


def image_design(
    images,
    geometry: Geometry | None = None,
    aux: Field | None = None,
    fidelity_tolerance: float = 0.05,
) -> SorterDesign:
    """USD sorter fields for arbitrary (nearly symmetric) images.

    The images are expressed in an orthonormal basis of their span, the
    measurement is built there, and the extra axis is realised by ``aux``
    orthonormalized against the images (default: an HG_10 mode at the
    geometry's HG waist).
    """
    from .optics import hermite_gaussian

    geometry = geometry or Geometry()
    images = [f.normalized() for f in images]
    d = len(images)
    if d < 2:
        raise InvalidArgument("need at least two images")
    grid = images[0].grid
    if any(f.grid != grid for f in images):
        raise InvalidArgument("images live on different grids")
    fid = image_fidelities(images)
    off = fid[~np.eye(d, dtype=bool)]
    if off.max() - off.min() > fidelity_tolerance:
        warnings.warn(
            f"pairwise fidelities span {off.min():.3f}..{off.max():.3f}; set is not symmetric",
            UserWarning,
            stacklevel=2,
        )
    # orthonormal basis of the image span
    stack = np.stack([f.amplitude.ravel() for f in images])
    _, sv, vh = np.linalg.svd(stack, full_matrices=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateInput("the images are linearly dependent")
    q = vh.conj()  # rows: orthonormal vectors (unit-sum-of-squares), span = images
    coeffs = stack @ q.conj().T * grid.pitch  # image i = sum_k coeffs[i,k] q_k / pitch
    meas = usd_measurement(coeffs, symmetrize=True)

    if aux is None:
        aux = hermite_gaussian(grid, 1, 0, geometry.hg_waist)
    a = aux.amplitude.ravel()
    a = a - q.T @ (q.conj() @ a)
    if np.linalg.norm(a) < 1e-8 * np.linalg.norm(aux.amplitude):
        raise DegenerateInput("auxiliary field lies in the span of the images")
    a = a / np.linalg.norm(a)
    scale = 1.0 / grid.pitch
    basis = ModeBasis(
        tuple(Field(grid, (v * scale).reshape(grid.shape)) for v in np.vstack([q, a[None, :]])),
        tuple([f"span{k}" for k in range(d)] + ["aux"]),
    )
    centers = spot_centers(grid, d + 1, geometry.radius_for(d + 1))
    spots = [gaussian_spot(grid, geometry.spot_waist, c) for c in centers]
    targets = usd_targets(meas, spots)
    mean_f = float(off.mean())
    return SorterDesign(d, mean_f, float("nan"), "+", geometry, None, meas, basis, spots, centers, images, targets)


def image_usd(
    images,
    geometry: Geometry | None = None,
    wfm_opts: WFMOptions | None = None,
    aux: Field | None = None,
    fidelity_tolerance: float = 0.05,
    train: bool = True,
) -> ImageSortResult:
    """Train a sorter for overlapping images and score its classification."""
    design = image_design(images, geometry, aux, fidelity_tolerance)
    gram = gram_matrix(design.inputs)
    fid = np.abs(gram) ** 2
    if not train:
        return ImageSortResult(design, gram, fid, None, None)
    grid = design.inputs[0].grid
    geom = design.geometry
    system = MPLCSystem(grid, geom.n_planes, geom.plane_spacing, geom.lead_in, geom.lead_out, guard=geom.guard)
    design.system, design.report = wavefront_match(system, design.inputs, design.targets, wfm_opts)
    outcomes = simulate_outcomes(design)
    return ImageSortResult(design, gram, fid, outcomes, classification_accuracy(outcomes.normalized))
