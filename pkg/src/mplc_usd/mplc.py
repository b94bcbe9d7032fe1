"""Multi-plane light converter: a stack of phase masks separated by free space.

Geometry of an ``n``-plane device::

    input --lead_in--> [mask 0] --spacing--> [mask 1] ... [mask n-1] --lead_out--> output

Masks are real phase maps in (-pi, pi]; applying one multiplies the field by
``exp(1j * mask)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .optics import Field, Grid
from .propagation import propagate_array

log = logging.getLogger(__name__)

NORM_TOL = 1e-6


def wrap_phase(phi):
    """Wrap phases into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


@dataclass(eq=False)
class MPLCSystem:
    grid: Grid
    n_planes: int
    plane_spacing: float
    lead_in: float
    lead_out: float
    masks: np.ndarray = None
    guard: int = 1

    def __post_init__(self):
        if int(self.n_planes) != self.n_planes or self.n_planes < 1:
            raise InvalidArgument(f"n_planes must be >= 1, got {self.n_planes!r}")
        for name in ("plane_spacing", "lead_in", "lead_out"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)!r}")
        self.n_planes = int(self.n_planes)
        shape = (self.n_planes,) + self.grid.shape
        if self.masks is None:
            self.masks = np.zeros(shape)
        else:
            m = np.array(self.masks, dtype=float)
            if m.shape != shape:
                raise InvalidArgument(f"masks have shape {m.shape}, expected {shape}")
            self.masks = wrap_phase(m)

    def copy(self) -> "MPLCSystem":
        return replace(self, masks=self.masks.copy())

    @property
    def total_length(self) -> float:
        return self.lead_in + (self.n_planes - 1) * self.plane_spacing + self.lead_out

    def distance_after(self, p: int) -> float:
        return self.lead_out if p == self.n_planes - 1 else self.plane_spacing

    def distance_before(self, p: int) -> float:
        return self.lead_in if p == 0 else self.plane_spacing

    def _prop(self, amp, dist):
        return propagate_array(amp, self.grid, dist, self.guard)

    # raw array paths, shape (..., ny, nx)
    def forward_array(self, amp: np.ndarray) -> np.ndarray:
        a = self._prop(amp, self.lead_in)
        for p in range(self.n_planes):
            a = self._prop(a * np.exp(1j * self.masks[p]), self.distance_after(p))
        return a

    def backward_array(self, amp: np.ndarray) -> np.ndarray:
        b = self._prop(amp, -self.lead_out)
        for p in reversed(range(self.n_planes)):
            b = self._prop(b * np.exp(-1j * self.masks[p]), -self.distance_before(p))
        return b

    def field_before(self, amp: np.ndarray, p: int) -> np.ndarray:
        """Forward field arriving at plane ``p`` (before its mask)."""
        a = self._prop(amp, self.lead_in)
        for q in range(p):
            a = self._prop(a * np.exp(1j * self.masks[q]), self.distance_after(q))
        return a

    def field_behind(self, amp: np.ndarray, p: int) -> np.ndarray:
        """Output-plane field ``amp`` propagated backward to plane ``p``,
        through masks ``n-1 .. p+1`` but not mask ``p``."""
        b = self._prop(amp, -self.lead_out)
        for q in range(self.n_planes - 1, p, -1):
            b = self._prop(b * np.exp(-1j * self.masks[q]), -self.distance_before(q))
        return b


def _check_grid(system: MPLCSystem, f: Field) -> None:
    if f.grid != system.grid:
        raise InvalidArgument("field grid does not match the system grid")


def apply_forward(system: MPLCSystem, field: Field) -> Field:
    _check_grid(system, field)
    return Field(system.grid, system.forward_array(field.amplitude))


def apply_backward(system: MPLCSystem, field: Field) -> Field:
    """Adjoint of :func:`apply_forward`: conjugate masks, reversed order,
    negative distances."""
    _check_grid(system, field)
    return Field(system.grid, system.backward_array(field.amplitude))


# -- wavefront matching ------------------------------------------------------


@dataclass
class WFMOptions:
    """Wavefront-matching settings.

    ``rule`` is ``"A"`` (phase of the overlap-weighted field product) or
    ``"B"`` (small-step phase increment, ``step`` radians at the strongest
    pixel). ``init`` is ``"flat"`` or ``"random"`` (uniform, seeded).
    """

    max_sweeps: int = 300
    tolerance: float = 1e-5
    init: str = "flat"
    seed: int = 0
    rule: str = "A"
    weights: tuple | None = None
    step: float = 0.2
    cache: bool = True

    def __post_init__(self):
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 1:
            raise InvalidArgument(f"max_sweeps must be >= 1, got {self.max_sweeps!r}")
        if not self.tolerance > 0:
            raise InvalidArgument(f"tolerance must be positive, got {self.tolerance!r}")
        if self.init not in ("flat", "random"):
            raise InvalidArgument(f"init must be 'flat' or 'random', got {self.init!r}")
        if self.rule not in ("A", "B"):
            raise InvalidArgument(f"rule must be 'A' or 'B', got {self.rule!r}")
        if not self.step > 0:
            raise InvalidArgument("step must be positive")

    def to_dict(self) -> dict:
        return {
            "max_sweeps": self.max_sweeps,
            "tolerance": self.tolerance,
            "init": self.init,
            "seed": self.seed,
            "rule": self.rule,
            "weights": None if self.weights is None else [float(w) for w in self.weights],
            "step": self.step,
            "cache": self.cache,
        }


@dataclass
class WFMReport:
    eta_initial: float
    eta_trace: list[float]
    update_trace: list[float]
    mode_overlaps: np.ndarray
    sweeps: int
    converged: bool
    max_drop: float = 0.0

    def to_dict(self) -> dict:
        return {
            "eta_initial": self.eta_initial,
            "eta_trace": list(self.eta_trace),
            "mode_overlaps": [float(v) for v in self.mode_overlaps],
            "sweeps": self.sweeps,
            "converged": self.converged,
            "max_drop": self.max_drop,
        }


def _as_stack(fields) -> np.ndarray:
    return np.stack([f.amplitude if isinstance(f, Field) else np.asarray(f) for f in fields]).astype(
        np.complex128
    )


def _overlaps(a: np.ndarray, b: np.ndarray, mask: np.ndarray, pitch: float) -> np.ndarray:
    """``<b_i| exp(i mask) |a_i>`` for stacked fields."""
    return np.einsum("kyx,kyx->k", b.conj(), a * np.exp(1j * mask)) * pitch**2


def _update(a, b, mask, pitch, rule, weights, step):
    c = b.conj() * a
    o = np.einsum("kyx,yx->k", c, np.exp(1j * mask)) * pitch**2
    if rule == "A":
        ph = np.where(np.abs(o) > 0, np.exp(-1j * np.angle(o)), 1.0)
        s = np.zeros(mask.shape, dtype=np.complex128)
        for k in range(c.shape[0]):  # fixed order for determinism
            s += (weights[k] * ph[k]) * c[k]
        return wrap_phase(-np.angle(s))
    g = np.zeros(mask.shape)
    e = np.exp(1j * mask)
    for k in range(c.shape[0]):
        g -= weights[k] * np.imag(np.conj(o[k]) * e * c[k])
    gmax = np.max(np.abs(g))
    if gmax == 0:
        return mask.copy()
    return wrap_phase(mask + step * g / gmax)


def mask_update(
    forward_fields: Sequence,
    backward_fields: Sequence,
    current_mask: np.ndarray,
    rule: str = "A",
    weights=None,
    step: float = 0.2,
    pitch: float = 1.0,
) -> np.ndarray:
    """New phase mask for one plane.

    ``forward_fields[i]`` is input ``i`` arriving at the plane and
    ``backward_fields[i]`` is target ``i`` propagated backward to it. Rule A
    returns the mask that phase-matches the overlap-phase-weighted sum of
    ``conj(b_i) * a_i``; rule B takes one gradient step of size ``step``.
    """
    if len(forward_fields) == 0 or len(forward_fields) != len(backward_fields):
        raise InvalidArgument("need one forward and one backward field per mode")
    a = _as_stack(forward_fields)
    b = _as_stack(backward_fields)
    w = np.ones(len(a)) if weights is None else np.asarray(weights, dtype=float)
    if isinstance(forward_fields[0], Field):
        pitch = forward_fields[0].grid.pitch
    return _update(a, b, np.asarray(current_mask, dtype=float), pitch, rule, w, step)


def _validate_modes(system, fields, what):
    out = []
    for f in fields:
        _check_grid(system, f)
        if abs(f.power() - 1.0) > NORM_TOL:
            raise InvalidArgument(f"{what} mode is not normalized (power {f.power():.6g})")
        out.append(f.amplitude)
    return np.stack(out).astype(np.complex128)


def mean_overlap(system: MPLCSystem, inputs, targets, weights=None) -> tuple[float, np.ndarray]:
    a = _as_stack(inputs)
    b = _as_stack(targets)
    out = system.forward_array(a)
    o = np.abs(np.einsum("kyx,kyx->k", b.conj(), out) * system.grid.pitch**2) ** 2
    w = np.ones(len(o)) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * o) / np.sum(w)), o


def wavefront_match(
    system: MPLCSystem,
    inputs: Sequence[Field],
    targets: Sequence[Field],
    opts: WFMOptions | None = None,
) -> tuple[MPLCSystem, WFMReport]:
    """Train the masks so that ``inputs[i]`` maps onto ``targets[i]``.

    Each sweep updates planes ``0 .. n-1`` on the way forward and then
    ``n-1 .. 0`` on the way back. Training stops after ``opts.max_sweeps``
    sweeps or once the mean overlap improves by less than ``opts.tolerance``.
    The input ``system`` is left untouched.
    """
    opts = opts or WFMOptions()
    if len(inputs) < 1 or len(inputs) != len(targets):
        raise InvalidArgument("need equal, non-zero numbers of inputs and targets")
    sysw = system.copy()
    a_in = _validate_modes(sysw, inputs, "input")
    b_out = _validate_modes(sysw, targets, "target")
    k = len(a_in)
    w = np.ones(k) if opts.weights is None else np.asarray(opts.weights, dtype=float)
    if w.shape != (k,) or np.any(w < 0) or not np.any(w > 0):
        raise InvalidArgument("weights must be non-negative, one per mode")
    if opts.init == "random":
        rng = np.random.default_rng(opts.seed)
        sysw.masks = wrap_phase(rng.uniform(-np.pi, np.pi, sysw.masks.shape))

    n = sysw.n_planes
    pitch = sysw.grid.pitch
    prop = sysw._prop

    def eta_of(o):
        return float(np.sum(w * np.abs(o) ** 2) / np.sum(w))

    # backward caches: B[p] is the target field behind plane p (mask p excluded)
    B = [None] * n
    bc = prop(b_out, -sysw.lead_out)
    for p in range(n - 1, -1, -1):
        B[p] = bc
        if p > 0:
            bc = prop(bc * np.exp(-1j * sysw.masks[p]), -sysw.distance_before(p))
    A = [None] * n
    a0 = prop(a_in, sysw.lead_in)
    eta0 = eta_of(_overlaps(a0, B[0], sysw.masks[0], pitch))

    def fwd_at(p, cached):
        return cached if opts.cache else sysw.field_before(a_in, p)

    def bwd_at(p, cached):
        return cached if opts.cache else sysw.field_behind(b_out, p)

    trace, updates = [], []
    eta_prev = eta0
    converged = False
    sweeps = 0
    o = None
    for sweep in range(opts.max_sweeps):
        ac = a0
        for p in range(n):
            ac = fwd_at(p, ac)
            A[p] = ac
            sysw.masks[p] = _update(ac, B[p], sysw.masks[p], pitch, opts.rule, w, opts.step)
            o = _overlaps(ac, B[p], sysw.masks[p], pitch)
            updates.append(eta_of(o))
            if p < n - 1:
                ac = prop(ac * np.exp(1j * sysw.masks[p]), sysw.distance_after(p))
        bc = prop(b_out, -sysw.lead_out)
        for p in range(n - 1, -1, -1):
            bc = bwd_at(p, bc)
            B[p] = bc
            sysw.masks[p] = _update(A[p], bc, sysw.masks[p], pitch, opts.rule, w, opts.step)
            o = _overlaps(A[p], bc, sysw.masks[p], pitch)
            updates.append(eta_of(o))
            if p > 0:
                bc = prop(bc * np.exp(-1j * sysw.masks[p]), -sysw.distance_before(p))
        sweeps = sweep + 1
        eta = eta_of(o)
        trace.append(eta)
        if eta - eta_prev < -1e-6:
            log.warning("mean overlap dropped by %.3g in sweep %d", eta_prev - eta, sweeps)
        if abs(eta - eta_prev) < opts.tolerance:
            converged = True
            break
        eta_prev = eta

    full = [eta0] + trace
    drop = max([0.0] + [full[i] - full[i + 1] for i in range(len(full) - 1)])
    report = WFMReport(
        eta_initial=eta0,
        eta_trace=trace,
        update_trace=updates,
        mode_overlaps=np.abs(o) ** 2,
        sweeps=sweeps,
        converged=converged,
        max_drop=drop,
    )
    return sysw, report


def transfer_matrix(system: MPLCSystem, input_basis: Sequence[Field], output_basis: Sequence[Field]) -> np.ndarray:
    """``T[j, i] = <output_j| U |input_i>``."""
    for f in list(input_basis) + list(output_basis):
        _check_grid(system, f)
    out = system.forward_array(_as_stack(input_basis))
    outb = _as_stack(output_basis)
    return outb.reshape(len(outb), -1).conj() @ out.reshape(len(out), -1).T * system.grid.pitch**2
