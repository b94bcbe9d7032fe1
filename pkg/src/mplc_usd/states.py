"""Symmetric non-orthogonal state sets and their unambiguous measurements.

Everything here is finite-dimensional linear algebra on coefficient vectors.
State sets are stored as 2-D arrays with one state per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionViolated, DegenerateInput, InvalidArgument, NoSolution

RANK_RTOL = 1e-10
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SymmetricStateSet:
    d: int
    theta: float
    states: np.ndarray  # (d, d)
    beta: float

    @property
    def fidelity(self) -> float:
        return self.beta**2

    def gram(self) -> np.ndarray:
        return self.states.conj() @ self.states.T


@dataclass(frozen=True, eq=False)
class USDMeasurement:
    """Unambiguous measurement on the extended (d+1)-dimensional space.

    ``vectors[i]`` is the outcome that can only fire for input ``i``;
    ``ambiguous`` is the inconclusive outcome. ``states`` are the inputs
    extended with a zero last coefficient.
    """

    d: int
    vectors: np.ndarray  # (d, d+1)
    ambiguous: np.ndarray  # (d+1,)
    alpha: np.ndarray  # <D_i|psi_i>
    states: np.ndarray  # (d, d+1)

    @property
    def outcomes(self) -> np.ndarray:
        """All d+1 outcome vectors as rows, ambiguous last."""
        return np.vstack([self.vectors, self.ambiguous[None, :]])

    def amplitudes(self) -> np.ndarray:
        """``A[i, k] = <outcome_k|psi_i>``."""
        return self.states @ self.outcomes.conj().T


def symmetric_frame(d: int) -> np.ndarray:
    """``d`` real unit vectors in ``d - 1`` dimensions with pairwise overlap
    ``-1/(d-1)``, built row by row in lower-triangular form."""
    if int(d) != d or d < 2:
        raise InvalidArgument(f"dimension must be an integer >= 2, got {d!r}")
    d = int(d)
    target = -1.0 / (d - 1)
    v = np.zeros((d, d - 1))
    v[0, 0] = 1.0
    for i in range(1, d):
        for j in range(min(i, d - 1)):
            v[i, j] = (target - v[i, :j] @ v[j, :j]) / v[j, j]
        if i < d - 1:
            v[i, i] = math.sqrt(max(1.0 - v[i, :i] @ v[i, :i], 0.0))
    return v


def symmetric_states(d: int, theta: float) -> SymmetricStateSet:
    """Mix the symmetric frame into one extra axis by angle ``theta``.

    ``psi_i = sin(theta) * frame_i + cos(theta) * e_d`` with the frame in the
    first ``d - 1`` coordinates. The common overlap is
    ``cos(theta)**2 - sin(theta)**2 / (d - 1)``.
    """
    frame = symmetric_frame(d)
    if not (0.0 <= theta <= math.pi / 2):
        raise InvalidArgument(f"theta must lie in [0, pi/2], got {theta!r}")
    s, c = math.sin(theta), math.cos(theta)
    states = np.zeros((d, d), dtype=np.complex128)
    states[:, : d - 1] = s * frame
    states[:, d - 1] = c
    beta = c * c - s * s / (d - 1)
    return SymmetricStateSet(int(d), float(theta), states, beta)


def theta_for_fidelity(d: int, fidelity: float, branch: str = "+") -> float:
    """Mixing angle giving pairwise fidelity ``fidelity``.

    ``branch`` picks the sign of the overlap: ``"+"`` (default) for
    ``beta = +sqrt(F)``, ``"-"`` for ``beta = -sqrt(F)``.
    """
    if int(d) != d or d < 2:
        raise InvalidArgument(f"dimension must be an integer >= 2, got {d!r}")
    if not (0.0 <= fidelity <= 1.0):
        raise InvalidArgument(f"fidelity must lie in [0, 1], got {fidelity!r}")
    if branch not in ("+", "-"):
        raise InvalidArgument(f"branch must be '+' or '-', got {branch!r}")
    beta = math.sqrt(fidelity) if branch == "+" else -math.sqrt(fidelity)
    if beta < -1.0 / (d - 1) - 1e-15:
        raise NoSolution(f"overlap {beta:.6g} is below -1/(d-1) for d={d}")
    s2 = (1.0 - beta) * (d - 1) / d
    return math.asin(math.sqrt(min(max(s2, 0.0), 1.0)))


def orthocomplement(states, i: int) -> np.ndarray:
    """Unit vector orthogonal to every state except ``states[i]``.

    The other states' span is found by SVD and removed from ``states[i]``; the
    remainder is normalized, so ``<perp|psi_i>`` is real and positive.
    """
    states = np.asarray(states, dtype=np.complex128)
    others = np.delete(states, i, axis=0)
    if others.shape[0]:
        _, sv, vh = np.linalg.svd(others, full_matrices=False)
        rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
        if rank < others.shape[0]:
            raise DegenerateInput(f"the states other than {i} span only {rank} dimensions")
        basis = vh[:rank]
        resid = states[i] - basis.T @ (basis.conj() @ states[i])
    else:
        resid = states[i].copy()
    n = np.linalg.norm(resid)
    if n <= RANK_RTOL * max(np.linalg.norm(states[i]), 1.0):
        raise DegenerateInput(f"state {i} lies in the span of the others")
    return resid / n


def _embed(states: np.ndarray) -> np.ndarray:
    out = np.zeros((states.shape[0], states.shape[1] + 1), dtype=np.complex128)
    out[:, :-1] = states
    return out


def _loewdin(v: np.ndarray) -> np.ndarray:
    """Closest orthonormal set of rows (symmetric orthonormalization)."""
    u, _, vh = np.linalg.svd(v, full_matrices=False)
    return u @ vh


def usd_measurement(states, symmetrize: bool = False) -> USDMeasurement:
    """Build the unambiguous measurement for a set of ``d`` states in ``d`` dims.

    ``states`` is a :class:`SymmetricStateSet` or an array with one state per
    row. Each outcome is the state's orthocomplement lifted into one extra
    dimension by ``sqrt(-<perp_1|perp_2>)``; the inconclusive outcome completes
    the basis by Gram-Schmidt against the extra axis. Its phase is fixed so that
    ``<?|psi_1>`` is real and positive (largest component real and positive
    when that overlap vanishes).

    With ``symmetrize=True`` unequal cross-overlaps (nearly symmetric sets such
    as real images) are averaged and the outcomes orthonormalized afterwards.
    """
    if isinstance(states, SymmetricStateSet):
        if states.fidelity >= 1.0:
            raise DegenerateInput("states with fidelity 1 cannot be discriminated")
        psi = states.states
    else:
        psi = np.asarray(states, dtype=np.complex128)
    d, n = psi.shape
    if n != d:
        raise InvalidArgument(f"expected {d} states of length {d}, got length {n}")
    if d < 2:
        raise InvalidArgument("need at least two states")

    perp = np.array([orthocomplement(psi, i) for i in range(d)])
    cross = perp.conj() @ perp.T
    off = cross[~np.eye(d, dtype=bool)]
    ref = cross[0, 1]
    if np.max(np.abs(off.imag)) > SYMMETRY_TOL and not symmetrize:
        raise ConstructionViolated(
            f"orthocomplement overlaps are not real (max imag {np.max(np.abs(off.imag)):.3g})"
        )
    if np.max(np.abs(off - ref)) > SYMMETRY_TOL and not symmetrize:
        raise ConstructionViolated("orthocomplement overlaps are not uniform; set is not symmetric")
    c = -float(np.mean(off.real)) if symmetrize else -float(ref.real)
    if c < -SYMMETRY_TOL:
        raise ConstructionViolated(f"orthocomplement overlap is positive ({-c:.3g})")
    c = max(c, 0.0)

    ext = _embed(psi)
    vecs = _embed(perp)
    vecs[:, -1] = math.sqrt(c)
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    if symmetrize:
        vecs = _loewdin(vecs)

    def _complete(seed):
        r = seed - vecs.T @ (vecs.conj() @ seed)
        return r, np.linalg.norm(r)

    e = np.zeros(d + 1, dtype=np.complex128)
    e[-1] = 1.0
    amb, nrm = _complete(e)
    if nrm < 1e-10:
        amb, nrm = _complete(ext[0])
    amb = amb / nrm
    ov = np.vdot(amb, ext[0])
    if abs(ov) < 1e-6:
        ov = amb[np.argmax(np.abs(amb))].conj()
    amb = amb * (abs(ov) / ov)

    alpha = np.einsum("ij,ij->i", vecs.conj(), ext)
    return USDMeasurement(d, vecs, amb, alpha, ext)


def ideal_outcome_matrix(states) -> np.ndarray:
    """Outcome probabilities of the ideal unambiguous measurement.

    Row ``i`` is input ``i``; columns are outcomes ``1..d`` then the
    inconclusive one.
    """
    meas = states if isinstance(states, USDMeasurement) else usd_measurement(states)
    return np.abs(meas.amplitudes()) ** 2


def mesd_bound(fidelity: float) -> float:
    """Lowest error probability reachable by minimum-error discrimination."""
    if not (0.0 <= fidelity <= 1.0):
        raise InvalidArgument(f"fidelity must lie in [0, 1], got {fidelity!r}")
    return 0.5 * (1.0 - math.sqrt(1.0 - fidelity))


def statevec_to_json(v) -> list:
    """Complex vector or matrix as nested ``[re, im]`` pairs."""
    a = np.asarray(v, dtype=np.complex128)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [statevec_to_json(row) for row in a]


def statevec_from_json(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]
