"""Participation entropy, subsystem purities, and coherence.

Subsystem quantities are computed from a precompiled `BipartitionIndex`
that arranges basis amplitudes into the dense blocks M_lambda[a, b] of the
cut decomposition (a: subsystem-A configuration, b: complement).  Purities
are evaluated block-wise through Gram matrices; the reduced density matrix
is never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import (
    FragmentBasis,
    SectorBasis,
    charge_of_codes,
    dipole_of_codes,
)
from .errors import IntegrityError
from .kernels import gather_complex


def global_participation_entropy(state) -> float:
    """-log2 of the collision probability over the state's own basis."""
    p = np.abs(state.amps) ** 2
    return -math.log2(float(np.sum(p * p)))


def _block_label_array(basis, L_A: int) -> np.ndarray:
    """Conserved-quantity label of the leftmost-L_A part, per basis element.

    Two basis elements may share Schmidt blocks only if they share a label;
    labels are encoded as int64.
    """
    if isinstance(basis, FragmentBasis):
        n = L_A // 2
        n_d = basis.n_dimers
        full = (basis.dimer_codes >> np.uint64(n_d - n)) if n else np.zeros(
            basis.dim, dtype=np.uint64
        )
        r = n - np.bitwise_count(full).astype(np.int64)  # A-dimers are 0-bits
        if L_A % 2 == 0:
            return r
        boundary = (basis.dimer_codes >> np.uint64(n_d - n - 1)) & np.uint64(1)
        return 2 * r + boundary.astype(np.int64)
    if isinstance(basis, SectorBasis):
        left = basis.left_codes(L_A)
        q_A = charge_of_codes(basis.species, L_A, left)
        if basis.dipole is None:
            return q_A
        p_A = dipole_of_codes(basis.species, L_A, left, x0=1)
        return q_A * (4 * basis.L * basis.L + 1) + p_A
    # full Hilbert space (e.g. Hamiltonian dynamics): single block
    return np.zeros(basis.dim, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class BipartitionIndex:
    """Precompiled cut decomposition of a basis at a given L_A."""

    L_A: int
    dim: int
    blocks: tuple  # (label, index matrix (d_A, d_B) of basis positions)

    @property
    def shapes(self):
        return tuple(m.shape for _, m in self.blocks)


@lru_cache(maxsize=256)
def bipartition_index(basis, L_A: int) -> BipartitionIndex:
    if not 0 < L_A < basis.L:
        raise ValueError("require 0 < L_A < L")
    acode = basis.left_codes(L_A)
    bcode = basis.right_codes(L_A)
    labels = _block_label_array(basis, L_A)
    blocks = []
    filled = 0
    for lab in np.unique(labels):
        sel = np.flatnonzero(labels == lab)
        ua, ia = np.unique(acode[sel], return_inverse=True)
        ub, ib = np.unique(bcode[sel], return_inverse=True)
        mat = np.full((len(ua), len(ub)), -1, dtype=np.int64)
        mat[ia, ib] = sel
        if np.any(mat < 0):
            raise IntegrityError("cut block is not a full product grid")
        blocks.append((int(lab), mat.astype(np.int32)))
        filled += mat.size
    if filled != basis.dim:
        raise IntegrityError("cut blocks do not partition the basis")
    return BipartitionIndex(L_A=L_A, dim=basis.dim, blocks=tuple(blocks))


@dataclass(eq=False)
class BipartitionView:
    """Per-block amplitude matrices of one state at one cut."""

    index: BipartitionIndex
    matrices: tuple[np.ndarray, ...]


def bipartition_view(state, L_A: int) -> BipartitionView:
    idx = bipartition_index(state.basis, L_A)
    mats = tuple(state.amps[m] for _, m in idx.blocks)
    return BipartitionView(index=idx, matrices=mats)


def _gram_quartic(x: np.ndarray) -> np.ndarray:
    """sum of fourth-powered singular values of each matrix in a stack.

    x has shape (..., d_A, d_B); the Gram matrix is formed on the smaller
    side.
    """
    if x.shape[-2] > x.shape[-1]:
        x = np.swapaxes(x, -1, -2)
    g = x @ np.conjugate(np.swapaxes(x, -1, -2))
    return np.sum(np.abs(g) ** 2, axis=(-2, -1)).real


def subsystem_purity(view: BipartitionView) -> float:
    """Tr[rho_A^2] via block-wise Gram matrices."""
    return float(sum(_gram_quartic(m) for m in view.matrices))


def diagonal_purity(view: BipartitionView) -> float:
    """Collision probability of computational-basis outcomes on A."""
    total = 0.0
    for m in view.matrices:
        p = np.sum(np.abs(m) ** 2, axis=-1)
        total += float(np.sum(p * p))
    return total


def coherence(view: BipartitionView) -> float:
    """log2(P_A / P_diag) >= 0; zero exactly on basis-diagonal states."""
    pa = subsystem_purity(view)
    pd = diagonal_purity(view)
    return math.log2(pa / pd)


def purities_of_states(basis, L_A: int, states: np.ndarray):
    """(P_A, P_diag) for a (n_states, dim) complex array, vectorized."""
    idx = bipartition_index(basis, L_A)
    n = states.shape[0]
    pa = np.zeros(n)
    pd = np.zeros(n)
    for _, mat in idx.blocks:
        x = states[:, mat.reshape(-1)].reshape(n, *mat.shape)
        pa += _gram_quartic(x)
        p = np.sum(np.abs(x) ** 2, axis=-1)
        pd += np.sum(p * p, axis=-1).real
    return pa, pd


def purities_soa(basis, L_A: int, pre: np.ndarray, pim: np.ndarray):
    """(P_A, P_diag) per lane for split-complex (dim, R) engine states."""
    idx = bipartition_index(basis, L_A)
    R = pre.shape[1]
    pa = np.zeros(R)
    pd = np.zeros(R)
    for _, mat in idx.blocks:
        rows = mat.reshape(-1)
        buf_re = np.empty((rows.size, R))
        buf_im = np.empty((rows.size, R))
        gather_complex(pre, pim, rows, buf_re, buf_im)
        x = (buf_re + 1j * buf_im).reshape(*mat.shape, R)
        x = np.moveaxis(x, -1, 0)  # (R, d_A, d_B)
        pa += _gram_quartic(x)
        p = np.sum(np.abs(x) ** 2, axis=-1)
        pd += np.sum(p * p, axis=-1).real
    return pa, pd


def delta_series(times, means, stderrs, saturation, saturation_err=0.0,
                 late_fraction=0.25, sigma=3.0):
    """Deviation-from-saturation series with propagated errors.

    Returns (delta, delta_err, flagged) where ``flagged`` is True when the
    late-time tail dips below -sigma * err, which usually indicates a wrong
    saturation source.
    """
    times = np.asarray(times, dtype=float)
    delta = saturation - np.asarray(means, dtype=float)
    err = np.hypot(np.asarray(stderrs, dtype=float), saturation_err)
    n_late = max(1, int(len(times) * late_fraction))
    late = delta[-n_late:]
    late_err = err[-n_late:]
    flagged = bool(np.any(late < -sigma * np.where(late_err > 0, late_err, np.inf)))
    return delta, err, flagged
