"""Haar-random gates commuting with the local conserved quantities.

A gate on a w-site window is stored block-by-block: each invariant
subspace carries an ordered list of window-content indices and a dense
unitary drawn from the circular unitary ensemble on that block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import SPIN_HALF, SPIN_ONE, SpinSpecies


def sample_cue(n: int, rng) -> np.ndarray:
    """Haar-distributed n x n unitary (Ginibre QR with phase correction).

    The plain Q factor of a QR decomposition is *not* Haar; multiplying
    each column by the phase of the corresponding diagonal of R fixes the
    distribution (Mezzadri's recipe).
    """
    if n == 1:
        phi = rng.uniform(0.0, 2.0 * np.pi)
        return np.array([[np.exp(1j * phi)]])
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class BlockUnitary:
    """Sampled window gate in invariant-subspace block form."""

    species: SpinSpecies
    width: int
    blocks: tuple[tuple[tuple[int, ...], np.ndarray], ...]

    def dense(self) -> np.ndarray:
        dim = self.species.q**self.width
        u = np.zeros((dim, dim), dtype=complex)
        for idx, b in self.blocks:
            u[np.ix_(idx, idx)] = b
        return u

    def max_unitarity_defect(self) -> float:
        worst = 0.0
        for _, b in self.blocks:
            worst = max(
                worst,
                np.abs(b.conj().T @ b - np.eye(len(b))).max(),
            )
        return worst


def window_contents(species: SpinSpecies, width: int) -> np.ndarray:
    """(q^w, w) matrix of Z eigenvalues, row index = window content code."""
    q = species.q
    out = np.empty((q**width, width), dtype=np.int64)
    charges = np.array(species.charges, dtype=np.int64)
    for j in range(width):
        period = q ** (width - 1 - j)
        out[:, j] = charges[(np.arange(q**width) // period) % q]
    return out


@lru_cache(maxsize=8)
def u1_window_blocks(q: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Two-site charge classes: (window charge, content indices), by charge."""
    species = SPIN_HALF if q == 2 else SPIN_ONE
    contents = window_contents(species, 2)
    charges = contents.sum(axis=1)
    out = []
    for c in sorted(set(charges.tolist()), reverse=True):
        idx = tuple(int(i) for i in np.flatnonzero(charges == c))
        out.append((int(c), idx))
    return tuple(out)


@lru_cache(maxsize=2)
def dipole_window_blocks() -> tuple[tuple[tuple[int, int], tuple[int, ...]], ...]:
    """Four-site (charge, relative dipole) classes of the 16 window states.

    The relative dipole sum_{k=1..4} k Z_k classifies blocks independently
    of the window offset: shifting the window by s changes the dipole of a
    fixed-charge class by s * charge, a constant within the class.
    """
    contents = window_contents(SPIN_HALF, 4)
    charge = contents.sum(axis=1)
    rel_dip = (contents * np.arange(1, 5)).sum(axis=1)
    keys = sorted(set(zip(charge.tolist(), rel_dip.tolist())))
    out = []
    for key in keys:
        idx = tuple(
            int(i)
            for i in np.flatnonzero((charge == key[0]) & (rel_dip == key[1]))
        )
        out.append(((int(key[0]), int(key[1])), idx))
    return tuple(out)


def _sample_blocks(table, rng) -> tuple:
    # one batched draw for all 1-dim blocks keeps the per-gate overhead low
    ones = [i for i, (_, idx) in enumerate(table) if len(idx) == 1]
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=len(ones)))
    it = iter(phases)
    blocks = []
    for _, idx in table:
        if len(idx) == 1:
            blocks.append((idx, np.array([[next(it)]])))
        else:
            blocks.append((idx, sample_cue(len(idx), rng)))
    return tuple(blocks)


def sample_u1_gate(species: SpinSpecies, rng) -> BlockUnitary:
    """Two-site gate Haar-random within each total-charge block."""
    blocks = _sample_blocks(u1_window_blocks(species.q), rng)
    return BlockUnitary(species=species, width=2, blocks=blocks)


def sample_dipole_gate(rng) -> BlockUnitary:
    """Four-site gate preserving window charge and (relative) dipole.

    Exactly one block is two-dimensional, spanned by |+1,-1,-1,+1> and
    |-1,+1,+1,-1>; the other fourteen classes are single states and the
    gate acts on them by independent phases.
    """
    blocks = _sample_blocks(dipole_window_blocks(), rng)
    return BlockUnitary(species=SPIN_HALF, width=4, blocks=blocks)
