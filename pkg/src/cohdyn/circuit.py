"""Brick-wall / Floquet circuits on sector- and fragment-restricted states.

The engine never leaves the dynamically accessible basis: a gate acting on
a window is compiled into a `GatePlan` that groups basis states into
orbits (states identical outside the window), and each gate block acts on
the orbit members by a small dense unitary.  Configurations that would
leave the basis simply never appear in any orbit, which doubles as a
runtime check of charge/dipole conservation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gates
from .basis import (
    FragmentBasis,
    SectorBasis,
    cached_fragment_basis,
    cached_u1_basis,
)
from .errors import IntegrityError

NORM_DRIFT_LIMIT = 1e-8

#: initial product configurations, one period of the repeating pattern
INITIAL_PATTERNS = {
    "u1-spin-half": (1, -1),
    "u1-spin-one": (-1, 0, 1),
    "dipole-fragment": (1, -1, -1, 1),
}


@dataclass(eq=False)
class SectorState:
    """Complex amplitude vector over a sector or fragment basis."""

    basis: object
    amps: np.ndarray

    @classmethod
    def from_config(cls, basis, config):
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index_of_config(config)] = 1.0
        return cls(basis=basis, amps=amps)

    def norm_check(self, tol=NORM_DRIFT_LIMIT):
        drift = abs(float(np.vdot(self.amps, self.amps).real) - 1.0)
        if drift > tol:
            raise IntegrityError(f"state norm drifted by {drift:.3e}")


def initial_state(model: str, basis) -> SectorState:
    """Incoherent product initial state of the given circuit model."""
    pattern = INITIAL_PATTERNS[model]
    if basis.L % len(pattern):
        raise IntegrityError(
            f"{model} initial pattern does not tile L={basis.L} sites"
        )
    config = pattern * (basis.L // len(pattern))
    return SectorState.from_config(basis, config)


def model_basis(model: str, L: int):
    if model == "u1-spin-half":
        return cached_u1_basis(2, L, 0)
    if model == "u1-spin-one":
        return cached_u1_basis(3, L, 0)
    if model == "dipole-fragment":
        return cached_fragment_basis(L)
    raise ValueError(f"unknown circuit model {model!r}")


def layer_windows(model: str, L: int, layer_index: int) -> list[tuple[int, int]]:
    """(first_site, width) windows of one layer; OBC windows that do not
    fit are skipped.  layer_index is 1-based."""
    if model in ("u1-spin-half", "u1-spin-one"):
        first = 1 if layer_index % 2 == 1 else 2
        return [(f, 2) for f in range(first, L, 2)]
    if model == "dipole-fragment":
        o = (layer_index - 1) % 4 + 1
        return [(f, 4) for f in range(o, L - 2, 4)]
    raise ValueError(f"unknown circuit model {model!r}")


def layers_per_time_unit(model: str) -> int:
    """One brick layer per unit for U(1); one 4-layer Floquet period for
    the dipole circuit."""
    return 4 if model == "dipole-fragment" else 1


def gate_sampler(model: str):
    if model == "u1-spin-half":
        return lambda rng: gates.sample_u1_gate(gates.SPIN_HALF, rng)
    if model == "u1-spin-one":
        return lambda rng: gates.sample_u1_gate(gates.SPIN_ONE, rng)
    if model == "dipole-fragment":
        return gates.sample_dipole_gate
    raise ValueError(f"unknown circuit model {model!r}")


@dataclass(frozen=True, eq=False)
class GatePlan:
    """Orbit decomposition of a basis under one gate window.

    ``orbit_arrays[b]`` has shape (n_orbits, k_b): each row lists the basis
    indices whose window contents run over block b's contents in order.
    Blocks follow the same ordering as the sampled gates, so plan and gate
    blocks can be zipped directly.
    """

    first_site: int
    width: int
    block_keys: tuple
    block_contents: tuple[tuple[int, ...], ...]
    orbit_arrays: tuple[np.ndarray, ...]

    @property
    def window(self) -> tuple[int, int]:
        return (self.first_site, self.first_site + self.width - 1)


def window_block_table(species, width: int):
    if width == 2:
        return gates.u1_window_blocks(species.q)
    if width == 4 and species.q == 2:
        return gates.dipole_window_blocks()
    raise ValueError(f"no block table for width {width}, q={species.q}")


def build_gate_plan(basis, first_site: int, width: int) -> GatePlan:
    """Group all basis states into orbits for a gate at the given window.

    Raises IntegrityError if any orbit is incomplete, i.e. if the basis is
    not closed under the gate's invariant blocks.
    """
    q = basis.species.q
    L = basis.L
    if not (1 <= first_site and first_site + width - 1 <= L):
        raise ValueError(f"window ({first_site}, width {width}) outside 1..{L}")
    post = L - (first_site - 1) - width
    wshift = np.uint64(q**post)
    wmod = np.uint64(q**width)

    codes = basis.codes
    w = ((codes // wshift) % wmod).astype(np.int64)
    offkey = (codes // (wshift * wmod)) * wshift + codes % wshift

    table = window_block_table(basis.species, width)
    n_contents = q**width
    block_of = np.full(n_contents, -1, dtype=np.int64)
    pos_of = np.zeros(n_contents, dtype=np.int64)
    for b, (_, contents) in enumerate(table):
        for p, cidx in enumerate(contents):
            block_of[cidx] = b
            pos_of[cidx] = p

    blk = block_of[w]
    pos = pos_of[w]
    orbit_arrays = []
    for b, (_, contents) in enumerate(table):
        k = len(contents)
        sel = np.flatnonzero(blk == b)
        if sel.size == 0:
            orbit_arrays.append(np.empty((0, k), dtype=np.int32))
            continue
        order = np.lexsort((pos[sel], offkey[sel]))
        rows = sel[order]
        if rows.size % k:
            raise IntegrityError("basis not closed under gate block")
        mat = rows.reshape(-1, k)
        off = offkey[mat]
        if k > 1:
            if np.any(off[:, 1:] != off[:, :-1]) or np.any(
                pos[mat] != np.arange(k)
            ):
                raise IntegrityError("incomplete orbit under gate block")
        # ascending first-member order keeps the kernels quasi-streaming
        mat = mat[np.argsort(mat[:, 0], kind="stable")]
        orbit_arrays.append(mat.astype(np.int32))
    return GatePlan(
        first_site=first_site,
        width=width,
        block_keys=tuple(key for key, _ in table),
        block_contents=tuple(contents for _, contents in table),
        orbit_arrays=tuple(orbit_arrays),
    )


class PlanCache:
    """Gate plans for all windows of a model's layer schedule."""

    def __init__(self, basis, model: str):
        self.basis = basis
        self.model = model
        self._plans: dict[tuple[int, int], GatePlan] = {}

    def plan(self, first_site: int, width: int) -> GatePlan:
        key = (first_site, width)
        if key not in self._plans:
            self._plans[key] = build_gate_plan(self.basis, first_site, width)
        return self._plans[key]


def apply_gate(amps: np.ndarray, plan: GatePlan, gate: gates.BlockUnitary):
    """Exact in-place action of a sampled gate on a single state vector."""
    for (contents, u), orb in zip(gate.blocks, plan.orbit_arrays):
        if orb.size == 0:
            continue
        if len(contents) == 1:
            amps[orb[:, 0]] *= u[0, 0]
        else:
            amps[orb] = amps[orb] @ u.T


def apply_layer(state: SectorState, model: str, layer_index: int, rng,
                plans: PlanCache | None = None) -> SectorState:
    """Apply one freshly sampled brick layer in place; checks the norm."""
    if plans is None:
        plans = PlanCache(state.basis, model)
    sampler = gate_sampler(model)
    for first, width in layer_windows(model, state.basis.L, layer_index):
        gate = sampler(rng)
        apply_gate(state.amps, plans.plan(first, width), gate)
    state.norm_check()
    return state


def realization_rng(master_seed: int, realization: int) -> np.random.Generator:
    """Counter-based stream for one realization; the gate draw order inside
    a stream is canonical (time unit, layer, window ascending)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(realization,))
    return np.random.Generator(np.random.Philox(ss))


def evolve(model: str, L: int, t_max: int, seed: int, hooks: dict,
           realization: int = 0, basis=None):
    """Single-realization evolution; hooks map names to state functionals.

    Returns rows (t, name, value) sampled after every time unit, including
    the initial state at t = 0.
    """
    if basis is None:
        basis = model_basis(model, L)
    plans = PlanCache(basis, model)
    rng = realization_rng(seed, realization)
    state = initial_state(model, basis)
    sub = layers_per_time_unit(model)
    rows = [(0, name, fn(state)) for name, fn in hooks.items()]
    for t in range(1, t_max + 1):
        for s in range(sub):
            layer_index = (t - 1) * sub + s + 1
            apply_layer(state, model, layer_index, rng, plans)
        rows.extend((t, name, fn(state)) for name, fn in hooks.items())
    return rows
