"""Exact gate-ensemble-averaged purities via dense two-copy contraction.

Averaging (U x U*) x (U x U*) over the charge-block Haar measure projects
every site onto a small local basis of replica pairings: q^2 + q states
built from an identity-type (+) or swap-type (-) pairing dressed with the
two physical spins (r, b); the two pairings coincide on r = b, giving 6
local states for q=2 and 15 for q=3.  The averaged two-site transfer
operator is assembled from the invariant pairing vectors with Weingarten
weights 1/(d1 d2) and 1/(d1 d2 - delta), and purities follow from
boundary contractions: swap-type vectors on the subsystem, identity-type
on the complement, and the diagonal projector for dephased purities.

Everything is a dense real array; sizes are capped (L <= 10 for q=2,
L <= 6 for q=3) and evolution is deterministic, which makes this module
the exact oracle that validates the Monte Carlo pipeline end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SPIN_HALF, SPIN_ONE, SpinSpecies
from .config import REPLICA_MAX_L
from .errors import IntegrityError, ResourceLimitError
from .trace import EnsembleTrace

#: two-site total-charge block dimensions, by charge (descending)
TWO_SITE_DIMS = {
    2: {2: 1, 0: 2, -2: 1},
    3: {2: 1, 1: 2, 0: 3, -1: 2, -2: 1},
}


@dataclass(frozen=True)
class ReplicaState:
    """One local pairing state: pairing type and the two replica spins."""

    pairing: str  # "+", "-", or "d" (diagonal: both pairings coincide)
    r: int
    b: int

    def has_pairing(self, mu: str) -> bool:
        return self.pairing == "d" or self.pairing == mu


@dataclass(frozen=True, eq=False)
class ReplicaBasis:
    species: SpinSpecies
    states: tuple[ReplicaState, ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def diag_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.states) if s.pairing == "d")

    def boundary_vector(self, kind: str) -> np.ndarray:
        """Per-site boundary weights: identity / swap / swap-offdiag / diag."""
        v = np.zeros(self.dim)
        for i, s in enumerate(self.states):
            if kind == "identity":
                v[i] = 1.0 if s.has_pairing("+") else 0.0
            elif kind == "swap":
                v[i] = 1.0 if s.has_pairing("-") else 0.0
            elif kind == "swap-offdiag":
                v[i] = 1.0 if s.pairing == "-" else 0.0
            elif kind == "diag":
                v[i] = 1.0 if s.pairing == "d" else 0.0
            else:
                raise ValueError(f"unknown boundary kind {kind!r}")
        return v

    def diag_index(self, charge: int) -> int:
        for i, s in enumerate(self.states):
            if s.pairing == "d" and s.r == charge:
                return i
        raise IntegrityError(f"no diagonal replica state with charge {charge}")


def replica_basis(species: SpinSpecies) -> ReplicaBasis:
    states = [ReplicaState("d", c, c) for c in species.charges]
    for mu in ("+", "-"):
        for r in species.charges:
            for b in species.charges:
                if r != b:
                    states.append(ReplicaState(mu, r, b))
    return ReplicaBasis(species=species, states=tuple(states))


@dataclass(frozen=True, eq=False)
class ReplicaTransfer:
    basis: ReplicaBasis
    matrix: np.ndarray  # (dim^2, dim^2), real


def _pairing_vector(basis: ReplicaBasis, mu: str, z1: int, z2: int) -> np.ndarray:
    """Invariant two-site vector of one pairing at fixed copy charges."""
    n = basis.dim
    v = np.zeros(n * n)
    for i, si in enumerate(basis.states):
        if not si.has_pairing(mu):
            continue
        for j, sj in enumerate(basis.states):
            if not sj.has_pairing(mu):
                continue
            if si.r + sj.r == z1 and si.b + sj.b == z2:
                v[i * n + j] = 1.0
    return v


def build_replica_transfer(species: SpinSpecies) -> ReplicaTransfer:
    """Averaged two-site transfer operator of the U(1) brick-wall circuit."""
    basis = replica_basis(species)
    dims = TWO_SITE_DIMS[species.q]
    n2 = basis.dim**2
    t = np.zeros((n2, n2))
    for z1, d1 in dims.items():
        for z2, d2 in dims.items():
            plus = _pairing_vector(basis, "+", z1, z2)
            minus = _pairing_vector(basis, "-", z1, z2)
            t += np.outer(plus, plus) / (d1 * d2)
            denom = d1 * d2 - (1 if z1 == z2 else 0)
            cross = minus - (plus / d1 if z1 == z2 else 0.0)
            if denom == 0:
                # a 1-dim block paired with itself: both pairings coincide
                if np.any(cross):
                    raise IntegrityError("degenerate pairing should vanish")
                continue
            t += np.outer(cross, cross) / denom
    return ReplicaTransfer(basis=basis, matrix=t)


def _apply_bond(vec: np.ndarray, t: np.ndarray, site: int, n: int, L: int):
    """Contract the transfer operator into sites (site, site+1), 1-based."""
    pre = n ** (site - 1)
    post = n ** (L - site - 1)
    v = vec.reshape(pre, n * n, post)
    out = t @ v.transpose(1, 0, 2).reshape(n * n, pre * post)
    return np.ascontiguousarray(
        out.reshape(n * n, pre, post).transpose(1, 0, 2)
    ).reshape(-1)


def _contract_boundary(vec: np.ndarray, site_vectors) -> float:
    res = vec
    for w in site_vectors:
        res = w @ res.reshape(len(w), -1)
    return float(res)


def initial_replica_vector(basis: ReplicaBasis, L: int) -> np.ndarray:
    """Product of diagonal states matching the circuit initial pattern."""
    if basis.species.q == 2:
        pattern = [basis.diag_index(+1), basis.diag_index(-1)]
    else:
        pattern = [basis.diag_index(-1), basis.diag_index(0), basis.diag_index(+1)]
    if L % len(pattern):
        raise IntegrityError(f"initial pattern does not tile L={L}")
    n = basis.dim
    vec = np.zeros(n**L)
    flat = 0
    for i in range(L):
        flat = flat * n + pattern[i % len(pattern)]
    vec[flat] = 1.0
    return vec


def replica_evolve(
    species: SpinSpecies,
    L: int,
    t_max: int,
    L_A_list,
    swap_convention: str = "full",
    trace_check: float = 1e-12,
):
    """Exact E[P_A](t) and E[P_diag](t) for the leftmost cuts in L_A_list.

    One time step is one brick sub-layer (odd bonds at odd t), matching
    the circuit engine's time unit.  ``swap_convention`` selects the full
    vectorized swap for the purity boundary (default) or the literal
    off-diagonal-only variant kept for comparison.  The identity-boundary
    contraction is asserted to stay at 1 to ``trace_check`` every layer.
    """
    if L > REPLICA_MAX_L.get(species.q, 0):
        raise ResourceLimitError(
            f"dense replica contraction limited to L <= "
            f"{REPLICA_MAX_L.get(species.q)} for q={species.q}"
        )
    transfer = build_replica_transfer(species)
    basis = transfer.basis
    n = basis.dim
    ident = basis.boundary_vector("identity")
    swap = basis.boundary_vector(
        "swap" if swap_convention == "full" else "swap-offdiag"
    )
    diag = basis.boundary_vector("diag")

    vec = initial_replica_vector(basis, L)
    L_A_list = list(L_A_list)
    p_full = {L_A: np.empty(t_max + 1) for L_A in L_A_list}
    p_diag = {L_A: np.empty(t_max + 1) for L_A in L_A_list}
    p_col = np.empty(t_max + 1)

    def measure(t):
        for L_A in L_A_list:
            full_sites = [swap] * L_A + [ident] * (L - L_A)
            diag_sites = [diag] * L_A + [ident] * (L - L_A)
            p_full[L_A][t] = _contract_boundary(vec, full_sites)
            p_diag[L_A][t] = _contract_boundary(vec, diag_sites)
        p_col[t] = _contract_boundary(vec, [diag] * L)

    measure(0)
    for t in range(1, t_max + 1):
        first = 1 if t % 2 == 1 else 2
        for site in range(first, L, 2):
            vec = _apply_bond(vec, transfer.matrix, site, n, L)
        norm = _contract_boundary(vec, [ident] * L)
        if abs(norm - 1.0) > trace_check:
            raise IntegrityError(
                f"trace boundary drifted to {norm!r} at layer {t}"
            )
        measure(t)
    return np.arange(t_max + 1), p_col, p_full, p_diag


def run_replica_config(cfg):
    """Runner entry: CSV text (stderr = 0 columns) plus saturation values."""
    from . import haar

    species = SPIN_HALF if cfg.species == 2 else SPIN_ONE
    model = "u1-spin-half" if cfg.species == 2 else "u1-spin-one"
    times, p_col, p_full, p_diag = replica_evolve(
        species, cfg.L, cfg.t_max, cfg.L_A,
        swap_convention=cfg.grid.get("swap_convention", "full"),
    )
    trace = EnsembleTrace(model=cfg.model, L=cfg.L, seed=cfg.seed)
    trace.add_lane("pcol", cfg.L, times, p_col)
    for L_A in cfg.L_A:
        trace.add_lane("P_A", L_A, times, p_full[L_A])
        trace.add_lane("Pdiag_A", L_A, times, p_diag[L_A])
    sats = {cfg.L: (haar.global_sd_saturation(model, cfg.L), None)}
    for L_A in cfg.L_A:
        rep = haar.saturation_report(model, cfg.L, L_A)
        sats[L_A] = (rep.sd, rep.sr)
    from .trace import format_csv

    return format_csv(trace.csv_rows("annealed", sats)), sats
