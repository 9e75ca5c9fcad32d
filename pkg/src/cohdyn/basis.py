"""Symmetry-sector and Krylov-fragment bases with bipartition counting.

Configurations are length-L strings of local Z eigenvalues.  A configuration
is stored as an integer code: site 1 is the most significant base-q digit,
and digits follow the rank order of ``SpinSpecies.charges`` (+1 < 0 < -1).
Code order therefore coincides with lexicographic order of the charge
strings, which fixes basis indices deterministically across runs.

All dimension and multiplicity computations are exact integer arithmetic;
nothing here ever rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from numba import njit

from .errors import EmptySectorError, IntegrityError


@dataclass(frozen=True)
class SpinSpecies:
    """Local degree of freedom: dimension q and its Z eigenvalue alphabet."""

    q: int
    charges: tuple[int, ...]  # Z eigenvalues in rank (storage) order

    def __post_init__(self):
        if len(self.charges) != self.q:
            raise ValueError("alphabet size must equal q")

    def rank_of(self, charge: int) -> int:
        return self.charges.index(charge)

    @property
    def name(self) -> str:
        return {2: "spin-half", 3: "spin-one"}.get(self.q, f"q{self.q}")


SPIN_HALF = SpinSpecies(q=2, charges=(1, -1))
SPIN_ONE = SpinSpecies(q=3, charges=(1, 0, -1))


@njit(cache=True)
def _masks_fixed_popcount(L, k, out):
    """Fill ``out`` with all L-bit masks of popcount k, ascending (Gosper)."""
    if k == 0:
        out[0] = 0
        return
    m = (np.uint64(1) << np.uint64(k)) - np.uint64(1)
    top = np.uint64(1) << np.uint64(L)
    i = 0
    while m < top:
        out[i] = m
        i += 1
        c = m & (~m + np.uint64(1))
        r = m + c
        m = (((r ^ m) >> np.uint64(2)) // c) | r


def _spin_half_sector_codes(L: int, charge: int) -> np.ndarray:
    # bit 1 at digit position  <=>  charge -1 ; site i sits at bit (L - i)
    n_down = (L - charge) // 2
    dim = math.comb(L, n_down)
    out = np.empty(dim, dtype=np.uint64)
    _masks_fixed_popcount(L, n_down, out)
    return out


def _spin_one_sector_codes(L: int, charge: int) -> np.ndarray:
    dim = spin_one_sector_dimension(L, charge)
    out = np.empty(dim, dtype=np.uint64)
    _fill_spin_one(L, charge, out)
    return out


@njit(cache=True)
def _fill_spin_one(L, charge, out):
    # DFS in rank order (+1, 0, -1), pruning on reachability of the remainder
    digits = np.zeros(L, dtype=np.int8)
    chg = (1, 0, -1)
    pos = 0
    rem = charge  # charge still to be placed at sites pos..L-1
    k = 0
    digits[0] = -1
    while pos >= 0:
        digits[pos] += 1
        if digits[pos] >= 3:
            digits[pos] = -1
            pos -= 1
            if pos >= 0:
                rem += chg[digits[pos]]
            continue
        c = chg[digits[pos]]
        left = L - pos - 1
        if abs(rem - c) > left:
            continue
        rem -= c
        if pos == L - 1:
            code = np.uint64(0)
            for i in range(L):
                code = code * np.uint64(3) + np.uint64(digits[i])
            out[k] = code
            k += 1
            rem += c
        else:
            pos += 1
            digits[pos] = -1


def spin_one_sector_dimension(L: int, charge: int) -> int:
    """Number of length-L strings over {+1,0,-1} with digit sum ``charge``."""
    a = abs(charge)
    total = 0
    for k in range((L - a) // 2 + 1):
        total += math.factorial(L) // (
            math.factorial(k) * math.factorial(k + a) * math.factorial(L - 2 * k - a)
        )
    return total


def sector_dimension(species: SpinSpecies, L: int, charge: int) -> int:
    """Exact dimension of the fixed total-charge sector."""
    if species.q == 2:
        if (L - charge) % 2 or not -L <= charge <= L:
            return 0
        return math.comb(L, (L - charge) // 2)
    if species.q == 3:
        if abs(charge) > L:
            return 0
        return spin_one_sector_dimension(L, charge)
    raise ValueError(f"unsupported local dimension q={species.q}")


class _CodeBasis:
    """Shared machinery: a sorted array of configuration codes."""

    species: SpinSpecies
    L: int
    codes: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.codes)

    def __len__(self) -> int:
        return len(self.codes)

    def index_of_codes(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.uint64)
        idx = np.searchsorted(self.codes, codes)
        idx = np.clip(idx, 0, self.dim - 1)
        bad = self.codes[idx] != codes
        if np.any(bad):
            raise IntegrityError("configuration not contained in this basis")
        return idx

    def config_to_code(self, config) -> int:
        code = 0
        for m in config:
            code = code * self.species.q + self.species.rank_of(m)
        return code

    def index_of_config(self, config) -> int:
        return int(self.index_of_codes([self.config_to_code(config)])[0])

    def config(self, i: int) -> tuple[int, ...]:
        code = int(self.codes[i])
        ranks = []
        for _ in range(self.L):
            code, r = divmod(code, self.species.q)
            ranks.append(r)
        return tuple(self.species.charges[r] for r in reversed(ranks))

    def left_codes(self, L_A: int) -> np.ndarray:
        """Code of the leftmost-L_A-site substring, per basis element."""
        shift = self.species.q ** (self.L - L_A)
        return self.codes // np.uint64(shift)

    def right_codes(self, L_A: int) -> np.ndarray:
        shift = self.species.q ** (self.L - L_A)
        return self.codes % np.uint64(shift)

    def digit_matrix(self) -> np.ndarray:
        """(dim, L) int8 matrix of Z eigenvalues; use sparingly at scale."""
        out = np.empty((self.dim, self.L), dtype=np.int8)
        rem = self.codes.copy()
        charges = np.array(self.species.charges, dtype=np.int8)
        for i in range(self.L - 1, -1, -1):
            out[:, i] = charges[(rem % np.uint64(self.species.q)).astype(np.int64)]
            rem //= np.uint64(self.species.q)
        return out


def charge_of_codes(species: SpinSpecies, n_sites: int, codes: np.ndarray) -> np.ndarray:
    """Total Z of each code interpreted as an n_sites-digit string."""
    total = np.zeros(len(codes), dtype=np.int64)
    rem = np.asarray(codes, dtype=np.uint64).copy()
    charges = np.array(species.charges, dtype=np.int64)
    for _ in range(n_sites):
        total += charges[(rem % np.uint64(species.q)).astype(np.int64)]
        rem //= np.uint64(species.q)
    return total


def dipole_of_codes(
    species: SpinSpecies, n_sites: int, codes: np.ndarray, x0: int = 1
) -> np.ndarray:
    """Sum of x_i * Z_i with coordinates x0, x0+1, ... for each code."""
    total = np.zeros(len(codes), dtype=np.int64)
    rem = np.asarray(codes, dtype=np.uint64).copy()
    charges = np.array(species.charges, dtype=np.int64)
    for i in range(n_sites - 1, -1, -1):
        total += (x0 + i) * charges[(rem % np.uint64(species.q)).astype(np.int64)]
        rem //= np.uint64(species.q)
    return total


@dataclass(frozen=True, eq=False)
class SectorBasis(_CodeBasis):
    """Ordered basis of a fixed-charge (optionally fixed-dipole) sector."""

    species: SpinSpecies
    L: int
    charge: int
    dipole: Optional[int]
    codes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim == 0:
            raise EmptySectorError(
                f"empty sector: q={self.species.q}, L={self.L}, "
                f"charge={self.charge}, dipole={self.dipole}"
            )


@dataclass(frozen=True, eq=False)
class FullBasis(_CodeBasis):
    """Unconstrained q^L computational basis (Hamiltonian dynamics)."""

    species: SpinSpecies
    L: int
    codes: np.ndarray = field(repr=False)


@lru_cache(maxsize=8)
def full_basis(L: int, q: int = 2) -> FullBasis:
    species = SPIN_HALF if q == 2 else SPIN_ONE
    return FullBasis(species=species, L=L, codes=np.arange(q**L, dtype=np.uint64))


@dataclass(frozen=True, eq=False)
class FragmentBasis(_CodeBasis):
    """Largest Krylov fragment of the charge+dipole circuit, in dimer form.

    Dimer alphabet: A = (+1,-1), B = (-1,+1); a member is any string of
    n_dimers = L/2 dimers containing exactly n_a = L/4 A's.  ``codes`` are
    the *physical* configuration codes; ``dimer_codes`` the bitmasks over
    dimers with A -> 0, B -> 1 (so physical lex order is preserved).
    """

    L: int
    dimer_codes: np.ndarray = field(repr=False)
    codes: np.ndarray = field(repr=False)
    species: SpinSpecies = SPIN_HALF

    @property
    def n_dimers(self) -> int:
        return self.L // 2

    @property
    def n_a(self) -> int:
        return self.L // 4

    def dimer_string(self, i: int) -> str:
        bits = int(self.dimer_codes[i])
        return "".join(
            "B" if (bits >> (self.n_dimers - 1 - j)) & 1 else "A"
            for j in range(self.n_dimers)
        )

    def index_of_dimer_string(self, s: str) -> int:
        if len(s) != self.n_dimers or set(s) - {"A", "B"}:
            raise IntegrityError(f"not a dimer string for L={self.L}: {s!r}")
        bits = int("".join("1" if c == "B" else "0" for c in s), 2)
        i = int(np.searchsorted(self.dimer_codes, np.uint64(bits)))
        if i >= self.dim or self.dimer_codes[i] != np.uint64(bits):
            raise IntegrityError(f"dimer string not in fragment: {s!r}")
        return i


def enumerate_u1_sector(species: SpinSpecies, L: int, charge: int) -> SectorBasis:
    """All length-L configurations with total charge ``charge``, lex order."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if sector_dimension(species, L, charge) == 0:
        raise EmptySectorError(
            f"charge {charge} unreachable for q={species.q}, L={L}"
        )
    if species.q == 2:
        codes = _spin_half_sector_codes(L, charge)
    elif species.q == 3:
        codes = _spin_one_sector_codes(L, charge)
    else:
        raise ValueError(f"unsupported local dimension q={species.q}")
    return SectorBasis(species=species, L=L, charge=charge, dipole=None, codes=codes)


def enumerate_qp_sector(
    species: SpinSpecies, L: int, charge: int, dipole: int
) -> SectorBasis:
    """Fixed charge *and* dipole sector (coordinates x_i = 1..L)."""
    base = enumerate_u1_sector(species, L, charge)
    keep = dipole_of_codes(species, L, base.codes) == dipole
    codes = base.codes[keep]
    if len(codes) == 0:
        raise EmptySectorError(
            f"(charge, dipole)=({charge},{dipole}) unreachable for L={L}"
        )
    return SectorBasis(species=species, L=L, charge=charge, dipole=dipole, codes=codes)


def enumerate_dimer_fragment(L: int) -> FragmentBasis:
    """Fragment reached from the root |+1,-1,-1,+1,...> under AB <-> BA."""
    if L % 4:
        raise ValueError(f"fragment requires L divisible by 4, got L={L}")
    n_d, k = L // 2, L // 4
    dimer_codes = np.empty(math.comb(n_d, k), dtype=np.uint64)
    _masks_fixed_popcount(n_d, k, dimer_codes)  # B-dimers are 1-bits
    codes = _expand_dimer_codes(dimer_codes, n_d)
    order = np.argsort(codes, kind="stable")
    return FragmentBasis(L=L, dimer_codes=dimer_codes[order], codes=codes[order])


def _expand_dimer_codes(dimer_codes: np.ndarray, n_d: int) -> np.ndarray:
    # A -> bits (0,1), B -> bits (1,0) on (odd, even) physical sites
    phys = np.zeros(len(dimer_codes), dtype=np.uint64)
    for j in range(n_d):
        b = (dimer_codes >> np.uint64(n_d - 1 - j)) & np.uint64(1)
        hi = np.uint64(2 * (n_d - j) - 1)  # odd site of dimer j+1
        lo = np.uint64(2 * (n_d - j) - 2)
        phys |= (b << hi) | ((np.uint64(1) - b) << lo)
    return phys


# ---------------------------------------------------------------------------
# bipartition multiplicities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorRecord:
    """One sub-sector crossing the cut: label -> (d_A, d_B).

    ``split`` carries the boundary-dimer resolution (m1, m0) of d_B for odd
    cuts through the fragment, where d_B = m1 + m0.
    """

    label: object
    d_A: int
    d_B: int
    split: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class BipartitionMultiplicities:
    L: int
    L_A: int
    total: int
    records: tuple[SectorRecord, ...]

    def __post_init__(self):
        s = sum(r.d_A * r.d_B for r in self.records)
        if s != self.total:
            raise IntegrityError(
                f"multiplicity records sum to {s}, expected {self.total}"
            )
        if any(r.d_A < 1 or r.d_B < 1 for r in self.records):
            raise IntegrityError("all multiplicities must be >= 1")


def u1_bipartition_multiplicities(
    species: SpinSpecies, L: int, L_A: int, charge: int
) -> BipartitionMultiplicities:
    """Sub-sector dimensions for the leftmost-L_A cut of a charge sector."""
    if not 0 <= L_A <= L:
        raise ValueError("require 0 <= L_A <= L")
    D = sector_dimension(species, L, charge)
    if D == 0:
        raise EmptySectorError(f"charge {charge} unreachable for L={L}")
    L_B = L - L_A
    records = []
    if species.q == 2:
        n_up = (L + charge) // 2
        for n_A in range(0, L_A + 1):
            d_A = math.comb(L_A, n_A)
            d_B = math.comb(L_B, n_up - n_A) if 0 <= n_up - n_A <= L_B else 0
            if d_A and d_B:
                records.append(SectorRecord(label=n_A, d_A=d_A, d_B=d_B))
    elif species.q == 3:
        for q_A in range(-L_A, L_A + 1):
            d_A = spin_one_sector_dimension(L_A, q_A) if L_A else (q_A == 0)
            d_B = (
                spin_one_sector_dimension(L_B, charge - q_A)
                if L_B
                else (charge - q_A == 0)
            )
            if d_A and d_B:
                records.append(SectorRecord(label=q_A, d_A=d_A, d_B=d_B))
    else:
        raise ValueError(f"unsupported local dimension q={species.q}")
    return BipartitionMultiplicities(L=L, L_A=L_A, total=D, records=tuple(records))


def fragment_bipartition_multiplicities(L: int, L_A: int) -> BipartitionMultiplicities:
    """Cut-resolved counting for the dimer fragment.

    Even L_A cuts fall between dimers and behave like a U(1) chain of
    dimers.  Odd L_A cuts split one dimer; the complement count then
    resolves into (m1, m0) according to the species of the cut dimer.
    """
    if L % 4:
        raise ValueError(f"fragment requires L divisible by 4, got L={L}")
    if not 0 <= L_A <= L:
        raise ValueError("require 0 <= L_A <= L")
    n_d, K = L // 2, L // 4
    D = math.comb(n_d, K)
    n = L_A // 2
    records = []
    if L_A % 2 == 0:
        for r in range(0, min(n, K) + 1):
            d_A = math.comb(n, r)
            d_B = math.comb(n_d - n, K - r)
            if d_A and d_B:
                records.append(SectorRecord(label=r, d_A=d_A, d_B=d_B))
    else:
        M = n_d - n - 1  # bulk dimers fully on the B side
        for r in range(0, min(n, K) + 1):
            d_A = math.comb(n, r)
            m1 = math.comb(M, K - r) if 0 <= K - r <= M else 0
            m0 = math.comb(M, K - r - 1) if 0 <= K - r - 1 <= M else 0
            if d_A and (m1 + m0):
                records.append(
                    SectorRecord(label=r, d_A=d_A, d_B=m1 + m0, split=(m1, m0))
                )
    return BipartitionMultiplicities(L=L, L_A=L_A, total=D, records=tuple(records))


def _charge_dipole_poly(species: SpinSpecies, coords) -> dict:
    """Generating polynomial {(n or q, weighted sum): count} over given sites.

    For q=2 the exponents track (number of up spins, sum of x over up
    spins); for q=3 they track (charge, dipole) directly.  Exact ints.
    """
    poly = {(0, 0): 1}
    for x in coords:
        new: dict = {}
        for (a, b), c in poly.items():
            new[(a, b)] = new.get((a, b), 0) + c
            new[(a + 1, b + x)] = new.get((a + 1, b + x), 0) + c
            if species.q == 3:
                new[(a - 1, b - x)] = new.get((a - 1, b - x), 0) + c
        poly = new
    return poly


def qp_multiplicity_table(
    species: SpinSpecies, L: int, L_A: int, charge: int, dipole: int
) -> BipartitionMultiplicities:
    """d_A(q_A, p_A) table for a fixed (charge, dipole) sector.

    Coordinates are x_i = 1..L and (charge, dipole) use the +/-1 eigenvalue
    convention of the circuits; the half-integer bookkeeping for q=2 is
    internal.  All coefficients are exact (arbitrary-precision) integers.
    """
    if species.q not in (2, 3):
        raise ValueError(f"unsupported local dimension q={species.q}")
    if not 0 <= L_A <= L:
        raise ValueError("require 0 <= L_A <= L")
    sigma = L * (L + 1) // 2
    poly_A = _charge_dipole_poly(species, range(1, L_A + 1))
    poly_B = _charge_dipole_poly(species, range(L_A + 1, L + 1))

    if species.q == 2:
        # q = 2n - L_x, p = 2*pi - Sigma_x  per subsystem; convert and look up
        def lookup(poly, n_sites, x_sum, q, p):
            if (q + n_sites) % 2 or (p + x_sum) % 2:
                return 0
            return poly.get(((q + n_sites) // 2, (p + x_sum) // 2), 0)

        sig_A = L_A * (L_A + 1) // 2
        sig_B = sigma - sig_A
        D = lookup(
            _charge_dipole_poly(species, range(1, L + 1)), L, sigma, charge, dipole
        )
        labels = {
            (2 * a - L_A, 2 * b - sig_A): c for (a, b), c in poly_A.items()
        }
        records = []
        for (q_A, p_A), d_A in sorted(labels.items()):
            d_B = lookup(poly_B, L - L_A, sig_B, charge - q_A, dipole - p_A)
            if d_A and d_B:
                records.append(SectorRecord(label=(q_A, p_A), d_A=d_A, d_B=d_B))
    else:
        poly_full = _charge_dipole_poly(species, range(1, L + 1))
        D = poly_full.get((charge, dipole), 0)
        records = []
        for (q_A, p_A), d_A in sorted(poly_A.items()):
            d_B = poly_B.get((charge - q_A, dipole - p_A), 0)
            if d_A and d_B:
                records.append(SectorRecord(label=(q_A, p_A), d_A=d_A, d_B=d_B))

    if D == 0:
        raise EmptySectorError(
            f"(charge, dipole)=({charge},{dipole}) unreachable for L={L}"
        )
    return BipartitionMultiplicities(L=L, L_A=L_A, total=D, records=tuple(records))


@lru_cache(maxsize=128)
def cached_u1_basis(q: int, L: int, charge: int) -> SectorBasis:
    return enumerate_u1_sector(SPIN_HALF if q == 2 else SPIN_ONE, L, charge)


@lru_cache(maxsize=32)
def cached_fragment_basis(L: int) -> FragmentBasis:
    return enumerate_dimer_fragment(L)
