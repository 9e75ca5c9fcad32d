"""Exact long-time (Haar) purities and entropies for sectors and fragments.

Everything is evaluated in big-rational arithmetic (`fractions.Fraction`)
and converted to floating point only inside the base-2 logarithms, so the
results stay exact even when sector dimensions are astronomically large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .basis import (
    SPIN_HALF,
    SPIN_ONE,
    BipartitionMultiplicities,
    fragment_bipartition_multiplicities,
    qp_multiplicity_table,
    sector_dimension,
    u1_bipartition_multiplicities,
)
from .errors import IntegrityError

#: model tags accepted by the closed-form helpers
CIRCUIT_MODELS = ("u1-spin-half", "u1-spin-one", "dipole-fragment")


def log2_fraction(x: Fraction) -> float:
    """log2 of an exact rational, accurate for huge numerators."""
    if x <= 0:
        raise ValueError("log2 of a non-positive rational")
    return math.log2(x.numerator) - math.log2(x.denominator)


def _check(mults: BipartitionMultiplicities, D: int):
    if mults.total != D or sum(r.d_A * r.d_B for r in mults.records) != D:
        raise IntegrityError(
            f"multiplicities (total {mults.total}) inconsistent with D={D}"
        )


def haar_diag_purity(mults: BipartitionMultiplicities, D: int) -> Fraction:
    """Mean collision probability of subsystem measurement outcomes.

    [sum_l d_A(l) d_B(l)^2 + D] / [D (D + 1)], exact.
    """
    _check(mults, D)
    s = sum(r.d_A * r.d_B * r.d_B for r in mults.records)
    return Fraction(s + D, D * (D + 1))


def haar_full_purity(mults: BipartitionMultiplicities, D: int) -> Fraction:
    """Mean subsystem purity: [sum d_A^2 d_B + sum d_A d_B^2] / [D (D+1)]."""
    _check(mults, D)
    s = sum(r.d_A * r.d_A * r.d_B + r.d_A * r.d_B * r.d_B for r in mults.records)
    return Fraction(s, D * (D + 1))


def haar_diag_purity_fragment_odd(L: int, L_A: int) -> Fraction:
    """Odd-cut diagonal purity; the split dimer contributes m1^2 + m0^2."""
    if L_A % 2 == 0:
        raise ValueError("use haar_diag_purity with even-cut multiplicities")
    mults = fragment_bipartition_multiplicities(L, L_A)
    D = mults.total
    s = 0
    for r in mults.records:
        m1, m0 = r.split
        s += r.d_A * (m1 * m1 + m0 * m0)
    return Fraction(s + D, D * (D + 1))


def haar_full_purity_fragment_odd(L: int, L_A: int) -> Fraction:
    """Odd-cut subsystem purity.

    The crossed contraction sees only the total complement count
    m1 + m0, while the diagonal contraction locks the boundary dimer and
    sees m1^2 + m0^2.
    """
    if L_A % 2 == 0:
        raise ValueError("use haar_full_purity with even-cut multiplicities")
    mults = fragment_bipartition_multiplicities(L, L_A)
    D = mults.total
    s = 0
    for r in mults.records:
        m1, m0 = r.split
        s += r.d_A * r.d_A * (m1 + m0) + r.d_A * (m1 * m1 + m0 * m0)
    return Fraction(s, D * (D + 1))


def model_dimension(model: str, L: int) -> int:
    """Dimension of the dynamically accessible space for a model tag."""
    if model == "u1-spin-half":
        return sector_dimension(SPIN_HALF, L, 0)
    if model == "u1-spin-one":
        return sector_dimension(SPIN_ONE, L, 0)
    if model == "dipole-fragment":
        if L % 4:
            raise ValueError("dipole-fragment requires L divisible by 4")
        return math.comb(L // 2, L // 4)
    if model == "unconstrained-spin-half":
        return 2**L
    if model == "unconstrained-spin-one":
        return 3**L
    raise ValueError(f"unknown model tag {model!r}")


def global_sd_saturation(model: str, L: int) -> float:
    """Long-time global participation entropy, log2((D+1)/2) bits."""
    D = model_dimension(model, L)
    return log2_fraction(Fraction(D + 1, 2))


def bipartition_multiplicities_for(model: str, L: int, L_A: int):
    if model == "u1-spin-half":
        return u1_bipartition_multiplicities(SPIN_HALF, L, L_A, 0)
    if model == "u1-spin-one":
        return u1_bipartition_multiplicities(SPIN_ONE, L, L_A, 0)
    if model == "dipole-fragment":
        return fragment_bipartition_multiplicities(L, L_A)
    if model == "qp-sector":
        return qp_multiplicity_table(SPIN_HALF, L, L_A, 0, 0)
    raise ValueError(f"no closed-form multiplicities for model {model!r}")


@dataclass(frozen=True)
class SaturationReport:
    """Exact Haar long-time values for one (model, L, L_A)."""

    model: str
    L: int
    L_A: int
    diag_purity: Fraction
    full_purity: Fraction

    def __post_init__(self):
        if not 0 < self.diag_purity <= self.full_purity <= 1:
            raise IntegrityError("need 0 < P_diag <= P_A <= 1")

    @property
    def sd(self) -> float:
        return -log2_fraction(self.diag_purity)

    @property
    def sr(self) -> float:
        return -log2_fraction(self.full_purity)

    @property
    def cd(self) -> float:
        return log2_fraction(self.full_purity / self.diag_purity)

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "L": self.L,
            "L_A": self.L_A,
            "P_diag": f"{self.diag_purity.numerator}/{self.diag_purity.denominator}",
            "P_A": f"{self.full_purity.numerator}/{self.full_purity.denominator}",
            "Sd_inf": self.sd,
            "SR_inf": self.sr,
            "Cd_inf": self.cd,
        }


def saturation_report(model: str, L: int, L_A: int) -> SaturationReport:
    """Closed-form long-time values for a leftmost cut of L_A sites."""
    if model == "dipole-fragment" and L_A % 2 == 1:
        diag = haar_diag_purity_fragment_odd(L, L_A)
        full = haar_full_purity_fragment_odd(L, L_A)
    else:
        mults = bipartition_multiplicities_for(model, L, L_A)
        diag = haar_diag_purity(mults, mults.total)
        full = haar_full_purity(mults, mults.total)
    return SaturationReport(model=model, L=L, L_A=L_A, diag_purity=diag, full_purity=full)


def sample_haar_states(dim: int, count: int, rng, batch: int = 0):
    """Yield (n, dim) batches of Haar-random state vectors in a dim-space.

    Normalized complex-Gaussian vectors; `rng` is a numpy Generator (pass a
    seeded one for reproducibility).  Batching keeps memory bounded for the
    Monte Carlo purity oracles.
    """
    if batch <= 0:
        batch = max(1, min(count, 2**22 // max(dim, 1) + 1))
    done = 0
    while done < count:
        n = min(batch, count - done)
        z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        yield z
        done += n
