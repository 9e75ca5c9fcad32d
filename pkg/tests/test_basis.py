import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohdyn import basis as B
from cohdyn.errors import EmptySectorError, IntegrityError


def brute_force_sector(q, L, charge):
    charges = (1, -1) if q == 2 else (1, 0, -1)
    return [
        c for c in itertools.product(charges, repeat=L) if sum(c) == charge
    ]


class TestU1Sector:
    def test_spin_half_L4_zero_charge(self):
        b = B.enumerate_u1_sector(B.SPIN_HALF, 4, 0)
        assert b.dim == 6 == math.comb(4, 2)

    def test_spin_one_two_sites(self):
        b = B.enumerate_u1_sector(B.SPIN_ONE, 2, 0)
        assert [b.config(i) for i in range(b.dim)] == [(1, -1), (0, 0), (-1, 1)]

    def test_unreachable_charge_raises(self):
        with pytest.raises(EmptySectorError):
            B.enumerate_u1_sector(B.SPIN_HALF, 2, 4)

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("L", range(1, 9))
    def test_matches_brute_force(self, q, L):
        species = B.SPIN_HALF if q == 2 else B.SPIN_ONE
        for charge in range(-L, L + 1):
            expected = brute_force_sector(q, L, charge)
            if not expected:
                continue
            b = B.enumerate_u1_sector(species, L, charge)
            assert b.dim == len(expected)
            assert [b.config(i) for i in range(b.dim)] == sorted(
                expected, key=lambda c: [species.rank_of(m) for m in c]
            )

    @pytest.mark.parametrize("L", range(1, 13))
    def test_dimension_formulas(self, L):
        for charge in range(-L, L + 1, 2 if L % 2 == 0 else 1):
            for species in (B.SPIN_HALF, B.SPIN_ONE):
                d = B.sector_dimension(species, L, charge)
                if d:
                    assert B.enumerate_u1_sector(species, L, charge).dim == d

    def test_lexicographic_order_is_strict(self):
        b = B.enumerate_u1_sector(B.SPIN_ONE, 5, 1)
        assert np.all(np.diff(b.codes.astype(np.int64)) > 0)

    def test_index_lookup_roundtrip(self):
        b = B.enumerate_u1_sector(B.SPIN_HALF, 6, 0)
        for i in (0, 7, b.dim - 1):
            assert b.index_of_config(b.config(i)) == i

    def test_foreign_config_rejected(self):
        b = B.enumerate_u1_sector(B.SPIN_HALF, 4, 0)
        with pytest.raises(IntegrityError):
            b.index_of_config((1, 1, 1, -1))


class TestFragment:
    def test_L8_has_six_strings(self):
        f = B.enumerate_dimer_fragment(8)
        assert f.dim == 6 == math.comb(4, 2)

    def test_L16_dimension(self):
        assert B.enumerate_dimer_fragment(16).dim == 70

    def test_L4_strings(self):
        f = B.enumerate_dimer_fragment(4)
        assert {f.dimer_string(i) for i in range(f.dim)} == {"AB", "BA"}

    def test_requires_multiple_of_four(self):
        with pytest.raises(ValueError):
            B.enumerate_dimer_fragment(6)

    def test_root_state_is_member(self):
        f = B.enumerate_dimer_fragment(8)
        root = (1, -1, -1, 1) * 2
        i = f.index_of_config(root)
        assert f.dimer_string(i) == "ABAB"

    def test_expansions_lie_in_neutral_sector(self):
        f = B.enumerate_dimer_fragment(8)
        digits = f.digit_matrix()
        assert np.all(digits.sum(axis=1) == 0)
        x = np.arange(1, 9)
        assert np.all((digits * x).sum(axis=1) == 0)

    @settings(max_examples=25, deadline=None)
    @given(st.sampled_from([4, 8, 12]), st.integers(0, 10**6))
    def test_closure_under_adjacent_swap(self, L, pick):
        f = B.enumerate_dimer_fragment(L)
        s = f.dimer_string(pick % f.dim)
        for j in range(len(s) - 1):
            if s[j] != s[j + 1]:
                swapped = s[:j] + s[j + 1] + s[j] + s[j + 2:]
                f.index_of_dimer_string(swapped)  # raises if absent


class TestMultiplicities:
    def test_spin_half_example(self):
        m = B.u1_bipartition_multiplicities(B.SPIN_HALF, 4, 2, 0)
        assert [(r.label, r.d_A, r.d_B) for r in m.records] == [
            (0, 1, 1), (1, 2, 2), (2, 1, 1)
        ]

    def test_empty_subsystem(self):
        m = B.u1_bipartition_multiplicities(B.SPIN_HALF, 6, 0, 0)
        assert len(m.records) == 1
        assert (m.records[0].d_A, m.records[0].d_B) == (1, 20)

    def test_spin_one_example(self):
        m = B.u1_bipartition_multiplicities(B.SPIN_ONE, 2, 1, 0)
        assert [(r.label, r.d_A, r.d_B) for r in m.records] == [
            (-1, 1, 1), (0, 1, 1), (1, 1, 1)
        ]

    @pytest.mark.parametrize("q,L", [(2, 8), (2, 11), (3, 6)])
    def test_total_identity(self, q, L):
        species = B.SPIN_HALF if q == 2 else B.SPIN_ONE
        charge = L % 2 if q == 2 else 0
        D = B.sector_dimension(species, L, charge)
        for L_A in range(L + 1):
            m = B.u1_bipartition_multiplicities(species, L, L_A, charge)
            assert sum(r.d_A * r.d_B for r in m.records) == D

    def test_fragment_even_example(self):
        m = B.fragment_bipartition_multiplicities(8, 4)
        assert [(r.label, r.d_A, r.d_B) for r in m.records] == [
            (0, 1, 1), (1, 2, 2), (2, 1, 1)
        ]

    def test_fragment_odd_example(self):
        m = B.fragment_bipartition_multiplicities(8, 3)
        assert [(r.d_A, r.split) for r in m.records] == [(1, (1, 2)), (1, (2, 1))]
        assert sum(r.d_A * r.d_B for r in m.records) == 6

    def test_fragment_trivial_cut(self):
        m = B.fragment_bipartition_multiplicities(8, 0)
        assert [(r.d_A, r.d_B) for r in m.records] == [(1, 6)]

    @pytest.mark.parametrize("L", [4, 8, 12])
    def test_fragment_totals_all_cuts(self, L):
        D = math.comb(L // 2, L // 4)
        for L_A in range(L + 1):
            m = B.fragment_bipartition_multiplicities(L, L_A)
            assert m.total == D

    def test_bipartition_enumeration_agreement(self):
        # multiplicities must equal direct counting of sector configs
        b = B.enumerate_u1_sector(B.SPIN_HALF, 6, 2)
        for L_A in (2, 3):
            m = B.u1_bipartition_multiplicities(B.SPIN_HALF, 6, L_A, 2)
            left = b.left_codes(L_A)
            q_A = B.charge_of_codes(B.SPIN_HALF, L_A, left)
            for r in m.records:
                n_up = r.label
                assert np.count_nonzero(q_A == 2 * n_up - L_A) == r.d_A * r.d_B


class TestChargeDipoleTable:
    def test_whole_chain_neutral_pair(self):
        m = B.qp_multiplicity_table(B.SPIN_HALF, 4, 4, 0, 0)
        assert m.total == 2
        b = B.enumerate_qp_sector(B.SPIN_HALF, 4, 0, 0)
        assert {b.config(i) for i in range(b.dim)} == {
            (1, -1, -1, 1), (-1, 1, 1, -1)
        }

    def test_empty_subsystem_record(self):
        m = B.qp_multiplicity_table(B.SPIN_HALF, 8, 0, 0, 0)
        assert [(r.d_A, r.d_B) for r in m.records] == [(1, m.total)]

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("L", range(2, 11, 2))
    def test_brute_force_agreement(self, q, L):
        species = B.SPIN_HALF if q == 2 else B.SPIN_ONE
        charges = species.charges
        x = np.arange(1, L + 1)
        configs = [
            c
            for c in itertools.product(charges, repeat=L)
            if sum(c) == 0 and sum(xi * ci for xi, ci in zip(x, c)) == 0
        ]
        if not configs:
            return
        for L_A in (0, L // 2, L - 1):
            m = B.qp_multiplicity_table(species, L, L_A, 0, 0)
            assert m.total == len(configs)
            counts = {}
            for c in configs:
                qa = sum(c[:L_A])
                pa = sum((i + 1) * c[i] for i in range(L_A))
                counts[(qa, pa)] = counts.get((qa, pa), 0) + 1
            table = {r.label: r.d_A * r.d_B for r in m.records}
            assert table == counts

    def test_exact_integers_at_larger_sizes(self):
        m = B.qp_multiplicity_table(B.SPIN_HALF, 20, 10, 0, 0)
        assert all(isinstance(r.d_A, int) for r in m.records)
        assert m.total == sum(r.d_A * r.d_B for r in m.records)
