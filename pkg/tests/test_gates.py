import math

import numpy as np
import pytest

from cohdyn import gates
from cohdyn.basis import SPIN_HALF, SPIN_ONE


def rng(seed=0):
    return np.random.default_rng(seed)


class TestCue:
    def test_single_phase(self):
        u = gates.sample_cue(1, rng(1))
        assert u.shape == (1, 1)
        assert abs(abs(u[0, 0]) - 1.0) < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_unitary(self, n):
        u = gates.sample_cue(n, rng(n))
        assert np.abs(u.conj().T @ u - np.eye(n)).max() < 1e-12

    def test_second_moment_n2(self):
        # Haar: E|U_ij|^2 = 1/n for every entry
        r = rng(7)
        vals = np.array([abs(gates.sample_cue(2, r)[0, 0]) ** 2 for _ in range(100_000)])
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 0.5) < 3 * se

    def test_second_moment_n3(self):
        r = rng(8)
        vals = np.array([abs(gates.sample_cue(3, r)[0, 1]) ** 2 for _ in range(100_000)])
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 1 / 3) < 3 * se

    def test_eigenphase_uniformity(self):
        # plain QR without phase fixing is not Haar; this catches it
        r = rng(11)
        phases = []
        for _ in range(4000):
            w = np.linalg.eigvals(gates.sample_cue(2, r))
            phases.extend(np.angle(w))
        hist, _ = np.histogram(phases, bins=8, range=(-np.pi, np.pi))
        expected = len(phases) / 8
        chi2 = np.sum((hist - expected) ** 2 / expected)
        assert chi2 < 40  # 7 dof; generous guard against gross bias


def window_charge_op(species, width):
    contents = gates.window_contents(species, width)
    return np.diag(contents.sum(axis=1).astype(float))


class TestU1Gate:
    def test_block_dimensions_spin_half(self):
        g = gates.sample_u1_gate(SPIN_HALF, rng(2))
        assert [len(idx) for idx, _ in g.blocks] == [1, 2, 1]

    def test_block_dimensions_spin_one(self):
        g = gates.sample_u1_gate(SPIN_ONE, rng(3))
        assert [len(idx) for idx, _ in g.blocks] == [1, 2, 3, 2, 1]

    def test_polarized_state_gets_phase(self):
        g = gates.sample_u1_gate(SPIN_HALF, rng(4))
        u = g.dense()
        e = np.zeros(4)
        e[0] = 1.0  # |+1,+1>
        out = u @ e
        assert abs(abs(out[0]) - 1) < 1e-12
        assert np.abs(out[1:]).max() < 1e-15

    @pytest.mark.parametrize("species", [SPIN_HALF, SPIN_ONE])
    def test_commutes_with_charge(self, species):
        g = gates.sample_u1_gate(species, rng(5))
        u = g.dense()
        q = window_charge_op(species, 2)
        assert np.abs(u @ q - q @ u).max() < 1e-12

    def test_unitarity_defect(self):
        g = gates.sample_u1_gate(SPIN_ONE, rng(6))
        assert g.max_unitarity_defect() < 1e-12

    def test_block_second_moments(self):
        # within the 2-dim spin-half block, E|V_00|^2 = 1/2
        r = rng(9)
        vals = np.array(
            [abs(gates.sample_u1_gate(SPIN_HALF, r).blocks[1][1][0, 0]) ** 2
             for _ in range(50_000)]
        )
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 0.5) < 4 * se


class TestDipoleGate:
    def test_block_census(self):
        sizes = sorted(len(contents) for _, contents in gates.dipole_window_blocks())
        assert sizes == [1] * 14 + [2]

    def test_resonant_pair_contents(self):
        blocks = dict(gates.dipole_window_blocks())
        contents = gates.window_contents(SPIN_HALF, 4)
        two_dim = [idx for idx in blocks.values() if len(idx) == 2][0]
        states = {tuple(contents[i]) for i in two_dim}
        assert states == {(1, -1, -1, 1), (-1, 1, 1, -1)}

    def test_gate_maps_resonant_state_into_resonant_span(self):
        g = gates.sample_dipole_gate(rng(10))
        u = g.dense()
        contents = gates.window_contents(SPIN_HALF, 4)
        i = int(np.flatnonzero((contents == (1, -1, -1, 1)).all(axis=1))[0])
        j = int(np.flatnonzero((contents == (-1, 1, 1, -1)).all(axis=1))[0])
        e = np.zeros(16)
        e[i] = 1.0
        out = u @ e
        support = set(np.flatnonzero(np.abs(out) > 1e-14).tolist())
        assert support <= {i, j}

    def test_diagonal_on_non_resonant(self):
        g = gates.sample_dipole_gate(rng(11))
        u = g.dense()
        contents = gates.window_contents(SPIN_HALF, 4)
        k = int(np.flatnonzero((contents == (1, 1, -1, -1)).all(axis=1))[0])
        e = np.zeros(16)
        e[k] = 1.0
        out = u @ e
        assert abs(abs(out[k]) - 1) < 1e-12

    def test_commutes_with_charge_and_relative_dipole(self):
        g = gates.sample_dipole_gate(rng(12))
        u = g.dense()
        contents = gates.window_contents(SPIN_HALF, 4)
        q = np.diag(contents.sum(axis=1).astype(float))
        p = np.diag((contents * np.arange(1, 5)).sum(axis=1).astype(float))
        assert np.abs(u @ q - q @ u).max() < 1e-12
        assert np.abs(u @ p - p @ u).max() < 1e-12

    def test_offset_invariance_of_census(self):
        # relative-dipole classification is offset independent: classes of
        # charge c shift by s*c under an offset s, a constant per class
        contents = gates.window_contents(SPIN_HALF, 4)
        charge = contents.sum(axis=1)
        base = (contents * np.arange(1, 5)).sum(axis=1)
        for s in (1, 2, 3):
            shifted = (contents * np.arange(1 + s, 5 + s)).sum(axis=1)
            assert np.array_equal(shifted, base + s * charge)
