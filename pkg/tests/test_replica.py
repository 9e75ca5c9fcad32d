import numpy as np
import pytest

from cohdyn import engine, gates, replica
from cohdyn.basis import SPIN_HALF, SPIN_ONE
from cohdyn.errors import ResourceLimitError


def embed_product(basis, i, j, q):
    """One-hot of a two-site replica product state in the raw 4-replica
    space with legs (ket1, bra1, ket2, bra2), each leg a two-site index."""
    def legs(state):
        if state.pairing in ("+", "d"):
            return (state.r, state.r, state.b, state.b)
        return (state.r, state.b, state.b, state.r)

    species = basis.species
    s_i, s_j = basis.states[i], basis.states[j]
    li, lj = legs(s_i), legs(s_j)
    dim_leg = q * q
    idx = 0
    for a, b in zip(li, lj):
        leg = species.rank_of(a) * q + species.rank_of(b)
        idx = idx * dim_leg + leg
    v = np.zeros(dim_leg**4)
    v[idx] = 1.0
    return v


def mc_averaged_column(basis, q, i, j, samples, seed):
    """Brute-force E[(U x U*)^{x2}] applied to one replica product state.

    The column of the 4-fold Kronecker product at a one-hot index is an
    outer product of single-leg columns, so each sample costs O(q^8).
    """
    species = basis.species

    def legs(state):
        if state.pairing in ("+", "d"):
            return (state.r, state.r, state.b, state.b)
        return (state.r, state.b, state.b, state.r)

    li, lj = legs(basis.states[i]), legs(basis.states[j])
    cols = [species.rank_of(a) * q + species.rank_of(b) for a, b in zip(li, lj)]
    rng = np.random.default_rng(seed)
    acc = np.zeros((q * q) ** 4)
    for _ in range(samples):
        u = gates.sample_u1_gate(species, rng).dense()
        pieces = [u[:, cols[0]], u.conj()[:, cols[1]], u[:, cols[2]], u.conj()[:, cols[3]]]
        col = np.einsum("a,b,c,d->abcd", *pieces).reshape(-1)
        acc += col.real  # imaginary parts average to zero
    return acc / samples


class TestTransferBuild:
    def test_matrix_sizes(self):
        assert replica.build_replica_transfer(SPIN_HALF).matrix.shape == (36, 36)
        assert replica.build_replica_transfer(SPIN_ONE).matrix.shape == (225, 225)

    def test_local_state_counts(self):
        assert replica.replica_basis(SPIN_HALF).dim == 6
        assert replica.replica_basis(SPIN_ONE).dim == 15
        assert len(replica.replica_basis(SPIN_HALF).diag_indices) == 2
        assert len(replica.replica_basis(SPIN_ONE).diag_indices) == 3

    def test_trace_boundary_is_left_fixed_point(self):
        for species in (SPIN_HALF, SPIN_ONE):
            tr = replica.build_replica_transfer(species)
            ident = tr.basis.boundary_vector("identity")
            two_site = np.kron(ident, ident)
            assert np.abs(two_site @ tr.matrix - two_site).max() < 1e-12

    def test_deterministic_rebuild(self):
        a = replica.build_replica_transfer(SPIN_HALF).matrix
        b = replica.build_replica_transfer(SPIN_HALF).matrix
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("q,pairs", [(2, [(0, 1), (2, 3), (1, 4)]),
                                         (3, [(0, 2), (4, 7)])])
    def test_matches_gate_average_oracle(self, q, pairs):
        species = SPIN_HALF if q == 2 else SPIN_ONE
        tr = replica.build_replica_transfer(species)
        basis = tr.basis
        n = basis.dim
        samples = 20_000 if q == 2 else 6_000
        for i, j in pairs:
            mc = mc_averaged_column(basis, q, i, j, samples, seed=100 + i + 10 * j)
            exact_coeffs = tr.matrix[:, i * n + j]
            exact = np.zeros_like(mc)
            for k in range(n):
                for l in range(n):
                    c = exact_coeffs[k * n + l]
                    if c:
                        exact += c * embed_product(basis, k, l, q)
            scale = max(1.0, np.abs(exact).max())
            tol = 5.0 / np.sqrt(samples)  # generous Monte Carlo band
            assert np.abs(mc - exact).max() / scale < tol


class TestEvolution:
    def test_t0_product_identities(self):
        _, pcol, pf, pd = replica.replica_evolve(SPIN_HALF, 6, 0, [1, 2, 3])
        assert pcol[0] == pytest.approx(1.0, abs=1e-12)
        for L_A in (1, 2, 3):
            assert pf[L_A][0] == pytest.approx(1.0, abs=1e-12)
            assert pd[L_A][0] == pytest.approx(1.0, abs=1e-12)

    def test_resource_limits(self):
        with pytest.raises(ResourceLimitError):
            replica.replica_evolve(SPIN_HALF, 12, 2, [1])
        with pytest.raises(ResourceLimitError):
            replica.replica_evolve(SPIN_ONE, 8, 2, [1])

    def test_converges_to_haar_closed_form(self):
        from cohdyn import haar

        _, pcol, pf, pd = replica.replica_evolve(SPIN_HALF, 6, 60, [3])
        rep = haar.saturation_report("u1-spin-half", 6, 3)
        assert pf[3][-1] == pytest.approx(float(rep.full_purity), rel=2e-3)
        assert pd[3][-1] == pytest.approx(float(rep.diag_purity), rel=2e-3)

    def test_monte_carlo_equivalence_small(self):
        # the module's primary oracle property at unit-test scale
        times, pcol, pf, pd = replica.replica_evolve(SPIN_HALF, 4, 10, [1, 2])
        tr = engine.run_circuit_shard("u1-spin-half", 4, 10, 99, 0, 8000,
                                      L_A_list=[1, 2], batch_size=64)
        for L_A in (1, 2):
            for obs, exact in (("P_A", pf[L_A]), ("Pdiag_A", pd[L_A])):
                e = tr.keys[(obs, L_A)]["p"]
                assert np.all(np.abs(e.mean - exact) <= 4 * e.stderr + 1e-12)
        e = tr.keys[("pcol", 4)]["p"]
        assert np.all(np.abs(e.mean - pcol) <= 4 * e.stderr + 1e-12)

    def test_spin_one_statistical_check(self):
        times, pcol, pf, pd = replica.replica_evolve(SPIN_ONE, 3, 6, [1])
        tr = engine.run_circuit_shard("u1-spin-one", 3, 6, 7, 0, 6000,
                                      L_A_list=[1], batch_size=64)
        for obs, exact in (("P_A", pf[1]), ("Pdiag_A", pd[1])):
            e = tr.keys[(obs, 1)]["p"]
            assert np.all(np.abs(e.mean - exact) <= 4 * e.stderr + 1e-12)

    def test_swap_convention_flag(self):
        _, _, pf_full, _ = replica.replica_evolve(SPIN_HALF, 4, 2, [2])
        _, _, pf_lit, _ = replica.replica_evolve(SPIN_HALF, 4, 2, [2],
                                                 swap_convention="offdiag")
        # the literal off-diagonal swap misses the diagonal pairing weight
        # and cannot reproduce the product-state identity at t = 0
        assert pf_full[2][0] == pytest.approx(1.0, abs=1e-12)
        assert pf_lit[2][0] == pytest.approx(0.0, abs=1e-12)
