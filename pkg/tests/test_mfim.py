import math

import numpy as np
import pytest
import scipy.linalg as sla

from cohdyn import mfim, observables
from cohdyn.basis import full_basis
from cohdyn.circuit import SectorState, realization_rng
from cohdyn.config import ExperimentConfig
from cohdyn.errors import IntegrityError


@pytest.fixture(scope="module")
def spec6():
    return mfim.MfimSpec(L=6)


@pytest.fixture(scope="module")
def bounds6(spec6):
    return mfim.estimate_bounds(spec6)


def random_vec(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


class TestMatvec:
    def test_against_dense(self, spec6):
        op = mfim.MfimOperator(spec6)
        h = op.dense()
        v = random_vec(64, 0)
        assert np.abs(op.matvec(v) - h @ v).max() < 1e-13

    def test_x_term_only_flips_bits(self):
        spec = mfim.MfimSpec(L=3, h=0.0, J=0.0, dhz=0.0)
        op = mfim.MfimOperator(spec)
        e0 = np.zeros(8, complex)
        e0[0b000] = 1.0
        out = op.matvec(e0)
        hits = set(np.flatnonzero(np.abs(out) > 0).tolist())
        assert hits == {0b001, 0b010, 0b100}
        assert np.allclose(out[sorted(hits)], spec.b)

    def test_hermiticity(self, spec6):
        op = mfim.MfimOperator(spec6)
        u, v = random_vec(64, 1), random_vec(64, 2)
        lhs = np.vdot(u, op.matvec(v))
        rhs = np.conj(np.vdot(v, op.matvec(u)))
        assert abs(lhs - rhs) < 1e-12


class TestBounds:
    def test_brackets_dense_spectrum(self, spec6, bounds6):
        w = np.linalg.eigvalsh(mfim.MfimOperator(spec6).dense())
        assert bounds6.e_min <= w[0] + 1e-9
        assert bounds6.e_max >= w[-1] - 1e-9

    def test_single_site_fields(self):
        spec = mfim.MfimSpec(L=1, h=0.0, J=0.0, dhz=0.0)
        b = mfim.estimate_bounds(spec)
        assert b.e_max == pytest.approx(spec.b)
        assert b.e_min == pytest.approx(-spec.b)

    def test_margin_inflates_halfwidth(self, spec6, bounds6):
        w = np.linalg.eigvalsh(mfim.MfimOperator(spec6).dense())
        assert bounds6.halfwidth >= (w[-1] - w[0]) / 2


class TestChebyshev:
    def test_matches_dense_exponential(self, spec6, bounds6):
        op = mfim.MfimOperator(spec6)
        u = sla.expm(-1j * op.dense() * 0.5)
        psi = random_vec(64, 3)
        out = mfim.chebyshev_step(op, bounds6, psi, 0.5)
        assert np.abs(out - u @ psi).max() < 1e-9

    def test_zero_step_is_identity(self, spec6, bounds6):
        op = mfim.MfimOperator(spec6)
        psi = random_vec(64, 4)
        assert np.array_equal(mfim.chebyshev_step(op, bounds6, psi, 0.0), psi)

    def test_composition(self, spec6, bounds6):
        op = mfim.MfimOperator(spec6)
        psi = random_vec(64, 5)
        two = mfim.chebyshev_step(op, bounds6, mfim.chebyshev_step(op, bounds6, psi, 0.7), 0.7)
        one = mfim.chebyshev_step(op, bounds6, psi, 1.4)
        assert np.abs(two - one).max() < 1e-9

    def test_order_cap(self):
        with pytest.raises(IntegrityError):
            mfim.chebyshev_coefficients(1e7)

    def test_trajectory_matches_dense_reference(self):
        # pointwise S_d / S_R / C_d agreement against exact eigensolution
        spec = mfim.MfimSpec(L=8)
        op = mfim.MfimOperator(spec)
        bounds = mfim.estimate_bounds(spec)
        basis = full_basis(8)
        rng = realization_rng(17, 0)
        code = mfim.sample_midspectrum_state(spec, rng, bounds)
        psi0 = np.zeros(256, complex)
        psi0[code] = 1.0
        times = np.arange(0.0, 10.5, 0.5)
        refs = mfim.dense_reference_evolution(spec, psi0, times)
        psi = psi0.copy()
        for i, t in enumerate(times):
            if i:
                psi = mfim.chebyshev_step(op, bounds, psi, 0.5)
            for L_A in (2, 4):
                v_c = observables.bipartition_view(SectorState(basis=basis, amps=psi), L_A)
                v_r = observables.bipartition_view(SectorState(basis=basis, amps=refs[i]), L_A)
                assert abs(observables.diagonal_purity(v_c) - observables.diagonal_purity(v_r)) < 1e-8
                assert abs(observables.subsystem_purity(v_c) - observables.subsystem_purity(v_r)) < 1e-8
                assert abs(observables.coherence(v_c) - observables.coherence(v_r)) < 1e-8


class TestMidspectrumSampling:
    def test_acceptance_inequality(self, spec6, bounds6):
        rng = realization_rng(23, 0)
        width = bounds6.e_max - bounds6.e_min
        mid = 0.5 * (bounds6.e_max + bounds6.e_min)
        for _ in range(20):
            code = mfim.sample_midspectrum_state(spec6, rng, bounds6)
            assert abs(mfim.product_state_energy(spec6, code) - mid) <= 0.05 * width

    def test_product_energy_formula_vs_dense(self, spec6):
        op = mfim.MfimOperator(spec6)
        h = op.dense()
        rng = np.random.default_rng(5)
        for code in rng.integers(0, 64, size=8):
            e = np.zeros(64)
            e[code] = 1.0
            assert mfim.product_state_energy(spec6, int(code)) == pytest.approx(
                float(np.real(e @ h @ e)), abs=1e-12
            )

    def test_all_up_energy_hand_value(self):
        spec = mfim.MfimSpec(L=4)
        # all spins up: h*L + J*(L-1) + dhz*(1 - 1)
        expect = spec.h * 4 + spec.J * 3
        assert mfim.product_state_energy(spec, 0) == pytest.approx(expect)


class TestEnsembleDriver:
    def test_energy_and_norm_guards(self):
        cfg = ExperimentConfig.from_dict({
            "model": "mfim", "L": 6, "L_A": [2, 3], "t_max": 20,
            "realizations": 4, "seed": 3, "convention": "annealed",
            "out": "/tmp/mfim_guard", "grid": {"dt": 0.5, "t_dense": 20.0},
        })
        tr = mfim.run_mfim_shard(cfg, 0, 4)
        e = tr.keys[("pcol", 6)]["p"]
        assert e.n == 4
        assert e.mean[0] == pytest.approx(1.0)  # product states at t=0

    def test_grid_construction(self):
        times = mfim.mfim_time_grid(5000.0, {})
        assert times[0] == 0.0 and times[-1] == 5000.0
        assert np.any(times == 200.0) and np.any(times == 1000.0)
        dense = times[times <= 200.0]
        assert np.allclose(np.diff(dense), 0.5)
        plateau = times[times >= 1000.0]
        assert np.allclose(np.diff(plateau), 50.0)
