"""Mixed-field Ising chain: matrix-free Chebyshev time evolution.

The Hamiltonian H = b sum X_i + sum h_i Z_i + J sum Z_i Z_{i+1}
+ dhz (Z_1 - Z_L) acts on the full 2^L space through on-the-fly bitwise
term evaluation; site i occupies bit (L - i), so the leftmost site is the
most significant bit and subsystem cuts are plain reshapes.

The propagator exp(-iH dt) is expanded in Chebyshev polynomials of the
spectrum-rescaled Hamiltonian with Bessel-function coefficients; the
expansion order is chosen so the truncated coefficient tail is below
1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from scipy.special import jv

from .basis import full_basis
from .circuit import SectorState, realization_rng
from .errors import IntegrityError
from .trace import EnsembleTrace

SQRT5 = math.sqrt(5.0)
COEFF_TAIL = 1e-12
ORDER_CAP = 200_000
MAX_REJECTIONS = 10**6


@dataclass(frozen=True)
class MfimSpec:
    L: int
    b: float = (5 + SQRT5) / 8
    h: float = (SQRT5 + 1) / 4
    J: float = 1.0
    dhz: float = 0.25


@dataclass(frozen=True)
class SpectralBounds:
    e_min: float
    e_max: float
    margin: float = 0.01

    @property
    def center(self) -> float:
        return 0.5 * (self.e_max + self.e_min)

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.e_max - self.e_min) * (1.0 + self.margin)


@njit(cache=True)
def _diag_energies(L, h, J, dhz, out):
    N = out.size
    for n in range(N):
        e = 0.0
        prev = 0.0
        for i in range(1, L + 1):
            m = 1.0 - 2.0 * ((n >> (L - i)) & 1)
            e += h * m
            if i > 1:
                e += J * prev * m
            if i == 1:
                e += dhz * m
            if i == L:
                e -= dhz * m
            prev = m
        out[n] = e


@njit(cache=True, fastmath=True)
def _matvec_scaled(ediag, shift, inv_a, b, L, psi, out):
    """out = [(H - shift) / a] psi for batched (N, R) complex states."""
    N, R = psi.shape
    ba = b * inv_a
    for n in range(N):
        d = (ediag[n] - shift) * inv_a
        for r in range(R):
            out[n, r] = d * psi[n, r]
    for i in range(L):
        bit = 1 << i
        for n in range(N):
            partner = n ^ bit
            for r in range(R):
                out[n, r] += ba * psi[partner, r]


def diagonal_energies(spec: MfimSpec) -> np.ndarray:
    out = np.empty(2**spec.L)
    _diag_energies(spec.L, spec.h, spec.J, spec.dhz, out)
    return out


class MfimOperator:
    """Matrix-free H with cached diagonal; applies to (N, R) batches."""

    def __init__(self, spec: MfimSpec):
        self.spec = spec
        self.ediag = diagonal_energies(spec)
        self.N = 2**spec.L

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        single = psi.ndim == 1
        if single:
            psi = psi[:, None]
        out = np.empty_like(psi, dtype=complex)
        _matvec_scaled(
            self.ediag, 0.0, 1.0, self.spec.b, self.spec.L,
            psi.astype(complex, copy=False), out,
        )
        return out[:, 0] if single else out

    def apply_rescaled(self, psi, out, bounds: SpectralBounds):
        _matvec_scaled(
            self.ediag,
            bounds.center,
            1.0 / bounds.halfwidth,
            self.spec.b,
            self.spec.L,
            psi,
            out,
        )

    def dense(self) -> np.ndarray:
        if self.spec.L > 12:
            raise IntegrityError("dense Hamiltonian limited to L <= 12")
        h = np.diag(self.ediag.astype(complex))
        for n in range(self.N):
            for i in range(self.spec.L):
                h[n ^ (1 << i), n] += self.spec.b
        return h


def mfim_matvec(spec: MfimSpec, psi: np.ndarray) -> np.ndarray:
    """H |psi> on the full 2^L space, no matrix stored."""
    if spec.L > 24:
        raise IntegrityError("state-vector MFIM limited to L <= 24")
    return MfimOperator(spec).matvec(psi)


def estimate_bounds(spec: MfimSpec, margin: float = 0.01) -> SpectralBounds:
    """Extremal eigenvalues by an iterative solver, inflated by ``margin``."""
    op = MfimOperator(spec)
    if spec.L == 1:
        # dhz couples to (Z_1 - Z_L) = 0 for a single site
        w = np.linalg.eigvalsh(np.array([[spec.h, spec.b], [spec.b, -spec.h]]))
        return SpectralBounds(e_min=float(w[0]), e_max=float(w[-1]), margin=margin)
    lin = LinearOperator(
        (op.N, op.N), matvec=lambda v: op.matvec(v.astype(complex)), dtype=complex
    )
    try:
        e_max = float(eigsh(lin, k=1, which="LA", return_eigenvectors=False)[0])
        e_min = float(eigsh(lin, k=1, which="SA", return_eigenvectors=False)[0])
    except ArpackNoConvergence as exc:
        raise IntegrityError(f"extremal eigenvalue iteration failed: {exc}") from exc
    return SpectralBounds(e_min=e_min, e_max=e_max, margin=margin)


def chebyshev_coefficients(x: float, tail: float = COEFF_TAIL) -> np.ndarray:
    """Coefficients (2 - delta_k0) (-i)^k J_k(x) with tail below ``tail``."""
    guess = int(x + 40 + 15 * x ** (1 / 3)) if x > 0 else 40
    while guess <= ORDER_CAP:
        k = np.arange(guess + 26)
        bess = jv(k, x)
        tails = np.cumsum(np.abs(bess[::-1]))[::-1]
        ok = np.flatnonzero(tails <= 0.5 * tail)
        if ok.size and ok[0] + 1 < guess:
            order = int(ok[0]) + 1
            c = bess[:order] * (2.0 * (-1j) ** np.arange(order))
            c[0] /= 2.0
            return c
        guess *= 2
    raise IntegrityError(
        "Chebyshev order cap exceeded; use a smaller time step"
    )


def chebyshev_step(
    op: MfimOperator, bounds: SpectralBounds, psi: np.ndarray, dt: float,
    _buffers=None,
) -> np.ndarray:
    """exp(-i H dt) applied to an (N,) or (N, R) complex state batch."""
    if dt == 0:
        return psi.copy()
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    x = bounds.halfwidth * dt
    coeffs = chebyshev_coefficients(x)
    phase = np.exp(-1j * bounds.center * dt)
    if _buffers is None:
        _buffers = [np.empty_like(psi) for _ in range(3)]
    phi0 = psi.copy()
    phi1, tmp = _buffers[0], _buffers[1]
    op.apply_rescaled(phi0, phi1, bounds)
    out = coeffs[0] * phi0 + coeffs[1] * phi1
    for k in range(2, len(coeffs)):
        op.apply_rescaled(phi1, tmp, bounds)
        np.multiply(tmp, 2.0, out=tmp)
        np.subtract(tmp, phi0, out=tmp)
        phi0, phi1, tmp = phi1, tmp, phi0
        out += coeffs[k] * phi1
    out *= phase
    return out[:, 0] if single else out


def product_state_energy(spec: MfimSpec, code: int) -> float:
    """<H> of a z-basis product state (the X term averages to zero)."""
    m = np.array([1.0 - 2.0 * ((code >> (spec.L - i)) & 1) for i in range(1, spec.L + 1)])
    e = spec.h * m.sum() + spec.J * (m[:-1] * m[1:]).sum()
    return float(e + spec.dhz * (m[0] - m[-1]))


def sample_midspectrum_state(
    spec: MfimSpec, rng, bounds: SpectralBounds, threshold: float = 0.05
) -> int:
    """Random z-product state with energy close to the spectral center.

    Rejection sampling on |<H> - E_mid| / (E_max - E_min) <= threshold.
    Returns the basis code of the accepted configuration.
    """
    width = bounds.e_max - bounds.e_min
    mid = 0.5 * (bounds.e_max + bounds.e_min)
    for _ in range(MAX_REJECTIONS):
        code = int(rng.integers(0, 2**spec.L))
        if abs(product_state_energy(spec, code) - mid) <= threshold * width:
            return code
    raise IntegrityError(
        "mid-spectrum rejection sampling exceeded the attempt budget"
    )


# ---------------------------------------------------------------------------
# ensemble driver
# ---------------------------------------------------------------------------

def mfim_time_grid(t_max: float, grid: dict):
    """(sample_times, step_pairs) honoring the dense/coarse/plateau grid.

    Returns the sorted observable sample times and the list of
    (dt, n_steps, sample_flags) segments used to reach them.
    """
    dt = float(grid.get("dt", 0.5))
    t_dense = min(float(grid.get("t_dense", 200.0)), t_max)
    coarse_dt = float(grid.get("coarse_dt", 2.5))
    p0, p1 = grid.get("plateau_window", (1000.0, 5000.0))
    stride = float(grid.get("plateau_stride", 50.0))
    times = list(np.round(np.arange(0.0, t_dense + 1e-9, dt), 9))
    if t_max > t_dense:
        t = t_dense
        while t < min(p0, t_max) - 1e-9:
            t = round(min(t + coarse_dt, min(p0, t_max)), 9)
            times.append(t)
        while t < min(p1, t_max) - 1e-9:
            t = round(min(t + stride, p1, t_max), 9)
            times.append(t)
    return np.array(sorted(set(times)))


def run_mfim_shard(cfg, lane_start: int, lane_count: int) -> EnsembleTrace:
    """Evolve ``lane_count`` mid-spectrum initial states side by side."""
    spec = MfimSpec(L=cfg.L)
    op = MfimOperator(spec)
    bounds = estimate_bounds(spec)
    basis = full_basis(cfg.L)
    times = mfim_time_grid(cfg.t_max, cfg.grid)
    lanes = range(lane_start, lane_start + lane_count)

    R = len(lanes)
    psi = np.zeros((op.N, R), dtype=complex)
    for j, lane in enumerate(lanes):
        rng = realization_rng(cfg.seed, lane)
        psi[sample_midspectrum_state(spec, rng, bounds), j] = 1.0

    from . import observables

    L_A_list = tuple(cfg.L_A)
    vals = {"pcol": np.empty((len(times), R))}
    for L_A in L_A_list:
        vals[("P_A", L_A)] = np.empty((len(times), R))
        vals[("Pdiag_A", L_A)] = np.empty((len(times), R))
    energy0 = None
    buffers = [np.empty_like(psi) for _ in range(3)]

    for i, t in enumerate(times):
        if i:
            dt = times[i] - times[i - 1]
            psi = chebyshev_step(op, bounds, psi, dt, _buffers=buffers)
            norms = np.linalg.norm(psi, axis=0)
            if np.max(np.abs(norms - 1.0)) > 1e-8:
                raise IntegrityError("norm drift in Chebyshev evolution")
        p = np.abs(psi) ** 2
        vals["pcol"][i] = np.sum(p * p, axis=0)
        for L_A in L_A_list:
            pa, pd = observables.purities_of_states(basis, L_A, psi.T)
            vals[("P_A", L_A)][i] = pa
            vals[("Pdiag_A", L_A)][i] = pd
        e = np.real(np.sum(np.conj(psi) * op.matvec(psi), axis=0))
        if energy0 is None:
            energy0 = e
        elif np.max(np.abs(e - energy0)) > 1e-8 * max(1.0, float(np.max(np.abs(energy0)))):
            raise IntegrityError("energy drift in Chebyshev evolution")

    trace = EnsembleTrace(model=cfg.model, L=cfg.L, seed=cfg.seed)
    for r in range(R):
        trace.add_lane("pcol", cfg.L, times, vals["pcol"][:, r])
        for L_A in L_A_list:
            trace.add_lane("P_A", L_A, times, vals[("P_A", L_A)][:, r])
            trace.add_lane("Pdiag_A", L_A, times, vals[("Pdiag_A", L_A)][:, r])
    return trace


def plateau_saturations(cfg, trace: EnsembleTrace) -> dict:
    """Time-window-averaged saturation values (the Hamiltonian convention).

    Uses the plateau window of the grid; means are taken over realizations
    and plateau sample times under the configured convention.
    """
    p0, p1 = cfg.grid.get("plateau_window", (1000.0, 5000.0))
    sats = {}
    for (obs, L_A), entry in trace.keys.items():
        sel = (entry["times"] >= p0) & (entry["times"] <= p1)
        if not np.any(sel):
            continue
        if cfg.convention == "annealed":
            s = -math.log2(float(np.mean(entry["p"].mean[sel])))
        else:
            s = float(np.mean(entry["lg"].mean[sel]))
        if obs == "pcol":
            sats.setdefault(cfg.L, [None, None])[0] = s
        elif obs == "Pdiag_A":
            sats.setdefault(L_A, [None, None])[0] = s
        elif obs == "P_A":
            sats.setdefault(L_A, [None, None])[1] = s
    return {k: tuple(v) for k, v in sats.items()}


def dense_reference_evolution(spec: MfimSpec, psi0: np.ndarray, times) -> list:
    """Exact eigendecomposition propagation for small-L validation."""
    op = MfimOperator(spec)
    h = op.dense()
    w, v = np.linalg.eigh(h)
    coef = v.conj().T @ psi0
    return [v @ (np.exp(-1j * w * t) * coef) for t in times]


def midspectrum_state_vector(spec: MfimSpec, code: int) -> SectorState:
    basis = full_basis(spec.L)
    amps = np.zeros(2**spec.L, dtype=complex)
    amps[code] = 1.0
    return SectorState(basis=basis, amps=amps)
