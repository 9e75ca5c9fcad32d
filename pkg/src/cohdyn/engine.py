"""Batched circuit ensemble driver.

Evolves R circuit realizations side by side in split-complex (D, R)
arrays.  Gates are freshly sampled per (realization, time, window) from
per-realization counter-based streams, then brought to a gauge where the
first populated one-dimensional block is the identity: dropping that
global phase never changes any observable and saves one row pass per
window.  Observables are recorded after every time unit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, observables
from .circuit import (
    GatePlan,
    PlanCache,
    gate_sampler,
    initial_state,
    layer_windows,
    layers_per_time_unit,
    model_basis,
    realization_rng,
)
from .errors import IntegrityError
from .trace import EnsembleTrace

NORM_DRIFT_LIMIT = 1e-8


@dataclass(eq=False)
class _CompiledWindow:
    plan: GatePlan
    gauge_block: int  # index of the skipped reference block, -1 for none
    kinds: tuple      # per block: ("skip"|"phase"|"pair"|"block3", arrays)


def _compile_window(plan: GatePlan) -> _CompiledWindow:
    gauge = -1
    for b, orb in enumerate(plan.orbit_arrays):
        if orb.shape[1] == 1 and orb.shape[0] > 0:
            gauge = b
            break
    kinds = []
    for b, orb in enumerate(plan.orbit_arrays):
        k = orb.shape[1]
        if orb.shape[0] == 0 or b == gauge:
            kinds.append(("skip", None))
        elif k == 1:
            kinds.append(("phase", (np.ascontiguousarray(orb[:, 0]),)))
        elif k == 2:
            kinds.append(
                ("pair", (np.ascontiguousarray(orb[:, 0]), np.ascontiguousarray(orb[:, 1])))
            )
        elif k == 3:
            kinds.append(
                (
                    "block3",
                    tuple(np.ascontiguousarray(orb[:, j]) for j in range(3)),
                )
            )
        else:
            raise IntegrityError(f"unsupported block size {k}")
    return _CompiledWindow(plan=plan, gauge_block=gauge, kinds=tuple(kinds))


def _apply_window(pre, pim, cw: _CompiledWindow, lane_gates):
    """Apply per-lane sampled gates at one window to the whole batch."""
    R = pre.shape[1]
    n_blocks = len(cw.kinds)
    if cw.gauge_block >= 0:
        gauge = np.array(
            [np.conj(g.blocks[cw.gauge_block][1][0, 0]) for g in lane_gates]
        )
    else:
        gauge = np.ones(R, dtype=complex)
    for b in range(n_blocks):
        kind, arrays = cw.kinds[b]
        if kind == "skip":
            continue
        if kind == "phase":
            u = np.array([g.blocks[b][1][0, 0] for g in lane_gates]) * gauge
            c = np.empty((2, R))
            c[0], c[1] = u.real, u.imag
            kernels.apply_phases(pre, pim, arrays[0], c)
        elif kind == "pair":
            u = np.stack([g.blocks[b][1] for g in lane_gates]) * gauge[:, None, None]
            c = np.empty((8, R))
            flat = u.reshape(R, 4)
            for j in range(4):
                c[2 * j], c[2 * j + 1] = flat[:, j].real, flat[:, j].imag
            kernels.apply_pairs(pre, pim, arrays[0], arrays[1], c)
        else:
            u = np.stack([g.blocks[b][1] for g in lane_gates]) * gauge[:, None, None]
            c = np.empty((18, R))
            flat = u.reshape(R, 9)
            for j in range(9):
                c[2 * j], c[2 * j + 1] = flat[:, j].real, flat[:, j].imag
            kernels.apply_block3(pre, pim, arrays[0], arrays[1], arrays[2], c)


class PreparedCircuit:
    """Reusable compiled state of one (model, L): basis and window tables.

    Building gate plans for a large sector takes seconds; an ensemble
    driver prepares once and reuses across all batches.
    """

    def __init__(self, model: str, L: int, basis=None):
        self.model = model
        self.L = L
        self.basis = basis if basis is not None else model_basis(model, L)
        self._plans = PlanCache(self.basis, model)
        self._compiled: dict[tuple[int, int], _CompiledWindow] = {}

    def window(self, first: int, width: int) -> _CompiledWindow:
        key = (first, width)
        if key not in self._compiled:
            self._compiled[key] = _compile_window(self._plans.plan(first, width))
        return self._compiled[key]


def run_lanes(
    model: str,
    L: int,
    t_max: int,
    master_seed: int,
    lanes,
    L_A_list=(),
    subsystem_times=None,
    basis=None,
    norm_check_stride: int = 4,
    progress=None,
    prepared: PreparedCircuit | None = None,
):
    """Evolve the given realization indices as one batch.

    Returns (times, sub_times, values) where values maps raw observable
    keys to per-lane arrays: values["pcol"] has shape (t_max + 1, R) and
    values[("P_A", L_A)] / values[("Pdiag_A", L_A)] have shape
    (len(sub_times), R).
    """
    lanes = list(lanes)
    R = len(lanes)
    if prepared is None:
        prepared = PreparedCircuit(model, L, basis)
    basis = prepared.basis
    sub = layers_per_time_unit(model)
    window_table = prepared.window

    psi0 = initial_state(model, basis).amps
    D = basis.dim
    pre = np.zeros((D, R))
    pim = np.zeros((D, R))
    pre[:] = psi0.real[:, None]
    pim[:] = psi0.imag[:, None]

    rngs = [realization_rng(master_seed, lane) for lane in lanes]
    sampler = gate_sampler(model)

    if subsystem_times is None:
        subsystem_times = np.arange(t_max + 1)
    sub_times = np.asarray(sorted(set(int(t) for t in subsystem_times if t <= t_max)))
    sub_pos = {int(t): i for i, t in enumerate(sub_times)}

    values = {"pcol": np.empty((t_max + 1, R))}
    for L_A in L_A_list:
        values[("P_A", L_A)] = np.empty((len(sub_times), R))
        values[("Pdiag_A", L_A)] = np.empty((len(sub_times), R))

    scratch = np.empty(R)

    def record(t):
        kernels.collision_probs(pre, pim, scratch)
        values["pcol"][t] = scratch
        if t in sub_pos and L_A_list:
            i = sub_pos[t]
            for L_A in L_A_list:
                pa, pd = observables.purities_soa(basis, L_A, pre, pim)
                values[("P_A", L_A)][i] = pa
                values[("Pdiag_A", L_A)][i] = pd

    record(0)
    for t in range(1, t_max + 1):
        for s in range(sub):
            layer_index = (t - 1) * sub + s + 1
            for f, w in layer_windows(model, L, layer_index):
                cw = window_table(f, w)
                lane_gates = [sampler(rng) for rng in rngs]
                _apply_window(pre, pim, cw, lane_gates)
        if norm_check_stride and t % norm_check_stride == 0:
            kernels.sq_norms(pre, pim, scratch)
            drift = float(np.max(np.abs(scratch - 1.0)))
            if drift > NORM_DRIFT_LIMIT:
                raise IntegrityError(f"batch norm drifted by {drift:.3e} at t={t}")
        record(t)
        if progress is not None and t % progress == 0:
            print(f"[engine] {model} L={L} lanes {lanes[0]}..{lanes[-1]} t={t}/{t_max}", flush=True)

    return np.arange(t_max + 1), sub_times, values


def fold_lanes_into_trace(
    trace: EnsembleTrace, times, sub_times, values, L_A_list
) -> EnsembleTrace:
    """Accumulate per-lane raw values into Welford statistics, lane order."""
    R = values["pcol"].shape[1]
    for r in range(R):
        trace.add_lane("pcol", trace.L, times, values["pcol"][:, r])
        for L_A in L_A_list:
            trace.add_lane("P_A", L_A, sub_times, values[("P_A", L_A)][:, r])
            trace.add_lane("Pdiag_A", L_A, sub_times, values[("Pdiag_A", L_A)][:, r])
    return trace


def run_circuit_shard(
    model: str,
    L: int,
    t_max: int,
    master_seed: int,
    lane_start: int,
    lane_count: int,
    L_A_list=(),
    subsystem_times=None,
    batch_size: int = 16,
    progress=None,
) -> EnsembleTrace:
    """One restartable shard of an ensemble: lanes [start, start + count)."""
    trace = EnsembleTrace(model=model, L=L, seed=master_seed)
    prepared = PreparedCircuit(model, L)
    for b0 in range(lane_start, lane_start + lane_count, batch_size):
        lanes = range(b0, min(b0 + batch_size, lane_start + lane_count))
        times, sub_times, values = run_lanes(
            model,
            L,
            t_max,
            master_seed,
            lanes,
            L_A_list=L_A_list,
            subsystem_times=subsystem_times,
            progress=progress,
            prepared=prepared,
        )
        fold_lanes_into_trace(trace, times, sub_times, values, L_A_list)
    return trace
