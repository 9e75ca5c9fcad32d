"""Config-driven ensemble orchestration with restartable shards.

Realizations are split into fixed-size shards (independent of the worker
count), each computed in a child process and persisted as a lossless .npz
next to the final CSV.  Re-running a config skips completed shards, and
the final statistics are merged in shard order, so outputs are
byte-identical for identical (config, seed) regardless of parallelism or
interruptions.  Child processes pin their BLAS pools to one thread; the
parent only merges.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, haar
from .config import ExperimentConfig
from .errors import ConfigError
from .trace import EnsembleTrace, format_csv

SHARD_SIZE = 256
DEFAULT_BATCH = 16

_BLAS_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _pin_child_blas():
    for var in _BLAS_VARS:
        os.environ.setdefault(var, "1")


def subsystem_times(cfg: ExperimentConfig) -> np.ndarray:
    grid = cfg.grid or {}
    if "subsystem_times" in grid:
        ts = sorted(set(int(t) for t in grid["subsystem_times"]))
    else:
        dense = int(grid.get("dense_until", cfg.t_max))
        stride = int(grid.get("subsystem_stride", 1))
        ts = sorted(
            set(range(0, min(dense, cfg.t_max) + 1))
            | set(range(0, cfg.t_max + 1, stride))
            | {cfg.t_max}
        )
    return np.array([t for t in ts if 0 <= t <= cfg.t_max], dtype=int)


def _circuit_shard_job(cfg_dict: dict, lane_start: int, lane_count: int, path: str):
    _pin_child_blas()
    from . import engine  # import inside the child after BLAS pinning

    cfg = ExperimentConfig.from_dict(cfg_dict)
    trace = engine.run_circuit_shard(
        cfg.model,
        cfg.L,
        cfg.t_max,
        cfg.seed,
        lane_start,
        lane_count,
        L_A_list=tuple(cfg.L_A),
        subsystem_times=subsystem_times(cfg),
        batch_size=int(cfg.grid.get("batch", DEFAULT_BATCH)),
        progress=int(cfg.grid.get("progress", 0)) or None,
    )
    trace.save_npz(path)
    return path


def _mfim_shard_job(cfg_dict: dict, lane_start: int, lane_count: int, path: str):
    _pin_child_blas()
    from . import mfim

    cfg = ExperimentConfig.from_dict(cfg_dict)
    trace = mfim.run_mfim_shard(cfg, lane_start, lane_count)
    trace.save_npz(path)
    return path


def shard_layout(realizations: int, shard_size: int = SHARD_SIZE):
    starts = list(range(0, realizations, shard_size))
    return [(s, min(shard_size, realizations - s)) for s in starts]


def circuit_saturations(cfg: ExperimentConfig) -> dict:
    """Closed-form (sd_inf, sr_inf) per configured L_A, plus the global."""
    sats = {cfg.L: (haar.global_sd_saturation(cfg.model, cfg.L), None)}
    for L_A in cfg.L_A:
        rep = haar.saturation_report(cfg.model, cfg.L, L_A)
        sats[L_A] = (rep.sd, rep.sr)
    return sats


def run(cfg: ExperimentConfig, workers: int | None = None) -> Path:
    """Execute a config; returns the output directory."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.model in ("u1-spin-half", "u1-spin-one", "dipole-fragment"):
        trace = _run_sharded(cfg, _circuit_shard_job, workers)
        saturations = circuit_saturations(cfg)
    elif cfg.model == "mfim":
        from . import mfim

        trace = _run_sharded(cfg, _mfim_shard_job, workers)
        saturations = mfim.plateau_saturations(cfg, trace)
    elif cfg.model == "replica-oracle":
        from . import replica

        trace_csv, saturations = replica.run_replica_config(cfg)
        _write_outputs(cfg, out, trace_csv, saturations)
        return out
    elif cfg.model == "ssep":
        from . import ssep

        report = ssep.run_ssep_config(cfg)
        (out / "ssep.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        _write_meta(cfg, out, extra={"kind": "ssep"})
        return out
    else:
        raise ConfigError(f"cannot run model {cfg.model!r}")

    csv_text = format_csv(trace.csv_rows(cfg.convention, saturations))
    _write_outputs(cfg, out, csv_text, saturations)
    return out


def _run_sharded(cfg: ExperimentConfig, job, workers: int | None) -> EnsembleTrace:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    layout = shard_layout(cfg.realizations, int(cfg.grid.get("shard", SHARD_SIZE)))
    paths = [out / f"shard_{s:06d}_{c:04d}.npz" for s, c in layout]
    todo = [
        (s, c, str(p)) for (s, c), p in zip(layout, paths) if not p.exists()
    ]
    if todo:
        if workers is None:
            workers = min(len(todo), max(1, (os.cpu_count() or 2)))
        for var in _BLAS_VARS:  # children inherit, their BLAS loads single-threaded
            os.environ[var] = "1"
        if workers == 1:
            for s, c, p in todo:
                job(cfg.to_dict(), s, c, p)
        else:
            import multiprocessing as mp

            with ProcessPoolExecutor(
                max_workers=workers, mp_context=mp.get_context("spawn")
            ) as pool:
                futures = [pool.submit(job, cfg.to_dict(), s, c, p) for s, c, p in todo]
                for f in futures:
                    f.result()
    merged = None
    for p in paths:  # fixed shard order => deterministic merge
        shard = EnsembleTrace.load_npz(p)
        if merged is None:
            merged = shard
        else:
            merged.merge(shard)
    return merged


def _write_outputs(cfg: ExperimentConfig, out: Path, csv_text: str, saturations):
    (out / "trace.csv").write_text(csv_text)
    _write_meta(cfg, out, extra={"saturations": _jsonable_sats(saturations)})


def _jsonable_sats(saturations):
    if not saturations:
        return {}
    return {
        str(k): [v[0], v[1]] if isinstance(v, tuple) else v
        for k, v in saturations.items()
    }


def _write_meta(cfg: ExperimentConfig, out: Path, extra=None):
    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "seeding": "SeedSequence(entropy=seed, spawn_key=(realization,)) -> Philox",
    }
    meta.update(extra or {})
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
