"""Ensemble observable traces: streaming accumulation, merging, CSV.

Raw accumulators hold (count, mean, M2) per time point for each purity
observable, plus the same for -log2(purity) so that both the annealed and
the quenched averaging conventions can be reported from a single run.
Merging is the associative/commutative Chan update, so any partition of
the realizations into shards reproduces identical statistics up to
floating-point reassociation.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError

LN2 = math.log(2.0)

#: raw per-realization observables accumulated by the engines
RAW_OBS = ("pcol", "P_A", "Pdiag_A")

#: CSV schema, bit-exact
CSV_HEADER = "model,L,L_A,t,observable,mean,stderr,n"


@dataclass
class WelfordArray:
    """Per-time-point running (count, mean, M2) over realizations."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, n_times: int) -> "WelfordArray":
        return cls(n=0, mean=np.zeros(n_times), m2=np.zeros(n_times))

    def add(self, values: np.ndarray):
        self.n += 1
        delta = values - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (values - self.mean)

    def merge(self, other: "WelfordArray"):
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        self.n = n

    @property
    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n * (self.n - 1)))


@dataclass
class EnsembleTrace:
    """Accumulated ensemble statistics of one (model, L) run."""

    model: str
    L: int
    seed: int
    keys: dict = field(default_factory=dict)  # (obs, L_A) -> entry dict

    def ensure(self, obs: str, L_A: int, times: np.ndarray):
        key = (obs, int(L_A))
        if key not in self.keys:
            self.keys[key] = {
                "times": np.asarray(times, dtype=float),
                "p": WelfordArray.empty(len(times)),
                "lg": WelfordArray.empty(len(times)),
            }
        return self.keys[key]

    def add_lane(self, obs: str, L_A: int, times, values: np.ndarray):
        entry = self.ensure(obs, L_A, times)
        if len(values) != len(entry["times"]):
            raise IntegrityError("lane length does not match the time grid")
        entry["p"].add(values)
        entry["lg"].add(-np.log2(values))

    def merge(self, other: "EnsembleTrace"):
        if (self.model, self.L, self.seed) != (other.model, other.L, other.seed):
            raise IntegrityError("cannot merge traces from different runs")
        for key, e in other.keys.items():
            if key not in self.keys:
                self.keys[key] = {
                    "times": e["times"].copy(),
                    "p": WelfordArray(e["p"].n, e["p"].mean.copy(), e["p"].m2.copy()),
                    "lg": WelfordArray(e["lg"].n, e["lg"].mean.copy(), e["lg"].m2.copy()),
                }
                continue
            mine = self.keys[key]
            if not np.array_equal(mine["times"], e["times"]):
                raise IntegrityError("time grids differ between shards")
            mine["p"].merge(e["p"])
            mine["lg"].merge(e["lg"])

    # -- persistence (internal shard format, lossless) ----------------------

    def save_npz(self, path):
        payload = {"__meta__": np.frombuffer(
            json.dumps({"model": self.model, "L": self.L, "seed": self.seed}).encode(),
            dtype=np.uint8,
        )}
        for i, ((obs, L_A), e) in enumerate(sorted(self.keys.items())):
            tag = f"{i}|{obs}|{L_A}"
            payload[f"t|{tag}"] = e["times"]
            for kind in ("p", "lg"):
                w = e[kind]
                payload[f"{kind}n|{tag}"] = np.array([w.n])
                payload[f"{kind}m|{tag}"] = w.mean
                payload[f"{kind}s|{tag}"] = w.m2
        np.savez_compressed(path, **payload)

    @classmethod
    def load_npz(cls, path) -> "EnsembleTrace":
        with np.load(path) as z:
            meta = json.loads(bytes(z["__meta__"]).decode())
            out = cls(model=meta["model"], L=meta["L"], seed=meta["seed"])
            tags = sorted(
                {k.split("|", 1)[1] for k in z.files if k.startswith("t|")},
                key=lambda s: int(s.split("|")[0]),
            )
            for tag in tags:
                _, obs, L_A = tag.split("|")
                entry = out.ensure(obs, int(L_A), z[f"t|{tag}"])
                for kind in ("p", "lg"):
                    entry[kind] = WelfordArray(
                        n=int(z[f"{kind}n|{tag}"][0]),
                        mean=z[f"{kind}m|{tag}"],
                        m2=z[f"{kind}s|{tag}"],
                    )
        return out

    # -- CSV emission --------------------------------------------------------

    def csv_rows(self, convention: str = "annealed", saturations: dict | None = None):
        """Yield CSV rows; derived entropies follow the given convention.

        ``saturations`` maps L_A -> (sd_inf, sr_inf) in bits and enables the
        dSd/dSR rows (L_A = L keys the global Sd saturation).
        """
        if convention not in ("annealed", "quenched"):
            raise IntegrityError(f"unknown averaging convention {convention!r}")
        saturations = saturations or {}

        def entropy(entry):
            p, lg = entry["p"], entry["lg"]
            if convention == "annealed":
                s = -np.log2(p.mean)
                err = p.stderr / (p.mean * LN2)
            else:
                s = lg.mean
                err = lg.stderr
            return s, err

        for (obs, L_A), e in sorted(self.keys.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            times = e["times"]
            if obs == "pcol":
                s, err = entropy(e)
                yield from self._rows("Sd_global", L_A, times, s, err, e["p"].n)
                if L_A in saturations:
                    sd_inf = saturations[L_A][0]
                    yield from self._rows("dSd", L_A, times, sd_inf - s, err, e["p"].n)
            elif obs in ("Pdiag_A", "P_A"):
                yield from self._rows(obs, L_A, times, e["p"].mean, e["p"].stderr, e["p"].n)
        # entropy combinations need both purities
        for L_A in sorted({k[1] for k in self.keys if k[0] == "Pdiag_A"}):
            ed = self.keys.get(("Pdiag_A", L_A))
            ea = self.keys.get(("P_A", L_A))
            if ed is None or ea is None:
                continue
            sd, sd_err = entropy(ed)
            sr, sr_err = entropy(ea)
            n = ed["p"].n
            times = ed["times"]
            yield from self._rows("Sd_A", L_A, times, sd, sd_err, n)
            yield from self._rows("SR_A", L_A, times, sr, sr_err, n)
            yield from self._rows("Cd_A", L_A, times, sd - sr, np.hypot(sd_err, sr_err), n)
            if L_A in saturations:
                sd_inf, sr_inf = saturations[L_A]
                yield from self._rows("dSd", L_A, times, sd_inf - sd, sd_err, n)
                if sr_inf is not None:
                    yield from self._rows("dSR", L_A, times, sr_inf - sr, sr_err, n)

    def _rows(self, name, L_A, times, means, errs, n):
        for t, m, s in zip(times, means, errs):
            yield (self.model, self.L, int(L_A), t, name, float(m), float(s), n)


def format_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for model, L, L_A, t, obs, mean, stderr, n in rows:
        t_txt = repr(int(t)) if float(t).is_integer() else repr(float(t))
        buf.write(f"{model},{L},{L_A},{t_txt},{obs},{mean!r},{stderr!r},{n}\n")
    return buf.getvalue()


def parse_csv(text: str):
    """Rows of the schema as dicts with float fields parsed."""
    lines = text.strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise IntegrityError("unexpected CSV header")
    out = []
    for line in lines[1:]:
        model, L, L_A, t, obs, mean, stderr, n = line.split(",")
        out.append(
            {
                "model": model,
                "L": int(L),
                "L_A": int(L_A),
                "t": float(t),
                "observable": obs,
                "mean": float(mean),
                "stderr": float(stderr),
                "n": int(n),
            }
        )
    return out


def series_from_rows(rows, observable: str, L_A: int):
    """(t, mean, stderr) arrays for one observable, sorted by time."""
    sel = [r for r in rows if r["observable"] == observable and r["L_A"] == L_A]
    sel.sort(key=lambda r: r["t"])
    t = np.array([r["t"] for r in sel])
    m = np.array([r["mean"] for r in sel])
    s = np.array([r["stderr"] for r in sel])
    return t, m, s
