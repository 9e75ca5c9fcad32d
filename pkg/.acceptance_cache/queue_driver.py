"""Sequential background compute queue for all recipe ensembles (resumable)."""
import os, sys, time, traceback
os.environ.setdefault("COHDYN_CACHE", "/root/pkg/.acceptance_cache")

from cohdyn import recipes, runner
from cohdyn.config import ExperimentConfig

ORDER = [
    ("u1-global-relaxation", [0]),        # L=16 first (fast feedback)
    ("u1-saturation", None),
    ("dipole-saturation", None),
    ("u1-global-relaxation", [1]),        # L=20
    ("replica-benchmark", None),
    ("mfim-local", None),
    ("dipole-global-relaxation", None),
    ("u1-local-peak", None),
    ("u1-global-relaxation", [2]),        # L=24 monster last
]

def main():
    for name, pick in ORDER:
        raws = recipes.recipe_configs(name)
        if pick is not None:
            raws = [raws[i] for i in pick]
        for raw in raws:
            cfg = ExperimentConfig.from_dict(raw)
            tag = f"{name}: {cfg.model} L={cfg.L} r={cfg.realizations}"
            if (os.path.exists(os.path.join(cfg.out, "trace.csv"))):
                print(f"[queue] SKIP {tag} (cached)", flush=True)
                continue
            t0 = time.time()
            print(f"[queue] START {tag}", flush=True)
            try:
                runner.run(cfg, workers=2)
                print(f"[queue] DONE {tag} in {(time.time()-t0)/60:.1f} min", flush=True)
            except Exception:
                traceback.print_exc()
                print(f"[queue] FAILED {tag}", flush=True)
                sys.exit(1)
    print("[queue] ALL COMPLETE", flush=True)

if __name__ == "__main__":
    main()
