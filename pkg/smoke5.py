import sys, time
import numpy as np
from pbinv import scenes_library
from pbinv.optimizer import OptimizerConfig, estimate_pb

name = sys.argv[1] if len(sys.argv) > 1 else "torus-quad-A0.2"
restarts = int(sys.argv[2]) if len(sys.argv) > 2 else 1
iters = int(sys.argv[3]) if len(sys.argv) > 3 else 10_000

entry = scenes_library.get_scene(name)
cfg = OptimizerConfig(grid_n=128, restarts=restarts, max_iters=iters, seed=1)
t0 = time.time()
est = estimate_pb(entry.scene, cfg)
dt = time.time() - t0
cert = est.certificate.value if est.certificate else None
print(f"{name}: upper={est.upper_bound:.4f} margin={est.measurement_margin:.4f} "
      f"adm={est.admissible} cert={cert} restart={est.restart} ({dt:.0f}s)")
for r in range(-1, restarts):
    rows = [row for row in est.trace if row["restart"] == r]
    if rows:
        path = [row["best_sup"] for row in rows[:: max(1, len(rows) // 5)]]
        print(f"  restart {r}: best_sup path {np.array2string(np.array(path), precision=3)}")
