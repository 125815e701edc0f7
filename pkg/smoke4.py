import time

import numpy as np

from pbinv import scenes_library
from pbinv.optimizer import (OptimizerConfig, _DiffOps, _d_axis0, _dT_axis0,
                             estimate_pb)

rng = np.random.default_rng(7)

# 1. adjoint identities <D f, y> == <f, D^T y>
for per in (True, False):
    f = rng.standard_normal((17, 17))
    y = rng.standard_normal((17, 17))
    lhs = np.sum(_d_axis0(f, 0.13, per) * y)
    rhs = np.sum(f * _dT_axis0(y, 0.13, per))
    assert abs(lhs - rhs) < 1e-10, (per, lhs, rhs)
print("adjoints OK")

# 2. zero scene: construction seed is exactly commuting, stays at zero
sc = scenes_library.get_scene("discs-pb3-zero").scene
cfg = OptimizerConfig(grid_n=64, restarts=1, max_iters=200, seed=1)
t0 = time.time()
est = estimate_pb(sc, cfg)
print(f"zero scene: upper={est.upper_bound:.3e} admissible={est.admissible} "
      f"cert={est.certificate.value if est.certificate else None} "
      f"({time.time()-t0:.1f}s)")
assert est.upper_bound <= 1e-3, est.upper_bound
assert est.admissible

# 3. A=0.2 descent trajectory, 1 restart (construction seed), 2000 iters
sc = scenes_library.get_scene("torus-quad-A0.2").scene
cfg = OptimizerConfig(grid_n=128, restarts=1, max_iters=2000, seed=1)
t0 = time.time()
est = estimate_pb(sc, cfg)
dt = time.time() - t0
rows = [r for r in est.trace if r["iter"] % 400 == 0 or r["iter"] == 1999]
for r in rows:
    print(f"  it={r['iter']:5d} tau={r['temperature']:9.1f} "
          f"obj={r['objective']:8.4f} sup={r['node_sup']:8.4f} "
          f"best={r['best_sup']:8.4f}")
print(f"A=0.2: upper={est.upper_bound:.4f} admissible={est.admissible} "
      f"cert={est.certificate.value if est.certificate else None} "
      f"warn={est.warnings} ({dt:.1f}s)")
