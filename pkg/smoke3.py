import math
import time

import numpy as np

from pbinv import certificates as C
from pbinv import constructions as K
from pbinv import scenes_library as SL
from pbinv.fields import poisson_bracket, sup_norm
from pbinv.geometry import scene_to_json, scene_from_json, scene_hash

t0 = time.time()

# 1. registry builds + validates + round-trips
entries = SL.builtin_scenes()
print("scenes:", [e.name for e in entries])
for e in entries:
    js = scene_to_json(e.scene)
    back = scene_from_json(js)
    assert scene_to_json(back) == js, f"round-trip mismatch for {e.name}"
print("round-trips byte-identical OK", f"{time.time()-t0:.1f}s")

# 2. quad A=0.2: pinned construction passes F4p, cert = 5.0 +- 1%
ns = SL.get_scene("torus-quad-A0.2")
pair = SL.construction_pair_for_scene(ns.scene)
print("pin_radius:", pair.params["pin_radius"], "claims:",
      [(c.name, round(c.bound, 4), round(c.measured, 4)) for c in pair.claims])
rep = C.check_admissible(pair.F, pair.G, ns.scene)
print("admissible:", rep["admissible"], "failures:", rep["failures"])
for c in rep["conditions"]:
    print("   ", c["condition"], "worst", f"{c['worst_violation']:+.2e}")
assert rep["admissible"]

cert = C.scene_lower_bound(pair.F, pair.G, ns.scene)
print("cert:", cert.value, "region:", cert.region, "err:", cert.error_budget)
assert abs(cert.value - 5.0) <= 0.05, cert.value

# unpinned quad passes unprimed F4 but fails the scene's F4p pins
plain = K.quadrilateral_pair(0.2, 1.0, 0.99, 0.01)
rep2 = C.check_admissible(plain.F, plain.G, ns.scene)
print("plain pair admissible for F4p:", rep2["admissible"],
      "n_failures:", len(rep2["failures"]))
assert not rep2["admissible"]

# F == 1 fails F4 on X0 with violation 1
from pbinv.fields import ScalarField
one = ScalarField.constant(ns.scene.surface, 1.0)
zer = ScalarField.constant(ns.scene.surface, 0.0)
scene_unprimed = scene_from_json(scene_to_json(ns.scene))
scene_unprimed.constraint["kind"] = "F4"
rep3 = C.check_admissible(one, one, scene_unprimed)
worst = {c["condition"]: c["worst_violation"] for c in rep3["conditions"]}
print("F==1 report:", rep3["failures"], worst)
assert not rep3["admissible"]
assert abs(worst["F <= 0 on a1"] - 1.0) < 1e-12

# 3. A=0.5 scene: cert 2.0 from both regions
ns5 = SL.get_scene("torus-quad-A0.5")
pair5 = SL.construction_pair_for_scene(ns5.scene)
rep5 = C.check_admissible(pair5.F, pair5.G, ns5.scene)
assert rep5["admissible"], rep5["failures"]
cert5 = C.scene_lower_bound(pair5.F, pair5.G, ns5.scene)
print("A=0.5 cert:", cert5.value, cert5.region)
assert abs(cert5.value - 2.0) <= 0.02
print("A=0.5 pinned sup claim:", pair5.notes["certified_upper"],
      "measured grid sup:", sup_norm(poisson_bracket(pair5.F, pair5.G), 256).value)

# per-region values for A=0.2
regs = ns.scene.regions()
for nm, rg in regs.items():
    ct = C.stokes_lower_bound(pair.F, pair.G, rg)
    print(f"region {nm}: value={ct.value:.6f} (boundary {ct.boundary_integral:+.6f}, area {ct.area:.4f})")

# 4. zero scene: commuting pair admissible, bracket exactly 0, cert 0
nz = SL.get_scene("discs-pb3-zero")
Fz, Gz = SL.commuting_zero_pair(nz.scene)
repz = C.check_admissible(Fz, Gz, nz.scene)
print("zero-scene admissible:", repz["admissible"], repz["failures"])
assert repz["admissible"]
bz = sup_norm(poisson_bracket(Fz, Gz), 128, refine=False).value
certz = C.scene_lower_bound(Fz, Gz, nz.scene)
print("zero bracket sup:", bz, "cert:", certz.value, certz.detail.get("note"))
assert bz == 0.0 and certz.value == 0.0

# 5. great circles scene: seeds exist and are consistent
ng = SL.get_scene("sphere-three-great-circles")
halo = 0.01 * ng.scene.surface.diameter
seeds = SL.seed_values_for_scene(ng.scene, halo)
assert seeds is not None
from pbinv.fields import surface_mesh
P, Q, _, _ = surface_mesh(ng.scene.surface, 96)
fF, fG = seeds
FV, GV = fF(P, Q), fG(P, Q)
print("great-circles seed ranges:", FV.min(), FV.max(), GV.min(), GV.max())
Fg = ScalarField(ng.scene.surface, SL._wrap_grid_fn(fF), None)
Gg = ScalarField(ng.scene.surface, SL._wrap_grid_fn(fG), None)
repg = C.check_admissible(Fg, Gg, ng.scene)
print("great-circles seed admissible:", repg["admissible"], repg["failures"])
assert repg["admissible"]

# 6. scene hashes stable
print("hashes:", {e.name: scene_hash(e.scene)[:12] for e in entries})
print("total", f"{time.time()-t0:.1f}s")
print("SMOKE3 OK")
