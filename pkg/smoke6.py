import numpy as np
from pbinv.constructions import phased_quad_pair
from pbinv.fields import poisson_bracket, sup_norm
from pbinv.certificates import check_admissible, scene_lower_bound
from pbinv.scenes_library import get_scene, parse_real

for A in (0.2, 0.5, 0.25, 0.1):
    scene = get_scene(f"torus-quad-A{A}").scene
    r = parse_real(scene.constraint["r"])
    pair = phased_quad_pair(A, 1.0, 0.01, pin_radius=r)
    pair.raise_on_violation()
    rep = sup_norm(poisson_bracket(pair.F, pair.G), grid_n=512)
    adm = check_admissible(pair.F, pair.G, scene, grid_n=512)
    cert = scene_lower_bound(pair.F, pair.G, scene, grid_n=256)
    for c in pair.claims:
        print(f"  claim {c.name}: bound={c.bound:.4f} measured={c.measured:.4f} ok={c.satisfied}")
    print(f"A={A}: sup={rep.value:.4f} margin={rep.margin:.4f} "
          f"adm={adm['admissible']} cert={cert.value:.4f} "
          f"claimed={pair.notes['certified_upper']:.4f}")
    if not adm['admissible']:
        print("  failures:", adm['failures'])
