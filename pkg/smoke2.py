import numpy as np
import math
from pbinv import make_surface
from pbinv.fields import ScalarField, poisson_bracket, sup_norm, line_integral_FdG, area_integral, surface_mesh
from pbinv import dynamics
from pbinv.constructions import (smooth_step, quadrilateral_pair,
                                 triangle_cutoff_map, sphere_profile_pair,
                                 flow_average_function, pb3_from_pb4_pair,
                                 half_constant_interpolation)

# --- dynamics: harmonic oscillator on plane ---
pl = make_surface("plane-square", extents=((-2.0, 2.0), (-2.0, 2.0)))
G = ScalarField.from_expression(pl, "(p**2 + q**2)/2", label="osc")
traj = dynamics.hamiltonian_flow(G, (1.0, 0.0), 10 * 2 * math.pi, step=1e-3)
r = np.hypot(traj.points[:, 0], traj.points[:, 1])
print("osc radius drift:", np.max(np.abs(r - 1.0)))
print("osc energy drift:", dynamics.energy_drift(traj, G))
end = traj.points[-1]
print("osc endpoint err:", np.hypot(end[0] - 1.0, end[1] - 0.0))

# reversal
t2 = dynamics.hamiltonian_flow(G, (end[0], end[1]), -10 * 2 * math.pi, step=1e-3)
e2 = t2.points[-1]
print("reversal err:", np.hypot(e2[0] - 1.0, e2[1]))

# torus G=p: q moves at rate 1
to = make_surface("flat-torus")
Gp = ScalarField.from_expression(to, "p", label="p")
tr3 = dynamics.hamiltonian_flow(Gp, (0.2, 0.3), 1.0, step=1e-3)
e3 = tr3.points[-1]
print("torus flow endpoint:", e3, "(expect q=1.3, p=0.2)")

# --- smooth_step ---
st = smooth_step(0.1)
s = np.linspace(-0.2, 1.2, 10001)
print("step: u(0)=", st(0.0), "u(1)=", st(1.0), "max d =", np.max(st.d(s)),
      "bound", st.derivative_bound)
print("step symmetry:", np.max(np.abs(st(s) + st(1 - s) - 1.0)))
print("step flat at 0.04:", st(0.04), " at 0.96:", st(0.96))

# --- quadrilateral pair A=0.2 ---
pair = quadrilateral_pair(0.2, 1.0, 0.99, 0.01)
for c in pair.claims:
    print("quad claim:", c.name, c.bound, c.measured, c.satisfied)
F, Gq = pair
br = poisson_bracket(F, Gq)
rep = sup_norm(br, grid_n=256, with_margin=False)
print("quad 2D sup:", rep.value, "<= 5.3?", rep.value <= 5.3)
# boundary integral around the quad: +1 exactly
from pbinv.geometry import RectRegion
from pbinv.fields import full_surface_region
quad = pair.regions["quad"]
path = np.vstack([np.concatenate([lp for lp in __import__("pbinv.geometry", fromlist=["boundary_loops"]).boundary_loops(quad, to, 800)])])
line, lerr = line_integral_FdG(F, Gq, path)
print("quad boundary integral:", line, "err", lerr)
area, aerr = area_integral(br, quad, n=256)
print("quad area integral:", area, "err", aerr)

# A=0.25 and A=0.5 slope info
p25 = quadrilateral_pair(0.25, 1.0, 0.99, 0.01)
print("A=.25 sup:", p25.claims[0].measured, "claims ok:", p25.all_satisfied)
p50 = quadrilateral_pair(0.5, 1.0, 0.99, 0.01)
print("A=.5 sup:", p50.claims[0].measured, "bound:", p50.claims[0].bound,
      "flag:", "regime_flag" in p50.notes)

# --- triangle cutoff map ---
for kappa in (0.1, 0.5):
    T = triangle_cutoff_map(kappa)
    rng = np.random.default_rng(0)
    pts = rng.random((10000, 2))
    mask = pts.sum(axis=1) <= 1.0
    s0, t0 = pts[mask, 0], pts[mask, 1]
    J = T.jacobian(s0, t0)
    print(f"cutoff kappa={kappa}: K={T.K:.6f} delta={T.delta:.6f} "
          f"maxJ={np.max(J):.6f} bound={1+kappa}")
    # collapse exactness
    d = T.delta
    sc = np.linspace(0, d, 50)
    tc = np.linspace(d + 0.01, 1 - d - 0.011 - sc, 50)
    S1, T1 = T(sc, tc)
    print("  s-collapse max|S|:", np.max(np.abs(S1)))
    S2, T2 = T(tc, sc)
    print("  t-collapse max|T|:", np.max(np.abs(T2)))
    u = np.linspace(0.05, 0.95, 50)
    v = (1 - d * 0.3) - u
    ok = (u > 0) & (v > 0)
    S3, T3 = T(u[ok], v[ok])
    print("  hyp-collapse max|S+T-1|:", np.max(np.abs(S3 + T3 - 1.0)))
    # image containment
    Si, Ti = T(s0, t0)
    print("  image in triangle:", Si.min() >= -1e-12, Ti.min() >= -1e-12,
          (Si + Ti).max() <= 1 + 1e-12)

# --- sphere profile pair ---
for eps in (0.02, 0.05, 0.1):
    sp = sphere_profile_pair(eps)
    for c in sp.claims:
        print(f"sphere eps={eps}: {c.name}: measured {c.measured:.6f} "
              f"bound {c.bound:.6f} ok {c.satisfied}")

# --- flow average ---
Gl = ScalarField.from_expression(to, "p/sqrt(2)", label="lin")
H = ScalarField.from_expression(to, "(1 - cos(2*pi*q))/2", label="H")
fa = flow_average_function(H, Gl, 1.0, grid_n=64)
for c in fa.claims:
    print("flow-avg claim:", c.name, f"bound {c.bound:.6f} meas {c.measured:.6f}", c.satisfied)
expected = abs(math.sin(math.pi / math.sqrt(2))) / 1.0
print("flow-avg expected lie_sup ~", expected, "got", fa.notes["lie_sup"])

# --- pb3 from pb4 ---
red = pb3_from_pb4_pair(F, Gq, grid_n=128)
print("pb3-from-pb4:", red.claims[0].as_dict())

# --- half constant interpolation ---
hc = half_constant_interpolation(F, Gq, 0.5, grid_n=128)
for c in hc.claims:
    print("half-interp:", c.name, c.bound, c.measured, c.satisfied)
