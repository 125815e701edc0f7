"""Condensed invariant suite runnable from the command line.

Each check exercises one guarantee the package leans on — algebraic bracket
identities, quadrature consistency, certificate soundness, map Jacobian caps,
integrator reversibility — at budgets small enough for an interactive run.
The exhaustive randomized versions live in the test suite; this module is the
installable smoke test.
"""
from __future__ import annotations

import math
import time

import numpy as np

from . import dynamics
from .certificates import scene_lower_bound
from .constructions import (flow_average_function, linear_flow_average_inputs,
                            phased_quad_pair, quadrilateral_pair, smooth_step,
                            sphere_profile_pair, triangle_cutoff_map)
from .fields import (ScalarField, line_integral_FdG, poisson_bracket,
                     random_field, sup_norm, surface_mesh)
from .geometry import boundary_loops, make_surface
from .optimizer import OptimizerConfig, estimate_pb
from .scenes_library import get_scene, parse_real


def _check(name: str, passed: bool, **detail) -> dict:
    out = {"name": name, "passed": bool(passed)}
    out.update(detail)
    return out


def check_bracket_algebra(seed: int = 7) -> dict:
    """Antisymmetry is exact in floating point; bilinearity to rounding."""
    surface = make_surface("flat-torus", area=1.0)
    F = random_field(surface, seed)
    G = random_field(surface, seed + 1)
    H = random_field(surface, seed + 2)
    P, Q, _, _ = surface_mesh(surface, 96)
    anti = float(np.max(np.abs(poisson_bracket(F, G).value(P, Q)
                               + poisson_bracket(G, F).value(P, Q))))
    lhs = poisson_bracket(2.5 * F + H, G).value(P, Q)
    rhs = (2.5 * poisson_bracket(F, G).value(P, Q)
           + poisson_bracket(H, G).value(P, Q))
    scale = float(np.max(np.abs(rhs))) + 1.0
    bilin = float(np.max(np.abs(lhs - rhs))) / scale
    return _check("bracket-algebra", anti == 0.0 and bilin <= 1e-12,
                  antisymmetry_residual=anti, bilinearity_residual=bilin)


def check_coordinate_pair() -> dict:
    """{p, q} = -1 on the unit torus, exactly."""
    surface = make_surface("flat-torus", area=1.0)
    F = ScalarField.from_expression(surface, "p")
    G = ScalarField.from_expression(surface, "q")
    P, Q, _, _ = surface_mesh(surface, 64)
    resid = float(np.max(np.abs(poisson_bracket(F, G).value(P, Q) + 1.0)))
    return _check("coordinate-pair", resid == 0.0, residual=resid)


def check_leibniz_jacobi(seed: int = 11, triples: int = 3,
                         tol: float = 5e-4) -> dict:
    """Leibniz and Jacobi identities under nested finite differencing."""
    surface = make_surface("flat-torus", area=1.0)
    P, Q, _, _ = surface_mesh(surface, 48)
    worst_l = worst_j = 0.0
    for k in range(triples):
        F = random_field(surface, seed + 3 * k)
        G = random_field(surface, seed + 3 * k + 1)
        H = random_field(surface, seed + 3 * k + 2)
        lhs = poisson_bracket(F * G, H).value(P, Q)
        rhs = (F.value(P, Q) * poisson_bracket(G, H).value(P, Q)
               + G.value(P, Q) * poisson_bracket(F, H).value(P, Q))
        scale = float(np.max(np.abs(rhs))) + 1.0
        worst_l = max(worst_l, float(np.max(np.abs(lhs - rhs))) / scale)
        jac = (poisson_bracket(poisson_bracket(F, G), H).value(P, Q)
               + poisson_bracket(poisson_bracket(G, H), F).value(P, Q)
               + poisson_bracket(poisson_bracket(H, F), G).value(P, Q))
        jscale = float(np.max(np.abs(
            poisson_bracket(poisson_bracket(F, G), H).value(P, Q)))) + 1.0
        worst_j = max(worst_j, float(np.max(np.abs(jac))) / jscale)
    return _check("leibniz-jacobi", worst_l <= tol and worst_j <= tol,
                  leibniz_residual=worst_l, jacobi_residual=worst_j, tol=tol)


def check_boundary_integral() -> dict:
    """The quadrilateral pair's boundary integral telescopes to exactly 1."""
    pair = quadrilateral_pair(0.2, 1.0, 0.99, 0.01)
    total, err = 0.0, 0.0
    for loop in boundary_loops(pair.regions["quad"], pair.F.surface, 2048):
        v, e = line_integral_FdG(pair.F, pair.G, loop)
        total += v
        err += e
    resid = abs(abs(total) - 1.0)
    return _check("boundary-integral", resid <= err + 1e-6,
                  integral=total, quadrature_budget=err)


def check_certificate_soundness() -> dict:
    """Certified lower bounds never exceed measured upper bounds."""
    worst = -math.inf
    for name, build in (("torus-quad-A0.2", quadrilateral_pair),
                        ("torus-quad-A0.5", phased_quad_pair)):
        entry = get_scene(name)
        A = parse_real(entry.scene.metadata["construction"]["A"])
        r = parse_real(entry.scene.constraint["r"])
        if build is quadrilateral_pair:
            pair = build(A, 1.0, 0.99, 0.01, pin_radius=r)
        else:
            pair = build(A, 1.0, 0.01, pin_radius=r)
        cert = scene_lower_bound(pair.F, pair.G, entry.scene, grid_n=192)
        rep = sup_norm(poisson_bracket(pair.F, pair.G), grid_n=384)
        worst = max(worst, cert.value - (rep.value + rep.margin))
    return _check("certificate-soundness", worst <= 0.0,
                  worst_excess=worst)


def check_cutoff_jacobian(points: int = 2000) -> dict:
    """Triangle cutoff map keeps |det J| within 1 + kappa."""
    rng = np.random.Generator(np.random.Philox(1234))
    worst = {}
    ok = True
    for kappa in (0.1, 0.5):
        T = triangle_cutoff_map(kappa)
        s = rng.uniform(0.0, 1.0, points)
        t = rng.uniform(0.0, 1.0 - s, points)
        jac = np.abs(T.jacobian(s, t))
        worst[f"kappa={kappa:g}"] = float(np.max(jac))
        ok = ok and float(np.max(jac)) <= 1.0 + kappa
    return _check("cutoff-jacobian", ok, **worst)


def check_smooth_step() -> dict:
    """smooth_step derivative stays within its 1 + 2*delta cap."""
    xs = np.linspace(-0.2, 1.2, 20001)
    ok = True
    worst = {}
    for delta in (0.02, 0.1, 0.2):
        step = smooth_step(delta)
        m = float(np.max(np.abs(step.d(xs))))
        worst[f"delta={delta:g}"] = m
        ok = ok and m <= 1.0 + 2.0 * delta + 1e-12
    return _check("smooth-step", ok, **worst)


def check_sphere_xy() -> dict:
    """sup |{x^2, y^2}| on the round sphere equals 4/(3*sqrt(3))."""
    surface = make_surface("round-sphere")
    F = ScalarField.from_expression(surface, "x**2")
    G = ScalarField.from_expression(surface, "y**2")
    rep = sup_norm(poisson_bracket(F, G), grid_n=512, with_margin=False)
    target = 4.0 / (3.0 * math.sqrt(3.0))
    return _check("sphere-xy", abs(rep.value - target) <= 1e-3,
                  measured=rep.value, target=target)


def check_zero_scene() -> dict:
    """The optimizer finds the commuting pair of the distant-discs scene."""
    entry = get_scene("discs-pb3-zero")
    config = OptimizerConfig(grid_n=64, restarts=1, max_iters=200, seed=3)
    est = estimate_pb(entry.scene, config)
    return _check("zero-scene", est.upper_bound <= 1e-3,
                  upper_bound=est.upper_bound)


def check_integrator(step: float = 1e-3, T: float = 1.0) -> dict:
    """Implicit midpoint: time reversal restores starts; energy drift tiny.

    Reversal is checked on a rough random Hamiltonian (the integrator is
    time-symmetric regardless of smoothness); the drift budget of 1e-8 per
    unit time is checked on the quadrilateral Hamiltonian, whose flow the
    integrator represents exactly up to the fixed-point tolerance.
    """
    surface = make_surface("flat-torus", area=1.0)
    G = random_field(surface, 17)
    p0 = np.asarray([0.15, 0.45, 0.71])
    q0 = np.asarray([0.82, 0.24, 0.37])
    n = int(round(T / step))
    P, Q = dynamics.integrate_batch(G, p0, q0, T, n)
    Pb, Qb = dynamics.integrate_batch(G, P[-1], Q[-1], -T, n)
    dp = surface.wrap_delta(Pb[-1] - p0, 0)
    dq = surface.wrap_delta(Qb[-1] - q0, 1)
    reversal = float(np.max(np.hypot(dp, dq)))
    Gq = quadrilateral_pair(0.25, 1.0, 0.99, 0.01).G
    traj = dynamics.hamiltonian_flow(Gq, (0.3, 0.25), (0.0, T), step=step)
    drift = dynamics.energy_drift(traj, Gq) / T
    return _check("integrator", reversal <= 1e-11 and drift <= 1e-8,
                  reversal=reversal, energy_drift_per_time=drift)


def check_construction_claims(fast: bool = False) -> dict:
    """Every bundled construction honors its certified inequalities."""
    pairs = [
        quadrilateral_pair(0.2, 1.0, 0.99, 0.01),
        phased_quad_pair(0.2, 1.0, 0.01),
        phased_quad_pair(0.5, 1.0, 0.01),
        sphere_profile_pair(0.05),
    ]
    if not fast:
        H, G = linear_flow_average_inputs()
        pairs.append(flow_average_function(H, G, 2.0))
    violated = []
    for pair in pairs:
        for c in pair.claims:
            if not c.satisfied:
                violated.append(f"{pair.construction}:{c.name}")
    return _check("construction-claims", not violated, violated=violated)


ALL_CHECKS = (
    check_bracket_algebra,
    check_coordinate_pair,
    check_leibniz_jacobi,
    check_boundary_integral,
    check_certificate_soundness,
    check_cutoff_jacobian,
    check_smooth_step,
    check_sphere_xy,
    check_zero_scene,
    check_integrator,
    check_construction_claims,
)

FAST_SKIP = {"zero-scene", "integrator"}


def run_selftest(fast: bool = False) -> dict:
    """Run every check; returns {"passed", "checks"} with per-check detail."""
    checks = []
    for fn in ALL_CHECKS:
        name = fn.__name__.replace("check_", "").replace("_", "-")
        if fast and name in FAST_SKIP:
            continue
        t0 = time.perf_counter()
        if fn is check_construction_claims:
            result = fn(fast=fast)
        else:
            result = fn()
        result["seconds"] = time.perf_counter() - t0
        checks.append(result)
    return {"passed": all(c["passed"] for c in checks), "checks": checks}
