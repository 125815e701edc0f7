"""Admissibility checks and Stokes-type lower bounds on bracket sup-norms.

A pair (F, G) constrained on a scene's sets has its bracket bounded below by
|boundary integral of F dG| / area over any chart region: the mean of {F, G}
against the area form cannot exceed its sup.  Certificates package that bound
with one-sided error handling so the reported value is always sound.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import SurfaceMismatchError, UsageError
from .fields import ScalarField, line_integral_FdG, surface_mesh
from .geometry import (Point, Region, Scene, Surface, area, boundary_loops,
                       parse_real, sample_neighborhood, set_length,
                       set_sample)

ADMISSIBILITY_SLACK = 1e-9
DEFAULT_PIN_RADIUS_FRACTION = 0.02   # of chart diameter, for Op(...) pins

_F3_KEYS = ("X", "Y", "Z")
_F4_KEYS = ("X0", "X1", "Y0", "Y1")


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

def _samples_along(pset, surface: Surface, grid_n: int) -> np.ndarray:
    """Sample a set at spacing at least 4x finer than the grid resolution."""
    L = set_length(pset, surface)
    n = int(np.ceil(4.0 * grid_n * max(L, 1e-9) / surface.diameter))
    return set_sample(pset, surface, int(np.clip(n, 64, 20000)))


def _condition(name: str, violation: np.ndarray, P, Q) -> dict:
    v = np.ravel(np.asarray(violation, dtype=np.float64))
    i = int(np.argmax(v))
    return {
        "condition": name,
        "worst_violation": float(v[i]),
        "location": [float(np.ravel(P)[i]), float(np.ravel(Q)[i])],
        "passed": bool(v[i] <= ADMISSIBILITY_SLACK),
    }


def pin_radius(scene: Scene) -> float:
    """The Op(...) neighborhood radius for primed classes on this scene."""
    cls = scene.constraint
    if "r" in cls:
        return parse_real(cls["r"])
    return DEFAULT_PIN_RADIUS_FRACTION * scene.surface.diameter


def check_admissible(F: ScalarField, G: ScalarField, scene: Scene,
                     grid_n: int = 256) -> dict:
    """Evaluate the scene's class constraints; violations are report content.

    Sets are sampled densely along their length; primed classes also check
    global ranges on the grid and exact pinning on metric r-neighborhoods of
    the sets.
    """
    surface = scene.surface
    if F.surface is not surface and F.surface != surface:
        raise SurfaceMismatchError("F lives on a different surface than the scene")
    if G.surface is not surface and G.surface != surface:
        raise SurfaceMismatchError("G lives on a different surface than the scene")
    cls = scene.constraint
    kind = cls.get("kind")
    conditions: list[dict] = []

    def named_set(key):
        name = cls[key]
        if name not in scene.sets:
            raise UsageError(f"class references unknown set {name!r}")
        return scene.sets[name], name

    def ineq(name, pset, viol_fn):
        pts = _samples_along(pset, surface, grid_n)
        conditions.append(_condition(name, viol_fn(pts[:, 0], pts[:, 1]),
                                     pts[:, 0], pts[:, 1]))

    def pin(name, pset, r, viol_fn):
        pts = sample_neighborhood(pset, surface, r, 512)
        conditions.append(_condition(name, viol_fn(pts[:, 0], pts[:, 1]),
                                     pts[:, 0], pts[:, 1]))

    if kind in (None, "", "none"):
        pass
    elif kind in ("F3", "F3p"):
        (X, xn), (Y, yn), (Z, zn) = (named_set(k) for k in _F3_KEYS)
        ineq(f"F <= 0 on {xn}", X, lambda p, q: F.value(p, q))
        ineq(f"G <= 0 on {yn}", Y, lambda p, q: G.value(p, q))
        ineq(f"F+G >= 1 on {zn}", Z,
             lambda p, q: 1.0 - (F.value(p, q) + G.value(p, q)))
        if kind == "F3p":
            r = pin_radius(scene)
            P, Q, _, _ = surface_mesh(surface, grid_n)
            FV, GV = F.value(P, Q), G.value(P, Q)
            conditions.append(_condition("F >= 0 everywhere", -FV, P, Q))
            conditions.append(_condition("G >= 0 everywhere", -GV, P, Q))
            conditions.append(_condition("F+G <= 1 everywhere",
                                         FV + GV - 1.0, P, Q))
            pin(f"F = 0 near {xn}", X, r,
                lambda p, q: np.abs(F.value(p, q)))
            pin(f"G = 0 near {yn}", Y, r,
                lambda p, q: np.abs(G.value(p, q)))
            pin(f"F+G = 1 near {zn}", Z, r,
                lambda p, q: np.abs(F.value(p, q) + G.value(p, q) - 1.0))
    elif kind in ("F4", "F4p"):
        (X0, x0n), (X1, x1n), (Y0, y0n), (Y1, y1n) = (
            named_set(k) for k in _F4_KEYS)
        ineq(f"F <= 0 on {x0n}", X0, lambda p, q: F.value(p, q))
        ineq(f"F >= 1 on {x1n}", X1, lambda p, q: 1.0 - F.value(p, q))
        ineq(f"G <= 0 on {y0n}", Y0, lambda p, q: G.value(p, q))
        ineq(f"G >= 1 on {y1n}", Y1, lambda p, q: 1.0 - G.value(p, q))
        if kind == "F4p":
            r = pin_radius(scene)
            P, Q, _, _ = surface_mesh(surface, grid_n)
            FV, GV = F.value(P, Q), G.value(P, Q)
            conditions.append(_condition("F in [0,1] everywhere",
                                         np.maximum(-FV, FV - 1.0), P, Q))
            conditions.append(_condition("G in [0,1] everywhere",
                                         np.maximum(-GV, GV - 1.0), P, Q))
            pin(f"F = 0 near {x0n}", X0, r, lambda p, q: np.abs(F.value(p, q)))
            pin(f"F = 1 near {x1n}", X1, r,
                lambda p, q: np.abs(F.value(p, q) - 1.0))
            pin(f"G = 0 near {y0n}", Y0, r, lambda p, q: np.abs(G.value(p, q)))
            pin(f"G = 1 near {y1n}", Y1, r,
                lambda p, q: np.abs(G.value(p, q) - 1.0))
    elif kind == "FN":
        names = list(cls["sets"])
        coeffs = [[parse_real(c) for c in edge] for edge in cls["polygon"]]
        if len(coeffs) != len(names):
            raise UsageError("FN class needs one edge functional per set")
        for nm, (a, b, c) in zip(names, coeffs):
            if nm not in scene.sets:
                raise UsageError(f"class references unknown set {nm!r}")
            pset = scene.sets[nm]
            ineq(f"a(F,G) <= 0 on {nm} [{a:g}F+{b:g}G+{c:g}]", pset,
                 lambda p, q, a=a, b=b, c=c:
                 a * F.value(p, q) + b * G.value(p, q) + c)
        omega = cls.get("omega", {"type": "plane"})
        if omega.get("type") == "disc":
            cx = parse_real(omega["center"][0])
            cy = parse_real(omega["center"][1])
            rad = parse_real(omega["radius"])
            P, Q, _, _ = surface_mesh(surface, grid_n)
            d = np.hypot(F.value(P, Q) - cx, G.value(P, Q) - cy) - rad
            conditions.append(_condition("(F,G) in domain disc", d, P, Q))
    else:
        raise UsageError(f"unknown class kind {kind!r}")

    failures = [c["condition"] for c in conditions if not c["passed"]]
    return {
        "admissible": not failures,
        "class": kind if kind else "none",
        "slack": ADMISSIBILITY_SLACK,
        "conditions": conditions,
        "failures": failures,
    }


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """A certified lower bound on sup|{F, G}| from one region's boundary."""
    value: float
    region: str
    boundary_integral: float
    error_budget: float
    area: float
    valid: bool = True
    detail: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "region": self.region,
            "boundary_integral": self.boundary_integral,
            "error_budget": self.error_budget,
            "area": self.area,
            "valid": self.valid,
            **({"detail": self.detail} if self.detail else {}),
        }


def stokes_lower_bound(F: ScalarField, G: ScalarField, region: Region,
                       n_path: int = 2048) -> Certificate:
    """Lower bound sup|{F,G}| >= (|oint F dG| - err) / (area + err).

    The boundary is walked counterclockwise with midpoint-refined trapezoid
    quadrature; the quadrature error estimate is charged against the value on
    both sides, keeping the certificate sound.
    """
    if F.surface != G.surface:
        raise SurfaceMismatchError("pair must live on one surface")
    surface = F.surface
    A = area(region, surface)
    if A <= 0.0:
        raise UsageError("certificate region must have positive area")
    total = 0.0
    err = 0.0
    for loop in boundary_loops(region, surface, n_path):
        v, e = line_integral_FdG(F, G, loop)
        total += v
        err += e
    value = max(0.0, (abs(total) - err) / (A + err))
    name = getattr(region, "name", None) or type(region).__name__
    return Certificate(value=value, region=str(name),
                       boundary_integral=total, error_budget=err, area=A)


def scene_lower_bound(F: ScalarField, G: ScalarField, scene: Scene,
                      grid_n: int = 256, n_path: int = 2048) -> Certificate:
    """Best Stokes bound over the scene's candidate regions.

    Refuses inadmissible pairs: the bound only constrains the pb value when
    the pair belongs to the scene's class.
    """
    report = check_admissible(F, G, scene, grid_n=grid_n)
    if not report["admissible"]:
        raise UsageError(
            "pair is not admissible for the scene; failing conditions: "
            + "; ".join(report["failures"]))
    regions = scene.regions()
    if not regions:
        return Certificate(value=0.0, region="(none declared)",
                           boundary_integral=0.0, error_budget=0.0,
                           area=scene.surface.area,
                           detail={"note": "scene declares no candidate regions"})
    best: Optional[Certificate] = None
    for reg in regions.values():
        cert = stokes_lower_bound(F, G, reg, n_path=n_path)
        if best is None or cert.value > best.value:
            best = cert
    detail = dict(best.detail)
    detail["candidates"] = len(regions)
    detail["admissible"] = True
    return Certificate(value=best.value, region=best.region,
                       boundary_integral=best.boundary_integral,
                       error_budget=best.error_budget, area=best.area,
                       valid=best.valid, detail=detail)


# ---------------------------------------------------------------------------
# Class symmetries (for property tests and the optimizer's bookkeeping)
# ---------------------------------------------------------------------------

def f4_symmetry_variants(F: ScalarField, G: ScalarField,
                         sets: dict) -> list[tuple]:
    """The F4 relabelings: each returns (F', G', permuted set mapping).

    (F,G) in F4(X0,X1,Y0,Y1)  <=>  (1-F, G) in F4(X1,X0,Y0,Y1)
                              <=>  (G, F) in F4(Y0,Y1,X0,X1).
    """
    flip = {"X0": sets["X1"], "X1": sets["X0"],
            "Y0": sets["Y0"], "Y1": sets["Y1"]}
    swap = {"X0": sets["Y0"], "X1": sets["Y1"],
            "Y0": sets["X0"], "Y1": sets["X1"]}
    return [(1.0 - F, G, flip), (G, F, swap)]
