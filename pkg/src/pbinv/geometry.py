"""Surfaces, regions, point sets and scenes.

Charts
------
* ``flat-torus``: chart ``[0,1) x [0,1)``, both axes periodic, form ``B dp^dq``.
* ``round-sphere``: chart ``(z, phi)`` with ``z in [-1, 1]``, ``phi in [0, 2pi)``
  (axis 1 periodic), form ``(B/4pi) dz^dphi``.  The poles are excluded from
  every grid: node coordinates satisfy ``|z| <= 1 - 2**-20``.
* ``plane-square``: a rectangle with no periodicity; fields are expected to
  vanish on a padding margin inside the border.

All distances and tolerances are chart-metric (periodic axes wrap).  Real
numbers in scene files are serialized as decimal strings via ``repr`` so that
files round-trip bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import SceneValidationError, UsageError

Z_CLIP = 2.0 ** -20  # sphere grids keep |z| <= 1 - Z_CLIP


class Point(NamedTuple):
    p: float
    q: float


# ---------------------------------------------------------------------------
# Surface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Surface:
    kind: str
    area: float                                  # total symplectic area B
    extents: tuple[tuple[float, float], tuple[float, float]]
    periodic: tuple[bool, bool]
    margin: float = 0.0                          # plane-square padding fraction

    @property
    def span(self) -> tuple[float, float]:
        (p0, p1), (q0, q1) = self.extents
        return (p1 - p0, q1 - q0)

    @property
    def chart_area(self) -> float:
        sp, sq = self.span
        return sp * sq

    @property
    def density(self) -> float:
        """Area density sigma with omega = sigma dp^dq."""
        return self.area / self.chart_area

    @property
    def diameter(self) -> float:
        sp, sq = self.span
        return math.hypot(sp, sq)

    def wrap_delta(self, d, axis: int):
        """Shortest signed displacement along one axis."""
        if not self.periodic[axis]:
            return d
        span = self.span[axis]
        return d - span * np.round(np.asarray(d) / span)

    def normalize(self, p, q):
        """Wrap periodic coordinates into the chart window."""
        (p0, _), (q0, _) = self.extents
        sp, sq = self.span
        p = np.asarray(p, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        if self.periodic[0]:
            p = p0 + np.mod(p - p0, sp)
        if self.periodic[1]:
            q = q0 + np.mod(q - q0, sq)
        return p, q

    def grid_axes(self, n: int):
        """Node coordinates and spacings for an n x n evaluation grid."""
        (p0, p1), (q0, q1) = self.extents
        if self.kind == "round-sphere":
            zc = 1.0 - Z_CLIP
            pnodes = np.linspace(-zc, zc, n)
            hp = pnodes[1] - pnodes[0]
        elif self.periodic[0]:
            hp = (p1 - p0) / n
            pnodes = p0 + hp * np.arange(n)
        else:
            pnodes = np.linspace(p0, p1, n)
            hp = pnodes[1] - pnodes[0]
        if self.periodic[1]:
            hq = (q1 - q0) / n
            qnodes = q0 + hq * np.arange(n)
        else:
            qnodes = np.linspace(q0, q1, n)
            hq = qnodes[1] - qnodes[0]
        return pnodes, qnodes, float(hp), float(hq)

    def distance(self, p1, q1, p2, q2):
        dp = self.wrap_delta(np.asarray(p1) - np.asarray(p2), 0)
        dq = self.wrap_delta(np.asarray(q1) - np.asarray(q2), 1)
        return np.hypot(dp, dq)


def make_surface(kind: str, area: Optional[float] = None,
                 extents=None, margin: float = 0.05) -> Surface:
    """Build one of the three supported surfaces.

    ``area`` defaults to 1 for the torus, 4*pi for the sphere and the chart
    area for the plane square.
    """
    if kind == "flat-torus":
        if extents is not None and tuple(map(tuple, extents)) != ((0.0, 1.0), (0.0, 1.0)):
            raise UsageError("flat-torus uses the fixed chart [0,1) x [0,1)")
        B = 1.0 if area is None else float(area)
        if B <= 0:
            raise UsageError("surface area must be positive")
        return Surface("flat-torus", B, ((0.0, 1.0), (0.0, 1.0)), (True, True))
    if kind == "round-sphere":
        B = 4.0 * math.pi if area is None else float(area)
        if B <= 0:
            raise UsageError("surface area must be positive")
        return Surface("round-sphere", B,
                       ((-1.0, 1.0), (0.0, 2.0 * math.pi)), (False, True))
    if kind == "plane-square":
        if extents is None:
            extents = ((0.0, 1.0), (0.0, 1.0))
        (p0, p1), (q0, q1) = [(float(a), float(b)) for a, b in extents]
        if not (p1 > p0 and q1 > q0):
            raise UsageError("plane-square extents must have positive width")
        B = (p1 - p0) * (q1 - q0) if area is None else float(area)
        if B <= 0:
            raise UsageError("surface area must be positive")
        return Surface("plane-square", B, ((p0, p1), (q0, q1)), (False, False),
                       margin=float(margin))
    raise UsageError(f"unknown surface kind: {kind!r}")


# ---------------------------------------------------------------------------
# Regions (for areas, boundary sampling, certificates)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RectRegion:
    p0: float
    p1: float
    q0: float
    q1: float
    name: str = "rect"


@dataclass(frozen=True)
class DiscRegion:
    cp: float
    cq: float
    r: float
    name: str = "disc"


@dataclass(frozen=True)
class ComplementRegion:
    inner: "Region"
    name: str = "complement"


@dataclass(frozen=True)
class UnionRegion:
    members: tuple
    name: str = "union"


Region = RectRegion | DiscRegion | ComplementRegion | UnionRegion


def area(region: Region, surface: Surface) -> float:
    """Symplectic area of a region."""
    if isinstance(region, RectRegion):
        if not (region.p1 > region.p0 and region.q1 > region.q0):
            raise UsageError("rectangle must have positive extent")
        if not any(surface.periodic):
            (p0, p1), (q0, q1) = surface.extents
            eps = 1e-12 * surface.diameter
            if (region.p0 < p0 - eps or region.p1 > p1 + eps
                    or region.q0 < q0 - eps or region.q1 > q1 + eps):
                raise UsageError("rectangle exceeds the chart extents")
        return (region.p1 - region.p0) * (region.q1 - region.q0) * surface.density
    if isinstance(region, DiscRegion):
        return math.pi * region.r ** 2 * surface.density
    if isinstance(region, ComplementRegion):
        return surface.area - area(region.inner, surface)
    if isinstance(region, UnionRegion):
        return sum(area(m, surface) for m in region.members)
    raise UsageError(f"unknown region type {type(region).__name__}")


def contains(region: Region, surface: Surface, p, q, tol: float = 0.0):
    """Membership test (vectorized); ``tol`` inflates the region."""
    p, q = surface.normalize(p, q)
    if isinstance(region, RectRegion):
        dp = surface.wrap_delta(p - 0.5 * (region.p0 + region.p1), 0)
        dq = surface.wrap_delta(q - 0.5 * (region.q0 + region.q1), 1)
        return (np.abs(dp) <= 0.5 * (region.p1 - region.p0) + tol) & \
               (np.abs(dq) <= 0.5 * (region.q1 - region.q0) + tol)
    if isinstance(region, DiscRegion):
        return surface.distance(p, q, region.cp, region.cq) <= region.r + tol
    if isinstance(region, ComplementRegion):
        return ~contains(region.inner, surface, p, q, -tol)
    if isinstance(region, UnionRegion):
        out = np.zeros(np.broadcast(p, q).shape, dtype=bool)
        for m in region.members:
            out |= contains(m, surface, p, q, tol)
        return out
    raise UsageError(f"unknown region type {type(region).__name__}")


def boundary_loops(region: Region, surface: Surface, n: int) -> list[np.ndarray]:
    """Closed counterclockwise loops sampling the region boundary.

    Each loop is an ``(m, 2)`` array whose last point repeats the first.
    Complements return the inner loops with reversed orientation.
    """
    if isinstance(region, RectRegion):
        corners = [(region.p0, region.q0), (region.p1, region.q0),
                   (region.p1, region.q1), (region.p0, region.q1)]
        per = 2.0 * ((region.p1 - region.p0) + (region.q1 - region.q0))
        pts = []
        for k in range(4):
            a = np.asarray(corners[k], dtype=np.float64)
            b = np.asarray(corners[(k + 1) % 4], dtype=np.float64)
            edge_len = float(np.hypot(*(b - a)))
            m = max(2, int(round(n * edge_len / per)) + 1)
            t = np.linspace(0.0, 1.0, m)[:-1]          # drop b; next edge adds it
            pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
        loop = np.vstack(pts)
        loop = np.vstack([loop, loop[:1]])
        return [loop]
    if isinstance(region, DiscRegion):
        th = np.linspace(0.0, 2.0 * math.pi, max(n, 8), endpoint=False)
        loop = np.stack([region.cp + region.r * np.cos(th),
                         region.cq + region.r * np.sin(th)], axis=1)
        loop = np.vstack([loop, loop[:1]])
        return [loop]
    if isinstance(region, ComplementRegion):
        return [loop[::-1].copy() for loop in boundary_loops(region.inner, surface, n)]
    if isinstance(region, UnionRegion):
        out = []
        for m in region.members:
            out.extend(boundary_loops(m, surface, n))
        return out
    raise UsageError(f"unknown region type {type(region).__name__}")


def sample_boundary(region: Region, surface: Surface, n: int) -> np.ndarray:
    """All boundary sample points (loops concatenated, ccw, corners included)."""
    return np.vstack(boundary_loops(region, surface, n))


def boundary_residual(region: Region, surface: Surface, pts: np.ndarray):
    """Distance of points from the region's boundary equation (for checks)."""
    p, q = pts[:, 0], pts[:, 1]
    if isinstance(region, RectRegion):
        inside = contains(region, surface, p, q, tol=1e-9)
        d_edges = np.min(np.stack([
            np.abs(p - region.p0), np.abs(p - region.p1),
            np.abs(q - region.q0), np.abs(q - region.q1)]), axis=0)
        return np.where(inside, d_edges, np.inf)
    if isinstance(region, DiscRegion):
        return np.abs(surface.distance(p, q, region.cp, region.cq) - region.r)
    if isinstance(region, ComplementRegion):
        return boundary_residual(region.inner, surface, pts)
    if isinstance(region, UnionRegion):
        return np.min(np.stack([boundary_residual(m, surface, pts)
                                for m in region.members]), axis=0)
    raise UsageError(f"unknown region type {type(region).__name__}")


# ---------------------------------------------------------------------------
# Point sets (constraint supports)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentSet:
    """Axis-aligned chart segment: {p = value, q in [lo, hi]} or vice versa."""
    fixed_axis: str          # "p" or "q": which coordinate is pinned
    value: float
    lo: float
    hi: float


@dataclass(frozen=True)
class CoordLineSet:
    """A full coordinate line {p = value} or {q = value} (circle if periodic)."""
    fixed_axis: str
    value: float


@dataclass(frozen=True)
class CircleSet:
    """Chart-metric circle of radius r around (cp, cq)."""
    cp: float
    cq: float
    r: float


@dataclass(frozen=True)
class BandSet:
    """All points within ``halfwidth`` of a base set."""
    base: "PointSet"
    halfwidth: float


@dataclass(frozen=True)
class UnionSet:
    members: tuple


PointSet = SegmentSet | CoordLineSet | CircleSet | BandSet | UnionSet


def _free_axis_range(surface: Surface, fixed_axis: str):
    idx = 1 if fixed_axis == "p" else 0
    lo, hi = surface.extents[idx]
    if surface.kind == "round-sphere" and idx == 0:
        lo, hi = -1.0 + Z_CLIP, 1.0 - Z_CLIP
    return idx, lo, hi


def set_length(pset: PointSet, surface: Surface) -> float:
    if isinstance(pset, SegmentSet):
        return pset.hi - pset.lo
    if isinstance(pset, CoordLineSet):
        _, lo, hi = _free_axis_range(surface, pset.fixed_axis)
        return hi - lo
    if isinstance(pset, CircleSet):
        return 2.0 * math.pi * pset.r
    if isinstance(pset, BandSet):
        return set_length(pset.base, surface)
    if isinstance(pset, UnionSet):
        return sum(set_length(m, surface) for m in pset.members)
    raise UsageError(f"unknown point set type {type(pset).__name__}")


def set_distance(pset: PointSet, surface: Surface, p, q):
    """Chart-metric distance from points to the set (vectorized)."""
    p, q = surface.normalize(p, q)
    if isinstance(pset, SegmentSet):
        if pset.fixed_axis == "p":
            d_fix = surface.wrap_delta(p - pset.value, 0)
            free, ax = q, 1
        else:
            d_fix = surface.wrap_delta(q - pset.value, 1)
            free, ax = p, 0
        mid = 0.5 * (pset.lo + pset.hi)
        half = 0.5 * (pset.hi - pset.lo)
        d_free = np.maximum(np.abs(surface.wrap_delta(free - mid, ax)) - half, 0.0)
        return np.hypot(d_fix, d_free)
    if isinstance(pset, CoordLineSet):
        ax = 0 if pset.fixed_axis == "p" else 1
        d = surface.wrap_delta((p if ax == 0 else q) - pset.value, ax)
        return np.abs(d)
    if isinstance(pset, CircleSet):
        return np.abs(surface.distance(p, q, pset.cp, pset.cq) - pset.r)
    if isinstance(pset, BandSet):
        return np.maximum(set_distance(pset.base, surface, p, q) - pset.halfwidth, 0.0)
    if isinstance(pset, UnionSet):
        return np.min(np.stack([set_distance(m, surface, p, q)
                                for m in pset.members]), axis=0)
    raise UsageError(f"unknown point set type {type(pset).__name__}")


def set_contains(pset: PointSet, surface: Surface, p, q, tol: float = 0.0):
    return set_distance(pset, surface, p, q) <= tol + 1e-12


def set_sample(pset: PointSet, surface: Surface, n: int) -> np.ndarray:
    """About n points on the set, deterministic and endpoint-inclusive."""
    n = max(int(n), 2)
    if isinstance(pset, SegmentSet):
        t = np.linspace(pset.lo, pset.hi, n)
        c = np.full(n, pset.value)
        pts = np.stack([c, t] if pset.fixed_axis == "p" else [t, c], axis=1)
        return pts
    if isinstance(pset, CoordLineSet):
        idx, lo, hi = _free_axis_range(surface, pset.fixed_axis)
        if surface.periodic[idx]:
            t = lo + (hi - lo) * np.arange(n) / n
        else:
            t = np.linspace(lo, hi, n)
        c = np.full(len(t), pset.value)
        pts = np.stack([c, t] if pset.fixed_axis == "p" else [t, c], axis=1)
        return pts
    if isinstance(pset, CircleSet):
        th = 2.0 * math.pi * np.arange(n) / n
        return np.stack([pset.cp + pset.r * np.cos(th),
                         pset.cq + pset.r * np.sin(th)], axis=1)
    if isinstance(pset, BandSet):
        spine = set_sample(pset.base, surface, max(n // 5, 2))
        offs = []
        for rad in (pset.halfwidth, 0.5 * pset.halfwidth):
            for th in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
                cand = spine + rad * np.array([math.cos(th), math.sin(th)])
                d = set_distance(pset, surface, cand[:, 0], cand[:, 1])
                offs.append(cand[d <= 1e-12])
        return np.vstack([spine] + offs)
    if isinstance(pset, UnionSet):
        total = set_length(pset, surface)
        parts = []
        for m in pset.members:
            frac = set_length(m, surface) / total if total > 0 else 1.0 / len(pset.members)
            parts.append(set_sample(m, surface, max(2, int(round(n * frac)))))
        return np.vstack(parts)
    raise UsageError(f"unknown point set type {type(pset).__name__}")


def sample_neighborhood(pset: PointSet, surface: Surface, r: float, n: int) -> np.ndarray:
    """Points covering the closed r-neighborhood of a set (for primed checks)."""
    spine = set_sample(pset, surface, n)
    pts = [spine]
    for rad in (0.25 * r, 0.5 * r, 0.75 * r, r):
        for th in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
            cand = spine + rad * np.array([math.cos(th), math.sin(th)])
            cp, cq = surface.normalize(cand[:, 0], cand[:, 1])
            cand = np.stack([cp, cq], axis=1)
            if not surface.periodic[0]:
                lo, hi = surface.extents[0]
                if surface.kind == "round-sphere":
                    lo, hi = -1.0 + Z_CLIP, 1.0 - Z_CLIP
                cand[:, 0] = np.clip(cand[:, 0], lo, hi)
            if not surface.periodic[1]:
                lo, hi = surface.extents[1]
                cand[:, 1] = np.clip(cand[:, 1], lo, hi)
            keep = set_distance(pset, surface, cand[:, 0], cand[:, 1]) <= r + 1e-12
            pts.append(cand[keep])
    return np.vstack(pts)


# ---------------------------------------------------------------------------
# Scene: surface + named sets + constraint class + expectations
# ---------------------------------------------------------------------------

@dataclass
class Scene:
    surface: Surface
    sets: dict[str, PointSet]
    constraint: dict
    expected: Optional[dict] = None
    metadata: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.metadata.get("name", "scene")

    def regions(self) -> dict[str, Region]:
        out: dict[str, Region] = {}
        for spec in self.metadata.get("regions", []):
            out[spec["name"]] = _region_from_json(spec, out)
        return out


# -- real <-> decimal string ------------------------------------------------

def fmt_real(x: float) -> str:
    return repr(float(x))


def parse_real(s) -> float:
    if isinstance(s, str):
        return float(s)
    raise UsageError(f"scene reals must be decimal strings, got {type(s).__name__}")


# -- JSON encoding ----------------------------------------------------------

def _set_to_json(name: str, pset: PointSet) -> dict:
    if isinstance(pset, SegmentSet):
        return {"name": name, "type": "segment", "fixed_axis": pset.fixed_axis,
                "value": fmt_real(pset.value), "lo": fmt_real(pset.lo),
                "hi": fmt_real(pset.hi)}
    if isinstance(pset, CoordLineSet):
        return {"name": name, "type": "coord-line", "fixed_axis": pset.fixed_axis,
                "value": fmt_real(pset.value)}
    if isinstance(pset, CircleSet):
        return {"name": name, "type": "circle", "center": [fmt_real(pset.cp), fmt_real(pset.cq)],
                "radius": fmt_real(pset.r)}
    if isinstance(pset, BandSet):
        inner = _set_to_json("", pset.base)
        inner.pop("name")
        return {"name": name, "type": "band", "base": inner,
                "halfwidth": fmt_real(pset.halfwidth)}
    if isinstance(pset, UnionSet):
        members = []
        for m in pset.members:
            d = _set_to_json("", m)
            d.pop("name")
            members.append(d)
        return {"name": name, "type": "union", "members": members}
    raise UsageError(f"unknown point set type {type(pset).__name__}")


def _set_from_json(spec: dict) -> PointSet:
    t = spec["type"]
    if t == "segment":
        return SegmentSet(spec["fixed_axis"], parse_real(spec["value"]),
                          parse_real(spec["lo"]), parse_real(spec["hi"]))
    if t == "coord-line":
        return CoordLineSet(spec["fixed_axis"], parse_real(spec["value"]))
    if t == "circle":
        return CircleSet(parse_real(spec["center"][0]), parse_real(spec["center"][1]),
                         parse_real(spec["radius"]))
    if t == "band":
        return BandSet(_set_from_json(spec["base"]), parse_real(spec["halfwidth"]))
    if t == "union":
        return UnionSet(tuple(_set_from_json(m) for m in spec["members"]))
    raise UsageError(f"unknown point set type in scene file: {t!r}")


def region_to_json(region: Region) -> dict:
    if isinstance(region, RectRegion):
        return {"name": region.name, "type": "rect",
                "p0": fmt_real(region.p0), "p1": fmt_real(region.p1),
                "q0": fmt_real(region.q0), "q1": fmt_real(region.q1)}
    if isinstance(region, DiscRegion):
        return {"name": region.name, "type": "disc",
                "center": [fmt_real(region.cp), fmt_real(region.cq)],
                "radius": fmt_real(region.r)}
    if isinstance(region, ComplementRegion):
        return {"name": region.name, "type": "complement", "of": region.inner.name}
    if isinstance(region, UnionRegion):
        return {"name": region.name, "type": "union",
                "members": [m.name for m in region.members]}
    raise UsageError(f"unknown region type {type(region).__name__}")


def _region_from_json(spec: dict, known: dict) -> Region:
    t = spec["type"]
    if t == "rect":
        return RectRegion(parse_real(spec["p0"]), parse_real(spec["p1"]),
                          parse_real(spec["q0"]), parse_real(spec["q1"]),
                          name=spec["name"])
    if t == "disc":
        return DiscRegion(parse_real(spec["center"][0]), parse_real(spec["center"][1]),
                          parse_real(spec["radius"]), name=spec["name"])
    if t == "complement":
        return ComplementRegion(known[spec["of"]], name=spec["name"])
    if t == "union":
        return UnionRegion(tuple(known[nm] for nm in spec["members"]), name=spec["name"])
    raise UsageError(f"unknown region type in scene file: {t!r}")


def scene_to_json_dict(scene: Scene) -> dict:
    surf = {"kind": scene.surface.kind, "area": fmt_real(scene.surface.area),
            "extents": [[fmt_real(a), fmt_real(b)] for a, b in scene.surface.extents]}
    if scene.surface.kind == "plane-square":
        surf["margin"] = fmt_real(scene.surface.margin)
    return {
        "surface": surf,
        "sets": [_set_to_json(nm, ps) for nm, ps in scene.sets.items()],
        "class": scene.constraint,
        "expected": scene.expected,
        "metadata": scene.metadata,
    }


def scene_to_json(scene: Scene) -> str:
    return json.dumps(scene_to_json_dict(scene), indent=2) + "\n"


def scene_from_json_dict(obj: dict) -> Scene:
    surf = obj["surface"]
    kind = surf["kind"]
    extents = [(parse_real(a), parse_real(b)) for a, b in surf["extents"]]
    surface = make_surface(kind, area=parse_real(surf["area"]),
                           extents=extents if kind == "plane-square" else None,
                           margin=parse_real(surf.get("margin", "0.05"))
                           if kind == "plane-square" else 0.05)
    sets = {}
    for spec in obj["sets"]:
        sets[spec["name"]] = _set_from_json(spec)
    return Scene(surface=surface, sets=sets, constraint=obj.get("class") or {},
                 expected=obj.get("expected"), metadata=obj.get("metadata", {}))


def scene_from_json(text: str) -> Scene:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed scene file: {e}") from e
    return scene_from_json_dict(obj)


def scene_hash(scene: Scene) -> str:
    return hashlib.sha256(scene_to_json(scene).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Scene validation
# ---------------------------------------------------------------------------

def _pair_min_distance(surface, A: PointSet, B: PointSet, res: float) -> float:
    nA = min(int(set_length(A, surface) / res) + 2, 4096)
    pts = set_sample(A, surface, nA)
    return float(np.min(set_distance(B, surface, pts[:, 0], pts[:, 1])))


def _line_intersection(a1, a2):
    """Intersection of lines a.x * s + a.y * t + a.c = 0; None if parallel."""
    (al, be, ga), (al2, be2, ga2) = a1, a2
    det = al * be2 - al2 * be
    if abs(det) < 1e-14 * max(1.0, abs(al), abs(be), abs(al2), abs(be2)):
        return None
    s = (-ga * be2 + ga2 * be) / det
    t = (-al * ga2 + al2 * ga) / det
    return (s, t)


def polygon_vertices(polygon: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Vertices of the convex polygon cut out by affine edges a_i >= 0.

    Edge i and edge i+1 (cyclically) are required to meet; each such meeting
    point must satisfy every other edge inequality.
    """
    N = len(polygon)
    verts = []
    for i in range(N):
        v = _line_intersection(polygon[i], polygon[(i + 1) % N])
        if v is None:
            raise SceneValidationError(
                f"polygon edges {i} and {(i + 1) % N} are parallel")
        verts.append(v)
    for (s, t) in verts:
        for k, (al, be, ga) in enumerate(polygon):
            if al * s + be * t + ga < -1e-9:
                raise SceneValidationError(
                    f"polygon vertex ({s:.6g},{t:.6g}) violates edge {k}: not convex/consistent")
    return verts


def check_diamond_condition(polygon, omega: dict) -> None:
    """Every pairwise edge-line intersection inside closure(Omega) is a vertex."""
    N = len(polygon)
    verts = polygon_vertices(polygon)
    for i in range(N):
        for j in range(i + 1, N):
            pt = _line_intersection(polygon[i], polygon[j])
            if pt is None:
                continue
            if omega.get("type", "plane") == "plane":
                inside = True
            else:
                c = omega["center"]
                rad = omega["radius"]
                inside = math.hypot(pt[0] - c[0], pt[1] - c[1]) <= rad + 1e-9
            if inside:
                is_vertex = any(math.hypot(pt[0] - v[0], pt[1] - v[1]) <= 1e-9
                                for v in verts)
                if not is_vertex:
                    raise SceneValidationError(
                        f"edge lines {i},{j} meet at ({pt[0]:.6g},{pt[1]:.6g}) inside "
                        "the domain closure but not at a polygon vertex")


def validate_scene(scene: Scene) -> None:
    """Check the scene's class-level side conditions; raise on violation."""
    cls = scene.constraint
    kind = cls.get("kind")
    surface = scene.surface

    def get(name_key):
        nm = cls[name_key]
        if nm not in scene.sets:
            raise SceneValidationError(f"class references unknown set {nm!r}")
        return scene.sets[nm]

    res = surface.diameter * 2.0 ** -10
    margin = 4.0 * res

    if kind in (None, "", "none"):
        return
    if kind in ("F3", "F3p"):
        X, Y, Z = get("X"), get("Y"), get("Z")
        nX = min(int(set_length(X, surface) / res) + 2, 4096)
        pts = set_sample(X, surface, nX)
        dY = set_distance(Y, surface, pts[:, 0], pts[:, 1])
        dZ = set_distance(Z, surface, pts[:, 0], pts[:, 1])
        bad = (dY <= margin) & (dZ <= margin)
        if bool(np.any(bad)):
            k = int(np.argmax(bad))
            raise SceneValidationError(
                f"triple intersection: point ({pts[k,0]:.6g},{pts[k,1]:.6g}) of X is "
                f"within {margin:.3g} of both Y and Z")
    elif kind in ("F4", "F4p"):
        X0, X1 = get("X0"), get("X1")
        Y0, Y1 = get("Y0"), get("Y1")
        d = _pair_min_distance(surface, X0, X1, res)
        if d <= margin:
            raise SceneValidationError(f"X0 and X1 are {d:.3g} apart (< margin {margin:.3g})")
        d = _pair_min_distance(surface, Y0, Y1, res)
        if d <= margin:
            raise SceneValidationError(f"Y0 and Y1 are {d:.3g} apart (< margin {margin:.3g})")
    elif kind == "FN":
        names = cls["sets"]
        N = len(names)
        if N < 3:
            raise SceneValidationError("FN class needs at least 3 sets")
        sets = []
        for nm in names:
            if nm not in scene.sets:
                raise SceneValidationError(f"class references unknown set {nm!r}")
            sets.append(scene.sets[nm])
        for i in range(N):
            for j in range(i + 1, N):
                gap = min((j - i) % N, (i - j) % N)
                if gap <= 1:
                    continue
                d = _pair_min_distance(surface, sets[i], sets[j], res)
                if d <= margin:
                    raise SceneValidationError(
                        f"sets {names[i]!r} and {names[j]!r} are non-adjacent in the cycle "
                        f"but only {d:.3g} apart")
        polygon = [[parse_real(c) for c in edge] for edge in cls["polygon"]]
        omega = dict(cls.get("omega", {"type": "plane"}))
        if omega.get("type") == "disc":
            omega = {"type": "disc",
                     "center": [parse_real(omega["center"][0]), parse_real(omega["center"][1])],
                     "radius": parse_real(omega["radius"])}
        check_diamond_condition(polygon, omega)
    else:
        raise SceneValidationError(f"unknown class kind {kind!r}")

    if surface.kind == "plane-square":
        (p0, p1), (q0, q1) = surface.extents
        mp = surface.margin * (p1 - p0)
        mq = surface.margin * (q1 - q0)
        for nm, ps in scene.sets.items():
            pts = set_sample(ps, surface, 256)
            if (np.any(pts[:, 0] < p0 + mp) or np.any(pts[:, 0] > p1 - mp)
                    or np.any(pts[:, 1] < q0 + mq) or np.any(pts[:, 1] > q1 - mq)):
                raise SceneValidationError(
                    f"set {nm!r} enters the padding margin of the plane square")
