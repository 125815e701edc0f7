"""Scalar fields on a surface: Poisson brackets, norms, integrals.

Sign convention (used everywhere downstream): with ``omega = sigma dp^dq``,

    {F, G} = (F_q * G_p - F_p * G_q) / sigma

so that ``{p, q} = -1`` on the unit torus, the Hamiltonian flow of ``G`` is
``dp/dt = -G_q/sigma, dq/dt = G_p/sigma`` and ``d/dt (F o g_t) = {F, G} o g_t``.
A direct consequence is the boundary identity

    oint_{ccw boundary} F dG  =  - int {F, G} omega

which the quadrature routines below reproduce (the quadrilateral pair has
boundary integral exactly +1 and area integral exactly -1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import SurfaceMismatchError, UsageError
from .geometry import (DiscRegion, ComplementRegion, Point, RectRegion, Region,
                       Surface, UnionRegion, Z_CLIP, area)

# Relative finite-difference steps by noise depth: differentiating a value
# whose own evaluation went through d finite-difference layers needs a larger
# step (balance h^2 truncation against noise/h).
_FD_STEPS = (6e-6, 3e-4, 5e-3, 2e-2)


def _fd_step(partials_depth: int, span: float) -> float:
    return _FD_STEPS[min(max(partials_depth, 1), len(_FD_STEPS)) - 1] * span


def _arr(x):
    return np.asarray(x, dtype=np.float64)


class ScalarField:
    """A smooth scalar function on a surface.

    Backed either by callables (value plus optional exact first partials) or
    by grid node values with cubic interpolation.  Fields are immutable;
    arithmetic (`+`, `-`, `*` by field or scalar) combines values and partials
    exactly via the product rule.
    """

    __slots__ = ("surface", "label", "value_depth", "partials_depth",
                 "support", "_value_fn", "_partials_fn")

    def __init__(self, surface: Surface, value_fn: Callable,
                 partials_fn: Optional[Callable] = None, label: str = "f",
                 value_depth: int = 0, partials_depth: Optional[int] = None,
                 support: Optional[Region] = None):
        self.surface = surface
        self._value_fn = value_fn
        self._partials_fn = partials_fn
        self.label = label
        self.value_depth = value_depth
        if partials_depth is None:
            partials_depth = value_depth if partials_fn is not None else value_depth + 1
        self.partials_depth = partials_depth
        self.support = support

    # -- construction -------------------------------------------------------

    @classmethod
    def from_callable(cls, surface, value_fn, partials_fn=None, label="f",
                      support=None):
        return cls(surface, value_fn, partials_fn, label=label, support=support)

    @classmethod
    def constant(cls, surface, c: float, label: Optional[str] = None):
        c = float(c)

        def val(p, q):
            p, q = np.broadcast_arrays(_arr(p), _arr(q))
            return np.full(p.shape, c)

        def par(p, q):
            p, q = np.broadcast_arrays(_arr(p), _arr(q))
            z = np.zeros(p.shape)
            return z, z.copy()

        return cls(surface, val, par, label=label or repr(c))

    @classmethod
    def from_expression(cls, surface, expr: str, label: Optional[str] = None):
        """Parse an expression over (p, q) — or (z, phi, x, y) on the sphere."""
        import sympy as sp
        from sympy.parsing.sympy_parser import parse_expr

        P, Q = sp.symbols("p q", real=True)
        allowed = {"sin": sp.sin, "cos": sp.cos, "tan": sp.tan, "exp": sp.exp,
                   "sqrt": sp.sqrt, "log": sp.log, "tanh": sp.tanh,
                   "atan": sp.atan, "pi": sp.pi, "Abs": sp.Abs}
        if surface.kind == "round-sphere":
            local = dict(allowed, z=P, phi=Q,
                         x=sp.sqrt(1 - P ** 2) * sp.cos(Q),
                         y=sp.sqrt(1 - P ** 2) * sp.sin(Q))
        else:
            local = dict(allowed, p=P, q=Q)
        try:
            e = parse_expr(expr, local_dict=local, evaluate=True)
        except Exception as exc:
            raise UsageError(f"cannot parse field expression {expr!r}: {exc}") from exc
        bad = e.free_symbols - {P, Q}
        if bad:
            raise UsageError(f"unknown symbols in field expression: {sorted(map(str, bad))}")
        fv = sp.lambdify((P, Q), e, "numpy")
        fp = sp.lambdify((P, Q), sp.diff(e, P), "numpy")
        fq = sp.lambdify((P, Q), sp.diff(e, Q), "numpy")

        def val(p, q):
            p, q = np.broadcast_arrays(_arr(p), _arr(q))
            return np.broadcast_to(_arr(fv(p, q)), p.shape).copy()

        def par(p, q):
            p, q = np.broadcast_arrays(_arr(p), _arr(q))
            return (np.broadcast_to(_arr(fp(p, q)), p.shape).copy(),
                    np.broadcast_to(_arr(fq(p, q)), p.shape).copy())

        return cls(surface, val, par, label=label or expr)

    @classmethod
    def from_grid(cls, surface, values: np.ndarray, label: str = "grid"):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise UsageError("grid fields need a square (n, n) value array")
        n = values.shape[0]
        pnodes, qnodes, hp, hq = surface.grid_axes(n)
        per_p, per_q = surface.periodic
        gp, gq = kernels.grad_grid(values, hp, hq, per_p, per_q)
        p0, q0 = pnodes[0], qnodes[0]

        def to_index(p, q):
            p, q = surface.normalize(p, q)
            u = (_arr(p) - p0) / hp
            v = (_arr(q) - q0) / hq
            if not per_p:
                u = np.clip(u, 0.0, n - 1.0)
            if not per_q:
                v = np.clip(v, 0.0, n - 1.0)
            return u, v

        def val(p, q):
            u, v = to_index(p, q)
            return kernels.interp_cubic(values, u, v, per_p, per_q)

        def par(p, q):
            u, v = to_index(p, q)
            return (kernels.interp_cubic(gp, u, v, per_p, per_q),
                    kernels.interp_cubic(gq, u, v, per_p, per_q))

        f = cls(surface, val, par, label=label, value_depth=1, partials_depth=1)
        return f

    # -- evaluation ----------------------------------------------------------

    def value(self, p, q) -> np.ndarray:
        return self._value_fn(p, q)

    def partials(self, p, q) -> tuple[np.ndarray, np.ndarray]:
        if self._partials_fn is not None:
            return self._partials_fn(p, q)
        return self._fd_partials(p, q)

    @property
    def has_exact_partials(self) -> bool:
        return self._partials_fn is not None and self.partials_depth == self.value_depth

    def _fd_partials(self, p, q):
        surf = self.surface
        p, q = np.broadcast_arrays(_arr(p), _arr(q))
        out = []
        for axis, x in ((0, p), (1, q)):
            span = surf.span[axis]
            h = _fd_step(self.partials_depth, span)
            if surf.periodic[axis]:
                if axis == 0:
                    d = (self.value(p + h, q) - self.value(p - h, q)) / (2 * h)
                else:
                    d = (self.value(p, q + h) - self.value(p, q - h)) / (2 * h)
            else:
                lo, hi = surf.extents[axis]
                x0 = np.clip(x, lo + h, hi - h)     # shifted center stays inside
                if axis == 0:
                    fm = self.value(x0 - h, q)
                    f0 = self.value(x0, q)
                    fp_ = self.value(x0 + h, q)
                else:
                    fm = self.value(p, x0 - h)
                    f0 = self.value(p, x0)
                    fp_ = self.value(p, x0 + h)
                # second-order: derivative at x from the 3-point stencil at x0
                t = (x - x0) / h
                d = ((t - 0.5) * fm - 2.0 * t * f0 + (t + 0.5) * fp_) / h
            out.append(np.asarray(d, dtype=np.float64))
        return out[0], out[1]

    # -- arithmetic ----------------------------------------------------------

    def _combine(self, other, vfn, pfn, label):
        if isinstance(other, ScalarField) and other.surface != self.surface:
            raise SurfaceMismatchError("fields live on different surfaces")
        vd = max(self.value_depth,
                 other.value_depth if isinstance(other, ScalarField) else 0)
        pd = max(self.partials_depth,
                 other.partials_depth if isinstance(other, ScalarField) else 0)
        return ScalarField(self.surface, vfn, pfn, label=label,
                           value_depth=vd, partials_depth=pd)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            def val(p, q):
                return self.value(p, q) + other.value(p, q)

            def par(p, q):
                ap, aq = self.partials(p, q)
                bp, bq = other.partials(p, q)
                return ap + bp, aq + bq
        else:
            c = float(other)

            def val(p, q):
                return self.value(p, q) + c

            def par(p, q):
                return self.partials(p, q)
        return self._combine(other, val, par, f"({self.label}+{getattr(other, 'label', other)})")

    __radd__ = __add__

    def __neg__(self):
        def val(p, q):
            return -self.value(p, q)

        def par(p, q):
            a, b = self.partials(p, q)
            return -a, -b
        return self._combine(0.0, val, par, f"(-{self.label})")

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarField) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            def val(p, q):
                return self.value(p, q) * other.value(p, q)

            def par(p, q):
                fv = self.value(p, q)
                gv = other.value(p, q)
                ap, aq = self.partials(p, q)
                bp, bq = other.partials(p, q)
                return ap * gv + fv * bp, aq * gv + fv * bq
        else:
            c = float(other)

            def val(p, q):
                return c * self.value(p, q)

            def par(p, q):
                a, b = self.partials(p, q)
                return c * a, c * b
        return self._combine(other, val, par, f"({self.label}*{getattr(other, 'label', other)})")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __repr__(self):
        return f"ScalarField({self.label!r} on {self.surface.kind})"


# ---------------------------------------------------------------------------
# Poisson bracket
# ---------------------------------------------------------------------------

def poisson_bracket(F: ScalarField, G: ScalarField) -> ScalarField:
    """{F, G} = (F_q G_p - F_p G_q) / sigma, so {p, q} = -1 on the unit torus."""
    if F.surface != G.surface:
        raise SurfaceMismatchError("poisson_bracket needs fields on one surface")
    inv_sigma = 1.0 / F.surface.density

    def val(p, q):
        fp, fq = F.partials(p, q)
        gp, gq = G.partials(p, q)
        return (fq * gp - fp * gq) * inv_sigma

    vd = max(F.partials_depth, G.partials_depth)
    return ScalarField(F.surface, val, None, label=f"{{{F.label},{G.label}}}",
                       value_depth=vd, partials_depth=vd + 1)


def surface_mesh(surface: Surface, n: int):
    """(n, n) meshgrid of chart nodes, indexing 'ij' (axis 0 = p)."""
    pn, qn, hp, hq = surface.grid_axes(n)
    P, Q = np.meshgrid(pn, qn, indexing="ij")
    return P, Q, hp, hq


def bracket_mesh(F: ScalarField, G: ScalarField, n: int):
    """Node values of {F, G} on the n x n grid (exact partials where present)."""
    if F.surface != G.surface:
        raise SurfaceMismatchError("bracket_mesh needs fields on one surface")
    P, Q, _, _ = surface_mesh(F.surface, n)
    fp, fq = F.partials(P, Q)
    gp, gq = G.partials(P, Q)
    return (fq * gp - fp * gq) / F.surface.density


# ---------------------------------------------------------------------------
# Sup-norm with local refinement and a Lipschitz safety margin
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BracketReport:
    """Sup-norm report: refined grid max, argmax, and a safety margin.

    ``sup_norm`` (grid max plus margin) is a sound upper bound for guarantees;
    ``lower`` (grid max minus margin) is what certificate-side checks use.
    """
    field: ScalarField
    value: float
    argmax: Point
    margin: float
    grid_n: int

    @property
    def sup_norm(self) -> float:
        return self.value + self.margin

    @property
    def upper(self) -> float:
        return self.value + self.margin

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.margin)


def _refine_argmax(F: ScalarField, p0: float, q0: float, h: float,
                   rounds: int = 3) -> tuple[float, float, float]:
    surf = F.surface
    best = (abs(float(F.value(p0, q0))), p0, q0)
    half = h
    for _ in range(rounds):
        dp = np.linspace(-half, half, 9)
        P = best[1] + dp[:, None] + np.zeros((1, 9))
        Q = best[2] + np.zeros((9, 1)) + dp[None, :]
        if not surf.periodic[0]:
            lo, hi = surf.extents[0]
            if surf.kind == "round-sphere":
                lo, hi = -1.0 + Z_CLIP, 1.0 - Z_CLIP
            P = np.clip(P, lo, hi)
        if not surf.periodic[1]:
            lo, hi = surf.extents[1]
            Q = np.clip(Q, lo, hi)
        V = np.abs(F.value(P, Q))
        k = int(np.argmax(V))
        cand = (float(V.flat[k]), float(P.flat[k]), float(Q.flat[k]))
        if cand[0] > best[0]:
            best = cand
        half *= 0.25
    return best


def sup_norm(F: ScalarField, grid_n: int = 256, refine: bool = True,
             with_margin: bool = True) -> BracketReport:
    """Max of |F| over an evaluation grid, refined around the argmax.

    The margin is L*h/2*sqrt(2) with L the largest gradient magnitude seen on
    the same grid — an estimated (not certified) cell-interior correction.
    """
    P, Q, hp, hq = surface_mesh(F.surface, grid_n)
    V = np.abs(F.value(P, Q))
    k = int(np.argmax(V))
    value = float(V.flat[k])
    pa, qa = float(P.flat[k]), float(Q.flat[k])
    if refine:
        value, pa, qa = _refine_argmax(F, pa, qa, max(hp, hq))
    margin = 0.0
    if with_margin:
        gp, gq = F.partials(P, Q)
        L = float(np.max(np.hypot(gp, gq)))
        margin = L * 0.5 * math.hypot(hp, hq)
    return BracketReport(field=F, value=value, argmax=Point(pa, qa),
                         margin=margin, grid_n=grid_n)


def bracket_report(F: ScalarField, G: ScalarField, grid_n: int = 256,
                   **kw) -> BracketReport:
    return sup_norm(poisson_bracket(F, G), grid_n=grid_n, **kw)


# ---------------------------------------------------------------------------
# Line and area integrals
# ---------------------------------------------------------------------------

def _midpoints(surface: Surface, pts: np.ndarray) -> np.ndarray:
    a = pts[:-1]
    d0 = surface.wrap_delta(pts[1:, 0] - a[:, 0], 0)
    d1 = surface.wrap_delta(pts[1:, 1] - a[:, 1], 1)
    mid = np.stack([a[:, 0] + 0.5 * d0, a[:, 1] + 0.5 * d1], axis=1)
    mp, mq = surface.normalize(mid[:, 0], mid[:, 1])
    return np.stack([mp, mq], axis=1)


def _trapezoid_FdG(F: ScalarField, G: ScalarField, pts: np.ndarray) -> float:
    fv = np.asarray(F.value(pts[:, 0], pts[:, 1]), dtype=np.float64)
    gv = np.asarray(G.value(pts[:, 0], pts[:, 1]), dtype=np.float64)
    return float(np.sum(0.5 * (fv[:-1] + fv[1:]) * np.diff(gv)))


def line_integral_FdG(F: ScalarField, G: ScalarField, path) -> tuple[float, float]:
    """Quadrature of ``F dG`` along a polyline path; returns (value, error).

    The path is used exactly as given (closed loops repeat the first point at
    the end).  The error estimate comes from one midpoint refinement.
    """
    if F.surface != G.surface:
        raise SurfaceMismatchError("line_integral_FdG needs fields on one surface")
    pts = np.asarray(path, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise UsageError("path must be an (m, 2) array with m >= 3")
    surf = F.surface
    coarse = _trapezoid_FdG(F, G, pts)
    mids = _midpoints(surf, pts)
    fine_pts = np.empty((2 * len(pts) - 1, 2))
    fine_pts[0::2] = pts
    fine_pts[1::2] = mids
    fine = _trapezoid_FdG(F, G, fine_pts)
    return fine, abs(fine - coarse) / 3.0


def _midpoint_rect(F: ScalarField, p0, p1, q0, q1, n: int) -> float:
    hp = (p1 - p0) / n
    hq = (q1 - q0) / n
    pc = p0 + hp * (np.arange(n) + 0.5)
    qc = q0 + hq * (np.arange(n) + 0.5)
    P, Q = np.meshgrid(pc, qc, indexing="ij")
    return float(np.sum(F.value(P, Q))) * hp * hq


def _chart_integral(F: ScalarField, region: Region, n: int) -> float:
    surf = F.surface
    if isinstance(region, RectRegion):
        return _midpoint_rect(F, region.p0, region.p1, region.q0, region.q1, n)
    if isinstance(region, DiscRegion):
        # equal-area polar map: p = c + r*sqrt(u)*e(theta)
        u = (np.arange(n) + 0.5) / n
        th = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        U, T = np.meshgrid(u, th, indexing="ij")
        R = region.r * np.sqrt(U)
        P = region.cp + R * np.cos(T)
        Q = region.cq + R * np.sin(T)
        return float(np.mean(F.value(P, Q))) * math.pi * region.r ** 2
    if isinstance(region, ComplementRegion):
        (p0, p1), (q0, q1) = surf.extents
        if surf.kind == "round-sphere":
            p0, p1 = -1.0, 1.0
        whole = _midpoint_rect(F, p0, p1, q0, q1, n)
        return whole - _chart_integral(F, region.inner, n)
    if isinstance(region, UnionRegion):
        return sum(_chart_integral(F, m, n) for m in region.members)
    raise UsageError(f"unknown region type {type(region).__name__}")


def area_integral(F: ScalarField, region: Region, n: int = 256) -> tuple[float, float]:
    """``int_region F omega`` by the midpoint rule; returns (value, error)."""
    sigma = F.surface.density
    coarse = _chart_integral(F, region, n) * sigma
    fine = _chart_integral(F, region, 2 * n) * sigma
    return fine, abs(fine - coarse) / 3.0


def full_surface_region(surface: Surface) -> RectRegion:
    (p0, p1), (q0, q1) = surface.extents
    return RectRegion(p0, p1, q0, q1, name="whole-surface")


# ---------------------------------------------------------------------------
# Iterated brackets, deformation positivity, FD hygiene
# ---------------------------------------------------------------------------

def iterated_bracket_norm(F: ScalarField, G: ScalarField, N: int,
                          grid_n: int = 256) -> float:
    """Sum of sup-norms of all left-normed Lie monomials of degree N in F, G.

    Nested finite differences get noisier with depth, so N is capped at 4 and
    the steps grow with nesting (see _FD_STEPS).
    """
    if not 2 <= int(N) <= 4:
        raise UsageError("iterated_bracket_norm supports 2 <= N <= 4")
    N = int(N)
    words: list[ScalarField] = [poisson_bracket(F, G)]
    for _ in range(N - 2):
        words = [poisson_bracket(w, X) for w in words for X in (F, G)]
    total = 0.0
    for w in words:
        total += sup_norm(w, grid_n=grid_n, refine=True, with_margin=False).value
    return total


def deformation_positivity(F: ScalarField, G: ScalarField, s: float,
                           grid_n: int = 256) -> bool:
    """True iff 1 - s*{F,G} stays positive on the evaluation grid."""
    if s < 0:
        raise UsageError("deformation parameter s must be >= 0")
    if s == 0.0:
        return True
    K = bracket_mesh(F, G, grid_n)
    return bool(np.min(1.0 - s * K) > 0.0)


def fd_consistency_check(F: ScalarField, n_points: int = 1000,
                         seed: int = 0) -> dict:
    """Compare supplied partials with centered differences at two steps.

    For a smooth field the max relative discrepancy should drop ~4x when the
    step is halved (second-order stencil).
    """
    if F._partials_fn is None:
        return {"applicable": False, "reason": "field has no supplied partials"}
    surf = F.surface
    rng = np.random.Generator(np.random.Philox(seed))
    (p0, p1), (q0, q1) = surf.extents
    if surf.kind == "round-sphere":
        p0, p1 = -1.0 + 2e-3, 1.0 - 2e-3
    pad_p = 0.0 if surf.periodic[0] else 1e-3 * (p1 - p0)
    pad_q = 0.0 if surf.periodic[1] else 1e-3 * (q1 - q0)
    P = rng.uniform(p0 + pad_p, p1 - pad_p, n_points)
    Q = rng.uniform(q0 + pad_q, q1 - pad_q, n_points)
    ap, aq = F.partials(P, Q)
    scale = float(np.max(np.hypot(ap, aq))) + 1e-30

    def max_err(h_rel):
        hp = h_rel * surf.span[0]
        hq = h_rel * surf.span[1]
        dp = (F.value(P + hp, Q) - F.value(P - hp, Q)) / (2 * hp)
        dq = (F.value(P, Q + hq) - F.value(P, Q - hq)) / (2 * hq)
        return float(np.max(np.hypot(dp - ap, dq - aq))) / scale

    e1 = max_err(1e-4)
    e2 = max_err(5e-5)
    ratio = e1 / e2 if e2 > 0 else float("inf")
    return {"applicable": True, "err_h": e1, "err_half_h": e2,
            "order_ratio": ratio}


# ---------------------------------------------------------------------------
# Random smooth fields (test fodder)
# ---------------------------------------------------------------------------

def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep5_d(t):
    tc = np.clip(t, 0.0, 1.0)
    return 30.0 * tc ** 2 * (1.0 - tc) ** 2 * ((t >= 0.0) & (t <= 1.0))


def _plane_window(surface: Surface) -> ScalarField:
    """Goes 0 -> 1 across the padding margin of a plane square, C^2, exact partials."""
    (p0, p1), (q0, q1) = surface.extents
    m = surface.margin

    def ramp(x, lo, hi, w):
        a = _smoothstep5((x - lo) / w)
        b = _smoothstep5((hi - x) / w)
        return a * b

    def ramp_d(x, lo, hi, w):
        a = _smoothstep5((x - lo) / w)
        b = _smoothstep5((hi - x) / w)
        da = _smoothstep5_d((x - lo) / w) / w
        db = -_smoothstep5_d((hi - x) / w) / w
        return da * b + a * db

    wp = m * (p1 - p0)
    wq = m * (q1 - q0)

    def val(p, q):
        p, q = np.broadcast_arrays(_arr(p), _arr(q))
        return ramp(p, p0 + wp, p1 - wp, wp) * ramp(q, q0 + wq, q1 - wq, wq)

    def par(p, q):
        p, q = np.broadcast_arrays(_arr(p), _arr(q))
        rp = ramp(p, p0 + wp, p1 - wp, wp)
        rq = ramp(q, q0 + wq, q1 - wq, wq)
        return (ramp_d(p, p0 + wp, p1 - wp, wp) * rq,
                rp * ramp_d(q, q0 + wq, q1 - wq, wq))

    return ScalarField(surface, val, par, label="window")


def random_field(surface: Surface, seed: int, terms: int = 3,
                 amplitude: float = 1.0) -> ScalarField:
    """A random smooth field fitting the surface (periodic / pole-smooth /
    compactly supported as appropriate), with exact partials."""
    import sympy as sp

    rng = np.random.Generator(np.random.Philox(seed))
    P, Q = sp.symbols("p q", real=True)
    expr = sp.Integer(0)
    if surface.kind == "round-sphere":
        # polynomials in z plus (1-z^2)^k * trig(k*phi): smooth through poles
        for _ in range(terms):
            k = int(rng.integers(1, 4))
            c1, c2, c3 = rng.normal(0, 1, 3) / (1 + k)
            expr += sp.Float(c1) * P ** int(rng.integers(1, 4))
            expr += (1 - P ** 2) ** k * (sp.Float(c2) * sp.cos(k * Q)
                                         + sp.Float(c3) * sp.sin(k * Q))
    else:
        (p0, p1), (q0, q1) = surface.extents
        sp_p = p1 - p0
        sp_q = q1 - q0
        for _ in range(terms):
            kp = int(rng.integers(0, 4))
            kq = int(rng.integers(0, 4))
            c1, c2 = rng.normal(0, 1, 2) / (1 + kp + kq)
            ap = 2 * sp.pi * kp * (P - p0) / sp_p
            aq = 2 * sp.pi * kq * (Q - q0) / sp_q
            expr += sp.Float(c1) * sp.cos(ap) * sp.cos(aq)
            expr += sp.Float(c2) * sp.sin(ap + aq)
    fv = sp.lambdify((P, Q), expr, "numpy")
    fp = sp.lambdify((P, Q), sp.diff(expr, P), "numpy")
    fq = sp.lambdify((P, Q), sp.diff(expr, Q), "numpy")

    def val(p, q):
        p, q = np.broadcast_arrays(_arr(p), _arr(q))
        return np.broadcast_to(_arr(fv(p, q)), p.shape).copy() * amplitude

    def par(p, q):
        p, q = np.broadcast_arrays(_arr(p), _arr(q))
        return (np.broadcast_to(_arr(fp(p, q)), p.shape).copy() * amplitude,
                np.broadcast_to(_arr(fq(p, q)), p.shape).copy() * amplitude)

    base = ScalarField(surface, val, par, label=f"random[{seed}]")
    if surface.kind == "plane-square":
        return base * _plane_window(surface)
    return base
