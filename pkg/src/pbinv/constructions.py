"""Explicit function families with certified properties.

Everything here is built from one reusable gadget: a piecewise derivative
profile whose segments are constants joined by quintic-smoothstep blends.
Integrating the profile in closed form gives C^2 (mostly C^3) functions whose
derivative bounds hold exactly (a blend never leaves the interval spanned by
its endpoint slopes), so every advertised inequality can be checked against
closed-form quantities rather than against a fitted curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import GuaranteeViolation, UsageError
from .fields import (ScalarField, bracket_mesh, poisson_bracket, sup_norm,
                     surface_mesh)
from .geometry import (Point, RectRegion, ComplementRegion, SegmentSet,
                       Surface, make_surface)
from . import dynamics

# ---------------------------------------------------------------------------
# Quintic smoothstep and its antiderivative
# ---------------------------------------------------------------------------

def _S(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 + x * (-15.0 + 6.0 * x))


def _IS(x):
    """Antiderivative of the quintic smoothstep with _IS(0) = 0; _IS(1) = 1/2."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 4 * (2.5 + x * (-3.0 + x))


class SlopeProfile:
    """A piecewise slope profile: constants joined by smoothstep blends.

    Segment i covers [breaks[i], breaks[i+1]] and carries the derivative
    c0 + (c1 - c0) * S((s - breaks[i]) / len_i).  The profile is zero outside
    [breaks[0], breaks[-1]].  ``u`` is its exact integral with u(breaks[0]) = 0.
    """

    def __init__(self, breaks, slopes):
        breaks = np.asarray(breaks, dtype=np.float64)
        if np.any(np.diff(breaks) <= 0):
            raise UsageError("profile breakpoints must be strictly increasing")
        if len(slopes) != len(breaks) - 1:
            raise UsageError("need one (c0, c1) pair per segment")
        self.breaks = breaks
        self.c0 = np.array([a for a, _ in slopes], dtype=np.float64)
        self.c1 = np.array([b for _, b in slopes], dtype=np.float64)
        self.lens = np.diff(breaks)
        seg_int = self.lens * 0.5 * (self.c0 + self.c1)
        self.cum = np.concatenate([[0.0], np.cumsum(seg_int)])

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    @property
    def max_abs_slope(self) -> float:
        return float(max(np.max(np.abs(self.c0)), np.max(np.abs(self.c1))))

    def _locate(self, s):
        s = np.asarray(s, dtype=np.float64)
        idx = np.searchsorted(self.breaks, s, side="right") - 1
        idx = np.clip(idx, 0, len(self.lens) - 1)
        return s, idx

    def d(self, s):
        """Derivative (the profile itself)."""
        s, i = self._locate(s)
        x = (s - self.breaks[i]) / self.lens[i]
        val = self.c0[i] + (self.c1[i] - self.c0[i]) * _S(x)
        inside = (s >= self.breaks[0]) & (s <= self.breaks[-1])
        return np.where(inside, val, 0.0)

    def u(self, s):
        """Exact integral of the profile from breaks[0]."""
        s, i = self._locate(s)
        x = np.clip((s - self.breaks[i]) / self.lens[i], 0.0, 1.0)
        val = (self.cum[i] + self.c0[i] * x * self.lens[i]
               + (self.c1[i] - self.c0[i]) * self.lens[i] * _IS(x))
        lo = s < self.breaks[0]
        hi = s > self.breaks[-1]
        return np.where(lo, 0.0, np.where(hi, self.total, val))


# ---------------------------------------------------------------------------
# Guarantees
# ---------------------------------------------------------------------------

@dataclass
class Claim:
    name: str
    bound: float
    measured: float

    @property
    def satisfied(self) -> bool:
        return self.measured <= self.bound

    def as_dict(self) -> dict:
        return {"name": self.name, "bound": self.bound,
                "measured": self.measured, "satisfied": self.satisfied}


@dataclass
class ConstructedPair:
    """A pair of fields plus the inequalities its construction certifies."""
    F: ScalarField
    G: ScalarField
    construction: str
    claims: list
    params: dict = field(default_factory=dict)
    sets: dict = field(default_factory=dict)
    regions: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.F, self.G))

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.claims)

    def raise_on_violation(self) -> None:
        for c in self.claims:
            if not c.satisfied:
                raise GuaranteeViolation(
                    f"{self.construction}: claim {c.name!r} violated "
                    f"(measured {c.measured:.6g} > bound {c.bound:.6g})")

    def record(self) -> dict:
        return {"construction": self.construction,
                "params": self.params,
                "claims": [c.as_dict() for c in self.claims],
                "notes": self.notes}


# ---------------------------------------------------------------------------
# smooth_step
# ---------------------------------------------------------------------------

class StepFunction:
    """C^2 step: 0 left of the margin, 1 right of it, derivative <= 1 + 2*delta."""

    def __init__(self, delta: float):
        if not 0.0 < delta < 0.25:
            raise UsageError("smooth_step needs 0 < delta < 1/4")
        a = 0.5 * delta
        w = 0.5 * delta * (1.0 - 2.0 * delta) / (1.0 + 2.0 * delta)
        h = 1.0 / (1.0 - delta - w)
        self.delta = delta
        self.window = w
        self.slope = h
        self.derivative_bound = 1.0 + 2.0 * delta
        self._profile = SlopeProfile(
            [a, a + w, 1.0 - a - w, 1.0 - a],
            [(0.0, h), (h, h), (h, 0.0)])

    def __call__(self, s):
        return self._profile.u(s)

    def d(self, s):
        return self._profile.d(s)


def smooth_step(delta: float) -> StepFunction:
    """A smooth 0-to-1 step with flat margins and derivative <= 1 + 2*delta.

    The flats cover [0, delta/2] and [1 - delta/2, 1]; a step that is flat on
    the full [0, delta] margin would need mean slope 1/(1-2*delta) > 1+2*delta,
    so the margin is split to keep the derivative bound strict.  Symmetric:
    u(s) + u(1-s) = 1 exactly.
    """
    return StepFunction(delta)


# ---------------------------------------------------------------------------
# Triangle cutoff map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneMap:
    """A plane-to-plane map with a certified Jacobian-determinant bound."""
    fn: Callable
    kappa: float
    K: float
    delta: float
    sigma: float
    jac_bound: float
    label: str = "triangle-cutoff"

    def __call__(self, s, t):
        return self.fn(s, t)

    def jacobian(self, s, t, h: float = 1e-6):
        """Finite-difference Jacobian determinant at the given points."""
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        a1, b1 = self.fn(s + h, t)
        a2, b2 = self.fn(s - h, t)
        a3, b3 = self.fn(s, t + h)
        a4, b4 = self.fn(s, t - h)
        dss = (a1 - a2) / (2 * h)
        dts = (b1 - b2) / (2 * h)
        dst = (a3 - a4) / (2 * h)
        dtt = (b3 - b4) / (2 * h)
        return dss * dtt - dst * dts


def _radial_profile(sigma: float, window: float) -> SlopeProfile:
    """Normalized radius remap: identity to 1/2, reaches 1 at rho = 1 exactly.

    Slope profile: 1 on [0, 1/2 - w], blends to sigma, rides at sigma, blends
    to 0 ending at 1.  With sigma = 1/(1 - 2w) the total integral is exactly 1.
    """
    w = window
    rho1 = 0.5 + 1.0 / (2.0 * sigma)      # where the ramp budget completes
    return SlopeProfile(
        [0.0, 0.5 - w, 0.5 + w, rho1 - w, rho1 + w],
        [(1.0, 1.0), (1.0, sigma), (sigma, sigma), (sigma, 0.0)])


def _jac_factor(sigma: float) -> float:
    """Pointwise Jacobian bound of one radial push: psi' * (psi/rho)."""
    return sigma * (2.0 * sigma / (sigma + 1.0))


def _cutoff_jac_bound(K: float) -> float:
    delta = 1.0 - 1.0 / K
    sigma = 1.0 / (1.0 - 0.5 * delta)
    return _jac_factor(sigma) ** 3 / (1.0 - 3.0 * delta) ** 2


def triangle_cutoff_map(kappa: float) -> PlaneMap:
    """A plane map squashing collars of the unit triangle onto its sides.

    T sends {s <= delta} to {s = 0}, {t <= delta} to {t = 0} and
    {s + t >= 1 - delta} to {s + t = 1}, with Jacobian determinant <= 1 + kappa
    everywhere.  The contraction scale K (hence delta = 1 - 1/K) is calibrated
    by bisection so the composite Jacobian bound lands at 1 + 0.98*kappa,
    leaving slack for finite-difference measurement noise.
    """
    if kappa <= 0:
        raise UsageError("triangle_cutoff_map needs kappa > 0")
    target = 1.0 + 0.98 * kappa
    lo, hi = 1.0 + 1e-12, 1.0 / (1.0 - 0.33)   # delta < 0.33
    if _cutoff_jac_bound(hi) < target:
        hi_val = _cutoff_jac_bound(hi)
        target = min(target, hi_val)           # extremely large kappa: saturate
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cutoff_jac_bound(mid) < target:
            lo = mid
        else:
            hi = mid
    K = lo
    delta = 1.0 - 1.0 / K
    sigma = 1.0 / (1.0 - 0.5 * delta)
    profile = _radial_profile(sigma, 0.25 * delta)

    v1 = (delta, delta)
    v2 = (1.0 - 2.0 * delta, delta)
    v3 = (delta, 1.0 - 2.0 * delta)
    # (vertex, outward normal n, offset c, snap): each radial map pushes the
    # far half [rho > 1/2] of every ray from the vertex toward the line
    # {n.x = c}, with n.v < c so the hit parameter R = (c - n.v)/(n.e) is
    # positive exactly for rays aimed at the line.
    pushes = [
        (v3, (0.0, -1.0), -delta, "t"),          # collapse {t <= delta}
        (v2, (-1.0, 0.0), -delta, "s"),          # collapse {s <= delta}
        (v1, (1.0, 1.0), 1.0 - delta, "st"),     # collapse {s+t >= 1-delta}
    ]

    def push(vx, vy, nx, ny, c, snap, s, t):
        ds = s - vx
        dt = t - vy
        r = np.hypot(ds, dt)
        r_safe = np.where(r > 0, r, 1.0)
        es = ds / r_safe
        et = dt / r_safe
        denom = nx * es + ny * et
        head = c - (nx * vx + ny * vy)           # = 1 - 3*delta > 0
        hit = denom > 1e-12
        R = np.where(hit, head / np.where(hit, denom, 1.0), 1.0)
        rho = np.where(hit, r / R, 0.0)
        g = R * profile.u(rho)
        move = hit & (rho > 0.5) & (r > 0)
        clamp = move & (rho >= 1.0)
        new_s = np.where(move, vx + g * es, s)
        new_t = np.where(move, vy + g * et, t)
        if snap == "s":
            new_s = np.where(clamp, delta, new_s)
        elif snap == "t":
            new_t = np.where(clamp, delta, new_t)
        else:  # hypotenuse: make s + t land exactly on 1 - delta
            new_t = np.where(clamp, (1.0 - delta) - new_s, new_t)
        return new_s, new_t

    def fn(s, t):
        s = np.asarray(s, dtype=np.float64).copy()
        t = np.asarray(t, dtype=np.float64).copy()
        for (vx, vy), (nx, ny), c, snap in pushes:
            s, t = push(vx, vy, nx, ny, c, snap, s, t)
        scale = 1.0 / (1.0 - 3.0 * delta)
        return (s - delta) * scale, (t - delta) * scale

    return PlaneMap(fn=fn, kappa=kappa, K=K, delta=delta, sigma=sigma,
                    jac_bound=_cutoff_jac_bound(K))


def _map_partials(plane_map: PlaneMap, a, b, h: float = 1e-6):
    s1, t1 = plane_map(a + h, b)
    s2, t2 = plane_map(a - h, b)
    s3, t3 = plane_map(a, b + h)
    s4, t4 = plane_map(a, b - h)
    return ((s1 - s2) / (2 * h), (s3 - s4) / (2 * h),
            (t1 - t2) / (2 * h), (t3 - t4) / (2 * h))


def apply_cutoff_pb3(F: ScalarField, G: ScalarField, kappa: float,
                     scene=None, grid_n: int = 256) -> ConstructedPair:
    """(F', G') = T(F, G): clamps the pair into the unit triangle.

    Input must satisfy the three-set inequalities (F <= 0 on X, G <= 0 on Y,
    F + G >= 1 on Z); the output pins exact values near the sets while the
    bracket grows by at most the factor 1 + kappa (Jacobian chain rule).
    """
    if scene is not None:
        from .certificates import check_admissible
        rep = check_admissible(F, G, scene)
        if not rep["admissible"]:
            raise UsageError(
                f"input pair is not admissible for the scene: {rep['failures']}")
    T = triangle_cutoff_map(kappa)

    def compose(component: int, label: str) -> ScalarField:
        def val(p, q):
            a = F.value(p, q)
            b = G.value(p, q)
            return T(a, b)[component]

        def par(p, q):
            a = F.value(p, q)
            b = G.value(p, q)
            d1s, d2s, d1t, d2t = _map_partials(T, a, b)
            fp, fq = F.partials(p, q)
            gp, gq = G.partials(p, q)
            if component == 0:
                return d1s * fp + d2s * gp, d1s * fq + d2s * gq
            return d1t * fp + d2t * gp, d1t * fq + d2t * gq

        vd = max(F.value_depth, G.value_depth)
        pd = max(F.partials_depth, G.partials_depth, 1)
        return ScalarField(F.surface, val, par, label=label,
                           value_depth=vd, partials_depth=pd)

    Fp = compose(0, f"T1({F.label},{G.label})")
    Gp = compose(1, f"T2({F.label},{G.label})")
    sup_in = sup_norm(poisson_bracket(F, G), grid_n=grid_n,
                      with_margin=False).value
    sup_out = sup_norm(poisson_bracket(Fp, Gp), grid_n=grid_n,
                       with_margin=False).value
    claims = [Claim("bracket-inflation", (1.0 + kappa) * sup_in + 1e-9, sup_out)]
    return ConstructedPair(F=Fp, G=Gp, construction="cutoff-pb3",
                           claims=claims,
                           params={"kappa": kappa, "K": T.K, "delta": T.delta},
                           notes={"input_sup": sup_in, "output_sup": sup_out})


# ---------------------------------------------------------------------------
# Quadrilateral pair
# ---------------------------------------------------------------------------

def _tent_profile(alpha: float, beta: float, delta: float,
                  pin: float = 0.0) -> SlopeProfile:
    """Rise 0->1 over [0, alpha], plateau around alpha, fall 1->0 at beta.

    With pin = 0 the slopes stay within max(1/alpha, 1/(beta-alpha)) + delta:
    the plateau half-widths and blend windows eat a budget of delta * span^2 /
    (1 + delta * span) per phase (with safety factor), exactly the room the
    slope cap leaves.  pin > 0 additionally freezes the profile at 0 on
    [0, pin] and at 1 on [alpha - pin, alpha + pin] (steepening the slopes),
    which is what value-pinned constraint classes need.
    """
    m = beta - alpha
    bud_r = 0.72 * delta * alpha ** 2 / (1.0 + delta * alpha)
    bud_f = 0.72 * delta * m ** 2 / (1.0 + delta * m)
    w_r, a_r = bud_r / 3.0, 2.0 * bud_r / 3.0 + pin
    w_f, a_f = bud_f / 3.0, 2.0 * bud_f / 3.0 + pin
    rise_span = alpha - pin - a_r - w_r
    fall_span = m - a_f - w_f
    if rise_span <= 0 or fall_span <= 0:
        raise UsageError("pin radius leaves no room for the tent slopes")
    up = 1.0 / rise_span
    down = 1.0 / fall_span
    k1 = alpha - a_r
    k2 = alpha + a_f
    breaks = [pin, pin + 2 * w_r, k1 - w_r, k1 + w_r,
              k2 - w_f, k2 + w_f, beta - 2 * w_f, beta]
    slopes = [(0.0, up), (up, up), (up, 0.0), (0.0, 0.0),
              (0.0, -down), (-down, -down), (-down, 0.0)]
    return SlopeProfile(breaks, slopes)


def quadrilateral_pair(A: float, B: float, beta: float, delta: float,
                       surface: Optional[Surface] = None,
                       pin_radius: float = 0.0) -> ConstructedPair:
    """The tent-profile pair for the quadrilateral Pi of area A in area B.

    F depends on p only and G on q only (each a tent running 0 -> 1 -> 0 in
    normalized unit-density coordinates), so {F, G} = -u'(p_n) u'(q_n) with
    sup exactly max(up, down)^2 <= gamma^2, gamma = max(1/alpha, 1/(beta -
    alpha)) + delta.  The boundary integral around Pi telescopes to exactly 1.

    pin_radius > 0 (chart metric) freezes the profiles on that neighborhood
    of the four sides, making the pair admissible for value-pinned classes at
    the cost of steeper slopes; the slope-cap claim then uses the recomputed
    slopes rather than gamma.
    """
    if surface is None:
        surface = make_surface("flat-torus", area=B)
    if abs(surface.area - B) > 1e-12 * max(1.0, B):
        raise UsageError("B must equal the surface's total area")
    if A <= 0 or B <= A:
        raise UsageError("need 0 < A < B")
    alpha = math.sqrt(A)
    rootB = math.sqrt(B)
    if not alpha < beta < rootB:
        raise UsageError("need sqrt(A) < beta < sqrt(B)")
    if delta <= 0:
        raise UsageError("delta must be positive")
    if pin_radius < 0:
        raise UsageError("pin_radius must be nonnegative")
    eps = (rootB - beta) / 4.0
    scale = math.sqrt(surface.density)      # chart -> normalized units
    (p_lo, p_hi), (q_lo, q_hi) = surface.extents
    if surface.kind == "plane-square":
        off_p = surface.margin * (p_hi - p_lo)
        off_q = surface.margin * (q_hi - q_lo)
        fits = (beta / scale + 2 * off_p <= (p_hi - p_lo) + 1e-12
                and beta / scale + 2 * off_q <= (q_hi - q_lo) + 1e-12)
    else:
        off_p = off_q = 0.0
        fits = beta / scale <= min(p_hi - p_lo, q_hi - q_lo) + 1e-12
    if not fits:
        raise UsageError("ambient square does not fit inside the chart")
    origin = (p_lo + off_p, q_lo + off_q)

    pin = pin_radius * scale                 # chart metric -> normalized
    if pin > 0 and surface.periodic[0] and beta > rootB - pin:
        raise UsageError("pin radius wraps around the seam into the support")
    prof = _tent_profile(alpha, beta, delta, pin=pin)
    m = beta - alpha
    if alpha - 2 * pin <= 0 or m - pin <= 0:
        raise UsageError("pin radius leaves no room for the tent slopes")
    gamma = max(1.0 / (alpha - 2 * pin), 1.0 / (m - pin)) + delta
    max_slope = prof.max_abs_slope

    def make_field(axis: int, label: str) -> ScalarField:
        def val(p, q):
            xw = surface.normalize(p, q)[axis]
            s = (np.asarray(xw, dtype=np.float64) - origin[axis]) * scale
            shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
            return np.broadcast_to(prof.u(s), shape).copy()

        def par(p, q):
            xw = surface.normalize(p, q)[axis]
            s = (np.asarray(xw, dtype=np.float64) - origin[axis]) * scale
            shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
            d = np.broadcast_to(prof.d(s) * scale, shape).copy()
            z = np.zeros(shape)
            return (d, z) if axis == 0 else (z, d)

        return ScalarField(surface, val, par, label=label)

    F = make_field(0, "quad-F")
    G = make_field(1, "quad-G")

    p_lo, q_lo = origin
    alpha_p = alpha / scale + p_lo
    alpha_q = alpha / scale + q_lo
    a1 = SegmentSet("p", p_lo, q_lo, alpha_q)
    a3 = SegmentSet("p", alpha_p, q_lo, alpha_q)
    a2 = SegmentSet("q", q_lo, p_lo, alpha_p)
    a4 = SegmentSet("q", alpha_q, p_lo, alpha_p)
    quad = RectRegion(p_lo, alpha_p, q_lo, alpha_q, name="quad")
    claims = [
        Claim("bracket-sup", gamma ** 2, max_slope ** 2),
        Claim("slope-cap", gamma, max_slope),
    ]
    theorem = max(1.0 / A, 1.0 / (B - A))
    notes = {"gamma": gamma, "epsilon": eps, "normalized_alpha": alpha,
             "theorem_value": theorem,
             "certified_upper": max_slope ** 2}
    if B / 4.0 < A < 3.0 * B / 4.0 and max_slope ** 2 > theorem * 1.001:
        notes["regime_flag"] = ("square construction exceeds the theoretical "
                                "value in B/4 < A < 3B/4; gap left to the "
                                "optimizer")
    return ConstructedPair(
        F=F, G=G, construction="quad-pair", claims=claims,
        params={"A": A, "B": B, "beta": beta, "delta": delta,
                "pin_radius": pin_radius},
        sets={"a1": a1, "a2": a2, "a3": a3, "a4": a4},
        regions={"quad": quad,
                 "complement": ComplementRegion(quad, name="complement")},
        notes=notes)


def phased_quad_pair(A: float, B: float, delta: float,
                     surface: Optional[Surface] = None,
                     pin_radius: float = 0.0) -> ConstructedPair:
    """A quadrilateral pair whose two steep slopes never multiply.

    The square-tent pair pays max(up, down)^2 because F's fall strip and G's
    fall strip always cross.  Here the steep parts are phase-separated in q:
    F = lam(q) T(p) + (1 - lam(q))/2 where T rises over the quadrilateral and
    falls all the way to the far seam, and G = g(q) rises over the
    quadrilateral but postpones its fall to a band where lam = 0 (F already
    reshaped to the constant 1/2, so F_p = F_q = 0 there).  Since G never
    depends on p, {F, G} = -lam(q) T'(p) g'(q), which vanishes identically on
    the whole reshaping band; the supremum is attained where g rises:
    sup |{F,G}| = max(up, down) * up with down the *long*-fall slope
    ~ 1/(sqrt(B) - sqrt(A)).  For B/4 < A this is strictly below the
    square-tent bound.  ``pin_radius`` freezes both profiles (and keeps
    lam = 1) on that neighborhood of the four sides, exactly as the
    value-pinned classes require.
    """
    if surface is None:
        surface = make_surface("flat-torus", area=B)
    if abs(surface.area - B) > 1e-12 * max(1.0, B):
        raise UsageError("B must equal the surface's total area")
    if A <= 0 or B <= A:
        raise UsageError("need 0 < A < B")
    if delta <= 0:
        raise UsageError("delta must be positive")
    if pin_radius < 0:
        raise UsageError("pin_radius must be nonnegative")
    alpha = math.sqrt(A)
    rootB = math.sqrt(B)
    scale = math.sqrt(surface.density)
    (p_lo, p_hi), (q_lo, q_hi) = surface.extents
    if surface.kind == "plane-square":
        off_p = surface.margin * (p_hi - p_lo)
        off_q = surface.margin * (q_hi - q_lo)
    else:
        off_p = off_q = 0.0
    # Usable span of each axis in normalized units; the long fall and the
    # reshaping band must both fit inside it.
    span_p = ((p_hi - p_lo) - 2.0 * off_p) * scale
    span_q = ((q_hi - q_lo) - 2.0 * off_q) * scale
    usable = min(rootB, span_p, span_q)
    origin = (p_lo + off_p, q_lo + off_q)

    pin = pin_radius * scale
    room = usable - alpha - 2.0 * pin
    if room <= 0:
        raise UsageError("no room beyond the quadrilateral for the long fall")
    s = 0.02 * room
    beta_F = usable - pin - s
    T = _tent_profile(alpha, beta_F, delta, pin=pin)

    # g rises exactly like the tent, then holds its plateau until the fall
    # window [c0, c1] placed strictly inside lam's dead band.
    bud_r = 0.72 * delta * alpha ** 2 / (1.0 + delta * alpha)
    w_r, a_r = bud_r / 3.0, 2.0 * bud_r / 3.0 + pin
    rise_span = alpha - pin - a_r - w_r
    if rise_span <= 0:
        raise UsageError("pin radius leaves no room for the rise slopes")
    up = 1.0 / rise_span
    k1 = alpha - a_r

    z0 = alpha + pin + s
    z_end = usable - pin - s
    avail = z_end - z0
    w_lam = 0.30 * avail
    w_gap = 0.04 * avail
    w_g = avail - 2.0 * w_lam - 2.0 * w_gap
    if min(w_lam, w_gap, w_g) <= 0:
        raise UsageError("no room beyond the quadrilateral for the fall band")
    z1 = z0 + w_lam
    c0, c1 = z1 + w_gap, z1 + w_gap + w_g
    z3 = c1 + w_gap

    w_f = 0.1 * w_g
    down_g = 1.0 / (w_g - 2.0 * w_f)
    g = SlopeProfile(
        [pin, pin + 2 * w_r, k1 - w_r, k1 + w_r, c0, c0 + 2 * w_f,
         c1 - 2 * w_f, c1],
        [(0.0, up), (up, up), (up, 0.0), (0.0, 0.0), (0.0, -down_g),
         (-down_g, -down_g), (-down_g, 0.0)],
    )

    def _bump(lo: float, hi: float, lo2: float, hi2: float) -> SlopeProfile:
        wb = 0.1 * (hi - lo)
        ub = 1.0 / ((hi - lo) - 2.0 * wb)
        wb2 = 0.1 * (hi2 - lo2)
        db = 1.0 / ((hi2 - lo2) - 2.0 * wb2)
        return SlopeProfile(
            [lo, lo + 2 * wb, hi - 2 * wb, hi, lo2, lo2 + 2 * wb2,
             hi2 - 2 * wb2, hi2],
            [(0.0, ub), (ub, ub), (ub, 0.0), (0.0, 0.0), (0.0, -db),
             (-db, -db), (-db, 0.0)],
        )

    bump = _bump(z0, z1, z3, z3 + w_lam)

    def norm_axis(p, q, axis):
        xw = surface.normalize(p, q)[axis]
        return (np.asarray(xw, dtype=np.float64) - origin[axis]) * scale

    def F_val(p, q):
        sp, sq = norm_axis(p, q, 0), norm_axis(p, q, 1)
        lam = 1.0 - bump.u(sq)
        out = lam * T.u(sp) + (1.0 - lam) * 0.5
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        return np.broadcast_to(out, shape).copy()

    def F_par(p, q):
        sp, sq = norm_axis(p, q, 0), norm_axis(p, q, 1)
        lam = 1.0 - bump.u(sq)
        fp = lam * T.d(sp) * scale
        fq = -bump.d(sq) * scale * (T.u(sp) - 0.5)
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        return (np.broadcast_to(fp, shape).copy(),
                np.broadcast_to(fq, shape).copy())

    def G_val(p, q):
        sq = norm_axis(p, q, 1)
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        return np.broadcast_to(g.u(sq), shape).copy()

    def G_par(p, q):
        sq = norm_axis(p, q, 1)
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        d = np.broadcast_to(g.d(sq) * scale, shape).copy()
        return np.zeros(shape), d

    F = ScalarField(surface, F_val, F_par, label="phased-F")
    G = ScalarField(surface, G_val, G_par, label="phased-G")

    mF = beta_F - alpha
    gamma_T = max(1.0 / (alpha - 2.0 * pin), 1.0 / (mF - pin)) + delta
    gamma_g = 1.0 / (alpha - 2.0 * pin) + delta
    max_T = T.max_abs_slope
    claims = [
        Claim("bracket-sup", gamma_T * gamma_g, max_T * up),
        Claim("slope-cap", gamma_T, max_T),
    ]
    p0, q0 = origin
    alpha_p = alpha / scale + p0
    alpha_q = alpha / scale + q0
    a1 = SegmentSet("p", p0, q0, alpha_q)
    a3 = SegmentSet("p", alpha_p, q0, alpha_q)
    a2 = SegmentSet("q", q0, p0, alpha_p)
    a4 = SegmentSet("q", alpha_q, p0, alpha_p)
    quad = RectRegion(p0, alpha_p, q0, alpha_q, name="quad")
    theorem = max(1.0 / A, 1.0 / (B - A))
    return ConstructedPair(
        F=F, G=G, construction="phased-quad-pair", claims=claims,
        params={"A": A, "B": B, "delta": delta, "pin_radius": pin_radius},
        sets={"a1": a1, "a2": a2, "a3": a3, "a4": a4},
        regions={"quad": quad,
                 "complement": ComplementRegion(quad, name="complement")},
        notes={"theorem_value": theorem, "certified_upper": max_T * up,
               "fall_band": (c0 / scale + q0, c1 / scale + q0),
               "reshaping_bands": ((z0 / scale + q0, z1 / scale + q0),
                                   (z3 / scale + q0, (z3 + w_lam) / scale + q0))})


# ---------------------------------------------------------------------------
# Sphere profile pair
# ---------------------------------------------------------------------------

def sphere_profile_pair(epsilon: float) -> ConstructedPair:
    """The deformation of (x^2, y^2) on the round sphere with tiny bracket.

    With v = 1 - z^2 = x^2 + y^2 and u = x^2 - y^2, the pair is
    F1 = phi(v) + u*psi(v), G1 = phi(v) - u*psi(v): phi ramps with slope 4*eps
    on [0, 1/2] then freezes; psi sits at 4*eps while phi moves and only then
    climbs to 1/2.  The planar bracket is 4*psi*phi' <= 64*eps^2 and the
    distance to (x^2, y^2) stays below 1/2 - eps.
    """
    if not 0.0 < epsilon < 0.125:
        raise UsageError("sphere_profile_pair needs 0 < epsilon < 1/8")
    eps = float(epsilon)
    w = 1.0 / 16.0
    phi_prof = SlopeProfile([0.0, 0.5 - 2 * w, 0.5],
                            [(4 * eps, 4 * eps), (4 * eps, 0.0)])
    phi0 = 0.25 - eps

    def phi(v):
        return phi0 + phi_prof.u(v)

    def dphi(v):
        return phi_prof.d(v)

    c = 4 * eps - 0.5

    def psi_raw(v):
        v = np.maximum(v, 1e-12)
        return (1.0 - 4 * eps) + c / v

    def dpsi_raw(v):
        v = np.maximum(v, 1e-12)
        return -c / v ** 2

    wp = 1.0 / 16.0

    def psi(v):
        v = np.asarray(v, dtype=np.float64)
        s = _S((v - 0.5) / wp)
        hi = np.where(v > 0.5, psi_raw(v), 4 * eps)
        return 4 * eps + s * (hi - 4 * eps)

    def dpsi(v):
        v = np.asarray(v, dtype=np.float64)
        x = (v - 0.5) / wp
        s = _S(x)
        ds = np.where((x > 0) & (x < 1), 30.0 * np.clip(x, 0, 1) ** 2
                      * (1 - np.clip(x, 0, 1)) ** 2 / wp, 0.0)
        hi = np.where(v > 0.5, psi_raw(v), 4 * eps)
        dhi = np.where(v > 0.5, dpsi_raw(v), 0.0)
        return ds * (hi - 4 * eps) + s * dhi

    surface = make_surface("round-sphere")

    def make_field(sign: float, label: str) -> ScalarField:
        def val(z, a):
            z = np.asarray(z, dtype=np.float64)
            a = np.asarray(a, dtype=np.float64)
            v = 1.0 - z ** 2
            u = v * np.cos(2.0 * a)
            return phi(v) + sign * u * psi(v)

        def par(z, a):
            z = np.asarray(z, dtype=np.float64)
            a = np.asarray(a, dtype=np.float64)
            v = 1.0 - z ** 2
            cu = np.cos(2.0 * a)
            u = v * cu
            dv = -2.0 * z
            d_z = dphi(v) * dv + sign * (dv * cu * psi(v) + u * dpsi(v) * dv)
            d_a = sign * (-2.0 * v * np.sin(2.0 * a)) * psi(v)
            shape = np.broadcast(z, a).shape
            return (np.broadcast_to(d_z, shape).copy(),
                    np.broadcast_to(d_a, shape).copy())

        return ScalarField(surface, val, par, label=label)

    F1 = make_field(+1.0, "sphere-F1")
    G1 = make_field(-1.0, "sphere-G1")
    X2 = ScalarField.from_expression(surface, "x**2", label="x^2")
    Y2 = ScalarField.from_expression(surface, "y**2", label="y^2")

    n = 512
    sup_b = sup_norm(poisson_bracket(F1, G1), grid_n=n, with_margin=False).value
    dF = sup_norm(F1 - X2, grid_n=n, with_margin=False).value
    dG = sup_norm(G1 - Y2, grid_n=n, with_margin=False).value
    claims = [
        Claim("bracket-sup", 64.0 * eps ** 2, sup_b),
        Claim("distance-sum", 0.5 - eps, dF + dG),
    ]
    return ConstructedPair(
        F=F1, G=G1, construction="sphere-pair", claims=claims,
        params={"epsilon": eps},
        notes={"distance": dF + dG, "bracket_sup": sup_b,
               "phi_at_0": phi0})


# ---------------------------------------------------------------------------
# Flow average
# ---------------------------------------------------------------------------

def linear_flow_average_inputs(surface: Optional[Surface] = None
                               ) -> tuple[ScalarField, ScalarField]:
    """Canonical (H, G) for exercising the flow-average bound.

    G = p/sqrt(2) generates the constant vertical flow q -> q + t/sqrt(2);
    H is a smooth [0, 1] bump in q alone, so the averaged field has the
    closed form F(q) = (1/b) * int_0^b H(q + t/sqrt(2)) dt and
    {F, G} = (H(q + b/sqrt(2)) - H(q)) / b.  The flow speed is chosen
    incommensurate with the torus period: an integer-speed flow over an
    integer averaging window returns the exact invariant mean, whose bracket
    vanishes identically and exercises nothing.
    """
    if surface is None:
        surface = make_surface("flat-torus", area=1.0)
    G = ScalarField.from_expression(surface, "p/sqrt(2)", label="linear-G")
    span = surface.extents[1][1] - surface.extents[1][0]
    w = 0.04 * span
    d = 1.0 / (0.4 * span - 2.0 * w)
    bump = SlopeProfile(
        [0.05 * span, 0.05 * span + 2 * w, 0.45 * span - 2 * w, 0.45 * span,
         0.55 * span, 0.55 * span + 2 * w, 0.95 * span - 2 * w, 0.95 * span],
        [(0.0, d), (d, d), (d, 0.0), (0.0, 0.0), (0.0, -d), (-d, -d),
         (-d, 0.0)],
    )
    q_lo = surface.extents[1][0]

    def val(p, q):
        qn = np.asarray(surface.normalize(p, q)[1], dtype=np.float64) - q_lo
        out = bump.u(qn)
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        return np.broadcast_to(out, shape).copy()

    def par(p, q):
        qn = np.asarray(surface.normalize(p, q)[1], dtype=np.float64) - q_lo
        shape = np.broadcast(np.asarray(p), np.asarray(q)).shape
        dq = np.broadcast_to(bump.d(qn), shape).copy()
        return np.zeros(shape), dq

    H = ScalarField(surface, val, par, label="bump-H")
    return H, G


def flow_average_function(H: ScalarField, G: ScalarField, b: float,
                          grid_n: int = 256,
                          t_steps: Optional[int] = None) -> ConstructedPair:
    """Average H along the Hamiltonian flow of G over time b.

    F(x) = (1/b) * int_0^b H(g_t x) dt, evaluated on a grid by integrating
    every node simultaneously (implicit midpoint) with composite Simpson in t.
    Then {F, G} = (H o g_b - H)/b, so its sup is at most 1/b for 0 <= H <= 1.
    """
    if b <= 0:
        raise UsageError("averaging time b must be positive")
    surface = H.surface
    if t_steps is None:
        t_steps = max(64, int(math.ceil(b / 0.005)))
    if t_steps % 2:
        t_steps += 1
    P, Q, _, _ = surface_mesh(surface, grid_n)
    p = P.ravel().copy()
    q = Q.ravel().copy()
    h_t = b / t_steps
    wp, wq = surface.normalize(p, q)
    acc = np.asarray(H.value(wp, wq), dtype=np.float64).copy()   # weight 1
    for k in range(1, t_steps + 1):
        p, q = dynamics.flow_step(G, p, q, h_t)
        wp, wq = surface.normalize(p, q)
        hv = np.asarray(H.value(wp, wq), dtype=np.float64)
        weight = 1.0 if k == t_steps else (4.0 if k % 2 else 2.0)
        acc += weight * hv
    values = acc * (h_t / 3.0) / b
    F = ScalarField.from_grid(surface, values.reshape(grid_n, grid_n),
                              label=f"avg[{H.label}]")
    # the transported endpoint values give the exact derivative formula
    end_vals = hv
    start_vals = np.asarray(H.value(*surface.normalize(P.ravel(), Q.ravel())),
                            dtype=np.float64)
    lie_sup = float(np.max(np.abs(end_vals - start_vals))) / b
    meas = sup_norm(poisson_bracket(F, G), grid_n=grid_n,
                    with_margin=False).value
    h_lo = float(np.min(start_vals))
    h_hi = float(np.max(start_vals))
    claims = [Claim("lie-derivative", lie_sup + 1e-3 * max(1.0, lie_sup), meas)]
    if h_lo >= -1e-12 and h_hi <= 1.0 + 1e-12:
        claims.append(Claim("one-over-b", 1.0 / b + 1e-3, meas))
    return ConstructedPair(
        F=F, G=G, construction="flow-average", claims=claims,
        params={"b": b, "grid_n": grid_n, "t_steps": t_steps},
        notes={"lie_sup": lie_sup, "H_range": [h_lo, h_hi]})


# ---------------------------------------------------------------------------
# Algebraic reductions
# ---------------------------------------------------------------------------

def _range_check(X: ScalarField, name: str, grid_n: int = 256,
                 lo: float = 0.0, hi: float = 1.0) -> None:
    P, Q, _, _ = surface_mesh(X.surface, grid_n)
    v = X.value(P, Q)
    if float(np.min(v)) < lo - 1e-9 or float(np.max(v)) > hi + 1e-9:
        raise UsageError(f"{name} must range in [{lo:g}, {hi:g}]")


def pb3_from_pb4_pair(F: ScalarField, G: ScalarField,
                      grid_n: int = 256) -> ConstructedPair:
    """Turn a four-set pair into a three-set pair: (F*G, (1-F)*G).

    The identity {FG, (1-F)G} = G*{F,G} keeps the bracket dominated by the
    input's; the first output vanishes where F or G does, and the outputs sum
    to G (= 1 on the set where G is pinned at 1).
    """
    _range_check(F, "F", grid_n)
    _range_check(G, "G", grid_n)
    Fp = F * G
    Gp = (1.0 - F) * G
    sup_in = sup_norm(poisson_bracket(F, G), grid_n=grid_n,
                      with_margin=False).value
    sup_out = sup_norm(poisson_bracket(Fp, Gp), grid_n=grid_n,
                       with_margin=False).value
    claims = [Claim("bracket-domination", sup_in + 1e-9, sup_out)]
    return ConstructedPair(F=Fp, G=Gp, construction="pb3-from-pb4",
                           claims=claims,
                           notes={"input_sup": sup_in, "output_sup": sup_out})


def expansion_cutoff(F: ScalarField, u: ScalarField,
                     G: Optional[ScalarField] = None,
                     grid_n: int = 256) -> ScalarField:
    """F' = u*F, legitimate when G is locally constant where u varies.

    If G is supplied, the precondition is enforced by sampling |grad G| on
    the support of grad u.
    """
    if G is not None:
        P, Q, _, _ = surface_mesh(F.surface, grid_n)
        up, uq = u.partials(P, Q)
        gp, gq = G.partials(P, Q)
        du = np.hypot(up, uq)
        dg = np.hypot(gp, gq)
        mask = du > 1e-9 * (1.0 + float(np.max(du)))
        if np.any(mask) and float(np.max(dg[mask])) > 1e-9 * (1.0 + float(np.max(dg))):
            raise UsageError(
                "cutoff varies where G does: {u*F, G} would differ from {F, G}")
    return u * F


def half_constant_interpolation(F: ScalarField, G: ScalarField, t: float,
                                grid_n: int = 256) -> ConstructedPair:
    """The pair (t*F + (1-t)*H, G) with H constant 1/2 across the supports.

    Scales the bracket by exactly t while moving uniform distance (1-t)*||F -
    H||, the cheap upper arm of the profile-function dichotomy.
    """
    if not 0.0 <= t <= 1.0:
        raise UsageError("interpolation parameter t must lie in [0, 1]")
    _range_check(F, "F", grid_n)
    surface = F.surface
    if surface.kind == "plane-square":
        H = _half_window_field(F, G, grid_n)
    else:
        H = ScalarField.constant(surface, 0.5, label="half")
    Fi = t * F + (1.0 - t) * H
    sup_in = sup_norm(poisson_bracket(F, G), grid_n=grid_n,
                      with_margin=False).value
    sup_out = sup_norm(poisson_bracket(Fi, G), grid_n=grid_n,
                       with_margin=False).value
    dist = sup_norm(F - H, grid_n=grid_n, with_margin=False).value * (1.0 - t)
    claims = [
        Claim("bracket-scaling", t * sup_in + 1e-6 * max(1.0, sup_in), sup_out),
        Claim("distance", 0.5 * (1.0 - t) + 1e-12, dist),
    ]
    return ConstructedPair(F=Fi, G=G, construction="half-interpolation",
                           claims=claims, params={"t": t},
                           notes={"distance": dist, "input_sup": sup_in,
                                  "output_sup": sup_out})


def _ramp_window(x, lo, hi, w):
    """Plateau 1 on [lo, hi], smoothstep ramps of width w outside, 0 beyond."""
    return _S((x - (lo - w)) / w) * _S(((hi + w) - x) / w)


def _ramp_window_d(x, lo, hi, w):
    up = _S((x - (lo - w)) / w)
    dn = _S(((hi + w) - x) / w)
    xu = np.clip((x - (lo - w)) / w, 0.0, 1.0)
    xd = np.clip(((hi + w) - x) / w, 0.0, 1.0)
    dup = 30.0 * xu ** 2 * (1 - xu) ** 2 / w
    ddn = -30.0 * xd ** 2 * (1 - xd) ** 2 / w
    return dup * dn + up * ddn


def _half_window_field(F: ScalarField, G: ScalarField, grid_n: int) -> ScalarField:
    """1/2 times a plateau window covering both supports (plane charts).

    The window's ramps live strictly outside the padded union support, where
    both fields (hence grad G) vanish, so the window never contributes to the
    bracket.
    """
    surface = F.surface
    P, Q, hp, hq = surface_mesh(surface, grid_n)
    mass = np.abs(F.value(P, Q)) + np.abs(G.value(P, Q))
    rows = np.any(mass > 1e-12, axis=1)
    cols = np.any(mass > 1e-12, axis=0)
    (p0, p1), (q0, q1) = surface.extents
    pn, qn, _, _ = surface.grid_axes(grid_n)
    lo_p = (pn[rows][0] if rows.any() else p0) - 4 * hp
    hi_p = (pn[rows][-1] if rows.any() else p1) + 4 * hp
    lo_q = (qn[cols][0] if cols.any() else q0) - 4 * hq
    hi_q = (qn[cols][-1] if cols.any() else q1) + 4 * hq
    wp = max((p1 - p0) * 0.01, 2 * hp)
    wq = max((q1 - q0) * 0.01, 2 * hq)

    def val(p, q):
        return (0.5 * _ramp_window(np.asarray(p, dtype=np.float64), lo_p, hi_p, wp)
                * _ramp_window(np.asarray(q, dtype=np.float64), lo_q, hi_q, wq))

    def par(p, q):
        p = np.asarray(p, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        wpv = _ramp_window(p, lo_p, hi_p, wp)
        wqv = _ramp_window(q, lo_q, hi_q, wq)
        return (0.5 * _ramp_window_d(p, lo_p, hi_p, wp) * wqv,
                0.5 * wpv * _ramp_window_d(q, lo_q, hi_q, wq))

    return ScalarField(surface, val, par, label="half-window")
