"""Hamiltonian flows, chord detection, and the time-length/pb duality test.

The flow of a Hamiltonian ``G`` follows the package-wide convention

    dp/dt = -G_q / sigma,    dq/dt = G_p / sigma,

so that ``d/dt (F o g_t) = {F, G} o g_t``.  The workhorse integrator is the
implicit midpoint rule (symplectic, time-symmetric) with fixed-point inner
iterations; RK4 is kept around as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IntegrationError, UsageError
from .fields import ScalarField
from .geometry import Point, PointSet, Surface, set_distance, set_sample

FP_TOL = 1e-14          # fixed-point stall tolerance (relative)
FP_MAX_INNER = 50


def _velocity(G: ScalarField, p, q):
    gp, gq = G.partials(p, q)
    inv_sigma = 1.0 / G.surface.density
    return -gq * inv_sigma, gp * inv_sigma


def _check_inside(surface: Surface, p, q):
    if surface.kind != "plane-square":
        return
    (p0, p1), (q0, q1) = surface.extents
    if np.any(p < p0) or np.any(p > p1) or np.any(q < q0) or np.any(q > q1):
        raise IntegrationError("trajectory left the plane-square chart")


def flow_step(G: ScalarField, p, q, h: float, max_inner: int = FP_MAX_INNER):
    """One implicit-midpoint step for a batch of states (arrays p, q)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    vp, vq = _velocity(G, p, q)
    mp = p + 0.5 * h * vp          # explicit predictor for the midpoint
    mq = q + 0.5 * h * vq
    scale = max(1.0, float(np.max(np.abs(p))), float(np.max(np.abs(q))))
    for _ in range(max_inner):
        vp, vq = _velocity(G, mp, mq)
        np_ = p + 0.5 * h * vp
        nq_ = q + 0.5 * h * vq
        delta = max(float(np.max(np.abs(np_ - mp))),
                    float(np.max(np.abs(nq_ - mq))))
        mp, mq = np_, nq_
        if delta <= FP_TOL * scale:
            break
    else:
        raise IntegrationError(
            f"implicit midpoint inner iteration did not converge (step {h:g})")
    return 2.0 * mp - p, 2.0 * mq - q


def _rk4_step(G: ScalarField, p, q, h: float):
    k1p, k1q = _velocity(G, p, q)
    k2p, k2q = _velocity(G, p + 0.5 * h * k1p, q + 0.5 * h * k1q)
    k3p, k3q = _velocity(G, p + 0.5 * h * k2p, q + 0.5 * h * k2q)
    k4p, k4q = _velocity(G, p + h * k3p, q + h * k3q)
    return (p + h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0,
            q + h * (k1q + 2 * k2q + 2 * k3q + k4q) / 6.0)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray          # (len(times), 2), chart coordinates (unwrapped)
    energy: np.ndarray          # G along the trajectory
    step: float
    tag: str


def _normalize_span(t_span) -> tuple[float, float]:
    if np.isscalar(t_span):
        return 0.0, float(t_span)
    t0, t1 = t_span
    return float(t0), float(t1)


def integrate_batch(G: ScalarField, p0, q0, T: float, n_steps: int,
                    method: str = "implicit-midpoint"):
    """Integrate a batch of initial states to time T; returns paths
    (n_steps+1, k) arrays for p and q (unwrapped coordinates)."""
    if n_steps <= 0:
        raise UsageError("n_steps must be positive")
    p0 = np.atleast_1d(np.asarray(p0, dtype=np.float64))
    q0 = np.atleast_1d(np.asarray(q0, dtype=np.float64))
    h = T / n_steps
    P = np.empty((n_steps + 1,) + p0.shape)
    Q = np.empty_like(P)
    P[0], Q[0] = p0, q0
    step_fn = flow_step if method == "implicit-midpoint" else _rk4_step
    for i in range(n_steps):
        pn, qn = step_fn(G, P[i], Q[i], h)
        _check_inside(G.surface, pn, qn)
        P[i + 1], Q[i + 1] = pn, qn
    return P, Q


def hamiltonian_flow(G: ScalarField, x0, t_span, step: float = 1e-3,
                     method: str = "implicit-midpoint") -> Trajectory:
    """Flow of one initial point over t_span (scalar T means [0, T])."""
    if step <= 0:
        raise UsageError("step must be positive")
    t0, t1 = _normalize_span(t_span)
    T = t1 - t0
    if T == 0.0:
        pts = np.array([[float(x0[0]), float(x0[1])]])
        e = np.asarray(G.value(pts[:, 0], pts[:, 1]), dtype=np.float64)
        return Trajectory(np.array([t0]), pts, e, step, method)
    n = max(1, int(math.ceil(abs(T) / step)))
    P, Q = integrate_batch(G, [float(x0[0])], [float(x0[1])], T, n, method)
    times = t0 + (T / n) * np.arange(n + 1)
    pts = np.stack([P[:, 0], Q[:, 0]], axis=1)
    wp, wq = G.surface.normalize(pts[:, 0], pts[:, 1])
    energy = np.asarray(G.value(wp, wq), dtype=np.float64)
    return Trajectory(times, pts, energy, abs(T) / n, method)


def energy_drift(traj: Trajectory, G: ScalarField) -> float:
    """Max deviation of G along the trajectory from its initial value."""
    wp, wq = G.surface.normalize(traj.points[:, 0], traj.points[:, 1])
    e = np.asarray(G.value(wp, wq), dtype=np.float64)
    return float(np.max(np.abs(e - e[0])))


# ---------------------------------------------------------------------------
# Chords
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chord:
    start: Point
    end: Point
    T: float                 # signed time
    tol: float

    @property
    def time_length(self) -> float:
        return abs(self.T)


def _local_time_refine(G, surface, X1, p_a, q_a, direction: float, h: float,
                       tol: float, d_a: float):
    """Bisect the (unsigned) hit time inside one step starting at (p_a, q_a)."""
    lo, hi = 0.0, h

    def dist_at(tau):
        if tau == 0.0:
            return d_a, p_a, q_a
        sub = 4
        pp, qq = p_a, q_a
        for _ in range(sub):
            pp, qq = flow_step(G, np.asarray([pp]), np.asarray([qq]),
                               direction * tau / sub)
            pp, qq = float(pp[0]), float(qq[0])
        wp, wq = surface.normalize(pp, qq)
        return float(set_distance(X1, surface, wp, wq)) - tol, pp, qq

    best = None
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        d_m, pm, qm = dist_at(mid)
        if d_m <= 0.0:
            hi = mid
            best = (mid, pm, qm)
        else:
            lo = mid
        if hi - lo <= 1e-6 * max(1.0, abs(h)):
            break
    if best is None:
        d_m, pm, qm = dist_at(hi)
        best = (hi, pm, qm)
    return best


def _revalidate(G, surface, X1, start: Point, T: float, step: float,
                tol: float) -> bool:
    """Re-integrate one start over [0, T] at half step; end must hit X1."""
    n = max(2, int(math.ceil(abs(T) / (0.5 * step))))
    P, Q = integrate_batch(G, [start.p], [start.q], T, n)
    wp, wq = surface.normalize(P[-1, 0], Q[-1, 0])
    return float(set_distance(X1, surface, wp, wq)) <= 2.0 * tol


def find_chords(G: ScalarField, X0: PointSet, X1: PointSet, horizon: float,
                seeds: int = 64, tol: Optional[float] = None,
                step: Optional[float] = None) -> list[Chord]:
    """Flow segments from X0 to X1 with |T| <= horizon, both time directions.

    Event detection: sign change of distance-to-X1 minus tol along sampled
    trajectories, bisection-refined in time.  Every candidate is re-validated
    against a second batch integration of all seeds at half the step: the
    trajectory point at the hit time must again land within 2*tol of X1.
    """
    if horizon <= 0:
        raise UsageError("horizon must be positive")
    surface = G.surface
    if tol is None:
        tol = 1e-3 * surface.diameter
    if step is None:
        step = horizon / 4096.0
    starts = set_sample(X0, surface, max(int(seeds), 2))
    d0 = set_distance(X0, surface, starts[:, 0], starts[:, 1])
    starts = starts[d0 <= tol]          # consistency with contains()
    chords: list[Chord] = []
    if len(starts) == 0:
        return chords
    for direction in (+1.0, -1.0):
        T = direction * horizon
        n = max(2, int(math.ceil(abs(T) / step)))
        h = T / n
        P, Q = integrate_batch(G, starts[:, 0], starts[:, 1], T, n)
        wp, wq = surface.normalize(P, Q)
        D = set_distance(X1, surface, wp, wq) - tol
        hits = (D[:-1] > 0.0) & (D[1:] <= 0.0)
        if not np.any(hits):
            continue
        # one half-step batch pass validates every event of this direction
        P2, Q2 = integrate_batch(G, starts[:, 0], starts[:, 1], T, 2 * n)
        h2 = T / (2 * n)
        for j in range(starts.shape[0]):
            rows = np.nonzero(hits[:, j])[0]
            for i in rows[:2]:
                tau, pe, qe = _local_time_refine(
                    G, surface, X1, float(P[i, j]), float(Q[i, j]),
                    direction, abs(h), tol, float(D[i, j]))
                T_hit = (i * h) + direction * tau
                k = min(int(round(T_hit / h2)), 2 * n)
                vp, vq = surface.normalize(float(P2[k, j]), float(Q2[k, j]))
                resid = float(set_distance(X1, surface, vp, vq))
                if resid <= 2.0 * tol:
                    start = Point(float(starts[j, 0]), float(starts[j, 1]))
                    chords.append(Chord(start=start,
                                        end=Point(float(vp), float(vq)),
                                        T=float(T_hit), tol=tol))
    chords.sort(key=lambda c: c.time_length)
    return chords


def min_chord_time(G: ScalarField, X0: PointSet, X1: PointSet, horizon: float,
                   seeds: int = 64, tol: Optional[float] = None) -> Optional[float]:
    """Minimal chord time-length, refined by local re-seeding around the best."""
    surface = G.surface
    chords = find_chords(G, X0, X1, horizon, seeds=seeds, tol=tol)
    if not chords:
        return None
    best = chords[0]
    if tol is None:
        tol = 1e-3 * surface.diameter
    # re-seed near the best start at twice the density and half the step
    n_dense = 4 * max(int(seeds), 2)
    dense = set_sample(X0, surface, n_dense)
    d = surface.distance(dense[:, 0], dense[:, 1], best.start.p, best.start.q)
    local = dense[d <= 4.0 * surface.diameter / max(int(seeds), 2)]
    best_T = best.time_length
    if len(local) >= 2:
        span = 1.25 * best_T
        n = max(2, int(math.ceil(span / (horizon / 8192.0))))
        for direction in (+1.0 if best.T > 0 else -1.0,):
            T = direction * span
            h = T / n
            P, Q = integrate_batch(G, local[:, 0], local[:, 1], T, n)
            wp, wq = surface.normalize(P, Q)
            D = set_distance(X1, surface, wp, wq) - tol
            hits = (D[:-1] > 0.0) & (D[1:] <= 0.0)
            for j in range(local.shape[0]):
                rows = np.nonzero(hits[:, j])[0]
                if len(rows) == 0:
                    continue
                i = rows[0]
                tau, _, _ = _local_time_refine(
                    G, surface, X1, float(P[i, j]), float(Q[i, j]),
                    direction, abs(h), tol, float(D[i, j]))
                cand = abs(i * h) + tau
                start = Point(float(local[j, 0]), float(local[j, 1]))
                if cand < best_T and _revalidate(
                        G, surface, X1, start, direction * cand, abs(h), tol):
                    best_T = cand
    return best_T
