"""Low-level grid kernels: finite differences, cubic interpolation, soft max.

Every kernel ships two implementations: a pure-numpy one and, when numba is
importable, a compiled twin.  The compiled path is the default; set the
environment variable ``PBINV_NUMBA=0`` before import to force the numpy
fallback.  ``benchmarks/bench_kernels.py`` times the two paths against each
other and checks they agree.

Array layout: ``f[i, j]`` with axis 0 along the first chart coordinate ``p``
and axis 1 along the second chart coordinate ``q``.  Periodic axes store one
value per node (no duplicated seam row).
"""
from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("PBINV_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


HAS_NUMBA = False
if _numba_requested():
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:  # numba missing: silently fall back
        HAS_NUMBA = False


# ---------------------------------------------------------------------------
# Finite-difference gradients (2nd order; one-sided at clamped edges)
# ---------------------------------------------------------------------------

def _grad_axis0_numpy(f: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def grad_grid_numpy(f, hp, hq, periodic_p, periodic_q):
    """Return (df/dp, df/dq) for a node array ``f[i, j]``."""
    fp = _grad_axis0_numpy(f, hp, periodic_p)
    fq = _grad_axis0_numpy(f.T, hq, periodic_q).T
    return np.ascontiguousarray(fp), np.ascontiguousarray(fq)


if HAS_NUMBA:

    @njit(cache=True)
    def _grad_grid_nb(f, hp, hq, periodic_p, periodic_q):  # pragma: no cover
        n, m = f.shape
        fp = np.empty_like(f)
        fq = np.empty_like(f)
        for i in range(n):
            for j in range(m):
                if periodic_p:
                    fp[i, j] = (f[(i + 1) % n, j] - f[(i - 1) % n, j]) / (2.0 * hp)
                elif i == 0:
                    fp[i, j] = (-3.0 * f[0, j] + 4.0 * f[1, j] - f[2, j]) / (2.0 * hp)
                elif i == n - 1:
                    fp[i, j] = (3.0 * f[n - 1, j] - 4.0 * f[n - 2, j] + f[n - 3, j]) / (2.0 * hp)
                else:
                    fp[i, j] = (f[i + 1, j] - f[i - 1, j]) / (2.0 * hp)
                if periodic_q:
                    fq[i, j] = (f[i, (j + 1) % m] - f[i, (j - 1) % m]) / (2.0 * hq)
                elif j == 0:
                    fq[i, j] = (-3.0 * f[i, 0] + 4.0 * f[i, 1] - f[i, 2]) / (2.0 * hq)
                elif j == m - 1:
                    fq[i, j] = (3.0 * f[i, m - 1] - 4.0 * f[i, m - 2] + f[i, m - 3]) / (2.0 * hq)
                else:
                    fq[i, j] = (f[i, j + 1] - f[i, j - 1]) / (2.0 * hq)
        return fp, fq

    def grad_grid(f, hp, hq, periodic_p, periodic_q):
        return _grad_grid_nb(np.ascontiguousarray(f), hp, hq, periodic_p, periodic_q)

else:
    grad_grid = grad_grid_numpy


# ---------------------------------------------------------------------------
# Bracket on node arrays (fused gradient + combine)
# ---------------------------------------------------------------------------

def bracket_grid_numpy(f, g, hp, hq, periodic_p, periodic_q, inv_sigma):
    """{f, g} = (f_q g_p - f_p g_q) / sigma on the nodes."""
    fp, fq = grad_grid_numpy(f, hp, hq, periodic_p, periodic_q)
    gp, gq = grad_grid_numpy(g, hp, hq, periodic_p, periodic_q)
    return (fq * gp - fp * gq) * inv_sigma


if HAS_NUMBA:

    @njit(cache=True)
    def _bracket_grid_nb(f, g, hp, hq, periodic_p, periodic_q, inv_sigma):  # pragma: no cover
        fp, fq = _grad_grid_nb(f, hp, hq, periodic_p, periodic_q)
        gp, gq = _grad_grid_nb(g, hp, hq, periodic_p, periodic_q)
        n, m = f.shape
        out = np.empty_like(f)
        for i in range(n):
            for j in range(m):
                out[i, j] = (fq[i, j] * gp[i, j] - fp[i, j] * gq[i, j]) * inv_sigma
        return out

    def bracket_grid(f, g, hp, hq, periodic_p, periodic_q, inv_sigma):
        return _bracket_grid_nb(
            np.ascontiguousarray(f), np.ascontiguousarray(g),
            hp, hq, periodic_p, periodic_q, inv_sigma,
        )

else:
    bracket_grid = bracket_grid_numpy


# ---------------------------------------------------------------------------
# Catmull-Rom cubic interpolation on node arrays
# ---------------------------------------------------------------------------

def _cr_weights_numpy(t):
    t2 = t * t
    t3 = t2 * t
    w0 = 0.5 * (-t3 + 2.0 * t2 - t)
    w1 = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
    w2 = 0.5 * (-3.0 * t3 + 4.0 * t2 + t)
    w3 = 0.5 * (t3 - t2)
    return w0, w1, w2, w3


def interp_cubic_numpy(nodes, u, v, periodic_p, periodic_q):
    """Cubic interpolation of ``nodes`` at fractional index coords (u, v).

    ``u`` indexes axis 0, ``v`` axis 1.  Clamped axes reuse the edge value
    outside the node range; periodic axes wrap.
    """
    n, m = nodes.shape
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    tu = u - i0
    tv = v - j0
    wu = _cr_weights_numpy(tu)
    wv = _cr_weights_numpy(tv)
    out = np.zeros_like(u)
    for a in range(4):
        ia = i0 + (a - 1)
        ia = ia % n if periodic_p else np.clip(ia, 0, n - 1)
        row = np.zeros_like(u)
        for b in range(4):
            jb = j0 + (b - 1)
            jb = jb % m if periodic_q else np.clip(jb, 0, m - 1)
            row += wv[b] * nodes[ia, jb]
        out += wu[a] * row
    return out


if HAS_NUMBA:

    @njit(cache=True)
    def _interp_cubic_nb(nodes, u, v, periodic_p, periodic_q):  # pragma: no cover
        n, m = nodes.shape
        npts = u.shape[0]
        out = np.empty(npts, dtype=np.float64)
        for k in range(npts):
            i0 = int(np.floor(u[k]))
            j0 = int(np.floor(v[k]))
            tu = u[k] - i0
            tv = v[k] - j0
            tu2 = tu * tu
            tu3 = tu2 * tu
            tv2 = tv * tv
            tv3 = tv2 * tv
            wu0 = 0.5 * (-tu3 + 2.0 * tu2 - tu)
            wu1 = 0.5 * (3.0 * tu3 - 5.0 * tu2 + 2.0)
            wu2 = 0.5 * (-3.0 * tu3 + 4.0 * tu2 + tu)
            wu3 = 0.5 * (tu3 - tu2)
            wv0 = 0.5 * (-tv3 + 2.0 * tv2 - tv)
            wv1 = 0.5 * (3.0 * tv3 - 5.0 * tv2 + 2.0)
            wv2 = 0.5 * (-3.0 * tv3 + 4.0 * tv2 + tv)
            wv3 = 0.5 * (tv3 - tv2)
            acc = 0.0
            for a in range(4):
                ia = i0 + a - 1
                if periodic_p:
                    ia = ia % n
                elif ia < 0:
                    ia = 0
                elif ia > n - 1:
                    ia = n - 1
                if a == 0:
                    wa = wu0
                elif a == 1:
                    wa = wu1
                elif a == 2:
                    wa = wu2
                else:
                    wa = wu3
                row = 0.0
                for b in range(4):
                    jb = j0 + b - 1
                    if periodic_q:
                        jb = jb % m
                    elif jb < 0:
                        jb = 0
                    elif jb > m - 1:
                        jb = m - 1
                    if b == 0:
                        wb = wv0
                    elif b == 1:
                        wb = wv1
                    elif b == 2:
                        wb = wv2
                    else:
                        wb = wv3
                    row += wb * nodes[ia, jb]
                acc += wa * row
            out[k] = acc
        return out

    def interp_cubic(nodes, u, v, periodic_p, periodic_q):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        shape = np.broadcast(u, v).shape
        uf = np.ascontiguousarray(np.broadcast_to(u, shape).ravel())
        vf = np.ascontiguousarray(np.broadcast_to(v, shape).ravel())
        out = _interp_cubic_nb(np.ascontiguousarray(nodes), uf, vf,
                               periodic_p, periodic_q)
        return out.reshape(shape)

else:
    def interp_cubic(nodes, u, v, periodic_p, periodic_q):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        shape = np.broadcast(u, v).shape
        uf = np.broadcast_to(u, shape).ravel()
        vf = np.broadcast_to(v, shape).ravel()
        out = interp_cubic_numpy(nodes, uf, vf, periodic_p, periodic_q)
        return out.reshape(shape)


# ---------------------------------------------------------------------------
# Stabilised log-sum-exp soft maximum of |K| and its gradient
# ---------------------------------------------------------------------------

def lse_abs_numpy(K, tau):
    """Smooth upper bound J >= max|K| and dJ/dK, at temperature tau."""
    m = float(np.abs(K).max())
    ep = np.exp(tau * (K - m))
    en = np.exp(-tau * (K + m))
    z = float(ep.sum() + en.sum())
    j = m + np.log(z) / tau
    w = (ep - en) / z
    return j, w


if HAS_NUMBA:

    @njit(cache=True)
    def _lse_abs_nb(K, tau):  # pragma: no cover
        n, m_ = K.shape
        mx = 0.0
        for i in range(n):
            for j in range(m_):
                a = K[i, j]
                if a < 0.0:
                    a = -a
                if a > mx:
                    mx = a
        z = 0.0
        w = np.empty_like(K)
        for i in range(n):
            for j in range(m_):
                ep = np.exp(tau * (K[i, j] - mx))
                en = np.exp(-tau * (K[i, j] + mx))
                w[i, j] = ep - en
                z += ep + en
        for i in range(n):
            for j in range(m_):
                w[i, j] /= z
        return mx + np.log(z) / tau, w

    def lse_abs(K, tau):
        j, w = _lse_abs_nb(np.ascontiguousarray(K), tau)
        return float(j), w

else:
    lse_abs = lse_abs_numpy


def set_threads(n=None) -> int:
    """Cap compiled-kernel worker threads; returns the effective cap.

    ``n`` of None reads the PBINV_THREADS environment variable; 0 (or an
    unset variable) leaves the backend default alone.  The pure-numpy path
    is single-threaded either way, so the cap only binds when numba is on.
    """
    if n is None:
        env = os.environ.get("PBINV_THREADS", "").strip()
        n = int(env) if env else 0
    n = int(n)
    if n < 0:
        raise ValueError("thread cap must be nonnegative")
    if n and HAS_NUMBA:
        import numba

        eff = max(1, min(n, numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(eff)
        return eff
    return n


__all__ = [
    "HAS_NUMBA",
    "set_threads",
    "grad_grid",
    "grad_grid_numpy",
    "bracket_grid",
    "bracket_grid_numpy",
    "interp_cubic",
    "interp_cubic_numpy",
    "lse_abs",
    "lse_abs_numpy",
]
