"""Euler-Maruyama core for the particle SDEs.

The stepper exists twice with identical semantics and an identical noise
stream: a scalar per-path version compiled with numba, and a
path-vectorized numpy version.  The Gaussian increment used for attempt
``a`` of step ``k`` on path ``p`` is a pure function of
(seed, p, k, a, coordinate), so the two backends (and any worker split)
produce bit-identical trajectories.

Step rule: each grid step of length dt is covered by sub-steps of length
dt/2^level.  A sub-step whose proposal leaves the (strict) chamber is
discarded and retried at the next level with fresh noise; level never
decreases within a grid step, so the remaining time is always an exact
multiple of the current sub-step.  A path is flagged as collapsed when
level exceeds MAX_HALVINGS or the sub-step falls below 1e-12 times the
horizon.

Families: 0 = Dyson(beta), 1 = Radial(beta, gamma), 2 = Bessel(nu)
(independent coordinates), 3 = Laguerre eigenvalue SDE (beta, nu).
"""

import math

import numpy as np

from . import tolerances as tol
from ._backend import njit, use_numba
from ._rng import _mix64, normal_at, normal_at_vec, path_key, u64_at

_PHI = np.uint64(0x9E3779B97F4A7C15)
_B2 = np.uint64(0xD1B54A32D192ED03)

FAM_DYSON, FAM_RADIAL, FAM_BESSEL, FAM_LAGUERRE = 0, 1, 2, 3


def _em_scalar(fam, beta, gamma, nu, times, x0, seed, out, status):
    P, N = x0.shape
    K = times.shape[0] - 1
    horizon = times[K]
    tiny = 1e-12 * horizon
    cur = np.empty(N)
    prop = np.empty(N)
    for p in range(P):
        key = path_key(np.uint64(seed), np.uint64(p))
        for c in range(N):
            out[p, 0, c] = x0[p, c]
        dead = False
        for k in range(K):
            dt = times[k + 1] - times[k]
            for c in range(N):
                cur[c] = out[p, k, c]
            units = 1  # remaining time = units * dt / 2^level, exactly
            level = 0
            a = 0
            while units > 0:
                sub = dt * 2.0 ** (-level)
                # the sub-step is floored at the dt-underflow bound: at the
                # floor a cap rejection is taken anyway, and a chamber exit
                # is retried at the same level with fresh noise
                floor = level >= tol.MAX_DESCENT or dt * 2.0 ** (-(level + 1)) < tiny
                if level > tol.MAX_HALVINGS or a > tol.MAX_ATTEMPTS:
                    status[p] = 1
                    dead = True
                    break
                akey = _mix64(key ^ _mix64(np.uint64(k) * _PHI ^ np.uint64(a) * _B2))
                sq = math.sqrt(sub)
                cs = math.sqrt(tol.DRIFT_CAP)
                m2 = 0.0
                for i in range(N):
                    xi = normal_at(akey, np.uint64(i))
                    b = 0.0
                    sig = 1.0
                    # the 1/x wall term is integrated by its exact ODE flow
                    # x -> sqrt(x^2 + c*sub), which never overshoots the wall
                    # scale; only the remaining drift is Euler-discretized
                    if fam == 0:
                        base = cur[i]
                        for j in range(N):
                            if j != i:
                                b += 1.0 / (cur[i] - cur[j])
                        b = 0.5 * beta * b
                    elif fam == 1:
                        base = math.sqrt(cur[i] * cur[i] + beta * gamma * sub)
                        for j in range(N):
                            if j != i:
                                b += 1.0 / (cur[i] - cur[j]) + 1.0 / (cur[i] + cur[j])
                        b = 0.5 * beta * b
                    elif fam == 2:
                        base = math.sqrt(cur[i] * cur[i] + (2.0 * nu + 1.0) * sub)
                    else:
                        base = cur[i]
                        b = N + nu
                        for j in range(N):
                            if j != i:
                                b += (cur[i] + cur[j]) / (cur[i] - cur[j])
                        b = beta * b
                        sig = 2.0 * math.sqrt(cur[i])
                    # clamp the Euler displacement to the cap bound: a no-op
                    # whenever the cap itself passes, but it keeps floor-level
                    # proposals finite when a gap has become microscopic
                    d = b * sub
                    bound = cs * sig * sq
                    if d > bound:
                        d = bound
                    elif d < -bound:
                        d = -bound
                    prop[i] = base + d + sig * sq * xi
                    r = b / sig
                    if r * r > m2:
                        m2 = r * r
                # step-size control: the drift move must stay small relative
                # to the distance-to-singularity scale 1/|b/sig|, otherwise
                # a near-wall path takes an accepted but wildly biased jump
                ok = m2 * sub <= tol.DRIFT_CAP or floor
                if fam == 0:
                    for i in range(N - 1):
                        if prop[i + 1] <= prop[i]:
                            ok = False
                elif fam == 2:
                    for i in range(N):
                        if prop[i] <= 0.0:
                            ok = False
                else:
                    if prop[0] <= 0.0:
                        ok = False
                    for i in range(N - 1):
                        if prop[i + 1] <= prop[i]:
                            ok = False
                a += 1
                if ok:
                    units -= 1
                    for c in range(N):
                        cur[c] = prop[c]
                    if level > 0 and units > 0 and units % 2 == 0:
                        units //= 2
                        level -= 1
                elif not floor:
                    units *= 2
                    level += 1
            if dead:
                # freeze at the last completed grid state
                for kk in range(k, K):
                    for c in range(N):
                        out[p, kk + 1, c] = out[p, k, c]
                break
            for c in range(N):
                out[p, k + 1, c] = cur[c]


def _mix64_np(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _path_keys_np(seed, P):
    pk = _mix64_np(np.arange(P, dtype=np.uint64) + _PHI)
    return _mix64_np(np.uint64(seed) ^ pk)


def _drift_np(fam, beta, gamma, nu, x, sub):
    """Proposal pieces: (base, b, sig) with prop = base + b*sub + sig*sqrt(sub)*xi.

    The 1/x wall term is folded into ``base`` through its exact ODE flow
    x -> sqrt(x^2 + c*sub); only the remaining drift b is Euler-discretized
    (and is what the step-size cap sees).
    """
    P, N = x.shape
    b = np.zeros_like(x)
    sig = np.ones_like(x)
    base = x
    if fam == FAM_DYSON or fam == FAM_RADIAL:
        if fam == FAM_RADIAL:
            base = np.sqrt(x * x + (beta * gamma) * sub[:, None])
        for i in range(N):
            acc = np.zeros(P)
            for j in range(N):
                if j != i:
                    if fam == FAM_RADIAL:
                        acc = acc + (1.0 / (x[:, i] - x[:, j]) + 1.0 / (x[:, i] + x[:, j]))
                    else:
                        acc = acc + 1.0 / (x[:, i] - x[:, j])
            b[:, i] = 0.5 * beta * acc
    elif fam == FAM_BESSEL:
        base = np.sqrt(x * x + (2.0 * nu + 1.0) * sub[:, None])
    else:
        for i in range(N):
            acc = np.full(P, float(N) + nu)
            for j in range(N):
                if j != i:
                    acc = acc + (x[:, i] + x[:, j]) / (x[:, i] - x[:, j])
            b[:, i] = beta * acc
        sig = 2.0 * np.sqrt(np.clip(x, 0.0, None))
    return base, b, sig


def _in_chamber_np(fam, x):
    if fam == FAM_DYSON:
        ok = np.ones(x.shape[0], dtype=bool)
    elif fam == FAM_BESSEL:
        return np.all(x > 0.0, axis=1)
    else:
        ok = x[:, 0] > 0.0
    if x.shape[1] > 1:
        ok = ok & np.all(np.diff(x, axis=1) > 0.0, axis=1)
    return ok


def _em_vector(fam, beta, gamma, nu, times, x0, seed, out, status):
    P, N = x0.shape
    K = times.shape[0] - 1
    horizon = times[K]
    tiny = 1e-12 * horizon
    keys = _path_keys_np(seed, P)
    out[:, 0, :] = x0
    cidx = np.arange(N, dtype=np.uint64)[None, :]
    kphi = np.arange(K, dtype=np.uint64) * _PHI
    for k in range(K):
        dt = times[k + 1] - times[k]
        cur = out[:, k, :].copy()
        units = np.where(status == 0, 1, 0).astype(np.int64)
        level = np.zeros(P, dtype=np.int64)
        a = np.zeros(P, dtype=np.uint64)
        while True:
            act = (units > 0) & (status == 0)
            if not act.any():
                break
            sub = dt * 2.0 ** (-level.astype(float))
            floor = (level >= tol.MAX_DESCENT) | (dt * 2.0 ** (-(level + 1).astype(float)) < tiny)
            bad = act & ((level > tol.MAX_HALVINGS) | (a > tol.MAX_ATTEMPTS))
            status[bad] = 1
            act &= ~bad
            if not act.any():
                break
            akey = _mix64_np(keys ^ _mix64_np(kphi[k] ^ a * _B2))
            xi = normal_at_vec(akey[:, None], cidx)
            base, b, sig = _drift_np(fam, beta, gamma, nu, cur, sub)
            bound = np.sqrt(tol.DRIFT_CAP) * sig * np.sqrt(sub)[:, None]
            d = np.clip(b * sub[:, None], -bound, bound)
            prop = base + d + sig * np.sqrt(sub)[:, None] * xi
            r = b / sig
            m2 = np.max(r * r, axis=1)
            ok = act & _in_chamber_np(fam, prop) & ((m2 * sub <= tol.DRIFT_CAP) | floor)
            cur = np.where(ok[:, None], prop, cur)
            units = np.where(ok, units - 1, units)
            rej = act & ~ok & ~floor
            units = np.where(rej, units * 2, units)
            level = np.where(rej, level + 1, level)
            anneal = ok & (level > 0) & (units > 0) & (units % 2 == 0)
            units = np.where(anneal, units // 2, units)
            level = np.where(anneal, level - 1, level)
            a = a + act.astype(np.uint64)
        out[:, k + 1, :] = np.where((status == 0)[:, None], cur, out[:, k, :])


_em_scalar_jit = None


def run_em(fam, beta, gamma, nu, times, x0, seed):
    """Integrate; returns (paths (P, K+1, N), status (P,))."""
    times = np.ascontiguousarray(times, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    P, N = x0.shape
    out = np.zeros((P, times.size, N))
    status = np.zeros(P, dtype=np.int64)
    if use_numba():
        global _em_scalar_jit
        if _em_scalar_jit is None:
            _em_scalar_jit = njit(cache=True, error_model="numpy")(_em_scalar)
        _em_scalar_jit(fam, beta, gamma, nu, times, x0, seed, out, status)
    else:
        _em_vector(fam, beta, gamma, nu, times, x0, seed, out, status)
    return out, status
