"""Counter-based random streams.

Two layers:

* ``generator(seed, stream)`` -- numpy Philox generators, one independent
  stream per (seed, stream-index).  Used by matrix-process and Haar sampling;
  sample i is reproducible independently of how many samples are drawn.
* splitmix64 + Box-Muller primitives -- a stateless uint64 counter RNG used
  inside the Euler-Maruyama kernels, written once as scalar code (njit-able)
  and once vectorized, consuming identical streams.
"""

import math

import numpy as np

from ._backend import njit

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53
_LN2 = 0.6931471805599453
_TWO_PI = 6.283185307179586
_SQRT_HALF = 0.7071067811865476

# atanh-series coefficients 2/(2k+1) for the portable log, and Taylor
# coefficients for cos/sin on [0, pi/4].  The transcendentals are evaluated
# with the same sequence of IEEE +-*/ in the scalar and vectorized Box-Muller
# below, because libm cos/log are not bit-identical between numba and numpy.
_LOG_C = tuple(2.0 / (2 * k + 1) for k in range(11))
_COS_C = tuple((-1.0) ** k / math.factorial(2 * k) for k in range(10))
_SIN_C = tuple((-1.0) ** k / math.factorial(2 * k + 1) for k in range(10))


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for a (seed, stream) pair; streams are independent."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)])
    return np.random.Generator(np.random.Philox(key=key))


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def u64_at(key, ctr):
    """splitmix64 output at counter position ctr for the given key."""
    return _mix64(key + np.uint64(ctr) * _PHI)


@njit(cache=True)
def _log_portable(x):
    """log(x) for x in (0, 1] via frexp + atanh series (portable float ops)."""
    m, e = math.frexp(x)
    if m < _SQRT_HALF:
        m = 2.0 * m
        e -= 1
    s = (m - 1.0) / (m + 1.0)
    s2 = s * s
    p = _LOG_C[10]
    for k in range(9, -1, -1):
        p = _LOG_C[k] + s2 * p
    return e * _LN2 + s * p


@njit(cache=True)
def _cos2pi_portable(u):
    """cos(2*pi*u) for u in [0, 1) by exact octant folding + Taylor."""
    sign = 1.0
    if u >= 0.5:
        u = u - 0.5
        sign = -1.0
    if u >= 0.25:
        u = 0.5 - u
        sign = -sign
    if u <= 0.125:
        t = _TWO_PI * u
        w = t * t
        p = _COS_C[9]
        for k in range(8, -1, -1):
            p = _COS_C[k] + w * p
        return sign * p
    t = _TWO_PI * (0.25 - u)
    w = t * t
    p = _SIN_C[9]
    for k in range(8, -1, -1):
        p = _SIN_C[k] + w * p
    return sign * (t * p)


@njit(cache=True)
def normal_at(key, idx):
    """Standard normal number idx of the stream keyed by ``key``.

    Box-Muller (cosine branch) on the uniform pair at counters (2*idx, 2*idx+1);
    purely a function of (key, idx).
    """
    r1 = u64_at(key, np.uint64(2 * idx))
    r2 = u64_at(key, np.uint64(2 * idx + 1))
    u1 = (float(r1 >> np.uint64(11)) + 1.0) * _INV53  # in (0, 1]
    u2 = float(r2 >> np.uint64(11)) * _INV53
    return np.sqrt(-2.0 * _log_portable(u1)) * _cos2pi_portable(u2)


def _log_portable_vec(x):
    m, e = np.frexp(x)
    small = m < _SQRT_HALF
    m = np.where(small, 2.0 * m, m)
    e = np.where(small, e - 1, e).astype(np.float64)
    s = (m - 1.0) / (m + 1.0)
    s2 = s * s
    p = _LOG_C[10]
    for k in range(9, -1, -1):
        p = _LOG_C[k] + s2 * p
    return e * _LN2 + s * p


def _cos2pi_vec(u):
    sign = np.ones_like(u)
    fold = u >= 0.5
    u = np.where(fold, u - 0.5, u)
    sign = np.where(fold, -sign, sign)
    fold = u >= 0.25
    u = np.where(fold, 0.5 - u, u)
    sign = np.where(fold, -sign, sign)
    t = _TWO_PI * u
    w = t * t
    pc = _COS_C[9]
    for k in range(8, -1, -1):
        pc = _COS_C[k] + w * pc
    t2 = _TWO_PI * (0.25 - u)
    w2 = t2 * t2
    ps = _SIN_C[9]
    for k in range(8, -1, -1):
        ps = _SIN_C[k] + w2 * ps
    return sign * np.where(u <= 0.125, pc, t2 * ps)


def normal_at_vec(keys, idx):
    """Vectorized ``normal_at``: broadcasts keys (uint64 array) against idx."""
    keys = np.asarray(keys, dtype=np.uint64)
    idx = np.asarray(idx, dtype=np.uint64)
    two = np.uint64(2)
    one = np.uint64(1)
    z1 = keys + (two * idx) * _PHI
    z2 = keys + (two * idx + one) * _PHI
    for m in ((30, _M1), (27, _M2), (31, None)):
        sh = np.uint64(m[0])
        z1 = z1 ^ (z1 >> sh)
        z2 = z2 ^ (z2 >> sh)
        if m[1] is not None:
            z1 = z1 * m[1]
            z2 = z2 * m[1]
    u1 = ((z1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
    u2 = (z2 >> np.uint64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * _log_portable_vec(u1)) * _cos2pi_vec(u2)


@njit(cache=True)
def path_key(seed, path_index):
    """Per-path stream key derived from (seed, path-index)."""
    return _mix64(np.uint64(seed) ^ _mix64(np.uint64(path_index) + _PHI))
