"""Karlin-McGregor determinants, transition densities, noncolliding
probabilities, and the star / watermelon / banana inhomogeneous densities.

Evaluation strategy
-------------------

Every quantity here reduces to determinants of one-particle heat kernels
and ordered-region integrals of such determinants.  Three routes are used,
switched automatically:

* **direct** -- log-scaled determinant plus nested Gauss-Legendre
  quadrature over the ordered region (the cube map
  ``y_1 = u_1 L, y_k = y_{k-1} + u_k (L - y_{k-1})``).
* **series** -- when the start configuration is small compared to sqrt(t),
  the direct determinant loses all precision (the columns become nearly
  proportional), so the exact Schur-function expansions of
  ``det[e^{u_i v_j}]`` and ``det[I_nu(2 sqrt(u_i v_j))]`` are used instead;
  the y-integrals of each expansion term are start-independent and cached.
* **localized** -- when t is tiny compared to the gaps of the start
  configuration the integrand is a product of narrow peaks, and a product
  of per-coordinate Gauss-Legendre windows replaces the nested map.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from . import tolerances as tol
from .ensembles import EnsembleSpec, in_chamber, h_poly_log, log_density, norm_constant
from .errors import (ChamberMismatch, DomainError, NoConvergence,
                     UnsupportedDimension)
from .schur import Partition, a_mu, b_mu, partitions_upto, schur_eval_grid
from .specfun import Bessel, KernelTag, heat_kernel_dy, heat_kernel_log

__all__ = [
    "TransitionQuery", "MeanderSpec", "km_determinant", "km_logdet",
    "transition_density", "log_transition_density", "noncoll_probability",
    "meander_weight", "ntilde", "ntilde_mc", "star_density",
    "watermelon_density", "banana_density",
]

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class TransitionQuery:
    family: KernelTag  # "A", "C", "D" or Bessel(nu)
    s: float
    t: float
    x: tuple
    y: tuple

    def __post_init__(self):
        if not (0.0 <= self.s < self.t):
            raise DomainError("need 0 <= s < t")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ChamberMismatch("x and y must have the same length")
        ch = _family_chamber(self.family)
        for p in (self.x, self.y):
            if not in_chamber(np.asarray(p), ch, strict=True):
                raise ChamberMismatch(f"point {p} not in chamber {ch}")


@dataclass(frozen=True)
class MeanderSpec:
    nu: float
    kappa: float
    T: float

    def __post_init__(self):
        if self.nu <= -1.0:
            raise DomainError("MeanderSpec requires nu > -1")
        if not (0.0 <= self.kappa < 2.0 * (self.nu + 1.0)):
            raise DomainError("MeanderSpec requires kappa in [0, 2(nu+1))")
        if self.T <= 0.0:
            raise DomainError("MeanderSpec requires T > 0")


def _family_chamber(tag: KernelTag) -> str:
    if tag == "A":
        return "A"
    if tag in ("C", "D") or isinstance(tag, Bessel):
        return "C"
    raise DomainError(f"unknown kernel family {tag!r}")


# ---------------------------------------------------------------------------
# quadrature grids


@lru_cache(maxsize=None)
def _gl01(n: int):
    """Gauss-Legendre nodes/weights on (0, 1)."""
    z, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (z + 1.0), 0.5 * w


def _default_npts(N: int) -> int:
    return {1: 256, 2: tol.NESTED_GL_POINTS, 3: tol.NESTED_GL_POINTS}.get(N, 24)


def ordered_grid(N: int, lo: float, hi: float, npts: int = None,
                 stretch: float = None):
    """Quadrature rule for the ordered region lo < y_1 < ... < y_N < hi.

    Cube map: y_1 = lo + u_1 (hi-lo), y_k = y_{k-1} + u_k (hi - y_{k-1}).
    With ``stretch = q`` the first coordinate is substituted
    y_1 = lo + (hi-lo) u_1^{1/q}, flattening an integrable power
    singularity y_1^{q-1} at the lower edge.

    Returns (Y, W): points of shape (M, N) and weights of shape (M,).
    """
    if N > 4:
        raise UnsupportedDimension("nested quadrature limited to N <= 4")
    n = npts or _default_npts(N)
    u1, w1 = _gl01(n)
    U = np.meshgrid(*([u1] * N), indexing="ij")
    W = np.ones((n,) * N)
    for wk_axis in range(N):
        shape = [1] * N
        shape[wk_axis] = n
        W = W * w1.reshape(shape)
    U = [a.ravel() for a in U]
    W = W.ravel()
    Y = np.empty((U[0].size, N))
    if stretch is not None and stretch > 0 and not math.isclose(stretch, 1.0):
        q = float(stretch)
        Y[:, 0] = lo + (hi - lo) * U[0] ** (1.0 / q)
        W = W * (hi - lo) / q * U[0] ** (1.0 / q - 1.0)
    else:
        Y[:, 0] = lo + (hi - lo) * U[0]
        W = W * (hi - lo)
    for k in range(1, N):
        span = hi - Y[:, k - 1]
        Y[:, k] = Y[:, k - 1] + U[k] * span
        W = W * span
    return Y, W


def _window_grid(centers, half: float, lo_min: float, npts: int = 32):
    """Product quadrature over disjoint windows [c_k - half, c_k + half].

    Used when the integrand is a product of narrow peaks at ``centers``
    (ordering of the region is then automatic)."""
    centers = np.asarray(centers, dtype=float)
    N = centers.size
    u1, w1 = _gl01(npts)
    nodes = []
    wts = []
    for c in centers:
        a = max(c - half, lo_min)
        b = c + half
        nodes.append(a + (b - a) * u1)
        wts.append((b - a) * w1)
    G = np.meshgrid(*nodes, indexing="ij")
    W = np.ones((npts,) * N)
    for k in range(N):
        shape = [1] * N
        shape[k] = npts
        W = W * wts[k].reshape(shape)
    Y = np.stack([g.ravel() for g in G], axis=-1)
    return Y, W.ravel()


# ---------------------------------------------------------------------------
# Karlin-McGregor determinants


def _logK_matrix(tag: KernelTag, t: float, x, Y):
    """log G(t, Y[..., j] | x_i) with shape (..., N, N); rows i run over x."""
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return heat_kernel_log(tag, t, Y[..., None, :], x[..., :, None])


def _scaled_logdet(logK):
    """(sign, log|det|) of exp(logK) with per-column log rescaling."""
    c = np.max(logK, axis=-2, keepdims=True)
    c = np.where(np.isfinite(c), c, 0.0)
    M = np.exp(logK - c)
    sign, ld = np.linalg.slogdet(M)
    return sign, ld + np.sum(c[..., 0, :], axis=-1)


def km_logdet(family: KernelTag, t: float, x, y):
    """(sign, log|det|) of the heat-kernel determinant det[G(t, y_j | x_i)]."""
    if t <= 0:
        raise DomainError("km_determinant requires t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ChamberMismatch("x and y must be 1-d of equal length")
    sign, ld = _scaled_logdet(_logK_matrix(family, t, x, y))
    return float(sign), float(ld)


def km_determinant(family: KernelTag, t: float, x, y) -> float:
    sign, ld = km_logdet(family, t, x, y)
    return float(sign * math.exp(ld)) if math.isfinite(ld) else 0.0


# ---------------------------------------------------------------------------
# Schur-series route for the determinants and their chamber integrals
#
#   det[G^A(t,y_j|x_i)]    = (2 pi t)^{-N/2} e^{-(|x|^2+|y|^2)/2t}
#                            h^A(u) h^A(v) sum_mu a_mu s_mu(u) s_mu(v),
#                            u = x/sqrt(t), v = y/sqrt(t)
#   det[G^(nu)(t,y_j|x_i)] = t^{-N} (2t)^{-N nu} prod y_j^{2nu+1}
#                            e^{-(|x|^2+|y|^2)/2t} h^A(u) h^A(v)
#                            sum_mu b_mu^(nu) s_mu(u) s_mu(v),
#                            u = x^2/2t, v = y^2/2t


def _h_A_grid(Y):
    n = Y.shape[-1]
    if n == 1:
        return np.ones(Y.shape[:-1])
    out = np.ones(Y.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (Y[..., j] - Y[..., i])
    return out


_J_CACHE = {}
_K_CACHE = {}


def _series_J(N: int, nu: float, kappa: float, mu: Partition) -> float:
    """int_{W^C} prod w^{2nu+1-kappa} h^A(w^2/2) s_mu(w^2/2) e^{-|w|^2/2} dw."""
    key = (N, round(nu, 12), round(kappa, 12), tuple(mu))
    if key not in _J_CACHE:
        p = 2.0 * nu + 1.0 - kappa
        stretch = p + 1.0 if p < 0.5 else None
        Y, W = ordered_grid(N, 0.0, 14.0, stretch=stretch)
        V = Y * Y / 2.0
        vals = (np.prod(Y ** p, axis=-1) * _h_A_grid(V)
                * schur_eval_grid(mu, V) * np.exp(-0.5 * np.sum(Y * Y, axis=-1)))
        _J_CACHE[key] = float(np.dot(vals, W))
    return _J_CACHE[key]


def _series_K(N: int, mu: Partition) -> float:
    """int_{W^A} h^A(v) s_mu(v) e^{-|v|^2/2} dv."""
    key = (N, tuple(mu))
    if key not in _K_CACHE:
        Y, W = ordered_grid(N, -14.0, 14.0)
        vals = (_h_A_grid(Y) * schur_eval_grid(mu, Y)
                * np.exp(-0.5 * np.sum(Y * Y, axis=-1)))
        _K_CACHE[key] = float(np.dot(vals, W))
    return _K_CACHE[key]


def _series_sum(coeff, orders=(8, 12, 16, 20), rel=1e-9):
    """Sum coeff(mu) over partitions, growing the cutoff until stable."""
    prev = None
    for m in orders:
        total = sum(coeff(mu) for mu in partitions_upto(m, coeff.N))
        if prev is not None and abs(total - prev) <= rel * max(abs(total), 1e-300):
            return total
        prev = total
    raise NoConvergence("determinant series did not stabilize")


class _Coeff:
    def __init__(self, N, fn):
        self.N = N
        self.fn = fn

    def __call__(self, mu):
        return self.fn(mu)


def _log_f_series(family: KernelTag, t: float, x, y):
    """Series evaluation of log det[G(t, y_j | x_i)] (positive quantity)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = x.size
    if family == "A":
        u = x / math.sqrt(t)
        v = y / math.sqrt(t)
        su = _h_A_grid(u[None, :])[0]
        sv = _h_A_grid(v[None, :])[0]
        coeff = _Coeff(N, lambda mu: math.exp(a_mu(mu, N))
                       * float(schur_eval_grid(mu, u[None, :])[0])
                       * float(schur_eval_grid(mu, v[None, :])[0]))
        S = _series_sum(coeff)
        base = (-0.5 * N * (_LOG_2PI + math.log(t))
                - (np.dot(x, x) + np.dot(y, y)) / (2.0 * t))
        return base + math.log(su) + math.log(sv) + math.log(S)
    if family == "C":
        # det[G^C] = prod(x_i / y_j) det[G^(1/2)]
        pref = float(np.sum(np.log(x)) - np.sum(np.log(y)))
        return pref + _log_f_series(Bessel(0.5), t, x, y)
    if family == "D":
        return _log_f_series(Bessel(-0.5), t, x, y)
    nu = family.nu
    u = x * x / (2.0 * t)
    v = y * y / (2.0 * t)
    su = _h_A_grid(u[None, :])[0]
    sv = _h_A_grid(v[None, :])[0]
    coeff = _Coeff(N, lambda mu: math.exp(b_mu(nu, mu, N))
                   * float(schur_eval_grid(mu, u[None, :])[0])
                   * float(schur_eval_grid(mu, v[None, :])[0]))
    S = _series_sum(coeff)
    base = (-N * math.log(t) - N * nu * math.log(2.0 * t)
            + (2.0 * nu + 1.0) * float(np.sum(np.log(y)))
            - (np.dot(x, x) + np.dot(y, y)) / (2.0 * t))
    return base + math.log(su) + math.log(sv) + math.log(S)


def _series_regime(family: KernelTag, t: float, x, y=None) -> bool:
    x = np.asarray(x, dtype=float)
    if family == "A":
        m = np.max(np.abs(x)) / math.sqrt(t)
        if y is not None:
            m = math.sqrt(m * np.max(np.abs(np.asarray(y))) / math.sqrt(t))
    else:
        m = np.max(x * x) / (2.0 * t)
        if y is not None:
            m = math.sqrt(m * np.max(np.asarray(y) ** 2) / (2.0 * t))
    return m <= tol.SERIES_SWITCH


def _log_f(family: KernelTag, t: float, x, y) -> float:
    """log of the KM determinant, choosing direct vs series route."""
    if _series_regime(family, t, x, y):
        return _log_f_series(family, t, x, y)
    sign, ld = km_logdet(family, t, x, y)
    if sign <= 0:
        return -math.inf
    return ld


# ---------------------------------------------------------------------------
# transition densities (h-transforms)


def _family_h_kind(family: KernelTag):
    if family == "A":
        return "A"
    if family == "C":
        return ("alpha", 1.0)
    if family == "D":
        return ("alpha", 0.0)
    if isinstance(family, Bessel):
        # the harmonic function of the Bessel determinant is the bare
        # squared-difference product, independent of nu
        return ("alpha", 0.0)
    raise DomainError(f"unknown kernel family {family!r}")


def log_transition_density(q: TransitionQuery) -> float:
    kind = _family_h_kind(q.family)
    dt = q.t - q.s
    _, lhx = h_poly_log(kind, np.asarray(q.x))
    _, lhy = h_poly_log(kind, np.asarray(q.y))
    return _log_f(q.family, dt, q.x, q.y) + lhy - lhx


def transition_density(q: TransitionQuery) -> float:
    lg = log_transition_density(q)
    return math.exp(lg) if math.isfinite(lg) else 0.0


# ---------------------------------------------------------------------------
# chamber integrals of the determinants


def _ntilde_direct(nu: float, kappa: float, t: float, X, npts=None) -> float:
    """Nested quadrature for int_{W^C} det[G^(nu)(t,z_j|x_i)] prod z^-kappa dz.

    X may be (N,) or a batch (M, N); returns scalar or (M,)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    N = X.shape[-1]
    p = 2.0 * nu + 1.0 - kappa
    stretch = p + 1.0 if p < 0.5 else None
    hi = float(np.max(X)) + tol.TRUNCATION_SIGMAS * math.sqrt(t)
    Z, W = ordered_grid(N, 0.0, hi, npts=npts, stretch=stretch)
    logw = W * 1.0
    if kappa != 0.0:
        logw = W * np.prod(Z ** (-kappa), axis=-1)
    out = np.empty(X.shape[0])
    chunk = max(1, 4_000_000 // max(Z.shape[0], 1))
    for a in range(0, X.shape[0], chunk):
        xb = X[a:a + chunk]
        logK = heat_kernel_log(Bessel(nu), t, Z[None, :, None, :],
                               xb[:, None, :, None])
        sign, ld = _scaled_logdet(logK)
        vals = sign * np.exp(ld)
        out[a:a + chunk] = vals @ logw
    return float(out[0]) if single else out


def _log_ntilde_series(nu: float, kappa: float, t: float, x) -> float:
    x = np.asarray(x, dtype=float)
    N = x.size
    u = x * x / (2.0 * t)
    coeff = _Coeff(N, lambda mu: math.exp(b_mu(nu, mu, N))
                   * float(schur_eval_grid(mu, u[None, :])[0])
                   * _series_J(N, nu, kappa, mu))
    S = _series_sum(coeff)
    hu = _h_A_grid(u[None, :])[0]
    return (-N * math.log(t) - N * nu * math.log(2.0 * t)
            - float(np.dot(x, x)) / (2.0 * t)
            + math.log(hu) + math.log(S)
            + 0.5 * N * (2.0 * nu + 2.0 - kappa) * math.log(t))


def _log_nA_series(t: float, x) -> float:
    x = np.asarray(x, dtype=float)
    N = x.size
    u = x / math.sqrt(t)
    coeff = _Coeff(N, lambda mu: math.exp(a_mu(mu, N))
                   * float(schur_eval_grid(mu, u[None, :])[0])
                   * _series_K(N, mu))
    S = _series_sum(coeff)
    hu = _h_A_grid(u[None, :])[0]
    return (-0.5 * N * _LOG_2PI - float(np.dot(x, x)) / (2.0 * t)
            + math.log(hu) + math.log(S))


def _localized_ok(x, t: float) -> bool:
    """True when 12 sqrt(t) windows around x are disjoint and positive."""
    x = np.asarray(x, dtype=float)
    half = tol.TRUNCATION_SIGMAS * math.sqrt(t)
    gaps = [x[0]] + list(np.diff(x))
    return half < 0.45 * min(gaps)


def _ntilde_localized(nu: float, kappa: float, t: float, x) -> float:
    x = np.asarray(x, dtype=float)
    half = tol.TRUNCATION_SIGMAS * math.sqrt(t)
    Z, W = _window_grid(x, half, 0.0)
    if kappa != 0.0:
        W = W * np.prod(Z ** (-kappa), axis=-1)
    logK = heat_kernel_log(Bessel(nu), t, Z[:, None, :], x[None, :, None])
    sign, ld = _scaled_logdet(logK)
    return float((sign * np.exp(ld)) @ W)


def log_ntilde(ms: MeanderSpec, N: int, t: float, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size != N:
        raise ChamberMismatch(f"expected {N} coordinates")
    if not in_chamber(x, "C", strict=True):
        raise ChamberMismatch("ntilde requires a strictly interior C-point")
    if t <= 0:
        raise DomainError("ntilde requires t > 0")
    if _localized_ok(x, t):
        v = _ntilde_localized(ms.nu, ms.kappa, t, x)
        return math.log(v) if v > 0 else -math.inf
    if _series_regime(Bessel(ms.nu), t, x):
        return _log_ntilde_series(ms.nu, ms.kappa, t, x)
    if N > 3:
        raise UnsupportedDimension("quadrature ntilde limited to N <= 3; "
                                   "use ntilde_mc")
    v = _ntilde_direct(ms.nu, ms.kappa, t, x)
    return math.log(v) if v > 0 else -math.inf


def ntilde(ms: MeanderSpec, N: int, t: float, x) -> float:
    return math.exp(log_ntilde(ms, N, t, x))


def ntilde_mc(ms: MeanderSpec, N: int, t: float, x, samples: int = 200_000,
              seed: int = 0):
    """Monte Carlo estimate of ntilde with standard error.

    Draw Z_i independently from the one-particle kernel started at x_i
    (via the noncentral chi-square representation); the estimator is
    sign(sorting permutation) * prod Z^-kappa, whose mean is the ordered
    determinant integral.
    """
    from ._rng import generator

    x = np.asarray(x, dtype=float)
    rng = generator(seed, 7)
    df = 2.0 * (ms.nu + 1.0)
    nc = (x * x) / t
    Z2 = t * rng.noncentral_chisquare(df, nc, size=(samples, x.size))
    Z = np.sqrt(Z2)
    order = np.argsort(Z, axis=1)
    # permutation sign via inversion count (N is tiny)
    inv = np.zeros(samples)
    for i in range(x.size):
        for j in range(i + 1, x.size):
            inv += order[:, i] > order[:, j]
    sgn = np.where(inv % 2 == 0, 1.0, -1.0)
    w = sgn * np.prod(Z ** (-ms.kappa), axis=1)
    mean = float(np.mean(w))
    stderr = float(np.std(w, ddof=1) / math.sqrt(samples))
    return mean, stderr


def noncoll_probability(family: str, t: float, x) -> float:
    """Probability that independent particles started at x stay ordered
    (and away from the absorbing wall, for C/D) up to time t."""
    x = np.asarray(x, dtype=float)
    N = x.size
    if N > 4:
        raise UnsupportedDimension("noncoll_probability limited to N <= 4")
    if t <= 0:
        raise DomainError("noncoll_probability requires t > 0")
    if family == "A":
        if not in_chamber(x, "A", strict=True):
            raise ChamberMismatch("x must be strictly ordered")
        if N == 1:
            return 1.0
        if _localized_ok(x - x[0] + np.max(np.diff(x)), t):
            # gaps large compared to sqrt(t): integrand is a product of peaks
            half = tol.TRUNCATION_SIGMAS * math.sqrt(t)
            Z, W = _window_grid(x, half, -np.inf)
            logK = heat_kernel_log("A", t, Z[:, None, :], x[None, :, None])
            sign, ld = _scaled_logdet(logK)
            return float(min((sign * np.exp(ld)) @ W, 1.0))
        if _series_regime("A", t, x):
            return math.exp(_log_nA_series(t, x))
        lo = float(np.min(x)) - tol.TRUNCATION_SIGMAS * math.sqrt(t)
        hi = float(np.max(x)) + tol.TRUNCATION_SIGMAS * math.sqrt(t)
        Z, W = ordered_grid(N, lo, hi)
        logK = heat_kernel_log("A", t, Z[:, None, :], x[None, :, None])
        sign, ld = _scaled_logdet(logK)
        return float(min((sign * np.exp(ld)) @ W, 1.0))
    if family == "C":
        # N^C(t, x) = prod x_i * ntilde^{(1/2, 1)}(t, x)
        ms = MeanderSpec(nu=0.5, kappa=1.0, T=1.0)
        lg = log_ntilde(ms, N, t, x) + float(np.sum(np.log(x)))
        return float(min(math.exp(lg), 1.0))
    if family == "D":
        ms = MeanderSpec(nu=-0.5, kappa=0.0, T=1.0)
        lg = log_ntilde(ms, N, t, x)
        return float(min(math.exp(lg), 1.0))
    raise DomainError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# meander weight (single coordinate)


def meander_weight(ms: MeanderSpec, t: float, x: float) -> float:
    """h weight int_0^inf G^(nu)(T-t, z | x) z^-kappa dz; x^-kappa at t=T."""
    if not (0.0 <= t <= ms.T):
        raise DomainError("meander_weight requires 0 <= t <= T")
    if x < 0:
        raise DomainError("meander_weight requires x >= 0")
    tau = ms.T - t
    if tau <= 0.0 or tau < 1e-14 * ms.T:
        return float(x) ** (-ms.kappa) if ms.kappa else 1.0
    if ms.kappa == 0.0:
        return 1.0
    from scipy.integrate import quad

    hi = x + tol.TRUNCATION_SIGMAS * math.sqrt(tau)
    q = 2.0 * ms.nu + 2.0 - ms.kappa

    def integrand(s):
        z = hi * s ** (1.0 / q)
        g = math.exp(heat_kernel_log(Bessel(ms.nu), tau, z, x))
        return g * z ** (-ms.kappa) * (hi / q) * s ** (1.0 / q - 1.0)

    val, _ = quad(integrand, 0.0, 1.0, epsrel=1e-10, epsabs=0.0, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# star topology


def _is_origin(x) -> bool:
    return x is None or (np.size(x) > 0 and np.max(np.abs(np.asarray(x, dtype=float))) == 0.0)


def star_density(ms: MeanderSpec, N: int, s: float, x, t: float, y,
                 family: str = "Bessel") -> float:
    """Transition density of the noncolliding process conditioned to stay
    ordered (and wall-avoiding) on [0, T], with the z^-kappa meander weight.

    ``family="A"`` gives the plain noncolliding Brownian motion version
    (nu, kappa of ms are ignored; only the horizon T is used).
    """
    y = np.asarray(y, dtype=float)
    if y.size != N:
        raise ChamberMismatch(f"expected {N} coordinates for y")
    if not (0.0 <= s < t <= ms.T):
        raise DomainError("need 0 <= s < t <= T")
    T = ms.T
    if family == "A":
        if not in_chamber(y, "A", strict=False):
            raise ChamberMismatch("y not in closure of chamber A")
        if not in_chamber(y, "A", strict=True):
            return 0.0
        _, lhy = h_poly_log("A", y)
        if _is_origin(x):
            if s != 0.0:
                raise DomainError("origin start requires s = 0")
            base = (0.25 * N * (N - 1) * math.log(T / t)
                    - 0.25 * N * (N + 1) * math.log(t)
                    - norm_constant("C_Aprime", N)
                    + lhy - float(np.dot(y, y)) / (2.0 * t))
            tail = 0.0 if t == T else math.log(
                noncoll_probability("A", T - t, y))
            return math.exp(base + tail)
        x = np.asarray(x, dtype=float)
        if not in_chamber(x, "A", strict=True):
            raise ChamberMismatch("x must be strictly inside chamber A")
        num = _log_f("A", t - s, x, y)
        num += 0.0 if t == T else math.log(noncoll_probability("A", T - t, y))
        den = math.log(noncoll_probability("A", T - s, x))
        return math.exp(num - den)
    # Bessel / meander family
    if not in_chamber(y, "C", strict=False):
        raise ChamberMismatch("y not in closure of chamber C")
    if not in_chamber(y, "C", strict=True):
        return 0.0
    nu, kappa = ms.nu, ms.kappa
    if _is_origin(x):
        if s != 0.0:
            raise DomainError("origin start requires s = 0")
        if t == T:
            _, lh = h_poly_log(("alpha", 2.0 * nu + 1.0 - kappa), y)
            base = (-0.5 * N * (N + 2.0 * nu + 1.0 - kappa) * math.log(T)
                    - norm_constant("C_nu_kappa", N, nu=nu, kappa=kappa)
                    - float(np.dot(y, y)) / (2.0 * T) + lh)
            return math.exp(base)
        _, lh = h_poly_log(("alpha", 2.0 * nu + 1.0), y)
        base = (0.5 * N * (N + kappa - 1.0) * math.log(T)
                - N * (N + nu) * math.log(t)
                - norm_constant("C_nu_kappa", N, nu=nu, kappa=kappa)
                - float(np.dot(y, y)) / (2.0 * t) + lh)
        return math.exp(base + log_ntilde(ms, N, T - t, y))
    x = np.asarray(x, dtype=float)
    if not in_chamber(x, "C", strict=True):
        raise ChamberMismatch("x must be strictly inside chamber C")
    num = _log_f(Bessel(nu), t - s, x, y)
    if t == T:
        num += -kappa * float(np.sum(np.log(y)))
    else:
        num += log_ntilde(ms, N, T - t, y)
    den = log_ntilde(ms, N, T - s, x)
    return math.exp(num - den)


def star_density_grid(ms: MeanderSpec, N: int, s: float, x, t: float, Y,
                      family: str = "Bessel") -> np.ndarray:
    """Vectorized star_density over a batch Y of shape (M, N) of strictly
    interior points (quadrature/binning helper; direct route only for the
    final-state factor)."""
    Y = np.asarray(Y, dtype=float)
    T = ms.T
    if family == "A":
        raise DomainError("grid evaluation provided for the meander family")
    nu, kappa = ms.nu, ms.kappa
    if t == T:
        tail = -kappa * np.sum(np.log(Y), axis=-1)
    else:
        tail = np.log(_ntilde_direct(nu, kappa, T - t, Y))
    if _is_origin(x):
        lh = np.array([h_poly_log(("alpha", 2.0 * nu + 1.0), yy)[1] for yy in Y])
        base = (0.5 * N * (N + kappa - 1.0) * math.log(T)
                - N * (N + nu) * math.log(t)
                - norm_constant("C_nu_kappa", N, nu=nu, kappa=kappa)
                - np.sum(Y * Y, axis=-1) / (2.0 * t) + lh)
        return np.exp(base + tail)
    x = np.asarray(x, dtype=float)
    logK = heat_kernel_log(Bessel(nu), t - s, Y[:, None, :], x[None, :, None])
    sign, ld = _scaled_logdet(logK)
    den = log_ntilde(ms, N, T - s, x)
    return sign * np.exp(ld + tail - den)


# ---------------------------------------------------------------------------
# watermelon topology


def watermelon_density(family, N: int, T: float, t: float, y) -> float:
    """Density at time t of the process pinned to the origin at 0 and T."""
    if not (0.0 < t < T):
        raise DomainError("watermelon_density requires 0 < t < T")
    y = np.asarray(y, dtype=float)
    if y.size != N:
        raise ChamberMismatch(f"expected {N} coordinates")
    var = t * (1.0 - t / T)
    if family == "A":
        spec = EnsembleSpec("GUE", N, t=var)
        return math.exp(log_density(spec, y))
    if isinstance(family, Bessel):
        nu = family.nu
        _, lh = h_poly_log(("alpha", (2.0 * nu + 1.0) / 2.0), y)
        if not in_chamber(y, "C", strict=False):
            raise ChamberMismatch("y not in closure of chamber C")
        base = (-N * (N + nu) * math.log(var)
                - norm_constant("C_nu", N, nu=nu)
                - float(np.dot(y, y)) / (2.0 * var) + 2.0 * lh)
        return math.exp(base)
    raise DomainError(f"unknown watermelon family {family!r}")


# ---------------------------------------------------------------------------
# banana topology


def _banana_logdet(family, t: float, x, Y, kappa: float = 0.0,
                   deriv: str = "analytic", fd_step: float = 1e-6):
    """Batched log-determinant of the rectangular pairing kernel.

    x has 2N coordinates, Y has shape (M, N).  Columns are the N kernel
    columns followed by N paired columns ((x_i/t) G for the Brownian
    family, dG/dy for the radial family).  Returns (sign, logdet) arrays.
    """
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    twoN = x.size
    N = Y.shape[-1]
    if twoN != 2 * N:
        raise ChamberMismatch("x must have twice as many coordinates as y")
    tag = "A" if family == "A" else family
    logG = heat_kernel_log(tag, t, Y[:, None, :], x[None, :, None])  # (M,2N,N)
    G = np.exp(logG)
    if family == "A":
        D = (x[None, :, None] / t) * G
    elif deriv == "analytic":
        D = heat_kernel_dy(tag.nu, t, Y[:, None, :], x[None, :, None])
    else:
        D = (np.exp(heat_kernel_log(tag, t, Y[:, None, :] + fd_step,
                                    x[None, :, None]))
             - np.exp(heat_kernel_log(tag, t, Y[:, None, :] - fd_step,
                                      x[None, :, None]))) / (2.0 * fd_step)
    # interleave (G_1, dG_1, G_2, dG_2, ...): the column order inherited
    # from the ordered pairwise-degenerate limit (sign matters for even N)
    M_full = np.empty(G.shape[:-1] + (2 * N,))
    M_full[..., 0::2] = G
    M_full[..., 1::2] = D
    cmax = np.max(np.abs(M_full), axis=-2, keepdims=True)
    cmax = np.where(cmax > 0, cmax, 1.0)
    sign, ld = np.linalg.slogdet(M_full / cmax)
    return sign, ld + np.sum(np.log(cmax[:, 0, :]), axis=-1)


def _banana_norm(family, t: float, x, kappa: float = 0.0,
                 deriv: str = "analytic") -> float:
    """Chamber integral of the rectangular pairing determinant (the
    probability weight of ending pairwise degenerate)."""
    x = np.asarray(x, dtype=float)
    N = x.size // 2
    mid = 0.5 * (x[0::2] + x[1::2])
    half = (tol.TRUNCATION_SIGMAS * math.sqrt(t)
            + 0.5 * float(np.max(x[1::2] - x[0::2])))
    gaps = list(np.diff(mid))
    if family != "A":
        gaps.append(mid[0])
    if gaps and half < 0.45 * min(gaps):
        # pairing integrand is a product of narrow peaks at the pair midpoints;
        # point count keeps the node spacing below half the peak width
        nw = int(min(160, max(32, math.ceil(4.0 * half / math.sqrt(t)))))
        Z, W = _window_grid(mid, half, -np.inf if family == "A" else 0.0,
                            npts=nw)
        if family != "A" and kappa != 0.0:
            W = W * np.prod(Z ** (-kappa), axis=-1)
        sign, ld = _banana_logdet(family, t, x, Z, kappa=kappa, deriv=deriv)
        return float((sign * np.exp(ld)) @ W)
    if family == "A":
        lo = float(np.min(x)) - tol.TRUNCATION_SIGMAS * math.sqrt(t)
        hi = float(np.max(x)) + tol.TRUNCATION_SIGMAS * math.sqrt(t)
        Z, W = ordered_grid(N, lo, hi)
    else:
        nu = family.nu
        p = 2.0 * nu + 1.0 - kappa
        stretch = p + 1.0 if p < 0.5 else None
        hi = float(np.max(x)) + tol.TRUNCATION_SIGMAS * math.sqrt(t)
        Z, W = ordered_grid(N, 0.0, hi, stretch=stretch)
        if kappa != 0.0:
            W = W * np.prod(Z ** (-kappa), axis=-1)
    sign, ld = _banana_logdet(family, t, x, Z, kappa=kappa, deriv=deriv)
    return float((sign * np.exp(ld)) @ W)


def _banana_origin_logconst(N: int, nu: float, kappa: float, T: float,
                            t: float) -> float:
    """log of the prefactor of the origin-start pairing density.

    Obtained from the small-start determinant asymptotics: the start factor
    of the 2N-particle kernel determinant cancels against the one hidden in
    the pairing normalization at horizon T, whose leading coefficient is the
    quartic Selberg integral I = int_{W^C} prod (w_l^2-w_k^2)^4
    prod w^{4 nu + 3 - kappa} e^{-|w|^2/2} dw (gamma = 2,
    alpha = 2 nu + 2 - kappa/2 in the closed form).
    """
    from .schur import selberg_value

    alpha = 2.0 * nu + 2.0 - kappa / 2.0
    logI = (math.log(selberg_value(N, alpha, 2.0))
            - N * math.log(2.0) - math.lgamma(N + 1.0))
    p = 0.5 * N + 2.0 * N * (N - 1.0) + 0.5 * N * (4.0 * nu + 3.0 - kappa)
    return (N * (2 * N - 1) * (math.log(T) - math.log(t))
            - N * (2 * N + 2 * nu + 1) * math.log(t)
            + N * (2 * N + 2 * nu + 1) * math.log(T)
            - N * math.log(2.0)
            - p * (math.log(T) - math.log(2.0))
            - logI)


def banana_density(family, two_n: int, T: float, s: float, x, t: float, y,
                   kappa: float = 0.0, deriv: str = "analytic") -> float:
    """Density of the noncolliding process conditioned to end pairwise
    degenerate at the horizon T.

    family is "A" or Bessel(nu) (kappa supplies the meander weight for the
    radial family).  For t < T, y has 2N coordinates; at t = T, y may have
    N coordinates (the distinct pair positions) or 2N pairwise-equal ones.
    """
    if two_n % 2:
        raise DomainError("the particle count must be even")
    N = two_n // 2
    if not (0.0 <= s < t <= T):
        raise DomainError("need 0 <= s < t <= T")
    y = np.asarray(y, dtype=float)
    ch = "A" if family == "A" else "C"
    if t == T:
        if y.size == two_n:
            pairs = y.reshape(N, 2)
            if np.max(np.abs(pairs[:, 1] - pairs[:, 0])) > tol.MEMBERSHIP_TOL:
                return 0.0
            yo = pairs[:, 0]
        elif y.size == N:
            yo = y
        else:
            raise ChamberMismatch("final-time y must have N or 2N coordinates")
        if not _is_origin(x):
            raise DomainError("the final-time closed form is for the origin start")
        if family == "A":
            return math.exp(log_density(EnsembleSpec("GSE", N, t=T / 2.0), yo))
        nu = family.nu
        _, lh = h_poly_log(("alpha", (4.0 * nu - 2.0 * kappa + 3.0) / 4.0), yo)
        base = (2.0 * N * (N + nu) * math.log(2.0 / T)
                - norm_constant("Chat_nu", N, nu=nu)
                - float(np.dot(yo, yo)) / T + 4.0 * lh)
        return math.exp(base)
    if y.size != two_n:
        raise ChamberMismatch(f"expected {two_n} coordinates for y")
    if not in_chamber(y, ch, strict=False):
        raise ChamberMismatch(f"y not in closure of chamber {ch}")
    if not in_chamber(y, ch, strict=True):
        return 0.0
    tau = T - t
    if _is_origin(x):
        if s != 0.0:
            raise DomainError("origin start requires s = 0")
        if family == "A":
            _, lhy = h_poly_log("A", y)
            base = (0.5 * N * (2 * N + 1) * math.log(T / 2.0)
                    - 2.0 * N * N * math.log(t / 2.0)
                    - norm_constant("C_Adoubleprime", N)
                    + lhy - float(np.dot(y, y)) / (2.0 * t))
        else:
            nu = family.nu
            _, lhy = h_poly_log(("alpha", 2.0 * nu + 1.0), y)
            base = (_banana_origin_logconst(N, nu, kappa, T, t)
                    + lhy - float(np.dot(y, y)) / (2.0 * t))
        nb = _banana_norm(family, tau, y, kappa=kappa, deriv=deriv)
        return math.exp(base) * nb if nb > 0 else 0.0
    x = np.asarray(x, dtype=float)
    if x.size != two_n or not in_chamber(x, ch, strict=True):
        raise ChamberMismatch(f"x must be {two_n} strictly interior coordinates")
    tag = "A" if family == "A" else family
    lf = _log_f(tag, t - s, x, y)
    num = _banana_norm(family, tau, y, kappa=kappa, deriv=deriv)
    den = _banana_norm(family, T - s, x, kappa=kappa, deriv=deriv)
    return math.exp(lf) * num / den
