"""Partitions, Schur polynomials, determinant expansions, and the
Selberg-type Gaussian integral.

The two expansions implemented here (and reused by the kernel module for
small-argument determinant evaluation):

    det[e^{x_i y_j}]            = h^A(x) h^A(y) sum_mu a_mu s_mu(x) s_mu(y)
    det[I_nu(2 sqrt(x_i y_j))]  = prod(x_i y_i)^{nu/2} h^A(x) h^A(y)
                                  * sum_mu b_mu^{(nu)} s_mu(x) s_mu(y)

with a_mu = 1/prod Gamma(mu_i + N - i + 1) and
b_mu^{(nu)} = a_mu / prod Gamma(nu + mu_i + N - i + 1).
"""

import math
from functools import lru_cache
from typing import Tuple

import numpy as np

from .errors import DomainError
from .specfun import log_gamma
from . import tolerances as tol

__all__ = [
    "Partition", "partitions_upto", "schur_eval", "a_mu", "b_mu",
    "expansion_check", "series_sum_log", "selberg_value",
]


class Partition(tuple):
    """Weakly decreasing nonnegative integer parts (trailing zeros stripped)."""

    def __new__(cls, parts=()):
        parts = tuple(int(p) for p in parts)
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise DomainError("partition parts must be weakly decreasing")
        if any(p < 0 for p in parts):
            raise DomainError("partition parts must be nonnegative")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        return super().__new__(cls, parts)

    @property
    def weight(self):
        return sum(self)

    @property
    def length(self):
        return len(self)


@lru_cache(maxsize=None)
def partitions_upto(m: int, maxlen: int) -> Tuple[Partition, ...]:
    """All partitions with |mu| <= m and l(mu) <= maxlen, lexicographic."""
    out = [Partition()]

    def gen(prefix, remaining, cap):
        for p in range(min(remaining, cap), 0, -1):
            nxt = prefix + (p,)
            out.append(Partition(nxt))
            if len(nxt) < maxlen:
                gen(nxt, remaining - p, p)

    gen((), m, m)
    out.sort()
    return tuple(out)


def _complete_homogeneous(x, kmax):
    """h_0..h_kmax via Newton's identity k h_k = sum_j p_j h_{k-j}."""
    x = np.asarray(x, dtype=float)
    p = [np.sum(x ** j) for j in range(kmax + 1)]
    h = [1.0]
    for k in range(1, kmax + 1):
        h.append(sum(p[j] * h[k - j] for j in range(1, k + 1)) / k)
    return h


def schur_eval(mu, x) -> float:
    """s_mu(x) by the bialternant ratio of determinants; falls back to the
    Jacobi-Trudi determinant when coordinates nearly coincide."""
    mu = Partition(mu)
    x = np.asarray(x, dtype=float)
    n = x.size
    if mu.length > n:
        raise DomainError("partition longer than the variable vector")
    if not mu:
        return 1.0
    gaps = np.abs(x[:, None] - x[None, :])[np.triu_indices(n, k=1)]
    if gaps.size and np.min(gaps) < tol.SCHUR_GAP_FALLBACK:
        ell = mu.length
        h = _complete_homogeneous(x, mu[0] + ell)
        M = np.empty((ell, ell))
        for i in range(ell):
            for j in range(ell):
                k = mu[i] - (i + 1) + (j + 1)
                M[i, j] = h[k] if k >= 0 else 0.0
        return float(np.linalg.det(M))
    exps = np.array([(mu[j] if j < mu.length else 0) + n - 1 - j for j in range(n)])
    num = np.linalg.det(np.power.outer(x, exps).astype(float))
    den = np.linalg.det(np.power.outer(x, np.arange(n - 1, -1, -1)).astype(float))
    return float(num / den)


def schur_eval_grid(mu, X) -> np.ndarray:
    """Bialternant s_mu on a stack of points X with shape (..., N).

    Grid points are assumed well separated (quadrature nodes)."""
    mu = Partition(mu)
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    if not mu:
        return np.ones(X.shape[:-1])
    exps = np.array([(mu[j] if j < mu.length else 0) + n - 1 - j for j in range(n)])
    num = np.linalg.det(X[..., :, None] ** exps[None, :])
    den = np.linalg.det(X[..., :, None] ** np.arange(n - 1, -1, -1)[None, :])
    return num / den


def a_mu(mu, N: int) -> float:
    """log of a_mu = 1/prod_i Gamma(mu_i + N - i + 1), i = 1..N."""
    mu = Partition(mu)
    return -sum(
        float(log_gamma((mu[i - 1] if i - 1 < mu.length else 0) + N - i + 1))
        for i in range(1, N + 1))


def b_mu(nu: float, mu, N: int) -> float:
    """log of b_mu^{(nu)} = a_mu / prod_i Gamma(nu + mu_i + N - i + 1)."""
    mu = Partition(mu)
    return a_mu(mu, N) - sum(
        float(log_gamma(nu + (mu[i - 1] if i - 1 < mu.length else 0) + N - i + 1))
        for i in range(1, N + 1))


def series_sum_log(kind: str, u, v, m: int = tol.SCHUR_CUTOFF_DEFAULT,
                   nu: float = None) -> float:
    """log of sum_{|mu|<=m} c_mu s_mu(u) s_mu(v) with c_mu = a_mu (kind
    "exp") or b_mu^{(nu)} (kind "bessel").  u, v nonnegative vectors; the
    sum is positive term by term on ordered nonnegative arguments."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    N = u.size
    terms = []
    for mu in partitions_upto(m, N):
        logc = a_mu(mu, N) if kind == "exp" else b_mu(nu, mu, N)
        su = schur_eval(mu, u)
        sv = schur_eval(mu, v)
        if su <= 0 or sv <= 0:
            continue
        terms.append(logc + math.log(su) + math.log(sv))
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def _det_exact(kind, x, y, nu):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "exp":
        return float(np.linalg.det(np.exp(np.outer(x, y))))
    from scipy.special import iv

    return float(np.linalg.det(iv(nu, 2.0 * np.sqrt(np.outer(x, y)))))


def expansion_check(kind: str, x, y, cutoff: int = tol.SCHUR_CUTOFF_DEFAULT,
                    nu: float = None):
    """(truncated series incl. prefactors, exact determinant, |residual|)."""
    if kind not in ("exp", "bessel"):
        raise DomainError(f"unknown expansion kind {kind!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = x.size
    hx = np.prod([x[j] - x[i] for i in range(N) for j in range(i + 1, N)]) if N > 1 else 1.0
    hy = np.prod([y[j] - y[i] for i in range(N) for j in range(i + 1, N)]) if N > 1 else 1.0
    pref = hx * hy
    if kind == "bessel":
        pref *= float(np.prod((x * y) ** (nu / 2.0)))
    total = 0.0
    for mu in partitions_upto(cutoff, N):
        logc = a_mu(mu, N) if kind == "exp" else b_mu(nu, mu, N)
        total += math.exp(logc) * schur_eval(mu, x) * schur_eval(mu, y)
    approx = pref * total
    exact = _det_exact(kind, x, y, nu)
    return approx, exact, abs(approx - exact)


def selberg_value(N: int, alpha: float, gamma: float) -> float:
    """Gaussian Selberg-type integral over R^N:

    int prod_{i<j} |u_j^2-u_i^2|^{2 gamma} prod_k |u_k|^{2 alpha - 1}
        e^{-|u|^2/2} du
      = 2^{alpha N + gamma N(N-1)} prod_{i=1}^N
        Gamma(1 + i gamma) Gamma(alpha + gamma (i-1)) / Gamma(1 + gamma).
    """
    if alpha <= 0 or gamma <= 0:
        raise DomainError("selberg_value requires alpha > 0 and gamma > 0")
    logv = (alpha * N + gamma * N * (N - 1)) * math.log(2.0)
    for i in range(1, N + 1):
        logv += float(log_gamma(1 + i * gamma))
        logv += float(log_gamma(alpha + gamma * (i - 1)))
        logv -= float(log_gamma(1 + gamma))
    return math.exp(logv)


def selberg_quadrature(N: int, alpha: float, gamma: float,
                       npts: int = 96, cutoff: float = 12.0) -> float:
    """Direct quadrature oracle for selberg_value.

    The integrand is even in every coordinate and symmetric under
    permutations, so the integral is 2^N N! times the integral over the
    ordered positive region 0 < u_1 < ... < u_N, where every |.| factor
    is smooth.  The ordered region is covered by nested Gauss-Legendre
    rules (u_k on [0, u_{k+1}]).
    """
    if alpha <= 0 or gamma <= 0:
        raise DomainError("selberg_quadrature requires alpha > 0 and gamma > 0")
    if N > 3:
        raise DomainError("quadrature oracle supports N <= 3")
    nodes, weights = np.polynomial.legendre.leggauss(npts)

    def nested(depth, upper, outer):
        # integrate over u <= upper with the already-fixed outer coordinates
        u = 0.5 * upper * (nodes + 1.0)
        w = 0.5 * upper * weights
        total = 0.0
        for ui, wi in zip(u, w):
            f = ui ** (2.0 * alpha - 1.0) * math.exp(-ui * ui / 2.0)
            for uj in outer:
                f *= (uj * uj - ui * ui) ** (2.0 * gamma)
            if depth > 1:
                f *= nested(depth - 1, ui, outer + [ui])
            total += wi * f
        return total

    return float(2.0 ** N * math.factorial(N) * nested(N, cutoff, []))
