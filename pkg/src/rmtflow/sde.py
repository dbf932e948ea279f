"""Direct Euler-Maruyama integration of the particle SDEs.

Families
--------
Dyson(beta)        dY_i = dB_i + (beta/2) sum_{j!=i} dt/(Y_i - Y_j)
Radial(beta,gamma) dZ_i = dB_i + (beta/2)[gamma/Z_i
                            + sum_{j!=i}(1/(Z_i-Z_j) + 1/(Z_i+Z_j))] dt
Bessel(nu)         independent 2(nu+1)-dimensional Bessel coordinates
Meander(nu,kappa,T) dX_i = dB_i + [(2nu+1)/(2X_i)
                            + d/dx_i ln Ntilde^{(nu,kappa)}(T-t, X)] dt
LaguerreEV(beta,nu) dl_i = 2 sqrt(l_i) dB_i
                            + beta[(N+nu) + sum_{j!=i}(l_i+l_j)/(l_i-l_j)] dt

Origin starts are singular (every drift diverges at 0); ``integrate``
warm-starts them by sampling the exact analytic marginal at
t_eps = WARM_START_FRACTION * horizon and integrating from there.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import tolerances as tol
from ._em import (FAM_BESSEL, FAM_DYSON, FAM_LAGUERRE, FAM_RADIAL, run_em)
from ._rng import generator
from .ensembles import in_chamber
from .errors import DomainError, SpecError, StepCollapse, UnsupportedDimension
from .kernels import MeanderSpec, log_ntilde
from .matproc import PathGrid

__all__ = [
    "SdeSpec", "integrate", "meander_drift", "geometric_times",
    "sample_dyson_marginal", "sample_radial_marginal",
    "sample_laguerre_marginal", "sample_bessel_marginal",
]

_FAMILIES = ("Dyson", "Radial", "Bessel", "Meander", "LaguerreEV")


@dataclass(frozen=True)
class SdeSpec:
    family: str
    N: int
    grid: PathGrid
    seed: int
    x0: Optional[Tuple[float, ...]] = None  # None = origin start
    beta: float = 2.0
    gamma: float = 0.0
    nu: float = 0.0
    kappa: float = 0.0
    T: Optional[float] = None  # meander horizon

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise SpecError(f"unknown SDE family {self.family!r}")
        if self.N < 1:
            raise SpecError("N >= 1 required")
        if self.family in ("Dyson", "Radial", "LaguerreEV") and self.beta not in (1.0, 2.0, 4.0):
            raise SpecError("beta must be 1, 2 or 4")
        if self.family == "Radial" and self.gamma < 0:
            raise SpecError("gamma >= 0 required")
        if self.family in ("Bessel", "Meander", "LaguerreEV") and self.nu <= -1:
            raise SpecError("nu > -1 required")
        if self.family == "Meander":
            if not (0 <= self.kappa < 2 * (self.nu + 1)):
                raise SpecError("kappa in [0, 2(nu+1)) required")
            if self.T is None or self.T < self.grid.T:
                raise SpecError("Meander requires horizon T >= grid.T")
        if self.x0 is not None:
            x = np.asarray(self.x0, dtype=float)
            chamber = "A" if self.family == "Dyson" else "C"
            if x.size != self.N or not in_chamber(x, chamber, strict=True) \
                    or (chamber == "C" and x[0] <= 0):
                raise SpecError("x0 must be strictly inside the chamber")


def geometric_times(t0: float, T: float, steps: int) -> np.ndarray:
    """Log-spaced grid from t0 to T; keeps dt/t bounded near a singular
    origin start."""
    if not (0 < t0 < T):
        raise DomainError("need 0 < t0 < T")
    return np.geomspace(t0, T, steps + 1)


# ---------------------------------------------------------------------------
# exact marginal samplers (origin warm starts)

def sample_dyson_marginal(beta: float, N: int, t: float, count: int,
                          rng) -> np.ndarray:
    """Ordered eigenvalues of the Gaussian ensemble with repulsion beta
    at variance t: (count, N).  beta=4 returns one value per Kramers pair."""
    from .linalg import sigma
    from .matproc import _pack_antisymmetric, _pack_symmetric

    s = math.sqrt(t)
    ns, na = N * (N + 1) // 2, N * (N - 1) // 2
    S = _pack_symmetric(rng.standard_normal((count, ns)) * s, N)
    if beta == 1.0:
        return np.sort(np.linalg.eigvalsh(S), axis=1)
    if beta == 2.0:
        H = S + 1j * _pack_antisymmetric(rng.standard_normal((count, na)) * s, N)
        return np.sort(np.linalg.eigvalsh(H), axis=1)
    # beta = 4: self-dual quaternion construction, Kramers pairs halved
    blocks = [S.astype(complex)]
    for _ in range(3):
        blocks.append(1j * _pack_antisymmetric(
            rng.standard_normal((count, na)) * s, N))
    H = np.zeros((count, 2 * N, 2 * N), dtype=complex)
    for blk, P in zip(blocks, sigma):
        H += np.einsum("cij,kl->cikjl", blk, P).reshape(count, 2 * N, 2 * N)
    lam = np.sort(np.linalg.eigvalsh(H), axis=1)
    return lam[:, ::2]


def sample_bessel_marginal(nu: float, N: int, t: float, count: int, rng) -> np.ndarray:
    """Independent Bessel(nu) coordinates at time t from 0: each has
    density prop. to x^{2 nu + 1} e^{-x^2/2t}."""
    g = rng.gamma(nu + 1.0, 2.0 * t, size=(count, N))
    return np.sqrt(g)


def sample_radial_marginal(nu: float, N: int, t: float, count: int,
                           rng) -> np.ndarray:
    """Ordered sample of the squared-repulsion radial density
    prop. to prod x_k^{2nu+1} prod_{i<j}(x_j^2-x_i^2)^2 e^{-|x|^2/2t}.

    Exact rejection sampling: the proposal replaces every factor
    (x_j^2-x_i^2)^2 by (x_i^2+x_j^2)^2, which expands into a mixture of
    independent scaled-chi coordinates; the acceptance ratio
    prod ((x_j^2-x_i^2)/(x_i^2+x_j^2))^2 is <= 1 pointwise.
    """
    if N == 1:
        return np.sort(sample_bessel_marginal(nu, 1, t, count, rng), axis=1)
    if N > 4:
        raise UnsupportedDimension("radial rejection sampler supports N <= 4")
    from itertools import product
    from scipy.special import gammaln

    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    # each pair contributes x_i^{2a} x_j^{2(2-a)} with binomial weight
    comps = []
    for choice in product((0, 1, 2), repeat=len(pairs)):
        expo = np.zeros(N, dtype=int)
        coef = 1.0
        for (i, j), c in zip(pairs, choice):
            expo[i] += 2 - c
            expo[j] += c
            coef *= (1.0, 2.0, 1.0)[c]
        logw = math.log(coef) + float(
            np.sum(gammaln(nu + 1.0 + expo)))
        comps.append((expo, logw))
    logws = np.array([c[1] for c in comps])
    w = np.exp(logws - logws.max())
    w /= w.sum()
    out = np.empty((count, N))
    filled = 0
    while filled < count:
        todo = count - filled
        pick = rng.choice(len(comps), size=todo, p=w)
        shape = nu + 1.0 + np.array([comps[c][0] for c in pick])
        x = np.sqrt(rng.gamma(shape, 2.0 * t))
        sq = x ** 2
        num = np.ones(todo)
        for i, j in pairs:
            num *= ((sq[:, j] - sq[:, i]) / (sq[:, i] + sq[:, j])) ** 2
        keep = rng.random(todo) < num
        k = int(keep.sum())
        out[filled:filled + k] = x[keep]
        filled += k
    return np.sort(out, axis=1)


def sample_laguerre_marginal(beta: float, nu: float, N: int, t: float,
                             count: int, rng) -> np.ndarray:
    """Ordered eigenvalues of M^dagger M (beta=2) / B^T B (beta=1) with
    Gaussian entries of variance t: (count, N)."""
    if int(nu) != nu or nu < 0:
        raise DomainError("matrix warm start requires integer nu >= 0")
    rows = N + int(nu)
    s = math.sqrt(t)
    if beta == 2.0:
        M = (rng.standard_normal((count, rows, N))
             + 1j * rng.standard_normal((count, rows, N))) * s
    elif beta == 1.0:
        M = rng.standard_normal((count, rows, N)) * s
    else:
        raise DomainError("origin start implemented for beta in {1, 2}")
    W = np.einsum("cij,cik->cjk", M.conj(), M)
    return np.sort(np.linalg.eigvalsh(W).real, axis=1)


# ---------------------------------------------------------------------------

def meander_drift(ms: MeanderSpec, t: float, x) -> np.ndarray:
    """b_i(t, x) = d/dx_i ln Ntilde^{(nu,kappa)}(t, x) by central finite
    differences with step 1e-4 times the minimal gap (including the gap
    to the origin)."""
    x = np.asarray(x, dtype=float)
    N = x.size
    if N > 3:
        raise UnsupportedDimension("meander drift is quadrature-backed, N <= 3")
    if not in_chamber(x, "C", strict=True) or x[0] <= 0:
        raise DomainError("x must be strictly inside the chamber")
    gaps = [x[0]] + list(np.diff(x))
    h = 1e-4 * min(gaps)
    out = np.empty(N)
    for i in range(N):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        out[i] = (log_ntilde(ms, N, t, xp) - log_ntilde(ms, N, t, xm)) / (2.0 * h)
    return out


def _warm_start(spec: SdeSpec, t_eps: float, count: int) -> np.ndarray:
    rng = generator(spec.seed, 2 ** 32)
    if spec.family == "Dyson":
        return sample_dyson_marginal(spec.beta, spec.N, t_eps, count, rng)
    if spec.family == "Bessel":
        return np.sort(sample_bessel_marginal(spec.nu, spec.N, t_eps, count, rng), axis=1) \
            if spec.N > 1 else sample_bessel_marginal(spec.nu, spec.N, t_eps, count, rng)
    if spec.family == "Radial":
        if spec.beta != 2.0:
            raise DomainError("origin start implemented for Radial beta=2")
        nu_eff = spec.gamma - 0.5  # gamma = (2 nu + 1)/2
        return sample_radial_marginal(nu_eff, spec.N, t_eps, count, rng)
    if spec.family == "Meander":
        # near 0 the meander marginal coincides with the homogeneous one
        return sample_radial_marginal(spec.nu, spec.N, t_eps, count, rng)
    if spec.family == "LaguerreEV":
        return sample_laguerre_marginal(spec.beta, spec.nu, spec.N, t_eps, count, rng)
    raise SpecError(spec.family)


def _integrate_meander(spec: SdeSpec, times: np.ndarray, x0: np.ndarray):
    """Python EM stepper for the meander family (drift needs quadrature).

    Same sub-step halving rule and the same counter-keyed noise stream as
    the compiled kernels.
    """
    from ._em import _mix64_np, _path_keys_np, _PHI, _B2
    from ._rng import normal_at_vec

    P, N = x0.shape
    K = times.size - 1
    out = np.zeros((P, K + 1, N))
    out[:, 0] = x0
    status = np.zeros(P, dtype=np.int64)
    keys = _path_keys_np(spec.seed, P)
    tiny = 1e-12 * times[-1]
    cidx = np.arange(N, dtype=np.uint64)[None, :]
    kphi = np.arange(K, dtype=np.uint64) * _PHI
    for k in range(K):
        dt = times[k + 1] - times[k]
        cur = out[:, k].copy()
        units = np.where(status == 0, 1, 0).astype(np.int64)
        level = np.zeros(P, dtype=np.int64)
        a = np.zeros(P, dtype=np.uint64)
        tloc = np.full(P, times[k])
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
            prop = cur.copy()
            m2 = np.zeros(P)
            ms = MeanderSpec(nu=spec.nu, kappa=spec.kappa, T=spec.T)
            for p in np.nonzero(act)[0]:
                base = np.sqrt(cur[p] * cur[p] + (2.0 * spec.nu + 1.0) * sub[p])
                b = meander_drift(ms, spec.T - tloc[p], cur[p])
                prop[p] = base + b * sub[p] + math.sqrt(sub[p]) * xi[p]
                m2[p] = np.max(b * b)
            chamber = prop[:, 0] > 0
            if N > 1:
                chamber &= np.all(np.diff(prop, axis=1) > 0, axis=1)
            ok = act & chamber & ((m2 * sub <= tol.DRIFT_CAP) | floor)
            cur = np.where(ok[:, None], prop, cur)
            tloc = np.where(ok, tloc + sub, tloc)
            units = np.where(ok, units - 1, units)
            rej = act & ~ok & ~floor
            units = np.where(rej, units * 2, units)
            level = np.where(rej, level + 1, level)
            anneal = ok & (level > 0) & (units > 0) & (units % 2 == 0)
            units = np.where(anneal, units // 2, units)
            level = np.where(anneal, level - 1, level)
            a = a + act.astype(np.uint64)
        out[:, k + 1] = np.where((status == 0)[:, None], cur, out[:, k])
    return out, status


def integrate(spec: SdeSpec, count: int = 1,
              times: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama paths: returns (times (K+1,), paths (count, K+1, N)).

    Origin starts (x0=None) are warm-started at the exact analytic
    marginal of t_eps = 1e-4 * horizon; in that case the default grid is
    geometric from t_eps.  Raises StepCollapse if any path exhausts the
    halving budget.
    """
    horizon = spec.grid.T
    if times is None:
        if spec.x0 is None:
            t_eps = tol.WARM_START_FRACTION * horizon
            times = geometric_times(t_eps, horizon, spec.grid.steps)
        else:
            times = spec.grid.times
    times = np.asarray(times, dtype=float)
    if spec.x0 is None:
        x0 = _warm_start(spec, float(times[0]), count)
    else:
        x0 = np.tile(np.asarray(spec.x0, dtype=float), (count, 1))
    if spec.family == "Meander":
        paths, status = _integrate_meander(spec, times, x0)
    else:
        fam = {"Dyson": FAM_DYSON, "Radial": FAM_RADIAL, "Bessel": FAM_BESSEL,
               "LaguerreEV": FAM_LAGUERRE}[spec.family]
        paths, status = run_em(fam, float(spec.beta), float(spec.gamma),
                               float(spec.nu), times, x0, spec.seed)
    if np.any(status != 0):
        raise StepCollapse(
            f"{int(np.sum(status != 0))} of {count} paths exhausted the "
            f"step-halving budget")
    return times, paths
