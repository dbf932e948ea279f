"""Statistical comparison of empirical samples against analytic densities.

Three tools: a one-sample Kolmogorov-Smirnov test against an arbitrary
CDF (with a helper that turns a density into a cached quadrature CDF), a
chi-square test on a regular grid over a chamber bounding box, and the
Radon-Nikodym reweighting that maps terminal samples of the homogeneous
wall process onto the finite-horizon inhomogeneous one.
"""

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import special as sp

from . import tolerances as tol
from .ensembles import h_poly_log, norm_constant
from .errors import DomainError, TooFewSamples, ZeroWeight


class KsResult(NamedTuple):
    statistic: float
    pvalue: float
    n: int


class Chi2Result(NamedTuple):
    statistic: float
    dof: int
    pvalue: float


class EmpiricalSample(NamedTuple):
    points: np.ndarray        # (n,) or (n, N)
    weights: np.ndarray       # (n,), positive
    ess: float                # (sum w)^2 / sum w^2


def quadrature_cdf(density: Callable, lo: float, hi: float,
                   npts: int = 4096) -> Callable:
    """CDF of a 1-d density via a cached trapezoid grid on [lo, hi].

    The grid integral renormalizes the density, so a density known only
    up to a constant is fine as long as [lo, hi] carries all its mass.
    """
    grid = np.linspace(lo, hi, npts)
    vals = np.asarray([density(g) for g in grid], dtype=float)
    if np.any(vals < -1e-12):
        raise DomainError("density must be nonnegative")
    cum = np.concatenate([[0.0], np.cumsum((vals[1:] + vals[:-1])
                                           * np.diff(grid) / 2.0)])
    if cum[-1] <= 0:
        raise DomainError("density integrates to zero on the given interval")
    cum /= cum[-1]

    def cdf(x):
        return np.interp(x, grid, cum, left=0.0, right=1.0)

    return cdf


def ks_test(sample, cdf: Callable, weights=None) -> KsResult:
    """Two-sided one-sample KS test with the asymptotic p-value.

    With weights, the weighted empirical CDF is compared to cdf and the
    effective sample size (sum w)^2 / sum w^2 replaces n in the p-value.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < tol.KS_MIN_SAMPLES:
        raise TooFewSamples(f"KS needs >= {tol.KS_MIN_SAMPLES} samples, got {n}")
    order = np.argsort(x)
    x = x[order]
    f = np.asarray(cdf(x), dtype=float)
    if weights is None:
        i = np.arange(1, n + 1)
        d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
        neff = float(n)
    else:
        w = np.asarray(weights, dtype=float)[order]
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("weights must be finite and positive")
        cw = np.cumsum(w) / w.sum()
        d = float(max(np.max(cw - f), np.max(f - np.concatenate([[0.0], cw[:-1]]))))
        neff = float(w.sum() ** 2 / np.sum(w * w))
    p = float(sp.kolmogorov(math.sqrt(neff) * d))
    return KsResult(d, p, n)


def _cell_probability(density, lows, highs, nsub=3):
    """Midpoint-subsampled integral of the density over one grid cell."""
    axes = [lows[k] + (highs[k] - lows[k]) * (np.arange(nsub) + 0.5) / nsub
            for k in range(len(lows))]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lows))
    vol = float(np.prod(highs - lows)) / nsub ** len(lows)
    return float(sum(density(p) for p in pts)) * vol


def chamber_chi2(sample, density: Callable, bins: int = 8,
                 weights=None) -> Chi2Result:
    """Chi-square test on a regular grid over the sample's bounding box.

    density takes one point (length-N array) and returns the probability
    density there; cell expectations are integrated (midpoint-subsampled),
    not evaluated at centers.  Cells with expected count below
    CHI2_MIN_EXPECTED are pooled, together with the mass outside the box,
    into a single overflow bin.
    """
    X = np.asarray(sample, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, N = X.shape
    if n < tol.KS_MIN_SAMPLES:
        raise TooFewSamples(f"chi-square needs >= {tol.KS_MIN_SAMPLES} samples")
    if weights is None:
        w = np.ones(n)
        neff = float(n)
    else:
        w = np.asarray(weights, dtype=float)
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("weights must be finite and positive")
        # scale to the effective sample size so each cell's weighted count
        # has variance ~ its expectation, as the chi-square statistic assumes
        neff = float(w.sum() ** 2 / np.sum(w * w))
        w = w * (neff / w.sum())
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    pad = 1e-9 * np.maximum(hi - lo, 1.0)
    lo, hi = lo - pad, hi + pad
    edges = [np.linspace(lo[k], hi[k], bins + 1) for k in range(N)]
    idx = np.stack([np.clip(np.searchsorted(edges[k], X[:, k], side="right") - 1,
                            0, bins - 1) for k in range(N)], axis=1)
    flat = np.ravel_multi_index(idx.T, (bins,) * N)
    observed = np.bincount(flat, weights=w, minlength=bins ** N)

    expected = np.empty(bins ** N)
    for c in range(bins ** N):
        ii = np.unravel_index(c, (bins,) * N)
        cl = np.array([edges[k][ii[k]] for k in range(N)])
        ch = np.array([edges[k][ii[k] + 1] for k in range(N)])
        expected[c] = neff * _cell_probability(density, cl, ch)

    keep = expected >= tol.CHI2_MIN_EXPECTED
    if keep.sum() < 2:
        raise DomainError("too few populated cells; reduce bins")
    chi2 = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
    # overflow bin: everything pooled, including mass outside the box
    exp_over = max(neff - expected[keep].sum(), 1e-12)
    obs_over = neff - observed[keep].sum()
    dof = int(keep.sum())  # cells + overflow - 1 for normalization
    if exp_over >= tol.CHI2_MIN_EXPECTED:
        chi2 += float((obs_over - exp_over) ** 2 / exp_over)
    else:
        dof -= 1
    p = float(sp.chdtrc(dof, chi2))
    return Chi2Result(chi2, dof, p)


def imhof_reweight(terminal, nu: float, kappa: float, T: float) -> EmpiricalSample:
    """Importance weights mapping wall-process terminal samples onto the
    finite-horizon law.

    terminal is (n, N) (or (n,)) of final-time coordinates of the
    homogeneous process; the weight of sample i is
    C_nu T^{N(N+kappa-1)/2} / (C_{nu,kappa} h^(kappa)(w_i)), where
    h^(kappa) carries both the squared-difference factor and prod w^kappa.
    """
    W = np.asarray(terminal, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    n, N = W.shape
    if np.any(W <= 0.0):
        raise ZeroWeight("terminal coordinates must be positive")
    logc = (norm_constant("C_nu", N, nu=nu)
            - norm_constant("C_nu_kappa", N, nu=nu, kappa=kappa)
            + 0.5 * N * (N + kappa - 1) * math.log(T))
    logs = np.empty(n)
    for i in range(n):
        sgn, la = h_poly_log(("alpha", float(kappa)), W[i])
        if sgn <= 0 or not np.isfinite(la):
            raise ZeroWeight("terminal sample on a chamber wall")
        logs[i] = la
    w = np.exp(logc - logs)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    return EmpiricalSample(np.squeeze(W), w, ess)


def ks_report(name: str, result: KsResult, alpha: float = tol.ACC_P_VALUE) -> dict:
    return {"test": name, "n": result.n, "statistic": result.statistic,
            "pvalue": result.pvalue, "pass": bool(result.pvalue > alpha)}


def chi2_report(name: str, result: Chi2Result, n: int,
                alpha: float = tol.ACC_P_VALUE) -> dict:
    return {"test": name, "n": n, "statistic": result.statistic,
            "dof": result.dof, "pvalue": result.pvalue,
            "pass": bool(result.pvalue > alpha)}
