"""Special functions and the four one-particle heat kernels.

Kernels (time parameter t is a variance):

* ``A``          -- Gaussian kernel on the line.
* ``C``          -- absorbed-at-0 kernel (difference of Gaussians).
* ``D``          -- reflected-at-0 kernel (sum of Gaussians).
* ``Bessel(nu)`` -- squared-Bessel radial kernel
  G(t,y|x) = (y^{nu+1}/x^nu) t^{-1} e^{-(x^2+y^2)/2t} I_nu(xy/t),
  with the x=0 branch y^{2nu+1} e^{-y^2/2t} / (2^nu Gamma(nu+1) t^{nu+1}).

All kernel arithmetic is done in log space; ``heat_kernel`` exponentiates at
the API boundary.  Everything broadcasts over numpy arrays.
"""

from typing import NamedTuple, Union

import numpy as np
import scipy.special as sp

from .errors import DomainError

__all__ = [
    "Bessel", "KernelTag", "log_gamma", "erf", "bessel_i_log_scaled",
    "heat_kernel", "heat_kernel_log", "heat_kernel_dy",
]

_LOG_2PI = np.log(2.0 * np.pi)
_SMALL_Z = 1e-6


class Bessel(NamedTuple):
    nu: float


KernelTag = Union[str, Bessel]


def log_gamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("log_gamma requires x > 0")
    return sp.gammaln(x) if x.shape else float(sp.gammaln(x))


def erf(x):
    return sp.erf(x)


def _bessel_small_z_log(nu, z):
    # log I_nu(z) for small z via the leading series terms
    with np.errstate(divide="ignore"):
        lead = np.where(z > 0, nu * np.log(np.where(z > 0, z, 1.0) / 2.0),
                        0.0 if nu == 0 else (np.inf if nu < 0 else -np.inf))
    corr = np.log1p(z * z / (4.0 * (nu + 1.0))
                    * (1.0 + z * z / (8.0 * (nu + 2.0))))
    return lead - sp.gammaln(nu + 1.0) + corr


def bessel_i_log_scaled(nu, z):
    """log(e^{-z} I_nu(z)); for z below 1e-6 evaluated via the power series
    (equivalently log I_nu(z) - z, which is the same quantity)."""
    if nu <= -1.0:
        raise DomainError("bessel_i_log_scaled requires nu > -1")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise DomainError("bessel_i_log_scaled requires z >= 0")
    small = z < _SMALL_Z
    zbig = np.where(small, 1.0, z)
    with np.errstate(divide="ignore"):
        out = np.where(small,
                       _bessel_small_z_log(nu, np.where(small, z, 0.0)) - z,
                       np.log(sp.ive(nu, zbig)))
    return out if out.shape else float(out)


def _log_gauss(t, y, x):
    return -((y - x) ** 2) / (2.0 * t) - 0.5 * (_LOG_2PI + np.log(t))


def _log_bessel_kernel(nu, t, y, x):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x * y / t
    small = z < _SMALL_Z
    # main branch: log-scaled Bessel absorbs e^{-z} into the Gaussian factor
    xs = np.where(x > 0, x, 1.0)
    ys = np.where(y > 0, y, 1.0)
    main = ((nu + 1.0) * np.log(ys) - nu * np.log(xs) - np.log(t)
            - (x - y) ** 2 / (2.0 * t)
            + np.log(sp.ive(nu, np.where(small, 1.0, z))))
    # small-z branch (covers x=0, y=0 and the x->0 limit in one formula)
    p = 2.0 * nu + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ypow = np.where(y > 0, p * np.log(ys),
                        0.0 if p == 0 else (-np.inf if p > 0 else np.inf))
    series = (ypow - (nu + 1.0) * np.log(t) - nu * np.log(2.0)
              - sp.gammaln(nu + 1.0) - (x * x + y * y) / (2.0 * t)
              + np.log1p(z * z / (4.0 * (nu + 1.0))
                         * (1.0 + z * z / (8.0 * (nu + 2.0)))))
    return np.where(small, series, main)


def heat_kernel_log(tag: KernelTag, t, y, x):
    """log of heat_kernel; -inf where the kernel vanishes."""
    if t is None or np.any(np.asarray(t) <= 0):
        raise DomainError("heat_kernel requires t > 0")
    if tag == "A":
        return _log_gauss(t, np.asarray(y, dtype=float), np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError(f"kernel {tag!r} requires nonnegative coordinates")
    if tag == "C":
        a = _log_gauss(t, y, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a + np.log1p(-np.exp(-2.0 * x * y / t))
        return np.where(x * y > 0, out, -np.inf)
    if tag == "D":
        return _log_gauss(t, y, x) + np.log1p(np.exp(-2.0 * x * y / t))
    if isinstance(tag, Bessel):
        if tag.nu <= -1.0:
            raise DomainError("Bessel kernel requires nu > -1")
        return _log_bessel_kernel(tag.nu, t, y, x)
    raise DomainError(f"unknown kernel tag {tag!r}")


def heat_kernel(tag: KernelTag, t, y, x):
    out = np.exp(heat_kernel_log(tag, t, y, x))
    return out if np.ndim(out) else float(out)


def heat_kernel_dy(nu, t, y, x):
    """Analytic d/dy of the Bessel(nu) kernel, via I_nu' = I_{nu+1} + (nu/z) I_nu."""
    if np.any(np.asarray(t) <= 0):
        raise DomainError("heat_kernel_dy requires t > 0")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(y <= 0):
        raise DomainError("heat_kernel_dy requires y > 0")
    g = heat_kernel(Bessel(nu), t, y, x)
    z = x * y / t
    small = z < _SMALL_Z
    zs = np.where(small, 1.0, z)
    # main branch: d/dz log I_nu = I_{nu+1}/I_nu + nu/z, ive ratios are stable;
    # small-z branch: the nu/z term merges into the x=0 power (2nu+1)/y
    ratio = sp.ive(nu + 1.0, zs) / sp.ive(nu, zs)
    dlog = np.where(small,
                    (2.0 * nu + 1.0) / y - y / t + z * x / (2.0 * (nu + 1.0) * t),
                    (nu + 1.0) / y - y / t + (x / t) * (ratio + nu / zs))
    out = g * dlog
    return out if out.shape else float(out)
