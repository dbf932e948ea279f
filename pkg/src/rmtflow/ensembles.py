"""Closed-form eigenvalue densities, h-polynomials, and normalization
constants for the Gaussian symmetry classes.

Every density has the shape

    q(x; t) = t^{-d/2} / C * exp(-|x|^2 / 2t) * h(x)

with d = deg(h) + N, so that q(x; t) = t^{-N/2} q(x/sqrt(t); 1).  All
evaluation happens in log space; ``density`` exponentiates at the end.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ChamberMismatch, DomainError
from .specfun import log_gamma

__all__ = [
    "ChamberPoint", "EnsembleSpec", "in_chamber", "h_poly", "h_poly_log",
    "norm_constant", "exponent_psi", "density", "log_density", "DENSITY_TAGS",
]

HKind = Union[str, Tuple[str, float]]  # "A" or ("alpha", a)

DENSITY_TAGS = ("GUE", "GOE", "GSE", "chGUE", "chGOE", "chGSE",
                "C", "CI", "D", "Dprime", "DIII")

_CHIRAL = {"chGUE", "chGOE", "chGSE"}
_A_CHAMBER = {"GUE", "GOE", "GSE"}


@dataclass(frozen=True)
class ChamberPoint:
    chamber: str  # "A", "C" or "D"
    coords: tuple

    def __post_init__(self):
        if self.chamber not in ("A", "C", "D"):
            raise ChamberMismatch(f"unknown chamber {self.chamber!r}")
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def N(self):
        return len(self.coords)

    def array(self):
        return np.asarray(self.coords)


@dataclass(frozen=True)
class EnsembleSpec:
    tag: str
    N: int
    t: float = 1.0
    nu: Optional[float] = None
    diii_odd: bool = False  # odd variant of class DIII (nu=1/2, kappa=0 branch)

    def __post_init__(self):
        if self.tag not in DENSITY_TAGS:
            raise DomainError(f"unknown ensemble tag {self.tag!r}")
        if self.tag in _CHIRAL:
            if self.nu is None or self.nu <= -1:
                raise DomainError(f"{self.tag} requires nu > -1")
        if self.N < 1 or self.t <= 0:
            raise DomainError("need N >= 1 and t > 0")


def in_chamber(x, chamber: str, strict: bool = True) -> bool:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        return False
    gaps = np.diff(x)
    ordered = np.all(gaps > 0) if strict else np.all(gaps >= 0)
    if chamber == "A":
        return bool(ordered)
    if chamber == "C":
        first = x[0] > 0 if strict else x[0] >= 0
        return bool(ordered and first)
    if chamber == "D":
        if x.size == 1:
            return True
        first = abs(x[0]) < x[1] if strict else abs(x[0]) <= x[1]
        return bool(ordered and first)
    raise ChamberMismatch(f"unknown chamber {chamber!r}")


def h_poly_log(kind: HKind, x):
    """(sign, log|h|) of the h-polynomial.

    kind "A": prod_{i<j} (x_j - x_i); kind ("alpha", a):
    prod_{i<j} (x_j^2 - x_i^2) * prod_k x_k^a.  h^C = ("alpha", 1),
    h^D = ("alpha", 0).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    sign = 1.0
    logabs = 0.0
    if kind == "A":
        diffs = x[np.newaxis, :] - x[:, np.newaxis]  # x_j - x_i, i<j
        vals = diffs[np.triu_indices(n, k=1)]
    else:
        name, alpha = kind
        if name != "alpha":
            raise DomainError(f"unknown h_poly kind {kind!r}")
        integral = float(alpha).is_integer()
        if not integral and np.any(x < 0):
            raise DomainError("h^(alpha) with non-integer alpha needs nonnegative coords")
        sq = x * x
        diffs = sq[np.newaxis, :] - sq[:, np.newaxis]
        vals = diffs[np.triu_indices(n, k=1)]
        if alpha != 0:
            for xi in x:
                if xi == 0.0:
                    return (0.0, -np.inf) if alpha > 0 else (1.0, np.inf)
                if xi < 0.0 and int(alpha) % 2 == 1:
                    sign = -sign
                logabs += alpha * math.log(abs(xi))
    if np.any(vals == 0):
        return 0.0, -np.inf
    sign *= float(np.prod(np.sign(vals))) if vals.size else 1.0
    logabs += float(np.sum(np.log(np.abs(vals)))) if vals.size else 0.0
    return float(sign), logabs


def h_poly(kind: HKind, x) -> float:
    sign, logabs = h_poly_log(kind, x)
    return float(sign * np.exp(logabs))


def _sum_lgamma(expr, N):
    return float(sum(log_gamma(expr(i)) for i in range(1, N + 1)))


def norm_constant(name: str, N: int, nu: float = None, kappa: float = None) -> float:
    """log of the named normalization constant."""
    if N < 1:
        raise DomainError("N >= 1 required")
    ln2 = math.log(2.0)
    lnpi = math.log(math.pi)
    ln2pi = math.log(2.0 * math.pi)
    if name == "C_A":
        return 0.5 * N * ln2pi + _sum_lgamma(lambda i: i, N)
    if name == "C_Aprime":
        return 0.5 * N * ln2 + _sum_lgamma(lambda i: i / 2.0, N)
    if name == "C_Adoubleprime":
        return 0.5 * N * ln2pi + _sum_lgamma(lambda i: 2 * i, N)
    if name == "C_nu":
        if nu is None or nu <= -1:
            raise DomainError("C_nu requires nu > -1")
        return (N * (N + nu - 1) * ln2
                + _sum_lgamma(lambda i: i, N) + _sum_lgamma(lambda i: i + nu, N))
    if name == "C_nu_kappa":
        if nu is None or kappa is None or nu <= -1:
            raise DomainError("C_nu_kappa requires nu > -1 and kappa")
        if not (0 <= kappa < 2 * (nu + 1)):
            raise DomainError("C_nu_kappa requires kappa in [0, 2(nu+1))")
        return (0.5 * N * (N + 2 * nu - kappa - 1) * ln2 - 0.5 * N * lnpi
                + _sum_lgamma(lambda i: i / 2.0, N)
                + _sum_lgamma(lambda i: (i + 2 * nu + 1 - kappa) / 2.0, N))
    if name == "C_C":
        return 0.5 * N * (lnpi - ln2) + _sum_lgamma(lambda i: 2 * i, N)
    if name == "C_D":
        return 0.5 * N * (lnpi - ln2) + _sum_lgamma(lambda i: 2 * i - 1, N)
    if name == "C_Cprime":
        return _sum_lgamma(lambda i: i, N)
    if name == "C_Dprime":
        return (0.5 * (N - 2) * ln2 + float(log_gamma(N / 2.0))
                + _sum_lgamma(lambda i: i, N - 1) if N > 1
                else 0.5 * (N - 2) * ln2 + float(log_gamma(N / 2.0)))
    if name == "c_C":
        return 1.5 * N * ln2 + 0.5 * N * (2 * N + 1) * lnpi
    if name == "c_D":
        return 0.5 * N * ln2 + 0.5 * N * (2 * N - 1) * lnpi
    if name == "c_Cprime":
        return N * ln2 + 0.5 * N * (N + 1) * lnpi
    if name == "c_Dprime":
        return 0.5 * N * ln2 + 0.5 * N * N * lnpi
    if name == "Chat_nu":
        if nu is None or nu <= -1:
            raise DomainError("Chat_nu requires nu > -1")
        return (N * (2 * N + 2 * nu - 1) * ln2
                + _sum_lgamma(lambda i: 2 * i, N)
                + _sum_lgamma(lambda i: 2 * (i + nu), N))
    if name == "C_Ddoubleprime":
        return (2 * N * (N - 1) * ln2
                + _sum_lgamma(lambda i: 2 * i, N)
                + _sum_lgamma(lambda i: 2 * i - 1, N))
    if name == "C_2N_A":
        return N * ln2pi + _sum_lgamma(lambda i: i, 2 * N)
    if name == "C_2N_D":
        # doubled-rank class-D constant entering the pairwise-degenerate
        # group integral: 2^{-N} times the rank-2N class-D constant
        return N * (lnpi - 2 * ln2) + _sum_lgamma(lambda i: 2 * i - 1, 2 * N)
    raise DomainError(f"unknown constant {name!r}")


def exponent_psi(cls: str, N: int):
    """Power-law exponent of the noncolliding probability, as a Fraction."""
    from fractions import Fraction

    if N < 1:
        raise DomainError("N >= 1 required")
    if cls == "A":
        return Fraction(N * (N - 1), 4)
    if cls == "C":
        return Fraction(N * N, 2)
    if cls == "D":
        return Fraction(N * (N - 1), 2)
    raise DomainError(f"unknown class {cls!r}")


def _density_pieces(spec: EnsembleSpec):
    """(chamber, dimension d, log-constant, list of (h-kind, power))."""
    N, nu = spec.N, spec.nu
    tag = spec.tag
    if tag == "GUE":
        return "A", N * N, norm_constant("C_A", N), [("A", 2)]
    if tag == "GOE":
        return "A", N * (N + 1) // 2, norm_constant("C_Aprime", N), [("A", 1)]
    if tag == "GSE":
        return "A", N * (2 * N - 1), norm_constant("C_Adoubleprime", N), [("A", 4)]
    if tag == "chGUE":
        return ("C", 2 * N * (N + nu), norm_constant("C_nu", N, nu=nu),
                [(("alpha", (2 * nu + 1) / 2.0), 2)])
    if tag == "chGOE":
        return ("C", N * (N + nu), norm_constant("C_nu_kappa", N, nu=nu, kappa=nu + 1),
                [(("alpha", nu), 1)])
    if tag == "chGSE":
        return ("C", 4 * N * (N + nu), norm_constant("Chat_nu", N, nu=nu),
                [(("alpha", (4 * nu + 3) / 4.0), 4)])
    if tag == "C":
        return "C", N * (2 * N + 1), norm_constant("C_C", N), [(("alpha", 1.0), 2)]
    if tag == "D":
        return "C", N * (2 * N - 1), norm_constant("C_D", N), [(("alpha", 0.0), 2)]
    if tag == "CI":
        return "C", N * (N + 1), norm_constant("C_Cprime", N), [(("alpha", 1.0), 1)]
    if tag == "Dprime":
        return "C", N * N, norm_constant("C_Dprime", N), [(("alpha", 0.0), 1)]
    if tag == "DIII":
        if spec.diii_odd:
            # odd variant: nu = 1/2, kappa = 0 final-time form
            return ("C", 2 * N * (2 * N + 1), norm_constant("Chat_nu", N, nu=0.5),
                    [(("alpha", 1.25), 4)])
        return ("C", 2 * N * (2 * N - 1), norm_constant("C_Ddoubleprime", N),
                [(("alpha", 0.25), 4)])
    raise DomainError(tag)


def log_density(spec: EnsembleSpec, x) -> float:
    """log q(x; t); -inf outside / on the boundary of the chamber."""
    x = x.array() if isinstance(x, ChamberPoint) else np.asarray(x, dtype=float)
    if x.size != spec.N:
        raise ChamberMismatch(f"expected {spec.N} coordinates, got {x.size}")
    chamber, d, logC, hterms = _density_pieces(spec)
    if not in_chamber(x, chamber, strict=False):
        raise ChamberMismatch(f"point not in closure of chamber {chamber}")
    total = -0.5 * d * math.log(spec.t) - logC - float(np.dot(x, x)) / (2.0 * spec.t)
    for kind, power in hterms:
        sign, logabs = h_poly_log(kind, x)
        if sign <= 0.0 and logabs == -np.inf:
            return -np.inf  # chamber boundary
        total += power * logabs
    return total


def density(spec: EnsembleSpec, x) -> float:
    return float(np.exp(log_density(spec, x)))
