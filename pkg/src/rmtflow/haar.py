"""Haar sampling on the compact groups and Monte Carlo group integrals.

Samplers cover U(N), O(N), the product U(N+nu) x U(N), the quaternionic
unitary group USp(2N) and the real form U1(2N) = {U in U(2N):
U^T Sigma_1 U = Sigma_1}.  Every sample is checked against its defining
relation before being returned.

The group integrals pair a Monte Carlo average of an exponential trace
functional (hciz_lhs) with the exact determinantal closed form
(hciz_rhs), for five statements:

  kind "A"      exp{-Tr(L_x - U' L_y U)^2 / 2s^2} over U(N)
  kind "chiral" exp{-Tr(K_x - U' K_y V)'(K_x - U' K_y V) / 2s^2}
                over U(N+nu) x U(N), rectangular K with a zero pad
  kind "CD"     exp{-Tr(L_x - U' L_y U)^2 / 4s^2} over USp(2N)
                (branch "C") or U1(2N) (branch "D"), L = diag (x) sigma_3
  kind "banana" exp{-Tr(L_x - U' L_y U)^2 / 2s^2} over U(2N), x of
                length 2N against a pairwise-doubled diag(y) (x) sigma_0
  kind "DIII"   exp{-Tr(L_x - U' L_y U)^2 / 4s^2} over U1(4N), with
                L_x = diag(x) (x) sigma_3, L_y = diag(y) (x) sigma_3 (x) sigma_0
"""

import math
from typing import NamedTuple

import numpy as np

from . import tolerances as tol
from ._rng import generator
from .ensembles import h_poly_log, in_chamber, norm_constant
from .errors import ChamberMismatch, DomainError
from .kernels import _scaled_logdet
from .linalg import Sigma_mu
from .specfun import Bessel, bessel_i_log_scaled, heat_kernel_log

_CHUNK = 2048  # fixed MC chunk size; chunk c uses stream c of the seed

_SIGMA3 = np.diag([1.0, -1.0])

# the fixed unitary conjugating O(2N) onto U1(2N); s s^T = sigma_1
_S_BLOCK = np.exp(-1j * np.pi / 4.0) / np.sqrt(2.0) * np.array(
    [[1.0, 1.0j], [1.0j, 1.0]])


class GroupTag(NamedTuple):
    """A compact group: variant in {"U","O","UxU","USp","U1"}.

    n is the base rank N; matrix sizes are N (U, O), the pair
    (N+nu, N) for UxU, and 2N for USp and U1.
    """
    variant: str
    n: int
    nu: int = 0


class MCEstimate(NamedTuple):
    value: float
    stderr: float
    n: int


def _check_unitary(U):
    r = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if r > tol.MEMBERSHIP_TOL:
        raise DomainError(f"sampler produced non-unitary matrix ({r:.2e})")


def membership_residual(tag: GroupTag, U) -> float:
    """Max-norm residual of the defining relation(s) of the group."""
    if tag.variant == "UxU":
        a, b = U
        ra = np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))
        rb = np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0])))
        return float(max(ra, rb))
    U = np.asarray(U)
    r = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if tag.variant == "O":
        r = max(r, float(np.max(np.abs(U.imag))) if np.iscomplexobj(U) else 0.0)
    elif tag.variant == "USp":
        J = np.kron(np.eye(tag.n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        r = max(r, float(np.max(np.abs(U @ J @ U.T - J))))
    elif tag.variant == "U1":
        S1 = Sigma_mu(tag.n, 1)
        r = max(r, float(np.max(np.abs(U.T @ S1 @ U - S1))))
    return r


def _haar_unitary(rng, n):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _haar_orthogonal(rng, n):
    # covers both connected components (det = +-1 each with probability 1/2)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diagonal(r))


def _quaternion_partner(v):
    """The symplectic partner column: p[2i-1] = -conj(v[2i]), p[2i] = conj(v[2i-1])."""
    p = np.empty_like(v)
    p[0::2] = -v[1::2].conj()
    p[1::2] = v[0::2].conj()
    return p


def _haar_symplectic(rng, n):
    """Haar sample of USp(2n) by quaternionic Gram-Schmidt.

    Only the odd Ginibre columns are drawn; each even column is the
    symplectic partner of the orthonormalized odd one, which keeps the
    quaternionic structure exact.
    """
    cols = []
    for _ in range(n):
        v = (rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n))
        for q in cols:
            v = v - q * (q.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-8:  # pragma: no cover - measure-zero degeneracy
            continue
        q = v / nrm
        cols.append(q)
        cols.append(_quaternion_partner(q))
    return np.column_stack(cols)


def _s_conjugator(n):
    return np.kron(np.eye(n), _S_BLOCK)


def _haar_u1(rng, n):
    S = _s_conjugator(n)
    O = _haar_orthogonal(rng, 2 * n)
    return S @ O @ S.conj().T


def haar_sample(tag: GroupTag, rng):
    """One Haar draw; rng is a Generator or an integer seed.

    Returns a matrix, or a pair (U, V) for the "UxU" variant.  The
    defining relation is verified to MEMBERSHIP_TOL on every draw.
    """
    if isinstance(rng, (int, np.integer)):
        rng = generator(int(rng))
    if tag.variant == "U":
        U = _haar_unitary(rng, tag.n)
    elif tag.variant == "O":
        U = _haar_orthogonal(rng, tag.n)
    elif tag.variant == "UxU":
        U = (_haar_unitary(rng, tag.n + tag.nu), _haar_unitary(rng, tag.n))
    elif tag.variant == "USp":
        U = _haar_symplectic(rng, tag.n)
    elif tag.variant == "U1":
        U = _haar_u1(rng, tag.n)
    else:
        raise DomainError(f"unknown group variant {tag.variant!r}")
    r = membership_residual(tag, U)
    if r > tol.MEMBERSHIP_TOL:
        raise DomainError(f"membership residual {r:.2e} for {tag}")
    return U


# ---------------------------------------------------------------------------
# group integrals


def _check_kind_args(kind, x, y, sigma, nu):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma == 0.0:
        raise DomainError("sigma != 0 required")
    if kind == "A":
        if x.size != y.size or not (in_chamber(x, "A") and in_chamber(y, "A")):
            raise ChamberMismatch("kind A needs x, y strictly increasing, equal length")
    elif kind == "chiral":
        if nu < 0 or int(nu) != nu:
            raise DomainError("chiral kind needs integer nu >= 0")
        if x.size != y.size or not (in_chamber(x, "C") and in_chamber(y, "C")):
            raise ChamberMismatch("chiral kind needs x, y in the positive chamber")
    elif kind == "CD":
        if x.size != y.size or not (in_chamber(x, "C") and in_chamber(y, "C")):
            raise ChamberMismatch("kind CD needs x, y in the positive chamber")
    elif kind == "banana":
        if x.size != 2 * y.size or not (in_chamber(x, "A") and in_chamber(y, "A")):
            raise ChamberMismatch("banana kind needs len(x) = 2 len(y), both increasing")
    elif kind == "DIII":
        if x.size != 2 * y.size or not (in_chamber(x, "C") and in_chamber(y, "C")):
            raise ChamberMismatch("DIII kind needs len(x) = 2 len(y), both positive")
    else:
        raise DomainError(f"unknown integral kind {kind!r}")
    return x, y


def _lhs_one(kind, x, y, sigma, nu, branch, rng):
    s2 = sigma * sigma
    if kind == "A":
        U = _haar_unitary(rng, x.size)
        M = np.diag(x) - U.conj().T @ np.diag(y) @ U
        return math.exp(-np.vdot(M, M).real / (2.0 * s2))
    if kind == "chiral":
        N, p = y.size, y.size + int(nu)
        U = _haar_unitary(rng, p)
        V = _haar_unitary(rng, N)
        Kx = np.zeros((p, N), dtype=complex)
        Kx[:N, :N] = np.diag(x)
        Ky = np.zeros((p, N), dtype=complex)
        Ky[:N, :N] = np.diag(y)
        M = Kx - U.conj().T @ Ky @ V
        return math.exp(-np.vdot(M, M).real / (2.0 * s2))
    if kind == "CD":
        N = x.size
        U = _haar_symplectic(rng, N) if branch == "C" else _haar_u1(rng, N)
        L = np.kron(np.diag(x), _SIGMA3)
        M = L - U.conj().T @ np.kron(np.diag(y), _SIGMA3) @ U
        return math.exp(-np.vdot(M, M).real / (4.0 * s2))
    if kind == "banana":
        U = _haar_unitary(rng, x.size)
        Ly = np.kron(np.diag(y), np.eye(2))
        M = np.diag(x) - U.conj().T @ Ly @ U
        return math.exp(-np.vdot(M, M).real / (2.0 * s2))
    # DIII: x has 2N entries, the group is U1(4N).  The degenerate-pair
    # matrix must carry sigma_3 in the same 2x2 slot as L_x (and as the
    # sigma_1 defining U1), i.e. diag(y) (x) sigma_0 (x) sigma_3; with the
    # slots the other way round the coupling trace vanishes identically.
    U = _haar_u1(rng, x.size)
    Lx = np.kron(np.diag(x), _SIGMA3)
    Ly = np.kron(np.diag(y), np.kron(np.eye(2), _SIGMA3))
    M = Lx - U.conj().T @ Ly @ U
    return math.exp(-np.vdot(M, M).real / (4.0 * s2))


def hciz_chunk(kind, x, y, sigma, nu, branch, seed, chunk, size):
    """(sum, sum of squares) over MC chunk number `chunk` of length `size`.

    Chunk c always uses stream c of the seed, so a partial sum does not
    depend on how chunks are distributed over workers.
    """
    x, y = _check_kind_args(kind, x, y, sigma, nu)
    rng = generator(seed, chunk)
    s = s2 = 0.0
    for _ in range(size):
        v = _lhs_one(kind, x, y, sigma, nu, branch, rng)
        s += v
        s2 += v * v
    return s, s2


def hciz_lhs(kind, x, y, sigma, n, seed=0, nu=0, branch="C",
             map_chunks=map) -> MCEstimate:
    """Monte Carlo side of the group integral.

    map_chunks lets a caller fan the fixed-size chunks out to workers;
    the estimate is identical for any ordering of the chunk results.
    """
    if n < 2:
        raise DomainError("n >= 2 required")
    x, y = _check_kind_args(kind, x, y, sigma, nu)
    sizes = [_CHUNK] * (n // _CHUNK)
    if n % _CHUNK:
        sizes.append(n % _CHUNK)
    jobs = [(kind, x, y, sigma, nu, branch, seed, c, sz)
            for c, sz in enumerate(sizes)]
    s = s2 = 0.0
    for cs, cs2 in map_chunks(_run_chunk, jobs):
        s += cs
        s2 += cs2
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return MCEstimate(mean, math.sqrt(var / n), n)


def _run_chunk(job):
    return hciz_chunk(*job)


def _logdet_rect(log_left, log_right, sign_right):
    """(sign, log|det|) of the 2N x 2N matrix whose columns interleave the
    two N-column blocks exp(log_left) and s*exp(log_right).

    The interleaved layout (value column next to its companion column for
    each y_j) is the one under which the doubled-endpoint determinants are
    positive on the chambers.
    """
    n2 = log_left.shape[0]
    c = np.maximum(np.max(log_left, axis=0), np.max(log_right, axis=0))
    c = np.where(np.isfinite(c), c, 0.0)
    M = np.empty((n2, n2))
    M[:, 0::2] = np.exp(log_left - c)
    M[:, 1::2] = sign_right * np.exp(log_right - c)
    sign, ld = np.linalg.slogdet(M)
    return sign, ld + 2.0 * np.sum(c)


def hciz_rhs(kind, x, y, sigma, nu=0, branch="C") -> float:
    """Exact determinant side of the group integral."""
    x, y = _check_kind_args(kind, x, y, sigma, nu)
    t = sigma * sigma
    N = y.size
    if kind == "A":
        logC = norm_constant("C_A", N)
        sgn, ld = _scaled_logdet(heat_kernel_log("A", t, y[None, :], x[:, None]))
        _, hx = h_poly_log("A", x)
        _, hy = h_poly_log("A", y)
        return float(sgn * math.exp(logC + N * N * math.log(abs(sigma)) - hx - hy + ld))
    if kind == "chiral":
        logC = norm_constant("C_nu", N, nu=float(nu))
        z = x[:, None] * y[None, :] / t
        logK = (-(x[:, None] - y[None, :]) ** 2 / (2.0 * t)
                + bessel_i_log_scaled(float(nu), z))
        sgn, ld = _scaled_logdet(logK)
        _, hx = h_poly_log(("alpha", float(nu)), x)
        _, hy = h_poly_log(("alpha", float(nu)), y)
        # sigma power fixed by the sigma -> infinity limit (both sides -> 1);
        # N(N+nu-2) fails that limit for every N, nu
        d = 2 * N * (N + nu - 1)
        return float(sgn * math.exp(logC + d * math.log(abs(sigma)) - hx - hy + ld))
    if kind == "CD":
        if branch == "C":
            logC, d, hkind, ker = norm_constant("C_C", N), N * (2 * N + 1), ("alpha", 1.0), "C"
        elif branch == "D":
            logC, d, hkind, ker = norm_constant("C_D", N), N * (2 * N - 1), ("alpha", 0.0), "D"
        else:
            raise DomainError("branch must be 'C' or 'D'")
        sgn, ld = _scaled_logdet(heat_kernel_log(ker, t, y[None, :], x[:, None]))
        _, hx = h_poly_log(hkind, x)
        _, hy = h_poly_log(hkind, y)
        return float(sgn * math.exp(logC + d * math.log(abs(sigma)) - hx - hy + ld))
    if kind == "banana":
        logC = norm_constant("C_2N_A", N)
        logG = heat_kernel_log("A", t, y[None, :], x[:, None])
        with np.errstate(divide="ignore"):
            logR = logG + np.log(np.abs(x[:, None] / t))
        sgn, ld = _logdet_rect(logG, logR, np.sign(x)[:, None])
        _, hx = h_poly_log("A", x)
        _, hy = h_poly_log("A", y)
        d = 4 * N * N
        return float(sgn * math.exp(logC + d * math.log(abs(sigma)) - hx - 4.0 * hy + ld))
    # DIII: constant and sigma power follow from the pair-merge limit of
    # the generic D-branch formula at rank 2N (merging y_{2j-1}, y_{2j}
    # contributes det/h factors 2eps and 4 y_j eps per pair), which pins
    # C = 2^{-N} C[D]_{2N} and power 2N(4N-1); the degenerate-limit
    # closed form reproduces this to machine precision
    logC = norm_constant("C_2N_D", N)
    logGD = heat_kernel_log("D", t, y[None, :], x[:, None])
    logGC = heat_kernel_log("C", t, y[None, :], x[:, None])
    with np.errstate(divide="ignore"):
        logR = logGC + np.log(x[:, None] / t)
    sgn, ld = _logdet_rect(logGD, logR, 1.0)
    _, hx = h_poly_log(("alpha", 0.0), x)
    _, hy = h_poly_log(("alpha", 0.25), y)
    d = 2 * N * (4 * N - 1)
    return float(sgn * math.exp(logC + d * math.log(abs(sigma)) - hx - 4.0 * hy + ld))


def hciz_report(kind, x, y, sigma, n, seed=0, nu=0, branch="C",
                map_chunks=map) -> dict:
    """Both sides plus the z-score, as a JSON-ready dict."""
    est = hciz_lhs(kind, x, y, sigma, n, seed=seed, nu=nu, branch=branch,
                   map_chunks=map_chunks)
    rhs = hciz_rhs(kind, x, y, sigma, nu=nu, branch=branch)
    z = (est.value - rhs) / est.stderr if est.stderr > 0 else 0.0
    return {"kind": kind if kind != "CD" else f"CD-{branch}",
            "N": int(np.asarray(y).size), "nu": nu,
            "x": [float(v) for v in np.asarray(x, dtype=float)],
            "y": [float(v) for v in np.asarray(y, dtype=float)],
            "sigma": sigma, "lhs": est.value, "stderr": est.stderr,
            "rhs": rhs, "zscore": z}
