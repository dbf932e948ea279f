"""Matrix-valued diffusion paths.

Every process here is a linear combination of four elementary real
building blocks, tensored with Pauli factors:

* ``s``   -- symmetric Brownian matrix: independent BM entries, off-diagonal
  scaled by 1/sqrt(2), diagonal unscaled;
* ``ia``  -- sqrt(-1) times an antisymmetric Brownian matrix (zero diagonal,
  off-diagonal BM/sqrt(2));
* ``sT`` / ``iaT`` -- the same with every Brownian motion replaced by a
  Brownian bridge of duration T pinned to 0 at both ends.

Bridges are sampled exactly by Gaussian conditioning on the grid (the
endpoint is hit exactly), never by discretizing the singular bridge drift.
The chiral kinds build a rectangular (N+nu) x N complex/real matrix M and
return M^dagger M.

Single-time marginals of all kinds are jointly Gaussian, so
``sample_matrices`` draws them directly (entry variance t for Brownian
blocks, t(1-t/T) for bridge blocks); this is exact and is what the
statistical verification drivers use.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import generator
from .errors import DomainError, SpecError
from .linalg import Sigma_mu, hermitian_eig, kron, sigma

__all__ = [
    "PathGrid", "MatrixProcessSpec", "KINDS", "brownian_paths",
    "brownian_bridge_paths", "build_process", "sample_matrices",
    "eigen_path", "eigenvalue_reduction", "terminal_eigenvalues",
    "symmetry_residual", "dump_paths",
]


@dataclass(frozen=True)
class PathGrid:
    T: float
    steps: int

    def __post_init__(self):
        if self.T <= 0 or self.steps < 1:
            raise DomainError("PathGrid needs T > 0 and steps >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)


# kind -> (term table, base-dim multiplier, needs T, chiral?)
# each term is (etype, pauli index tuple or None); etype in
# {"s", "ia", "sT", "iaT"}; pauli tuple gives the sigma Kronecker factor.
_TERMS = {
    "GUE_H":    ([("s", None), ("ia", None)], 1, False),
    "GOE_S":    ([("s", None)], 1, False),
    "iA":       ([("ia", None)], 2, False),
    "XiC":      ([("ia", (0,)), ("s", (1,)), ("s", (2,)), ("s", (3,))], 2, False),
    "XiD":      ([("ia", (0,)), ("ia", (1,)), ("ia", (2,)), ("s", (3,))], 2, False),
    "XiCprime": ([("s", (1,)), ("s", (3,))], 2, False),
    "XiDprime": ([("ia", (2,)), ("s", (3,))], 2, False),
    "Xi1plus":  ([("s", (0,)), ("s", (1,)), ("s", (2,)), ("ia", (3,))], 2, False),
    "Xi2plus":  ([("s", (0,)), ("ia", (1,)), ("ia", (2,)), ("ia", (3,))], 2, False),
    "Interp_A": ([("s", None), ("iaT", None)], 1, True),
    "Interp_C": ([("iaT", (0,)), ("s", (1,)), ("sT", (2,)), ("s", (3,))], 2, True),
    "Interp_D": ([("iaT", (0,)), ("iaT", (1,)), ("ia", (2,)), ("s", (3,))], 2, True),
    "Banana_A": ([("s", (0,)), ("iaT", (0,)),
                  ("sT", (1,)), ("ia", (1,)),
                  ("sT", (2,)), ("ia", (2,)),
                  ("sT", (3,)), ("ia", (3,))], 2, True),
    "Banana_D": ([("iaT", (0, 0)), ("ia", (1, 0)), ("sT", (2, 0)), ("ia", (3, 0)),
                  ("iaT", (0, 1)), ("ia", (1, 1)), ("sT", (2, 1)), ("ia", (3, 1)),
                  ("iaT", (0, 2)), ("ia", (1, 2)), ("sT", (2, 2)), ("ia", (3, 2)),
                  ("sT", (0, 3)), ("s", (1, 3)), ("iaT", (2, 3)), ("s", (3, 3))],
                 4, True),
}

# The pair-collapsing kinds superpose a Brownian and a bridge block on every
# matrix entry, which doubles the variance relative to the particle system
# they represent; the overall 1/sqrt(2) restores it (terminal laws GSE(T/2)
# and DIII(T/2), checked against the closed-form densities).
_HALF_VARIANCE = {"Banana_A", "Banana_D"}

_CHIRAL_KINDS = {"Laguerre": False, "Wishart": False, "Interp_LW": True}

KINDS = tuple(_TERMS) + tuple(_CHIRAL_KINDS)

# spectral reduction applied by eigen_path:
#   plain  -- all ordered eigenvalues
#   half   -- spectrum is symmetric about 0; keep the nonnegative half
#   dedup  -- Kramers-degenerate pairs; keep one per pair
#   radial -- input is M^dagger M; return ascending sqrt(eigenvalues)
_REDUCTION = {
    "GUE_H": "plain", "GOE_S": "plain", "Interp_A": "plain",
    "Banana_A": "plain",
    "Xi1plus": "dedup", "Xi2plus": "dedup",
    "iA": "half", "XiC": "half", "XiD": "half", "XiCprime": "half",
    "XiDprime": "half", "Interp_C": "half", "Interp_D": "half",
    "Banana_D": "half",
    "Laguerre": "radial", "Wishart": "radial", "Interp_LW": "radial",
}

# Defining symmetry relations H^T Sigma_mu = sign * Sigma_mu H that hold at
# every time, plus entry-structure flags, per kind.
_RELATIONS = {
    "XiC": [(2, -1)], "Interp_C": [(2, -1)],
    "XiD": [(1, -1)], "Interp_D": [(1, -1)],
    "XiCprime": [(2, -1)], "XiDprime": [(1, -1)],
    "Xi1plus": [(1, 1)], "Xi2plus": [(2, 1)],
}
_REAL_KINDS = {"GOE_S", "XiCprime", "XiDprime", "Wishart"}


@dataclass(frozen=True)
class MatrixProcessSpec:
    """kind + size + seed.  N counts particles: the matrix dimension is N,
    2N or 4N depending on the kind (rectangular kinds use (N+nu) x N)."""

    kind: str
    N: int
    seed: int
    nu: Optional[int] = None
    T: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown process kind {self.kind!r}")
        if self.N < 1:
            raise SpecError("N >= 1 required")
        if self.kind in _CHIRAL_KINDS:
            if self.nu is None or self.nu < 0 or int(self.nu) != self.nu:
                raise SpecError(f"{self.kind} requires integer nu >= 0")
        needs_T = self.kind in _CHIRAL_KINDS and _CHIRAL_KINDS[self.kind] \
            or self.kind in _TERMS and _TERMS[self.kind][2]
        if needs_T and (self.T is None or self.T <= 0):
            raise SpecError(f"{self.kind} requires a horizon T > 0")

    @property
    def dim(self) -> int:
        if self.kind in _CHIRAL_KINDS:
            return self.N
        return self.N * _TERMS[self.kind][1]

    @property
    def base_dim(self) -> int:
        """Dimension of the real building-block matrices."""
        if self.kind in _CHIRAL_KINDS:
            return self.N
        terms, mult, _ = _TERMS[self.kind]
        pauli = terms[0][1]
        return self.N * mult // (1 if pauli is None else 2 ** len(pauli))


def brownian_paths(count: int, grid: PathGrid, seed: int) -> np.ndarray:
    """(count, steps+1) standard Brownian paths; path i depends only on
    (seed, i), so it is identical for any count >= i+1."""
    out = np.empty((count, grid.steps + 1))
    sdt = math.sqrt(grid.dt)
    for i in range(count):
        z = generator(seed, i).standard_normal(grid.steps)
        out[i, 0] = 0.0
        np.cumsum(z * sdt, out=out[i, 1:])
    return out


def _bridge_from_noise(z: np.ndarray, grid: PathGrid, m) -> np.ndarray:
    """Exact Brownian bridge 0 -> m on the grid from iid N(0,1) noise.

    z has shape (steps, ...); sequential Gaussian conditioning: given
    B(t_k)=b, B(t_k + dt) ~ N(b + (m-b) dt/(T-t_k), dt (T-t_k-dt)/(T-t_k)).
    The final step has zero variance, so B(T) = m exactly.
    """
    steps = z.shape[0]
    out = np.zeros((steps + 1,) + z.shape[1:])
    T, dt = grid.T, grid.dt
    b = np.zeros(z.shape[1:])
    for k in range(steps):
        rem = T - k * dt
        mean = b + (m - b) * (dt / rem)
        var = dt * (rem - dt) / rem
        b = mean + math.sqrt(max(var, 0.0)) * z[k]
        out[k + 1] = b
    out[steps] = np.broadcast_to(m, z.shape[1:])
    return out


def brownian_bridge_paths(count: int, grid: PathGrid, m, seed: int) -> np.ndarray:
    """(count, steps+1) Brownian bridges of duration T ending at m
    (scalar or per-path array), sampled exactly."""
    m = np.broadcast_to(np.asarray(m, dtype=float), (count,))
    out = np.empty((count, grid.steps + 1))
    for i in range(count):
        z = generator(seed, i).standard_normal(grid.steps)
        out[i] = _bridge_from_noise(z, grid, float(m[i]))
    return out


def _pack_symmetric(entries: np.ndarray, n: int) -> np.ndarray:
    """entries (..., n(n+1)/2) in triu order -> (..., n, n) symmetric with
    off-diagonal entries divided by sqrt(2)."""
    iu, ju = np.triu_indices(n)
    scale = np.where(iu == ju, 1.0, 1.0 / math.sqrt(2.0))
    vals = entries * scale
    M = np.zeros(entries.shape[:-1] + (n, n))
    M[..., iu, ju] = vals
    M[..., ju, iu] = vals
    return M


def _pack_antisymmetric(entries: np.ndarray, n: int) -> np.ndarray:
    """entries (..., n(n-1)/2) in strict-triu order -> antisymmetric
    (..., n, n) with entries divided by sqrt(2) and zero diagonal."""
    iu, ju = np.triu_indices(n, k=1)
    vals = entries / math.sqrt(2.0)
    M = np.zeros(entries.shape[:-1] + (n, n))
    M[..., iu, ju] = vals
    M[..., ju, iu] = -vals
    return M


def _kron_blocks(A: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Kronecker product A (x) P on the trailing two axes of A."""
    p, q = P.shape
    out = np.einsum("...ij,kl->...ikjl", A, P)
    sh = A.shape[:-2] + (A.shape[-2] * p, A.shape[-1] * q)
    return out.reshape(sh)


def _pauli_factor(idx):
    P = sigma[idx[0]]
    for k in idx[1:]:
        P = kron(P, sigma[k])
    return P


def _entry_count(etype: str, n: int) -> int:
    return n * (n + 1) // 2 if etype in ("s", "sT") else n * (n - 1) // 2


def _scalar_paths(rng, etype: str, count: int, grid: PathGrid) -> np.ndarray:
    """(steps+1, count) scalar BM or pinned-bridge paths."""
    z = rng.standard_normal((grid.steps, count))
    if etype in ("s", "ia"):
        paths = np.zeros((grid.steps + 1, count))
        np.cumsum(z * math.sqrt(grid.dt), axis=0, out=paths[1:])
        return paths
    return _bridge_from_noise(z, grid, np.zeros(count))


def _scalar_values(rng, etype: str, shape, t: float, T: Optional[float]) -> np.ndarray:
    """Single-time marginal draws for one building block."""
    var = t if etype in ("s", "ia") else t * (1.0 - t / T)
    return rng.standard_normal(shape) * math.sqrt(max(var, 0.0))


def _assemble_square(spec: MatrixProcessSpec, draw):
    """Sum the term table; ``draw(etype, n_entries)`` returns entry values
    with the entry axis last."""
    terms, _, _ = _TERMS[spec.kind]
    n = spec.base_dim
    H = None
    for etype, pauli in terms:
        e = draw(etype, _entry_count(etype, n))
        if etype in ("s", "sT"):
            block = _pack_symmetric(e, n).astype(complex)
        else:
            block = 1j * _pack_antisymmetric(e, n)
        if pauli is not None:
            block = _kron_blocks(block, _pauli_factor(pauli))
        H = block if H is None else H + block
    if spec.kind in _HALF_VARIANCE:
        H = H / math.sqrt(2.0)
    return H


def _assemble_rectangular(spec: MatrixProcessSpec, draw):
    """M for the chiral kinds; ``draw`` as in _assemble_square."""
    rows, cols = spec.N + int(spec.nu), spec.N
    ne = rows * cols
    re = draw("s", ne)
    sh = re.shape[:-1] + (rows, cols)
    M = re.reshape(sh).astype(complex)
    if spec.kind == "Laguerre":
        M = M + 1j * draw("s", ne).reshape(sh)
    elif spec.kind == "Interp_LW":
        M = M + 1j * draw("sT", ne).reshape(sh)
    return M


def build_process(spec: MatrixProcessSpec, grid: PathGrid, sample: int = 0) -> np.ndarray:
    """One path of the process: (steps+1, dim, dim) matrices.

    ``sample`` selects an independent stream; the path depends only on
    (spec.seed, sample).  Chiral kinds return the nonnegative product
    matrix (M^dagger M or B^T B) at each time.
    """
    rng = generator(spec.seed, sample)

    def draw_last(etype, ne):
        return _scalar_paths(rng, etype, ne, grid)  # (steps+1, ne)

    if spec.kind in _CHIRAL_KINDS:
        M = _assemble_rectangular(spec, draw_last)
        out = np.einsum("tij,tik->tjk", M.conj(), M)
        if spec.kind == "Wishart":
            out = out.real.astype(complex)
        return out
    return _assemble_square(spec, draw_last)


def sample_matrices(spec: MatrixProcessSpec, t: float, count: int) -> np.ndarray:
    """count independent draws of the process at a single time t
    (exact Gaussian marginals): (count, dim, dim)."""
    if t < 0:
        raise DomainError("t >= 0 required")
    if spec.T is not None and t > spec.T:
        raise DomainError("t beyond the horizon T")
    rng = generator(spec.seed, 0)

    def draw(etype, ne):
        return _scalar_values(rng, etype, (count, ne), t, spec.T)

    if spec.kind in _CHIRAL_KINDS:
        M = _assemble_rectangular(spec, draw)
        out = np.einsum("cij,cik->cjk", M.conj(), M)
        if spec.kind == "Wishart":
            out = out.real.astype(complex)
        return out
    return _assemble_square(spec, draw)


def eigenvalue_reduction(kind: str) -> str:
    if kind not in _REDUCTION:
        raise SpecError(f"unknown process kind {kind!r}")
    return _REDUCTION[kind]


def _reduce_eigs(lam: np.ndarray, mode: str) -> np.ndarray:
    if mode == "plain":
        return lam
    if mode == "half":
        return lam[..., lam.shape[-1] // 2:]
    if mode == "dedup":
        return lam[..., ::2]
    if mode == "radial":
        return np.sqrt(np.clip(lam, 0.0, None))
    raise SpecError(mode)


def eigen_path(path: np.ndarray, kind: Optional[str] = None) -> np.ndarray:
    """Ordered eigenvalue path (steps+1, n) with the kind's spectral
    reduction applied (nonnegative half for +-paired classes, one value
    per Kramers pair for the quaternion classes, radial coordinates for
    the chiral kinds)."""
    path = np.asarray(path)
    lam = np.empty(path.shape[:-1])
    for k in range(path.shape[0]):
        lam[k], _ = hermitian_eig(path[k])
    return _reduce_eigs(lam, _REDUCTION[kind] if kind else "plain")


def terminal_eigenvalues(spec: MatrixProcessSpec, t: float, count: int) -> np.ndarray:
    """(count, n) reduced ordered eigenvalues of single-time draws."""
    H = sample_matrices(spec, t, count)
    lam = np.linalg.eigvalsh(H)
    return _reduce_eigs(lam, _REDUCTION[spec.kind])


def symmetry_residual(kind: str, H: np.ndarray) -> float:
    """Max violation of the kind's defining symmetry-subspace relations
    (H^T Sigma_mu -+ Sigma_mu H, reality, Hermiticity) for one matrix."""
    H = np.asarray(H)
    d = H.shape[-1]
    res = float(np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))))
    if kind == "iA":
        res = max(res, float(np.max(np.abs(H + np.swapaxes(H, -1, -2)))))
    if kind in _REAL_KINDS:
        res = max(res, float(np.max(np.abs(H.imag))))
    for mu, sign in _RELATIONS.get(kind, ()):
        S = Sigma_mu(d // 2, mu)
        lhs = np.swapaxes(H, -1, -2) @ S
        res = max(res, float(np.max(np.abs(lhs - sign * (S @ H)))))
    if kind == "Banana_D":
        S = kron(np.eye(d // 2), sigma[1])
        lhs = np.swapaxes(H, -1, -2) @ S
        res = max(res, float(np.max(np.abs(lhs + S @ H))))
    return res


def dump_paths(fileobj, spec: MatrixProcessSpec, grid: PathGrid, count: int) -> None:
    """Write count eigenvalue paths as JSON lines:
    {"seed":..., "kind":..., "times":[...], "eigenvalues":[[...]...]}."""
    times = grid.times.tolist()
    for i in range(count):
        lam = eigen_path(build_process(spec, grid, sample=i), spec.kind)
        rec = {"seed": spec.seed, "kind": spec.kind, "times": times,
               "eigenvalues": lam.tolist()}
        fileobj.write(json.dumps(rec) + "\n")
