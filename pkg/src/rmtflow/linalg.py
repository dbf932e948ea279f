"""Complex dense matrix helpers: Pauli/Kronecker constructions and a
deterministic Hermitian eigensolver.

Matrices are plain numpy arrays (complex128, row-major).  ``hermitian(M)`` is
a testable predicate, not enforced on construction.
"""

import numpy as np

from . import tolerances as tol
from .errors import NoConvergence, NotHermitian

__all__ = [
    "sigma", "Sigma_mu", "J_matrix", "kron", "hermitian", "hermitian_eig",
    "radial_coordinates", "char_poly_eval",
]

# Pauli matrices sigma_0..sigma_3
sigma = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def kron(a, b):
    """Kronecker product (A x B)[i*p+k, j*q+l] = A[i,j] B[k,l]."""
    return np.kron(np.asarray(a), np.asarray(b))


def Sigma_mu(N: int, mu: int):
    """I_N tensor sigma_mu, a 2N x 2N matrix."""
    return kron(np.eye(N), sigma[mu])


def J_matrix(N: int):
    """Symplectic unit J = I_N tensor [[0,1],[-1,0]] (= i * Sigma_2)."""
    return kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def hermitian(M, tolerance: float = 1e-12) -> bool:
    M = np.asarray(M)
    return bool(np.max(np.abs(M - M.conj().T)) <= tolerance * max(1.0, np.max(np.abs(M))))


def hermitian_eig(M):
    """Eigendecomposition of a Hermitian matrix.

    Returns (lam, U) with lam ascending, U unitary, U^dagger M U = diag(lam).
    Deterministic: identical input gives bit-identical output; each
    eigenvector's first component of largest modulus is made real positive,
    so ties (Kramers doublets) resolve reproducibly.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.conj().T)) > tol.HERMITICITY_TOL * scale:
        raise NotHermitian("matrix exceeds Hermiticity tolerance")
    try:
        lam, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as e:  # pragma: no cover - LAPACK rarely fails here
        raise NoConvergence(str(e)) from e
    # reproducible phase: first component of maximal modulus -> real positive
    idx = np.argmax(np.abs(U), axis=0)
    phases = U[idx, np.arange(U.shape[1])]
    phases = phases / np.abs(phases)
    U = U / phases[np.newaxis, :]
    return lam, U


def radial_coordinates(M):
    """Ascending nonnegative square roots of the eigenvalues of M^dagger M.

    M is rectangular (N+nu) x N; the output has length N (singular values).
    """
    M = np.asarray(M, dtype=complex)
    lam, _ = hermitian_eig(M.conj().T @ M)
    return np.sqrt(np.clip(lam, 0.0, None))


def char_poly_eval(M, z):
    """det(M - z I) by Laplace expansion; independent oracle for eigenvalues."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    A = M - z * np.eye(n)

    def det_rec(B):
        m = B.shape[0]
        if m == 1:
            return B[0, 0]
        total = 0.0 + 0.0j
        for j in range(m):
            minor = np.delete(np.delete(B, 0, axis=0), j, axis=1)
            total += (-1) ** j * B[0, j] * det_rec(minor)
        return total

    return det_rec(A)
