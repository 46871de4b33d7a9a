"""
Dense complex Hermitian linear algebra.

Matrices are plain read-only ``numpy`` arrays of dtype complex128. Every
matrix handed out by this module is exactly Hermitian: validation returns the
symmetrized matrix (M + M^dagger)/2.
"""
import logging
import numpy as np

from .conf import setting
from .errors import NotSquare, NotHermitian, DimensionMismatch

logger = logging.getLogger('robustness')


def _frozen(matrix):
    matrix = np.array(matrix, dtype=complex)
    matrix.setflags(write=False)
    return matrix


def validate_hermitian(matrix, tol=None, field=None):
    """Check that a matrix is Hermitian and return its symmetrized copy"""
    tol = setting('ROBUSTNESS_TOL_HERMITIAN') if tol is None else tol
    matrix = np.asarray(matrix, dtype=complex)

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise NotSquare(f"expected a non-empty square matrix, got shape {matrix.shape}", field)

    deviation = np.max(np.abs(matrix - matrix.conj().T))
    scale = 1.0 + np.max(np.abs(matrix))
    if deviation > tol * scale:
        raise NotHermitian(
            f"matrix deviates from its adjoint by {deviation:.3e} (tolerance {tol * scale:.3e})",
            field
        )

    return _frozen((matrix + matrix.conj().T) / 2)


def eigvalsh(matrix):
    """
    Eigenvalues of a Hermitian matrix in ascending order.

    The complex d x d matrix is embedded as the real symmetric 2d x 2d matrix
    [[Re, -Im], [Im, Re]]; its spectrum is the original one with every
    eigenvalue doubled, so every second sorted value is kept.
    """
    matrix = np.asarray(matrix)
    re, im = matrix.real, matrix.imag
    embedding = np.block([[re, -im], [im, re]])
    embedding = (embedding + embedding.T) / 2
    return np.linalg.eigvalsh(embedding)[::2]


def operator_norm_inf(matrix):
    """Largest absolute eigenvalue"""
    eigenvalues = eigvalsh(matrix)
    return float(max(abs(eigenvalues[0]), abs(eigenvalues[-1])))


def is_psd(matrix, tol=None):
    """Positive semidefiniteness up to a relative tolerance"""
    tol = setting('ROBUSTNESS_TOL_PSD') if tol is None else tol
    eigenvalues = eigvalsh(matrix)
    norm = max(abs(eigenvalues[0]), abs(eigenvalues[-1]))
    return bool(eigenvalues[0] >= -tol * (1.0 + norm))


def hs_inner(a, b):
    """Hilbert-Schmidt inner product tr[AB] of two Hermitian matrices"""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot pair {a.shape} with {b.shape}")
    # tr[AB] = tr[A^dagger B] for Hermitian A
    return float(np.real(np.vdot(a, b)))


def project_psd(matrix):
    """Nearest positive semidefinite matrix in Frobenius norm; works on stacks"""
    eigenvalues, vectors = np.linalg.eigh(np.asarray(matrix))
    adjoint = np.conj(np.swapaxes(vectors, -1, -2))
    clipped = (vectors * np.clip(eigenvalues, 0.0, None)[..., None, :]) @ adjoint
    return (clipped + np.conj(np.swapaxes(clipped, -1, -2))) / 2


def min_eigenvalue(matrix):
    return float(eigvalsh(matrix)[0])


def max_eigenvalue(matrix):
    return float(eigvalsh(matrix)[-1])


def partial_trace(matrix, dims, keep):
    """Trace out every tensor factor of a bipartite operator except ``keep``"""
    dim_a, dim_b = dims
    tensor = np.asarray(matrix).reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == 0:
        return np.einsum('ajbj->ab', tensor)
    if keep == 1:
        return np.einsum('iaib->ab', tensor)
    raise ValueError(f"keep must be 0 or 1, got {keep}")


def ket(index, dim):
    vector = np.zeros(dim, dtype=complex)
    vector[index] = 1.0
    return vector


def projector(vector):
    vector = np.asarray(vector, dtype=complex)
    vector = vector / np.linalg.norm(vector)
    return np.outer(vector, vector.conj())


def _hvec_indices(dim):
    upper = np.triu_indices(dim, k=1)
    return np.arange(dim), upper


def hvec(matrices):
    """
    Real coordinates of Hermitian matrices in an orthonormal basis.

    Accepts a stack (..., d, d) and returns (..., d*d). The basis is the
    diagonal units, (E_ij + E_ji)/sqrt(2) and i(E_ij - E_ji)/sqrt(2) for
    i < j, so Euclidean geometry of the coordinates is the Hilbert-Schmidt
    geometry of the matrices.
    """
    matrices = np.asarray(matrices)
    dim = matrices.shape[-1]
    diag, (rows, cols) = _hvec_indices(dim)
    upper = matrices[..., rows, cols]
    return np.concatenate([
        matrices[..., diag, diag].real,
        np.sqrt(2) * upper.real,
        np.sqrt(2) * upper.imag,
    ], axis=-1)


def unhvec(vectors, dim):
    """Inverse of hvec"""
    vectors = np.asarray(vectors, dtype=float)
    diag, (rows, cols) = _hvec_indices(dim)
    count = len(rows)
    matrices = np.zeros(vectors.shape[:-1] + (dim, dim), dtype=complex)
    matrices[..., diag, diag] = vectors[..., :dim]
    upper = (vectors[..., dim:dim + count] + 1j * vectors[..., dim + count:]) / np.sqrt(2)
    matrices[..., rows, cols] = upper
    matrices[..., cols, rows] = upper.conj()
    return matrices


def hermitian_basis(dim):
    """Orthonormal basis of the d x d Hermitian matrices, matching hvec"""
    return unhvec(np.eye(dim * dim), dim)
