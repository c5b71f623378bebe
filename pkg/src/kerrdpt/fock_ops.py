"""Sparse operator kernels on a truncated Fock space.

Every operator is a ``scipy.sparse.csr_matrix`` of complex128 kept in
canonical form: sorted column indices inside each row, no duplicate
entries, and no stored entries below ``DROP_TOL`` in magnitude. The
canonicalisation only happens at construction boundaries (the functions
in this module), never inside arithmetic done by callers.
"""

__all__ = [
    "DROP_TOL", "canonical", "entries", "destroy", "create", "number",
    "identity", "matpow", "kron", "adjoint", "matmul", "conjugate",
    "transpose", "scale", "add",
]

import numpy as np
import scipy.sparse as sp

DROP_TOL = 1e-15


def canonical(mat):
    """Return ``mat`` as a canonical complex CSR matrix.

    Duplicates are summed, indices sorted and entries with
    ``|value| < DROP_TOL`` removed.
    """
    out = sp.csr_matrix(mat, dtype=np.complex128, copy=True)
    out.sum_duplicates()
    small = np.abs(out.data) < DROP_TOL
    if small.any():
        out.data[small] = 0
        out.eliminate_zeros()
    out.sort_indices()
    return out


def entries(mat):
    """Stored entries of ``mat`` as ``(row, col, value)`` in row-major order."""
    m = canonical(mat)
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    return [(int(r), int(c), complex(v))
            for r, c, v in zip(rows, m.indices, m.data)]


def _check_cutoff(n_c):
    if int(n_c) != n_c or n_c < 2:
        raise ValueError(f"Fock cutoff must be an integer >= 2, got {n_c!r}")
    return int(n_c)


def destroy(n_c):
    """Annihilation operator on the basis ``|0>, ..., |n_c - 1>``.

    Parameters
    ----------
    n_c : int
        Number of retained Fock states (at least 2).

    Returns
    -------
    scipy.sparse.csr_matrix
        Matrix with ``a[p - 1, p] = sqrt(p)``.
    """
    n_c = _check_cutoff(n_c)
    p = np.arange(1, n_c)
    a = sp.csr_matrix((np.sqrt(p).astype(np.complex128), (p - 1, p)),
                      shape=(n_c, n_c))
    return canonical(a)


def create(n_c):
    return adjoint(destroy(n_c))


def number(n_c):
    n_c = _check_cutoff(n_c)
    return canonical(sp.diags(np.arange(n_c, dtype=np.complex128)))


def identity(dim):
    return canonical(sp.identity(int(dim), dtype=np.complex128, format="csr"))


def matpow(mat, m):
    """Integer matrix power ``mat**m``; ``m = 0`` gives the identity."""
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matpow needs a square matrix, got {mat.shape}")
    if int(m) != m or m < 0:
        raise ValueError(f"exponent must be a non-negative integer, got {m!r}")
    result = identity(mat.shape[0])
    base = sp.csr_matrix(mat, dtype=np.complex128)
    m = int(m)
    # square-and-multiply
    while m:
        if m & 1:
            result = result @ base
        m >>= 1
        if m:
            base = base @ base
    return canonical(result)


def kron(a, b):
    """Kronecker product, index ``(i_a * rows_b + i_b, j_a * cols_b + j_b)``."""
    return canonical(sp.kron(a, b, format="csr"))


def adjoint(mat):
    return canonical(sp.csr_matrix(mat).conj().T)


def conjugate(mat):
    return canonical(sp.csr_matrix(mat).conj())


def transpose(mat):
    return canonical(sp.csr_matrix(mat).T)


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    return canonical(a @ b)


def scale(mat, factor):
    return canonical(complex(factor) * sp.csr_matrix(mat))


def add(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} + {b.shape}")
    return canonical(a + b)
