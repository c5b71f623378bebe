"""Liouvillian superoperator in Fock-Liouville space.

Vectorisation is row-major throughout the package::

    vec(rho)[p * n_c + q] = rho[p, q]

so that ``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

__all__ = ["Superoperator", "assemble", "liouvillian", "vec", "unvec",
           "apply", "expectation", "check_density_matrix", "export_coo"]

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fock_ops
from .model import build_hamiltonian, build_jump_ops


@dataclass(frozen=True)
class Superoperator:
    """Sparse ``(n_c**2, n_c**2)`` generator acting on row-major ``vec(rho)``."""

    matrix: sp.csr_matrix
    n_c: int

    @property
    def dim(self):
        return self.matrix.shape[0]


def vec(rho):
    return np.asarray(rho).reshape(-1)


def unvec(v, n_c):
    return np.asarray(v).reshape(n_c, n_c)


def assemble(h, jumps):
    """Build the Lindblad generator from a Hamiltonian and jump operators.

    Parameters
    ----------
    h : sparse matrix, shape (n_c, n_c)
    jumps : list of (sparse matrix, float)
        Jump operators with their rates.

    Returns
    -------
    Superoperator
    """
    n_c = h.shape[0]
    if h.shape != (n_c, n_c):
        raise ValueError(f"Hamiltonian must be square, got {h.shape}")
    eye = fock_ops.identity(n_c)
    out = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    for op, rate in jumps:
        if op.shape != (n_c, n_c):
            raise ValueError(
                f"jump operator shape {op.shape} does not match Hamiltonian {h.shape}")
        op = sp.csr_matrix(op)
        ldl = (op.conj().T @ op)
        out = out + rate * (sp.kron(op, op.conj())
                            - 0.5 * sp.kron(ldl, eye)
                            - 0.5 * sp.kron(eye, ldl.T))
    return Superoperator(fock_ops.canonical(out), n_c)


def liouvillian(spec):
    """Assemble the Liouvillian of a ``ModelSpec`` (cutoff must be set)."""
    return assemble(build_hamiltonian(spec), build_jump_ops(spec))


def apply(sup, rho):
    """Time derivative ``L[rho]`` as an ``n_c x n_c`` array."""
    rho = np.asarray(rho)
    if rho.shape != (sup.n_c, sup.n_c):
        raise ValueError(f"rho has shape {rho.shape}, expected {(sup.n_c, sup.n_c)}")
    return unvec(sup.matrix @ vec(rho), sup.n_c)


def expectation(obs, rho):
    """``Tr(obs rho)``."""
    rho = np.asarray(rho)
    if obs.shape != rho.shape:
        raise ValueError(f"shape mismatch {obs.shape} vs {rho.shape}")
    if sp.issparse(obs):
        return complex((obs.multiply(rho.T)).sum())
    return complex(np.einsum("ij,ji->", obs, rho))


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8):
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr:.12g} != 1")
    w_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if w_min < -pos_tol:
        raise ValueError(f"negative eigenvalue {w_min:.3g}")
    return rho


def export_coo(sup, path):
    """Write the superoperator as ``row col re im`` lines, row-major."""
    with open(path, "w") as fh:
        for r, c, v in fock_ops.entries(sup.matrix):
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
