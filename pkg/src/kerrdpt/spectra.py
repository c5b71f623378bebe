"""Eigenanalysis of individual symmetry sectors.

Eigenvalues inside a sector are sorted by ``|Re(lambda)|`` so that
``lambda_0`` is the slowest mode: the steady state in a population
sector, the symmetry-breaking rate in a coherence sector. In a
population sector ``lambda_1`` is the Liouvillian gap.
"""

__all__ = ["SectorSpectrum", "MetastablePair", "SolverError",
           "DENSE_THRESHOLD", "is_population_sector", "sector_spectrum",
           "steady_state", "model_spectra", "gap_ladder", "hermitize",
           "metastable_decomposition", "metastable_states"]

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import ConvexHull

from .liouvillian import liouvillian
from .symmetry import sector_decomposition

logger = logging.getLogger(__name__)

DENSE_THRESHOLD = 4096
NULL_TOL = 1e-10
RESIDUAL_TOL = 1e-8
STEADY_RESIDUAL_TOL = 1e-9


class SolverError(RuntimeError):
    """An eigen- or linear solve did not reach the requested accuracy."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class SectorSpectrum:
    """Slowest eigenpairs of one symmetry block.

    Attributes
    ----------
    label : int or tuple
    eigenvalues : numpy.ndarray
        Sorted by ascending ``|Re|``.
    eigenoperators : list of numpy.ndarray
        ``n_c x n_c`` right eigenoperators with unit Frobenius norm.
    residuals : numpy.ndarray
        ``||(B - lambda) v||_2`` for each unit eigenvector ``v``.
    steady_state : numpy.ndarray or None
        Present for population sectors only.
    null_multiplicity : int
        Number of computed eigenvalues with ``|lambda| < 1e-10 ||B||``.
    method : str
        ``"dense"`` or ``"shift-invert"``.
    """

    label: object
    eigenvalues: np.ndarray
    eigenoperators: list
    residuals: np.ndarray
    steady_state: np.ndarray | None = None
    null_multiplicity: int = 0
    method: str = "dense"
    block_norm: float = field(default=0.0, repr=False)


@dataclass
class MetastablePair:
    """Positive and negative parts of a slow eigenoperator as density matrices."""

    plus: np.ndarray
    minus: np.ndarray
    eigenvalue: complex | None = None
    weights: tuple = (0.0, 0.0)


def is_population_sector(label):
    if isinstance(label, tuple):
        return label[0] == label[1]
    return label == 0


def _to_operator(v, indices, n_c):
    full = np.zeros(n_c * n_c, dtype=np.complex128)
    full[indices] = v
    op = full.reshape(n_c, n_c)
    return op / np.linalg.norm(op)


def _sort_key(vals):
    # primary |Re|, ties broken by Im for reproducibility
    return np.lexsort((vals.imag, np.abs(vals.real)))


def _residuals(block, vals, vecs):
    res = np.empty(len(vals))
    for i, lam in enumerate(vals):
        v = vecs[:, i] / np.linalg.norm(vecs[:, i])
        res[i] = np.linalg.norm(block @ v - lam * v)
    return res


def _dense_eigs(block, n_eigs):
    vals, vecs = scipy.linalg.eig(block.toarray(), overwrite_a=True,
                                  check_finite=False)
    order = _sort_key(vals)[:n_eigs]
    return vals[order], vecs[:, order]


def _iterative_eigs(block, n_eigs, shift):
    # the k eigenvalues nearest zero are re-sorted by |Re|; a fast-rotating
    # mode (large |Im|, small |Re|) outside that disc is not seen
    dim = block.shape[0]
    k = min(dim - 2, max(3 * n_eigs, n_eigs + 10))
    v0 = np.random.default_rng(0).standard_normal(dim).astype(np.complex128)
    vals, vecs = spla.eigs(block.tocsc(), k=k, sigma=shift, which="LM",
                           v0=v0, tol=0, maxiter=20 * dim)
    order = _sort_key(vals)[:n_eigs]
    return vals[order], vecs[:, order]


def sector_spectrum(block, label, n_eigs, indices=None, n_c=None,
                    dense_threshold=DENSE_THRESHOLD, with_steady_state=True):
    """Slowest ``n_eigs`` eigenpairs of a sector block.

    Parameters
    ----------
    block : scipy.sparse matrix
        Sector block of the Liouvillian.
    label : int or tuple
        Sector label; population sectors also get a steady state.
    n_eigs : int
    indices : array_like, optional
        Original Liouville indices of the block rows. Defaults to
        ``arange(dim)`` (the block is the whole Liouvillian).
    n_c : int, optional
        Fock cutoff; defaults to ``sqrt(dim)``.
    dense_threshold : int
        Blocks up to this dimension use a dense solver; larger ones use
        shift-invert Arnoldi around zero. The iterative path orders the
        eigenvalues closest to zero, which is reliable for the slow,
        weakly rotating modes (steady state, gap, symmetry-breaking
        rates) but can skip strongly rotating ones further down the
        ladder.

    Raises
    ------
    SolverError
        If any returned eigenpair misses the residual bound
        ``1e-8 ||B|| max(1, |lambda|)``.
    """
    block = sp.csr_matrix(block)
    dim = block.shape[0]
    if block.shape != (dim, dim):
        raise ValueError(f"block must be square, got {block.shape}")
    if indices is None:
        indices = np.arange(dim)
    if n_c is None:
        n_c = int(round(np.sqrt(dim)))
        if n_c * n_c != dim:
            raise ValueError("n_c is required when the block is not the full Liouvillian")
    n_eigs = min(int(n_eigs), dim)
    norm = spla.norm(block) or 1.0

    if dim <= dense_threshold or dim < n_eigs + 3:
        method = "dense"
        vals, vecs = _dense_eigs(block, n_eigs)
    else:
        method = "shift-invert"
        vals, vecs = _iterative_eigs(block, n_eigs, shift=1e-7 * max(1.0, norm))
    res = _residuals(block, vals, vecs)
    bound = RESIDUAL_TOL * norm * np.maximum(1.0, np.abs(vals))
    if np.any(res > bound):
        raise SolverError(
            f"sector {label!r}: eigen-residuals {res.max():.3g} exceed bound "
            f"({method}, dim={dim})", residuals=res)

    ops = [_to_operator(vecs[:, i], indices, n_c) for i in range(len(vals))]
    null_mult = int(np.sum(np.abs(vals) < NULL_TOL * norm))
    rho = None
    if with_steady_state and is_population_sector(label):
        if null_mult > 1:
            warnings.warn(f"sector {label!r} has a {null_mult}-fold null space; "
                          "returning the lowest eigenoperator as steady state",
                          RuntimeWarning, stacklevel=2)
            rho = _normalize_state(ops[0])
        else:
            rho = steady_state(block, indices, n_c)
    return SectorSpectrum(label, vals, ops, res, rho, null_mult, method, norm)


def _normalize_state(op):
    rho = 0.5 * (op + op.conj().T)
    return rho / np.trace(rho).real


def steady_state(block, indices=None, n_c=None):
    """Trace-one null vector of a population-sector block.

    One diagonal row of the block is replaced by the trace functional,
    which keeps the system regular exactly when the null space is
    one-dimensional. The result is Hermitised and renormalised.

    Raises
    ------
    ValueError
        If the block contains no diagonal ``|p><p|`` index.
    SolverError
        On a singular system (degenerate null space) or a residual
        ``||B vec(rho)|| >= 1e-9 ||B||``.
    """
    block = sp.csr_matrix(block)
    dim = block.shape[0]
    if indices is None:
        indices = np.arange(dim)
    indices = np.asarray(indices)
    if n_c is None:
        n_c = int(round(np.sqrt(dim)))
    p, q = np.divmod(indices, n_c)
    diag = np.flatnonzero(p == q)
    if diag.size == 0:
        raise ValueError("block has no population entries; it is a coherence sector")
    r0 = diag[0]
    trace_row = sp.csr_matrix((np.ones(diag.size, dtype=np.complex128),
                               (np.zeros(diag.size, dtype=int), diag)),
                              shape=(1, dim))
    a_mod = sp.vstack([block[:r0], trace_row, block[r0 + 1:]], format="csc")
    rhs = np.zeros(dim, dtype=np.complex128)
    rhs[r0] = 1.0
    try:
        x = spla.splu(a_mod).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"steady-state system is singular: {exc}") from exc
    rho = np.zeros(n_c * n_c, dtype=np.complex128)
    rho[indices] = x
    rho = rho.reshape(n_c, n_c)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    resid = np.linalg.norm(block @ rho.reshape(-1)[indices])
    norm = spla.norm(block) or 1.0
    if not resid < STEADY_RESIDUAL_TOL * norm:
        raise SolverError(f"steady-state residual {resid:.3g} too large",
                          residuals=np.array([resid]))
    return rho


def model_spectra(spec, sectors=None, n_eigs=4, dense_threshold=DENSE_THRESHOLD,
                  with_steady_state=True):
    """Sector spectra of a full model.

    Parameters
    ----------
    spec : ModelSpec
        Must carry a cutoff.
    sectors : list of labels, optional
        Defaults to every sector.

    Returns
    -------
    dict
        Sector label -> :class:`SectorSpectrum`, in decomposition order.
    """
    sup = liouvillian(spec)
    dec = sector_decomposition(sup, spec.n, spec.symmetry_kind, with_blocks=False)
    wanted = dec.labels() if sectors is None else list(sectors)
    out = {}
    for label in wanted:
        i = dec.find(label)
        idx = dec.indices(i)
        block = sup.matrix[idx][:, idx]
        out[label] = sector_spectrum(block, label, n_eigs, idx, spec.n_c,
                                     dense_threshold, with_steady_state)
    return out


def gap_ladder(spec, sector, count, dense_threshold=DENSE_THRESHOLD):
    """``[lambda_0, lambda_1, ...]`` of one sector of ``spec``."""
    spectra = model_spectra(spec, [sector], count, dense_threshold,
                            with_steady_state=False)
    return list(spectra[sector].eigenvalues)


def hermitize(op):
    """Hermitian part of ``op`` after removing its global phase.

    The phase is chosen so that ``Tr(op @ op)`` is real and positive.
    """
    op = np.asarray(op)
    t = np.einsum("ij,ji->", op, op)
    if abs(t) > 0:
        op = op * np.exp(-0.5j * np.angle(t))
    return 0.5 * (op + op.conj().T)


def metastable_decomposition(eigop, eigenvalue=None):
    """Split a slow eigenoperator into two metastable density matrices.

    The Hermitised operator is diagonalised; its positive and negative
    spectral parts, each normalised to unit trace, are returned as
    ``plus`` and ``minus``.

    Raises
    ------
    ValueError
        If the spectrum is one-sided, i.e. the operator is not of the
        ``rho_plus - rho_minus`` type.
    """
    h = hermitize(eigop)
    w, v = np.linalg.eigh(h)
    scale = np.max(np.abs(w))
    cut = 1e-12 * scale
    pos, neg = w > cut, w < -cut
    if not pos.any() or not neg.any():
        raise ValueError("eigenoperator has a one-sided spectrum; not metastable")
    plus = (v[:, pos] * w[pos]) @ v[:, pos].conj().T
    minus = -(v[:, neg] * w[neg]) @ v[:, neg].conj().T
    wp, wm = w[pos].sum(), -w[neg].sum()
    plus = plus / wp
    minus = minus / wm
    plus = 0.5 * (plus + plus.conj().T)
    minus = 0.5 * (minus + minus.conj().T)
    return MetastablePair(plus, minus, eigenvalue, (float(wp), float(wm)))


def _boundary(steady, ops, n_dirs, support_tol):
    # largest t with steady + t * (d . ops) >= 0, per direction d, computed
    # in the steady state's support after whitening
    w, v = np.linalg.eigh(steady)
    keep = w > support_tol * w.max()
    vk, inv_sqrt = v[:, keep], 1.0 / np.sqrt(w[keep])
    whitened = [inv_sqrt[:, None] * (vk.conj().T @ x @ vk) * inv_sqrt[None, :]
                for x in ops]
    if len(ops) == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        th = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    pts = []
    for d in dirs:
        y = sum(di * wi for di, wi in zip(d, whitened))
        top = np.linalg.eigvalsh(-y)[-1]
        if top <= 0:
            raise ValueError("coefficient region is unbounded; operators are not traceless")
        pts.append(d / top)
    return np.array(pts)


def _largest_triangle(pts):
    hull = pts[ConvexHull(pts).vertices]
    best, verts = -1.0, None
    for i in range(len(hull)):
        for j in range(i + 1, len(hull) - 1):
            a = hull[j] - hull[i]
            b = hull[j + 1:] - hull[i]
            area = np.abs(a[0] * b[:, 1] - a[1] * b[:, 0])
            k = int(area.argmax())
            if area[k] > best:
                best, verts = area[k], (i, j, j + 1 + k)
    return hull[list(verts)]


def metastable_states(steady, eigops, n_dirs=720, support_tol=1e-12):
    """Metastable density matrices spanned by one or two slow eigenoperators.

    The states ``steady + sum_i c_i X_i`` (``X_i`` the Hermitised slow
    eigenoperators) are positive for ``c`` in a convex region whose
    corners are the metastable phases. With one operator the region is a
    segment and both ends are returned; with two it is close to a
    triangle and the largest inscribed triangle of its sampled boundary
    gives three states.

    Parameters
    ----------
    steady : numpy.ndarray
        Steady state of the same sector.
    eigops : list of numpy.ndarray
        One or two eigenoperators with nonzero (slow) eigenvalues.
    n_dirs : int
        Boundary directions sampled in the two-operator case.
    support_tol : float
        Relative eigenvalue cut defining the support of ``steady``.

    Returns
    -------
    list of numpy.ndarray
        Unit-trace Hermitian states, two or three of them.
    """
    if len(eigops) not in (1, 2):
        raise ValueError(f"need one or two eigenoperators, got {len(eigops)}")
    ops = []
    for op in eigops:
        x = hermitize(op)
        x = x - np.trace(x).real * steady
        ops.append(x)
    pts = _boundary(steady, ops, n_dirs, support_tol)
    corners = pts if len(ops) == 1 else _largest_triangle(pts)
    out = []
    for c in corners:
        rho = steady + sum(ci * x for ci, x in zip(c, ops))
        rho = 0.5 * (rho + rho.conj().T)
        out.append(rho / np.trace(rho).real)
    return out
