"""Z_n symmetry sectors and block diagonalisation of the Liouvillian.

The Fock basis ``|p><q|`` already diagonalises the symmetry
superoperators, so the Liouvillian is a row/column permutation away from
block-diagonal form. The permutation is found by treating the nonzero
pattern of ``|L| + |L^T|`` as an undirected graph and collecting its
connected components with a breadth-first search, which costs time
linear in the number of stored entries.

Sector labels follow ``k = mod(p - q, n)`` for a weak symmetry and
``(k_L, k_R) = (mod(p, n), mod(q, n))`` for a strong one. Relabelling
``k -> n - k`` is an equally valid gauge choice.
"""

__all__ = ["BlockDecomposition", "label_sectors", "find_blocks_graph",
           "aggregate_by_label", "sector_decomposition", "extract_block",
           "is_block_diagonal", "verify_structure", "sector_label_of"]

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class BlockDecomposition:
    """Permutation that exposes the block structure of a superoperator.

    Attributes
    ----------
    permutation : numpy.ndarray
        ``permutation[i]`` is the original Liouville index placed at
        position ``i`` of the permuted matrix.
    blocks : list of (start, length, label)
        Consecutive ranges of the permuted index space. ``label`` is
        ``None`` for raw graph components.
    block_matrices : list of scipy.sparse.csr_matrix
        Extracted blocks in block order; empty unless requested from
        :func:`sector_decomposition`.
    """

    permutation: np.ndarray
    blocks: list
    block_matrices: list = field(default_factory=list, compare=False)

    def __len__(self):
        return len(self.blocks)

    def indices(self, which):
        start, length, _ = self.blocks[which]
        return self.permutation[start:start + length]

    def labels(self):
        return [lab for _, _, lab in self.blocks]

    def find(self, label):
        """Position of the block carrying ``label``."""
        for i, (_, _, lab) in enumerate(self.blocks):
            if lab == label:
                return i
        raise KeyError(f"no block with label {label!r}")


def sector_label_of(p, q, n, kind):
    if kind == "weak":
        return (p - q) % n
    if kind == "strong":
        return (p % n, q % n)
    raise ValueError(f"symmetry kind must be 'weak' or 'strong', got {kind!r}")


def label_sectors(n, n_c, kind):
    """Sector label of every row-major Liouville index ``p * n_c + q``."""
    if n < 1:
        raise ValueError(f"drive order must be >= 1, got {n}")
    p, q = np.divmod(np.arange(n_c * n_c), n_c)
    if kind == "weak":
        return [int(k) for k in (p - q) % n]
    if kind == "strong":
        return list(zip((p % n).tolist(), (q % n).tolist()))
    raise ValueError(f"symmetry kind must be 'weak' or 'strong', got {kind!r}")


def _matrix(sup):
    return sup.matrix if hasattr(sup, "matrix") else sp.csr_matrix(sup)


def find_blocks_graph(sup):
    """Connected components of the symmetrised sparsity graph.

    Components are ordered by their smallest original index and keep the
    original relative order of their members.

    Parameters
    ----------
    sup : Superoperator or sparse matrix

    Returns
    -------
    BlockDecomposition
        Unlabelled blocks, one per component.
    """
    mat = _matrix(sup)
    dim = mat.shape[0]
    if mat.shape != (dim, dim):
        raise ValueError(f"superoperator must be square, got {mat.shape}")
    pattern = sp.csr_matrix(abs(mat) + abs(mat.T))
    indptr, indices = pattern.indptr.tolist(), pattern.indices.tolist()

    comp = [-1] * dim
    n_comp = 0
    for root in range(dim):
        if comp[root] >= 0:
            continue
        comp[root] = n_comp
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for nb in indices[indptr[node]:indptr[node + 1]]:
                if comp[nb] < 0:
                    comp[nb] = n_comp
                    queue.append(nb)
        n_comp += 1

    # roots are visited in increasing order, so component ids already
    # follow the smallest-member ordering; a stable sort keeps member order
    comp = np.asarray(comp, dtype=np.int64)
    perm = np.argsort(comp, kind="stable")
    sizes = np.bincount(comp, minlength=n_comp)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    blocks = [(int(s), int(l), None) for s, l in zip(starts, sizes)]
    return BlockDecomposition(perm, blocks)


def aggregate_by_label(dec, labels):
    """Merge graph components that share a sector label.

    Parameters
    ----------
    dec : BlockDecomposition
        Output of :func:`find_blocks_graph`.
    labels : sequence
        Sector label of every original index (from :func:`label_sectors`).

    Raises
    ------
    ValueError
        If a component mixes labels, i.e. the operator breaks the symmetry.
    """
    groups = {}
    first_seen = {}
    for i in range(len(dec)):
        idx = dec.indices(i)
        labs = {labels[j] for j in idx}
        if len(labs) != 1:
            raise ValueError(
                f"component {i} mixes sector labels {sorted(labs, key=str)}; "
                "the superoperator does not respect the symmetry")
        lab = labs.pop()
        groups.setdefault(lab, []).append(idx)
        first_seen.setdefault(lab, int(idx.min()))
    perm = []
    blocks = []
    for lab in sorted(groups, key=first_seen.get):
        idx = np.sort(np.concatenate(groups[lab]))
        blocks.append((len(perm), len(idx), lab))
        perm.extend(idx.tolist())
    return BlockDecomposition(np.asarray(perm, dtype=np.int64), blocks)


def sector_decomposition(sup, n, kind, with_blocks=True):
    """Graph components aggregated into labelled symmetry sectors."""
    labels = label_sectors(n, sup.n_c, kind)
    dec = aggregate_by_label(find_blocks_graph(sup), labels)
    if with_blocks:
        dec.block_matrices.extend(extract_block(sup, dec, i) for i in range(len(dec)))
    return dec


def extract_block(sup, dec, which):
    """Sub-matrix of ``sup`` restricted to block ``which`` of ``dec``."""
    if not 0 <= which < len(dec):
        raise IndexError(f"block index {which} out of range for {len(dec)} blocks")
    idx = dec.indices(which)
    mat = sp.csr_matrix(_matrix(sup))
    block = mat[idx][:, idx].tocsr()
    block.sort_indices()
    return block


def is_block_diagonal(sup, dec):
    """True iff every stored entry of ``P L P^T`` lies inside a declared block."""
    mat = sp.coo_matrix(_matrix(sup))
    block_of = np.empty(mat.shape[0], dtype=np.int64)
    for i in range(len(dec)):
        block_of[dec.indices(i)] = i
    nz = mat.data != 0
    return bool(np.all(block_of[mat.row[nz]] == block_of[mat.col[nz]]))


def verify_structure(rho, label, n, tol=1e-8):
    """Check that ``rho`` only has weight on entries of sector ``label``.

    An integer label is read as a weak-symmetry sector, a pair as a strong
    one.
    """
    rho = np.asarray(rho)
    p, q = np.indices(rho.shape)
    if isinstance(label, tuple):
        allowed = (p % n == label[0]) & (q % n == label[1])
    else:
        allowed = (p - q) % n == label
    return bool(np.all(np.abs(rho[~allowed]) < tol))
