"""Slow, independent reference implementations used only by the tests.

Nothing here imports the package's assembly code: operators are built
entry by entry from their matrix elements, and the Liouvillian is built
column by column by applying the master equation to basis matrices.
"""

import math

import numpy as np


def dense_destroy(n_c):
    a = np.zeros((n_c, n_c), dtype=complex)
    for p in range(1, n_c):
        a[p - 1, p] = math.sqrt(p)
    return a


def dense_hamiltonian(n, u, g, n_c):
    """Diagonal from falling factorials, drive from ladder products."""
    h = np.zeros((n_c, n_c), dtype=complex)
    for p in range(n_c):
        for m, um in enumerate(u, start=1):
            if p >= m:
                h[p, p] += um / m * math.perm(p, m)
    for p in range(n, n_c):
        amp = g * math.sqrt(math.perm(p, n))
        h[p - n, p] += amp
        h[p, p - n] += amp
    return h


def dense_jumps(n, gamma, eta, n_c):
    a = dense_destroy(n_c)
    out = []
    if gamma:
        out.append((a, gamma))
    if eta:
        out.append((np.linalg.matrix_power(a, n), eta))
    return out


def master_rhs(h, jumps, rho):
    out = -1j * (h @ rho - rho @ h)
    for op, rate in jumps:
        od = op.conj().T
        out += rate * (op @ rho @ od - 0.5 * (od @ op @ rho + rho @ od @ op))
    return out


def liouvillian_by_action(h, jumps):
    """Row-major dense Liouvillian, one basis matrix |p><q| at a time."""
    n_c = h.shape[0]
    big = np.zeros((n_c * n_c, n_c * n_c), dtype=complex)
    for p in range(n_c):
        for q in range(n_c):
            e = np.zeros((n_c, n_c), dtype=complex)
            e[p, q] = 1.0
            big[:, p * n_c + q] = master_rhs(h, jumps, e).reshape(-1)
    return big


def model_liouvillian(n, u, g, gamma, eta, n_c):
    return liouvillian_by_action(dense_hamiltonian(n, u, g, n_c),
                                 dense_jumps(n, gamma, eta, n_c))


def projection_block(h, jumps, indices):
    """Block from the trace formula L_ij = Tr[zeta_i^dag L(zeta_j)]."""
    n_c = h.shape[0]
    basis = []
    for idx in indices:
        z = np.zeros((n_c, n_c), dtype=complex)
        z[divmod(int(idx), n_c)] = 1.0
        basis.append(z)
    block = np.zeros((len(basis), len(basis)), dtype=complex)
    for j, zj in enumerate(basis):
        lz = master_rhs(h, jumps, zj)
        for i, zi in enumerate(basis):
            block[i, j] = np.trace(zi.conj().T @ lz)
    return block


def label_partition(n, n_c, kind):
    """Sector label -> sorted list of Liouville indices, by enumeration."""
    groups = {}
    for p in range(n_c):
        for q in range(n_c):
            lab = (p - q) % n if kind == "weak" else (p % n, q % n)
            groups.setdefault(lab, []).append(p * n_c + q)
    return groups


def drive_closed_form(n, u, gamma, eta, density):
    a = sum(um * density ** (m - 1) for m, um in enumerate(u, start=1))
    b = gamma + n * eta * density ** (n - 1)
    return math.sqrt((4 * a * a + b * b) / (4 * n * n * density ** (n - 2)))


def sorted_multiset(vals):
    vals = np.asarray(vals)
    return vals[np.lexsort((np.round(vals.imag, 6), np.round(vals.real, 6)))]


def multiset_distance(a, b):
    """Max distance under the optimal matching (Hungarian on |a_i - b_j|)."""
    from scipy.optimize import linear_sum_assignment
    a, b = np.asarray(a), np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())
