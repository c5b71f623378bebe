"""Physical model of the n-photon driven Kerr resonator.

The coherent part is

    H = sum_m (U_m / m) (a^dag)^m a^m + G_n [a^n + (a^dag)^n]

and the dissipators are one-photon loss ``a`` at rate ``gamma`` and
n-photon loss ``a^n`` at rate ``eta_n``.
"""

__all__ = ["ModelSpec", "min_interactions", "build_hamiltonian",
           "build_jump_ops", "rescale", "suggest_cutoff"]

import dataclasses
import math
from dataclasses import dataclass

from . import fock_ops


def min_interactions(n):
    """Smallest number of ``U_m`` terms a model of drive order ``n`` needs."""
    return math.floor(n / 2 + 1)


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one resonator.

    Attributes
    ----------
    n : int
        Drive order (number of photons exchanged by the drive).
    u : tuple of float
        Interaction strengths ``U_1, U_2, ...``. Must have at least
        ``floor(n/2 + 1)`` entries; missing orders are never zero-filled.
    g_n : float
        Drive amplitude, real and non-negative.
    gamma, eta_n : float
        One-photon and n-photon loss rates.
    scale_l : float
        Accumulated thermodynamic rescaling applied to these parameters
        (1 for the L-independent "tilde" parameters).
    n_c : int or None
        Fock cutoff. Only needed for the quantum operators.
    """

    n: int
    u: tuple
    g_n: float = 0.0
    gamma: float = 0.0
    eta_n: float = 0.0
    scale_l: float = 1.0
    n_c: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"drive order n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        need = min_interactions(self.n)
        if len(self.u) < need:
            raise ValueError(
                f"n={self.n} needs interaction terms up to m={need}, "
                f"got {len(self.u)} (pass explicit zeros)")
        if not (self.g_n >= 0 and math.isfinite(self.g_n)):
            raise ValueError(f"drive amplitude must be real and >= 0, got {self.g_n!r}")
        if self.gamma < 0 or self.eta_n < 0:
            raise ValueError("loss rates must be non-negative")
        if not self.scale_l > 0:
            raise ValueError(f"scale_l must be positive, got {self.scale_l!r}")
        if self.n_c is not None:
            if int(self.n_c) != self.n_c or self.n_c < 2:
                raise ValueError(f"cutoff must be an integer >= 2, got {self.n_c!r}")
            object.__setattr__(self, "n_c", int(self.n_c))

    @property
    def m_max(self):
        return len(self.u)

    @property
    def symmetry_kind(self):
        """``"strong"`` when one-photon loss is absent, else ``"weak"``."""
        return "strong" if self.gamma == 0 else "weak"

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# A rescaled model is just another parameter set; scale_l tracks the factor.
RescaledModel = ModelSpec


def _require_cutoff(spec):
    if spec.n_c is None:
        raise ValueError("model has no Fock cutoff (n_c) set")
    return spec.n_c


def build_hamiltonian(spec):
    """Sparse Hamiltonian of ``spec`` in its truncated Fock space."""
    n_c = _require_cutoff(spec)
    if n_c <= spec.n:
        raise ValueError(
            f"cutoff n_c={n_c} must exceed the drive order n={spec.n}; "
            "the drive term would vanish")
    a = fock_ops.destroy(n_c)
    adag = fock_ops.adjoint(a)
    h = fock_ops.scale(fock_ops.identity(n_c), 0.0)
    for m, u_m in enumerate(spec.u, start=1):
        if u_m == 0:
            continue
        term = fock_ops.matmul(fock_ops.matpow(adag, m), fock_ops.matpow(a, m))
        h = h + (u_m / m) * term
    if spec.g_n != 0:
        a_n = fock_ops.matpow(a, spec.n)
        h = h + spec.g_n * (a_n + fock_ops.adjoint(a_n))
    return fock_ops.canonical(h)


def build_jump_ops(spec):
    """Jump operators with their rates, ``[(a, gamma), (a^n, eta_n)]``.

    Channels with zero rate are left out.
    """
    n_c = _require_cutoff(spec)
    a = fock_ops.destroy(n_c)
    jumps = []
    if spec.gamma > 0:
        jumps.append((a, float(spec.gamma)))
    if spec.eta_n > 0:
        jumps.append((fock_ops.matpow(a, spec.n), float(spec.eta_n)))
    return jumps


def rescale(spec, l):
    """Apply the thermodynamic rescaling by a factor ``l``.

    ``G_n -> G_n / l**((n-2)/2)``, ``U_m -> U_m / l**(m-1)``,
    ``eta_n -> eta_n / l**(n-1)``; ``gamma`` is unchanged. The returned
    spec records the accumulated factor in ``scale_l`` so that
    ``rescale(rescale(s, l), 1/l)`` recovers ``s``.
    """
    if not l > 0:
        raise ValueError(f"scale factor must be positive, got {l!r}")
    n = spec.n
    return spec.replace(
        g_n=spec.g_n / l ** ((n - 2) / 2),
        u=tuple(u_m / l ** (m - 1) for m, u_m in enumerate(spec.u, start=1)),
        eta_n=spec.eta_n / l ** (n - 1),
        scale_l=spec.scale_l * l,
    )


def suggest_cutoff(spec, floor=8):
    """Heuristic Fock cutoff ``ceil(max(floor, 3 * N_max))``.

    ``N_max`` is the largest semiclassical fixed-point photon number of
    ``spec`` itself; for a rescaled spec this already includes the factor
    ``L``. The result always exceeds the drive order.
    """
    from .semiclassical import fixed_points

    sols = fixed_points(spec, spec.g_n)
    n_max = max((p.density for p in sols.points), default=0.0)
    n_c = math.ceil(max(floor, 3 * n_max))
    return max(n_c, spec.n + 1)
