"""Liouvillian and semiclassical analysis of n-photon driven Kerr resonators.

Modules
-------
fock_ops       truncated Fock-space operators
model          model parameters, Hamiltonian, jump operators, rescaling
liouvillian    sparse Lindblad superoperator
symmetry       Z_n sector block diagonalisation
spectra        sector eigenvalues, steady states, metastable states
semiclassical  Gross-Pitaevskii fixed points and transition classification
sweep          drive / scale sweeps and finite-size scaling
"""

__version__ = "0.1.0"

from .model import ModelSpec, rescale, suggest_cutoff  # noqa: E402
from .liouvillian import liouvillian  # noqa: E402
from .symmetry import sector_decomposition  # noqa: E402
from .spectra import model_spectra, steady_state  # noqa: E402
from .semiclassical import classify_transition, fixed_points  # noqa: E402

__all__ = ["__version__", "ModelSpec", "rescale", "suggest_cutoff", "liouvillian",
           "sector_decomposition", "model_spectra", "steady_state",
           "classify_transition", "fixed_points"]
