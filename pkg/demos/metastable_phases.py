"""Metastable phases of the multistable four-photon model.

Builds the weak-symmetry population sector at L = 10, takes its two slow
eigenoperators and prints the photon density of each metastable state
next to the stable semiclassical densities.
"""

import numpy as np

from kerrdpt import ModelSpec, fixed_points, model_spectra, rescale
from kerrdpt.spectra import metastable_states

base = ModelSpec(4, [10, -25, 3], 2.9, 1.0, 0.1)
scale = 10
spec = rescale(base, scale).replace(n_c=160)

ss = model_spectra(spec, [0], 4)[0]
print("slowest eigenvalues:", np.round(ss.eigenvalues, 5))

number = np.diag(np.arange(spec.n_c))
states = metastable_states(ss.steady_state, ss.eigenoperators[1:3])
found = sorted(np.trace(number @ rho).real / scale for rho in states)
roots = sorted(p.density for p in fixed_points(base, base.g_n).stable)
for d, r in zip(found, roots):
    print(f"metastable <n>/L = {d:.3f}   semiclassical N = {r:.3f}")
