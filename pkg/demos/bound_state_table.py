"""Bound states in the continuum from the full lattice Hamiltonian.

Prints energies, localization, residual and atomic overlaps per geometry and
compares the counts with the memory-kernel branches and the Markovian dark modes.
"""

import warnings

import numpy as np

from gawq.lattice import build_hamiltonian, find_bound_states
from gawq.markovian import dark_mode_count
from gawq.memory import UnsettledBranchWarning, count_bics, track_branches
from gawq.model import scenario

np.set_printoptions(precision=4, suppress=True)

for label in "abcd":
    setup = scenario(label)
    bics = find_bound_states(build_hamiltonian(setup), setup)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnsettledBranchWarning)
        ww = count_bics(track_branches(setup))
    print(f"({label}) lattice {len(bics)}  memory {ww}  dark modes {dark_mode_count(setup)}")
    for b in bics:
        print(f"    E = {b.energy:+.6f}  loc {b.localization:.4f}  residual {b.residual:.1e}"
              f"  overlaps {b.atomic_overlaps.real}")
