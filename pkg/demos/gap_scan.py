"""Liouvillian gap across the atomic frequency for the four reference geometries.

Geometries (a)-(c) keep a zero gap at resonance because they host dark
(decoherence-free) modes. Geometry (d) stays gapped near resonance but the gap
closes again at Omega = +-2 cos(3 pi / 8), where each N = 8 atom decouples.
"""

import numpy as np

from gawq.markovian import gap_scan

grid = np.linspace(-1.0, 1.0, 41)
for label in "abcd":
    table = gap_scan(label, grid)
    i0 = np.argmin(np.abs(grid))
    print(f"({label}) gap at Omega=0: {table[i0, 1]:.2e}   min {table[:, 1].min():.2e}   max {table[:, 1].max():.2e}")

w = 2 * np.cos(3 * np.pi / 8)
print(f"(d) gap at Omega = +-{w:.4f}: {gap_scan('d', [-w, w])[:, 1]}")
