"""
Exact single-excitation treatment of atoms plus a finite resonator array.

Basis ordering: the ``K`` atomic excitations first, then the photon on sites
``1 .. N_c`` (index ``K + site - 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Boundary, Setup

__all__ = [
    "DimensionError",
    "SingleExcitationState",
    "BoundState",
    "SpectralPropagator",
    "build_hamiltonian",
    "evolve_exact",
    "atomic_populations",
    "find_bound_states",
    "bic_projector",
    "light_cone_horizon",
    "site_index",
    "atomic_excitation",
]

MAX_DIM = 6000


class DimensionError(ValueError):
    """The single-excitation space is too large for dense diagonalisation."""


@dataclass(frozen=True)
class SingleExcitationState:
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_atoms: int) -> "SingleExcitationState":
        vector = np.asarray(vector, dtype=complex)
        return cls(vector[:n_atoms].copy(), vector[n_atoms:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta]).astype(complex)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.alpha) ** 2) + np.sum(np.abs(self.beta) ** 2)))

    def momentum_amplitudes(self) -> np.ndarray:
        """beta_k = N_c^-1/2 sum_j exp(-i k j) beta_j on k = 2 pi q / N_c."""
        n = self.beta.size
        j = np.arange(1, n + 1)
        k = 2.0 * np.pi * np.arange(n) / n
        return np.exp(-1j * np.outer(k, j)) @ self.beta / np.sqrt(n)


@dataclass(frozen=True)
class BoundState:
    energy: float
    vector: SingleExcitationState
    localization: float
    residual: float = 0.0

    @property
    def atomic_overlaps(self) -> np.ndarray:
        """<G| sigma_i^- |phi_B>, the atomic components of the state."""
        return self.vector.alpha


def site_index(setup: Setup, site: int) -> int:
    return setup.n_atoms + site - 1


def atomic_excitation(setup: Setup, atom: int) -> np.ndarray:
    """Basis vector sigma_atom^+ |G> with a 1-based atom index."""
    if not 1 <= atom <= setup.n_atoms:
        raise ValueError(f"atom index {atom} outside 1..{setup.n_atoms}")
    psi = np.zeros(setup.n_atoms + setup.waveguide.n_sites, dtype=complex)
    psi[atom - 1] = 1.0
    return psi


def build_hamiltonian(setup: Setup) -> np.ndarray:
    """Dense real-symmetric H in the single-excitation sector."""
    wg = setup.waveguide
    size, n = setup.n_atoms, wg.n_sites
    dim = size + n
    h = np.zeros((dim, dim))
    h[np.arange(size), np.arange(size)] = setup.omegas
    photon = np.arange(size, dim)
    h[photon, photon] = wg.omega_c
    h[photon[:-1], photon[1:]] = -wg.xi
    h[photon[1:], photon[:-1]] = -wg.xi
    if wg.boundary is Boundary.PERIODIC:
        h[photon[0], photon[-1]] = h[photon[-1], photon[0]] = -wg.xi
    for i, atom in enumerate(setup.atoms):
        for site in atom.sites:
            h[i, site_index(setup, site)] += atom.g
            h[site_index(setup, site), i] += atom.g
    return h


class SpectralPropagator:
    """exp(-i H t) from a single dense eigendecomposition of ``H``."""

    def __init__(self, hamiltonian: np.ndarray, max_dim: int = MAX_DIM):
        hamiltonian = np.asarray(hamiltonian)
        if hamiltonian.shape[0] > max_dim:
            raise DimensionError(
                f"dimension {hamiltonian.shape[0]} exceeds the dense cap {max_dim}"
            )
        self.hamiltonian = hamiltonian
        self.energies, self.modes = np.linalg.eigh(hamiltonian)

    @property
    def dim(self) -> int:
        return self.energies.size

    def evolve(self, psi0, times, rows=None) -> np.ndarray:
        """States (or the selected ``rows`` of them) at each time, shape (T, len(rows))."""
        psi0 = psi0.vector if isinstance(psi0, SingleExcitationState) else np.asarray(psi0)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        coeff = self.modes.conj().T @ psi0.astype(complex)
        modes = self.modes if rows is None else self.modes[rows]
        out = np.empty((times.size, modes.shape[0]), dtype=complex)
        # chunk over time to bound the (T, dim) phase table
        step = max(1, 2_000_000 // max(self.dim, 1))
        for start in range(0, times.size, step):
            t = times[start:start + step]
            phases = np.exp(-1j * np.outer(t, self.energies)) * coeff[None, :]
            out[start:start + step] = phases @ modes.T
        return out


def evolve_exact(hamiltonian: np.ndarray, psi0, t_grid, *, max_dim: int = MAX_DIM) -> np.ndarray:
    """Full states ``exp(-i H t) psi0`` on ``t_grid``; shape ``(T, dim)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be increasing")
    psi0 = psi0.vector if isinstance(psi0, SingleExcitationState) else np.asarray(psi0)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalised")
    return SpectralPropagator(hamiltonian, max_dim).evolve(psi0, t_grid)


def atomic_populations(setup: Setup, psi0, t_grid, propagator: SpectralPropagator | None = None):
    """|alpha_i(t)|^2 of the exact evolution, shape ``(T, K)``."""
    prop = propagator or SpectralPropagator(build_hamiltonian(setup))
    amps = prop.evolve(psi0, t_grid, rows=np.arange(setup.n_atoms))
    return np.abs(amps) ** 2


def light_cone_horizon(setup: Setup, safety: float = 0.9) -> float:
    """Latest time before the fastest wavefront (group velocity 2 xi) from the
    outermost coupling site reaches a lattice edge, times ``safety``.

    For a ring the wrap-around distance ``N_c / 2`` is used instead.
    """
    wg = setup.waveguide
    if wg.boundary is Boundary.PERIODIC:
        distance = wg.n_sites / 2.0
    else:
        lo, hi = setup.span
        distance = min(lo - 1, wg.n_sites - hi)
    return safety * distance / (2.0 * wg.xi)


def _window_rows(setup: Setup, width: int | None) -> np.ndarray:
    lo, hi = setup.span
    if width is None:
        width = 2 * max(a.size for a in setup.atoms)
    first = max(1, lo - width)
    last = min(setup.waveguide.n_sites, hi + width)
    return np.arange(site_index(setup, first), site_index(setup, last) + 1)


def _phase_fix(v: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def find_bound_states(
    hamiltonian: np.ndarray,
    setup: Setup,
    loc_threshold: float = 0.99,
    *,
    edge_margin: float = 1e-6,
    window: int | None = None,
    max_residual: float = 0.01,
) -> list[BoundState]:
    """In-band states confined to the neighbourhood of the atoms.

    Eigenvectors of the full finite lattice are a poor handle on bound states
    in the continuum: any level lying within a level spacing of a standing wave
    hybridises with it, and long-lived (but not strictly bound) states are
    spread over the whole array. Instead ``hamiltonian`` is restricted to the
    atoms plus the photon window ``[n_min - W, m_max + W]`` (``W = 2 max N_i``
    by default, hard walls at its ends) and that block is diagonalised. A
    block eigenstate is kept when

    * its energy is inside the band by more than ``edge_margin``,
    * at least ``loc_threshold`` of its photonic weight sits inside the
      atomic span ``[n_min, m_max]`` (a state with no photon counts as 1),
    * embedded in the full lattice, ``||H phi - E phi|| <= max_residual * xi``.

    The residual is the amplitude leaking through the window walls; it is
    zero to rounding for an exact bound state and of order ``sqrt(width)`` for
    a state that decays slowly. Standing waves of the window fail the span
    test by a wide margin. Results are independent of ``N_c`` as long as the
    window fits in the lattice.

    Each vector is phase-fixed (largest component real positive); results are
    sorted by energy.
    """
    wg = setup.waveguide
    size = setup.n_atoms
    lo, hi = setup.span
    photon_rows = _window_rows(setup, window)
    rows = np.concatenate([np.arange(size), photon_rows])
    block = hamiltonian[np.ix_(rows, rows)]
    energies, modes = np.linalg.eigh(block)

    span_mask = (photon_rows >= site_index(setup, lo)) & (photon_rows <= site_index(setup, hi))
    photon = modes[size:]
    photon_weight = np.sum(np.abs(photon) ** 2, axis=0)
    inside = np.sum(np.abs(photon[span_mask]) ** 2, axis=0)
    loc = np.where(photon_weight < 1e-14, 1.0, inside / np.maximum(photon_weight, 1e-300))

    inband = np.abs(energies - wg.omega_c) < 2.0 * wg.xi - edge_margin
    out: list[BoundState] = []
    for idx in np.where(inband & (loc >= loc_threshold))[0]:
        v = np.zeros(hamiltonian.shape[0], dtype=complex)
        v[rows] = modes[:, idx]
        residual = float(np.linalg.norm(hamiltonian @ v - energies[idx] * v))
        if residual > max_residual * wg.xi:
            continue
        v = _phase_fix(v)
        out.append(BoundState(float(energies[idx]), SingleExcitationState.from_vector(v, size),
                              float(loc[idx]), residual))
    out.sort(key=lambda b: (round(b.energy / wg.xi, 9), tuple(np.round(-np.abs(b.atomic_overlaps), 6))))
    return out


def bic_projector(bics: list[BoundState]) -> np.ndarray:
    """Orthogonal projector onto the span of the given bound states."""
    if not bics:
        raise ValueError("need at least one bound state")
    mat = np.array([b.vector.vector for b in bics]).T
    q, _ = np.linalg.qr(mat)
    return q @ q.conj().T
