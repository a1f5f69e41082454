"""
Markovian master equation for the atomic subsystem and its Liouvillian.

The master equation is implemented term by term,

    drho/dt = -i [sum_i Omega_i |e><e|_i, rho]
              + sum_ij A_ij (s_j rho s_i^+ - s_i^+ s_j rho)
                     + A_ij^* (s_i rho s_j^+ - rho s_j^+ s_i),

without first diagonalising the decay matrix; the imaginary parts of ``A``
carry the waveguide-mediated coherent exchange.

Vectorisation convention: column stacking, ``vec(X rho Y) = (Y^T kron X) vec(rho)``,
i.e. ``vec(rho) = rho.reshape(-1, order="F")``.  Qubit 0 is the most
significant factor of the atomic Hilbert space, and ``|e> = (0, 1)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sps

from .kernels import BandEdgeError, KernelSpec, closed_form
from .model import Setup, scenario

__all__ = [
    "DecayMatrix",
    "LiouvillianSpectrum",
    "decay_matrix",
    "effective_hamiltonian",
    "dark_mode_count",
    "build_liouvillian",
    "spectrum",
    "gap_scan",
    "vec",
    "unvec",
    "lowering_operators",
    "TOL_ZERO",
]

TOL_ZERO = 1e-8


@dataclass(frozen=True)
class DecayMatrix:
    """Coefficient matrix ``A`` and the per-atom wavenumber ``K_i``."""

    a: np.ndarray
    k_wavenumber: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        """Hermitian decay matrix A + A^dagger."""
        return self.a + self.a.conj().T

    def decay_rates(self) -> np.ndarray:
        """Eigenvalues of A + A^dagger, ascending."""
        return np.linalg.eigvalsh(self.gamma)


@dataclass(frozen=True)
class LiouvillianSpectrum:
    eigenvalues: np.ndarray
    gap: float
    zero_multiplicity: int
    tol_zero: float = TOL_ZERO


def decay_matrix(setup: Setup) -> DecayMatrix:
    """Markovian coefficients A_ij of the master equation.

    Entry ``(i, j)`` sums ``g_i g_j exp(i K_i |p_i - q_j|) / sqrt(4 xi^2 - delta_i^2)``
    over the four coupling-point pairs ``p_i in {n_i, m_i}``, ``q_j in {n_j, m_j}``,
    with the row atom's detuning ``delta_i = omega_c - Omega_i``. Rows therefore
    differ when the atoms are not mutually resonant.

    Raises
    ------
    BandEdgeError
        If any atom sits on or outside the band.
    """
    wg = setup.waveguide
    atoms = setup.atoms
    size = len(atoms)
    a = np.zeros((size, size), dtype=complex)
    ks = np.zeros(size)
    for i, ai in enumerate(atoms):
        delta = wg.omega_c - ai.omega
        if abs(delta) >= 2.0 * wg.xi:
            raise BandEdgeError(
                f"atom {i + 1}: Omega={ai.omega} lies outside the band {wg.band}"
            )
        ks[i] = np.pi - np.arccos(-delta / (2.0 * wg.xi))
        for j, aj in enumerate(atoms):
            total = 0j
            for p in ai.sites:
                for q in aj.sites:
                    total += closed_form(KernelSpec(abs(p - q), delta, wg.xi))
            a[i, j] = ai.g * aj.g * total
    return DecayMatrix(a, ks)


def effective_hamiltonian(setup: Setup, decay: DecayMatrix | None = None) -> np.ndarray:
    """Non-Hermitian single-excitation generator ``diag(Omega) - i A``."""
    decay = decay_matrix(setup) if decay is None else decay
    return np.diag(setup.omegas).astype(complex) - 1j * decay.a


def dark_mode_count(setup: Setup, decay: DecayMatrix | None = None, tol: float = 1e-6) -> int:
    """Collective single-excitation modes that never decay in the Markov limit.

    Counts eigenvalues of :func:`effective_hamiltonian` with ``|Im| <= tol * xi``.
    This is the Markovian counterpart of the bound-state count; the null space
    of ``A + A^dagger`` alone can be larger (coherent exchange may mix a
    non-radiating combination into radiating ones).
    """
    eta = np.linalg.eigvals(effective_hamiltonian(setup, decay))
    return int(np.sum(np.abs(eta.imag) <= tol * setup.waveguide.xi))


def lowering_operators(n_atoms: int) -> list[sps.csr_matrix]:
    """sigma_i^- = |g><e| on qubit i of an ``n_atoms``-qubit register."""
    sm = sps.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    ops = []
    for i in range(n_atoms):
        left = sps.identity(2 ** i, format="csr")
        right = sps.identity(2 ** (n_atoms - i - 1), format="csr")
        ops.append(sps.kron(sps.kron(left, sm), right, format="csr"))
    return ops


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((dim, dim), order="F")


def build_liouvillian(setup: Setup, decay: DecayMatrix | None = None, *, sparse: bool = False):
    """Superoperator ``L`` with ``vec(drho/dt) = L vec(rho)``.

    Returns a dense ``(4**K, 4**K)`` array, or a CSR matrix when ``sparse``.
    """
    decay = decay_matrix(setup) if decay is None else decay
    size = setup.n_atoms
    dim = 2 ** size
    eye = sps.identity(dim, format="csr", dtype=complex)
    sm = lowering_operators(size)
    sp = [op.T.tocsr() for op in sm]

    h = sps.csr_matrix((dim, dim), dtype=complex)
    for omega, s_minus, s_plus in zip(setup.omegas, sm, sp):
        h = h + omega * (s_plus @ s_minus)

    def pre(x):   # x rho
        return sps.kron(eye, x, format="csr")

    def post(y):  # rho y
        return sps.kron(y.T, eye, format="csr")

    def sandwich(x, y):  # x rho y
        return sps.kron(y.T, x, format="csr")

    lv = -1j * (pre(h) - post(h))
    a = decay.a
    for i in range(size):
        for j in range(size):
            aij = a[i, j]
            if aij == 0:
                continue
            lv = lv + aij * (sandwich(sm[j], sp[i]) - pre(sp[i] @ sm[j]))
            lv = lv + np.conj(aij) * (sandwich(sm[i], sp[j]) - post(sp[j] @ sm[i]))
    lv = lv.tocsr()
    return lv if sparse else lv.toarray()


def _sort_key(ev: np.ndarray) -> np.ndarray:
    return np.lexsort((ev.imag, np.abs(ev.imag), np.abs(ev.real)))


def spectrum(liouvillian, tol_zero: float = TOL_ZERO) -> LiouvillianSpectrum:
    """Eigenvalues sorted by |Re| (then |Im|, then Im) and the Liouvillian gap.

    The gap is ``|Re|`` of the second entry of the sorted list counted with
    multiplicity, so a degenerate zero eigenvalue gives a vanishing gap.
    """
    dense = liouvillian.toarray() if sps.issparse(liouvillian) else np.asarray(liouvillian)
    try:
        ev = np.linalg.eigvals(dense)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"Liouvillian eigensolver did not converge: {exc}") from exc
    ev = ev[_sort_key(ev)]
    gap = float(abs(ev[1].real)) if ev.size > 1 else 0.0
    zero = int(np.sum(np.abs(ev.real) <= tol_zero))
    return LiouvillianSpectrum(ev, gap, zero, tol_zero)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GAWQ_THREADS", "")))
    except ValueError:
        return min(4, os.cpu_count() or 1)


def gap_scan(label: str | Setup, omega_grid: Sequence[float], g: float = 0.1, n_sites: int = 501,
             *, tol_zero: float = TOL_ZERO, full: bool = False, threads: int | None = None):
    """Liouvillian gap along a grid of common atomic frequencies.

    ``label`` names a reference geometry (built with coupling ``g`` on
    ``n_sites`` resonators) or is a :class:`Setup` whose atoms all get each
    grid frequency in turn, keeping their own couplings.

    Returns an ``(n, 2)`` array of ``(Omega, gap)`` rows, or, with ``full``,
    a list of ``(Omega, LiouvillianSpectrum)`` pairs.
    """
    omega_grid = [float(w) for w in omega_grid]

    def one(omega):
        if isinstance(label, Setup):
            setup = label.with_atoms(omega=omega)
        else:
            setup = scenario(label, omega=omega, g=g, n_sites=n_sites)
        return spectrum(build_liouvillian(setup), tol_zero=tol_zero)

    workers = threads or _thread_count()
    if workers > 1 and len(omega_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(one, omega_grid))
    else:
        spectra = [one(w) for w in omega_grid]
    if full:
        return list(zip(omega_grid, spectra))
    return np.array([[w, s.gap] for w, s in zip(omega_grid, spectra)])
