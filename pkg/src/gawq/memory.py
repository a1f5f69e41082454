"""
Time-local (Weisskopf-Wigner) description of the atomic amplitudes.

Replacing the retarded amplitude alpha_j(tau) by alpha_j(t) inside the memory
integral gives ``i d alpha/dt = M(t) alpha`` with

    M_ii(t) = Omega_i - 2 i g_i^2 [I_0(t) + I_{N_i}(t)]
    M_ij(t) = -i g_i g_j sum_{p, q} I_{|p_i - q_j|}(t)

where ``I_d(t) = int_0^t exp(-i omega_c tau) i^d J_d(2 xi tau) dtau`` (see
:mod:`gawq.kernels`).  The frame is the lab frame, so the kernels carry the
band centre ``omega_c`` rather than a detuning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kernels import cumulative_kernel
from .model import GiantAtom, Setup, WaveguideParams

__all__ = [
    "MemoryMatrix",
    "EigenBranches",
    "UnsettledBranchWarning",
    "self_energy",
    "exchange",
    "memory_matrix",
    "memory_matrices",
    "track_branches",
    "count_bics",
    "ww_evolve",
    "default_time_grid",
]


class UnsettledBranchWarning(RuntimeWarning):
    """A branch's imaginary part is still drifting at the end of the window."""


@dataclass(frozen=True)
class MemoryMatrix:
    t: float
    m: np.ndarray

    @property
    def self_energies(self) -> np.ndarray:
        return np.diag(self.m).copy()


@dataclass(frozen=True)
class EigenBranches:
    """Continuously tracked eigenvalues ``eta[n, k]`` of M(t_k)."""

    times: np.ndarray
    eta: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.eta[:, -1]


def default_time_grid(t_end: float = 200.0, points: int = 2001) -> np.ndarray:
    return np.linspace(0.0, t_end, points)


def _pair_orders(ai: GiantAtom, aj: GiantAtom) -> list[int]:
    return [abs(p - q) for p in ai.sites for q in aj.sites]


def _kernels(setup: Setup, times: np.ndarray) -> tuple[dict[int, int], np.ndarray]:
    orders = sorted({d for ai in setup.atoms for aj in setup.atoms for d in _pair_orders(ai, aj)})
    wg = setup.waveguide
    table = cumulative_kernel(orders, wg.omega_c, wg.xi, times)
    return {d: row for row, d in enumerate(orders)}, table


def _as_times(t) -> np.ndarray:
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    return times


def self_energy(atom: GiantAtom, waveguide: WaveguideParams, t):
    """Diagonal element of M(t) for one atom; scalar or array like ``t``."""
    times = _as_times(t)
    order = np.argsort(times)
    ints = np.empty((2, times.size), dtype=complex)
    ints[:, order] = cumulative_kernel([0, atom.size], waveguide.omega_c, waveguide.xi, times[order])
    value = atom.omega - 2j * atom.g ** 2 * (ints[0] + ints[1])
    return complex(value[0]) if np.ndim(t) == 0 else value


def exchange(atom_i: GiantAtom, atom_j: GiantAtom, waveguide: WaveguideParams, t):
    """Waveguide-mediated coupling between two atoms; symmetric in its atoms."""
    times = _as_times(t)
    order = np.argsort(times)
    orders = _pair_orders(atom_i, atom_j)
    ints = np.empty((4, times.size), dtype=complex)
    ints[:, order] = cumulative_kernel(orders, waveguide.omega_c, waveguide.xi, times[order])
    value = -1j * atom_i.g * atom_j.g * ints.sum(axis=0)
    return complex(value[0]) if np.ndim(t) == 0 else value


def memory_matrices(setup: Setup, times) -> np.ndarray:
    """M(t) stacked along the first axis for a non-decreasing grid ``times``."""
    times = _as_times(times)
    index, table = _kernels(setup, times)
    size = setup.n_atoms
    out = np.zeros((times.size, size, size), dtype=complex)
    for i, ai in enumerate(setup.atoms):
        out[:, i, i] = ai.omega - 2j * ai.g ** 2 * (table[index[0]] + table[index[ai.size]])
        for j in range(i + 1, size):
            aj = setup.atoms[j]
            total = sum(table[index[d]] for d in _pair_orders(ai, aj))
            out[:, i, j] = out[:, j, i] = -1j * ai.g * aj.g * total
    return out


def memory_matrix(setup: Setup, t: float) -> MemoryMatrix:
    return MemoryMatrix(float(t), memory_matrices(setup, [float(t)])[0])


def _vector_distance(old: np.ndarray, new: np.ndarray) -> np.ndarray:
    # phase-insensitive distance between unit columns
    overlap = np.abs(old.conj().T @ new)
    return np.sqrt(np.maximum(0.0, 2.0 - 2.0 * np.minimum(overlap, 1.0)))


def track_branches(setup: Setup, t_grid=None, *, vector_weight: float = 0.1) -> EigenBranches:
    """Eigenvalues of M(t) followed continuously along ``t_grid``.

    Consecutive eigen-decompositions are matched by a minimum-cost bipartite
    assignment on ``|d eta| + vector_weight * |d v|``; the eigenvector term
    resolves exact degeneracies where eigenvalue distance alone is ambiguous.
    """
    t_grid = default_time_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must start at 0 and increase strictly")
    mats = memory_matrices(setup, t_grid)
    size = setup.n_atoms
    eta = np.zeros((size, t_grid.size), dtype=complex)
    vecs = np.zeros((t_grid.size, size, size), dtype=complex)
    prev_w = prev_v = None
    for k, m in enumerate(mats):
        try:
            w, v = np.linalg.eig(m)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"eigensolver failed at t={t_grid[k]}: {exc}") from exc
        v = v / np.linalg.norm(v, axis=0)
        if prev_w is None:
            perm = np.argsort(w.imag)
        else:
            cost = np.abs(prev_w[:, None] - w[None, :]) + vector_weight * _vector_distance(prev_v, v)
            _, perm = linear_sum_assignment(cost)
        w, v = w[perm], v[:, perm]
        eta[:, k] = w
        vecs[k] = v
        prev_w, prev_v = w, v
    return EigenBranches(t_grid, eta, vecs)


def count_bics(branches: EigenBranches, tol_im: float = 1e-3, settle_tol: float = 1e-4) -> int:
    """Number of branches whose imaginary part has vanished at the last time.

    Emits :class:`UnsettledBranchWarning` when the mean of ``Im eta`` over the
    last 5 % of the window differs from the preceding 5 % by more than
    ``settle_tol``, a sign that the window should be extended.
    """
    im = branches.eta.imag
    n = im.shape[1]
    chunk = max(1, n // 20)
    if n >= 2 * chunk + 1:
        drift = np.abs(im[:, -chunk:].mean(axis=1) - im[:, -2 * chunk:-chunk].mean(axis=1))
        if np.any(drift > settle_tol):
            warnings.warn(
                f"branch imaginary parts still drifting at t={branches.times[-1]:g} "
                f"(max drift {drift.max():.2e})",
                UnsettledBranchWarning,
                stacklevel=2,
            )
    return int(np.sum(np.abs(im[:, -1]) <= tol_im))


def _substep_grid(t_grid: np.ndarray, h_max: float) -> tuple[np.ndarray, np.ndarray]:
    steps = np.diff(t_grid)
    counts = np.maximum(np.ceil(steps / h_max - 1e-9).astype(int), 1)
    nodes = [np.array([t_grid[0]])]
    for a, dt, c in zip(t_grid[:-1], steps, counts):
        nodes.append(a + dt * np.arange(1, c + 1) / c)
    fine = np.concatenate(nodes)
    marks = np.concatenate([[0], np.cumsum(counts)])
    return fine, marks


def ww_evolve(setup: Setup, alpha0, t_grid, *, h_max: float | None = None) -> np.ndarray:
    """Integrate ``i d alpha/dt = M(t) alpha`` and sample at ``t_grid``.

    Classical fourth-order Runge-Kutta with a fixed step
    ``h <= min(0.01/xi, spacing/4)``; M(t) is tabulated at the step nodes and
    interpolated linearly for the half steps, which limits the global error
    to second order in ``h`` (about 1e-7 at the default step).

    Returns
    -------
    ndarray, shape (len(t_grid), K)
        Complex amplitudes alpha_i(t).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be non-negative and strictly increasing")
    alpha = np.asarray(alpha0, dtype=complex).copy()
    if alpha.shape != (setup.n_atoms,):
        raise ValueError(f"alpha0 must have shape ({setup.n_atoms},)")
    if np.linalg.norm(alpha) > 1 + 1e-12:
        raise ValueError("initial amplitudes must have norm <= 1")
    if h_max is None:
        h_max = 0.01 / setup.waveguide.xi
        if t_grid.size > 1:
            h_max = min(h_max, np.min(np.diff(t_grid)) / 4.0)
    if h_max <= 1e-12:
        raise ValueError("step size underflow")

    start = np.array([0.0]) if t_grid[0] > 0 else np.empty(0)
    grid = np.concatenate([start, t_grid])
    fine, marks = _substep_grid(grid, h_max)
    mats = memory_matrices(setup, fine) * -1j
    out = np.zeros((grid.size, setup.n_atoms), dtype=complex)
    out[0] = alpha
    mark_iter = iter(enumerate(marks[1:], start=1))
    next_slot, next_mark = next(mark_iter, (None, None))
    for k in range(fine.size - 1):
        h = fine[k + 1] - fine[k]
        m0, m1 = mats[k], mats[k + 1]
        mh = 0.5 * (m0 + m1)
        k1 = m0 @ alpha
        k2 = mh @ (alpha + 0.5 * h * k1)
        k3 = mh @ (alpha + 0.5 * h * k2)
        k4 = m1 @ (alpha + h * k3)
        alpha = alpha + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if k + 1 == next_mark:
            out[next_slot] = alpha
            next_slot, next_mark = next(mark_iter, (None, None))
    return out[start.size:]
