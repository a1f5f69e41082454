"""
Long-time population predictors built from bound states, decay-regime
classification, and trajectory comparison metrics.

A single-excitation state ``psi0`` keeps, at long times, only its component in
the bound-state subspace; everything else leaks into the waveguide. Writing
``a_i^(n) = <G| sigma_i^- |phi_n>`` and ``c_n = <phi_n | psi0>``,

    |alpha_i(t)|^2  ->  | sum_n exp(-i E_n t) a_i^(n) c_n |^2 .

States sharing an energy are summed through their projector, so the result
does not depend on the basis chosen inside a degenerate subspace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lattice import BoundState, SingleExcitationState

__all__ = [
    "Regime",
    "LongTimePrediction",
    "Trajectory",
    "ComparisonMetrics",
    "ExponentialFit",
    "GridMismatchError",
    "NonOrthogonalError",
    "DEGENERACY_TOL",
    "energy_groups",
    "predict_multi",
    "predict_degenerate",
    "degenerate_expansion",
    "long_time_prediction",
    "classify_regime",
    "compare_trajectories",
    "fit_exponential",
    "first_decade_window",
    "dominant_frequency",
    "beat_periods",
]

DEGENERACY_TOL = 1e-8


class NonOrthogonalError(ValueError):
    """Bound-state vectors handed to a predictor are not orthonormal."""


class GridMismatchError(ValueError):
    """Trajectories cannot be placed on a common time grid."""


class Regime(str, enum.Enum):
    MULTI_BIC_OSCILLATION = "multi_bic_oscillation"
    DEGENERATE_STEADY = "degenerate_steady"
    SINGLE_BIC_PLATEAU = "single_bic_plateau"
    FULL_DECAY = "full_decay"


@dataclass(frozen=True)
class LongTimePrediction:
    """Asymptotic atomic populations.

    ``populations`` is called with a time (scalar or array) and returns the
    ``(K,)`` or ``(T, K)`` populations; for the two stationary regimes it
    ignores its argument. ``periods`` lists beat periods, empty when the
    prediction is constant.
    """

    kind: Regime
    populations: Callable[[np.ndarray | float], np.ndarray]
    periods: tuple[float, ...] = ()

    @property
    def is_stationary(self) -> bool:
        return not self.periods


@dataclass(frozen=True)
class Trajectory:
    """Atomic populations ``populations[k, i]`` sampled at ``times[k]``."""

    times: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pops = np.asarray(self.populations, dtype=float)
        if pops.ndim == 1:
            pops = pops[:, None]
        if times.ndim != 1 or pops.shape[0] != times.size:
            raise GridMismatchError(
                f"{times.size} times but populations of shape {pops.shape}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "populations", pops)

    def restrict(self, t_min: float = -np.inf, t_max: float = np.inf) -> "Trajectory":
        keep = (self.times >= t_min) & (self.times <= t_max)
        return Trajectory(self.times[keep], self.populations[keep])


@dataclass(frozen=True)
class ComparisonMetrics:
    """Per-atom deviations between two trajectories.

    ``late_time_std`` belongs to the reference (first) trajectory and is taken
    over the final 20 % of the window. ``prediction_dev`` is the largest
    deviation of the reference from a long-time prediction over that same
    final stretch, or ``None`` without a prediction.
    """

    max_abs_dev: np.ndarray
    rms_dev: np.ndarray
    late_time_std: np.ndarray
    prediction_dev: np.ndarray | None = None

    def as_dict(self) -> dict:
        out = {
            "max_abs_dev": self.max_abs_dev.tolist(),
            "rms_dev": self.rms_dev.tolist(),
            "late_time_std": self.late_time_std.tolist(),
        }
        if self.prediction_dev is not None:
            out["prediction_dev"] = self.prediction_dev.tolist()
        return out


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    amplitude: float
    r_squared: float
    window: tuple[float, float] = field(default=(0.0, 0.0))
    poor: bool = False


def _state_vector(psi0) -> np.ndarray:
    if isinstance(psi0, SingleExcitationState):
        return psi0.vector
    return np.asarray(psi0, dtype=complex)


def _basis(bics: Sequence[BoundState]) -> np.ndarray:
    return np.array([b.vector.vector for b in bics]).T


def _check_orthonormal(bics: Sequence[BoundState], tol: float = 1e-8) -> None:
    mat = _basis(bics)
    gram = mat.conj().T @ mat
    err = np.max(np.abs(gram - np.eye(len(bics))))
    if err > tol:
        raise NonOrthogonalError(f"bound states deviate from orthonormality by {err:.2e}")


def energy_groups(bics: Sequence[BoundState], tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Indices of ``bics`` grouped into runs of energies closer than ``tol``."""
    order = sorted(range(len(bics)), key=lambda n: bics[n].energy)
    groups: list[list[int]] = []
    for n in order:
        if groups and abs(bics[n].energy - bics[groups[-1][-1]].energy) <= tol:
            groups[-1].append(n)
        else:
            groups.append([n])
    return groups


def _group_amplitudes(bics, psi0, tol) -> tuple[np.ndarray, np.ndarray]:
    # returns energies (G,) and atomic amplitudes <G|s_i P_g|psi0> (G, K)
    psi = _state_vector(psi0)
    size = bics[0].vector.alpha.size
    energies, amps = [], []
    for group in energy_groups(bics, tol):
        mat = _basis([bics[n] for n in group])
        coeff = mat.conj().T @ psi
        amps.append(mat[:size] @ coeff)
        energies.append(np.mean([bics[n].energy for n in group]))
    return np.array(energies), np.array(amps)


def predict_multi(bics: Sequence[BoundState], psi0, t, *, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Bound-state-only populations at time(s) ``t``.

    Returns shape ``(K,)`` for scalar ``t`` and ``(T, K)`` otherwise.

    Raises
    ------
    NonOrthogonalError
        If the supplied states are not orthonormal.
    """
    if not bics:
        raise ValueError("need at least one bound state")
    _check_orthonormal(bics)
    energies, amps = _group_amplitudes(bics, psi0, tol)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-1j * np.outer(times, energies))
    pops = np.abs(phases @ amps) ** 2
    return pops[0] if np.ndim(t) == 0 else pops


def predict_degenerate(bics: Sequence[BoundState], psi0, *, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Stationary populations ``|<G| sigma_i^- P_B |psi0>|^2`` of a degenerate set."""
    if len(bics) < 1:
        raise ValueError("need at least one bound state")
    spread = max(b.energy for b in bics) - min(b.energy for b in bics)
    if spread > tol:
        raise ValueError(f"energies differ by {spread:.2e}, not degenerate within {tol:g}")
    return predict_multi(bics, psi0, 0.0, tol=tol)


def degenerate_expansion(bics: Sequence[BoundState], psi0, *, conjugate: bool = True) -> np.ndarray:
    """Two-state expansion of the degenerate populations.

    ``|a1 c1|^2 + |a2 c2|^2 + 2 Re[(a1 c1)(a2 c2)^*]`` per atom, with
    ``a_n = <G|sigma_i^-|phi_n>`` and ``c_n = <phi_n|psi0>``. With
    ``conjugate=False`` the cross term is taken without the complex
    conjugate, which only coincides with the projector form for real data.
    """
    if len(bics) != 2:
        raise ValueError("expansion is written for exactly two states")
    psi = _state_vector(psi0)
    terms = []
    for b in bics:
        c = np.vdot(b.vector.vector, psi)
        terms.append(b.atomic_overlaps * c)
    x, y = terms
    cross = x * (np.conj(y) if conjugate else y)
    return np.abs(x) ** 2 + np.abs(y) ** 2 + 2.0 * np.real(cross)


def classify_regime(n_bics: int, degenerate: bool = False) -> Regime:
    """Long-time behaviour implied by the number of bound states."""
    if n_bics < 0:
        raise ValueError("n_bics must be non-negative")
    if n_bics == 0:
        return Regime.FULL_DECAY
    if n_bics == 1:
        return Regime.SINGLE_BIC_PLATEAU
    return Regime.DEGENERATE_STEADY if degenerate else Regime.MULTI_BIC_OSCILLATION


def long_time_prediction(bics: Sequence[BoundState], psi0, *, tol: float = DEGENERACY_TOL) -> LongTimePrediction:
    """Bundle the appropriate predictor with its regime and beat periods."""
    if not bics:
        def zero(t):
            return np.zeros((np.size(t), 0)) if np.ndim(t) else np.zeros(0)
        return LongTimePrediction(Regime.FULL_DECAY, zero)
    groups = energy_groups(bics, tol)
    kind = classify_regime(len(bics), degenerate=len(groups) == 1)
    if len(groups) == 1:
        const = predict_multi(bics, psi0, 0.0, tol=tol)
        return LongTimePrediction(
            kind, lambda t: np.broadcast_to(const, np.shape(np.atleast_1d(t)) + const.shape).copy()
            if np.ndim(t) else const.copy()
        )
    energies = sorted(np.mean([bics[n].energy for n in g]) for g in groups)
    periods = tuple(
        2.0 * np.pi / abs(e2 - e1)
        for i, e1 in enumerate(energies) for e2 in energies[i + 1:]
    )
    bics = list(bics)
    return LongTimePrediction(kind, lambda t: predict_multi(bics, psi0, t, tol=tol), periods)


def beat_periods(bics: Sequence[BoundState]) -> dict[str, float]:
    """Beat periods of three energy-sorted bound states.

    ``T1`` pairs the outer states (1, 3). The intermediate period is reported
    for both pairings with the middle state, ``T2_12`` and ``T2_32``.
    """
    if len(bics) != 3:
        raise ValueError("beat periods are defined for three bound states")
    e1, e2, e3 = sorted(b.energy for b in bics)

    def period(x, y):
        gap = abs(x - y)
        return np.inf if gap == 0 else 2.0 * np.pi / gap

    return {"T1": period(e1, e3), "T2_12": period(e1, e2), "T2_32": period(e3, e2)}


def _common_grid(a: Trajectory, b: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if a.populations.shape[1] != b.populations.shape[1]:
        raise GridMismatchError("trajectories have different numbers of atoms")
    if a.times.size == b.times.size and np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        return a.times, a.populations, b.populations
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi <= lo:
        raise GridMismatchError("trajectories do not overlap in time")
    fine, coarse = (a, b) if a.times.size >= b.times.size else (b, a)
    grid = fine.times[(fine.times >= lo) & (fine.times <= hi)]
    interp = np.column_stack([
        np.interp(grid, coarse.times, coarse.populations[:, i])
        for i in range(coarse.populations.shape[1])
    ])
    keep = fine.populations[(fine.times >= lo) & (fine.times <= hi)]
    return (grid, keep, interp) if fine is a else (grid, interp, keep)


def compare_trajectories(
    exact: Trajectory,
    ww: Trajectory,
    prediction: LongTimePrediction | None = None,
    window: tuple[float, float] | None = None,
) -> ComparisonMetrics:
    """Deviation metrics between two population trajectories.

    Both are restricted to ``window`` (inclusive). When the grids differ the
    coarser trajectory is interpolated linearly onto the finer one.

    Raises
    ------
    GridMismatchError
        Different atom counts, or no overlapping time range.
    """
    if window is not None:
        exact = exact.restrict(*window)
        ww = ww.restrict(*window)
    if exact.times.size == 0 or ww.times.size == 0:
        raise GridMismatchError("window leaves no samples")
    times, p, q = _common_grid(exact, ww)
    diff = np.abs(p - q)
    tail = times >= times[0] + 0.8 * (times[-1] - times[0])
    pred_dev = None
    if prediction is not None and p.shape[1]:
        pred = np.asarray(prediction.populations(times[tail]))
        if pred.size:
            pred_dev = np.max(np.abs(p[tail] - pred), axis=0)
    return ComparisonMetrics(
        max_abs_dev=diff.max(axis=0),
        rms_dev=np.sqrt(np.mean(diff ** 2, axis=0)),
        late_time_std=p[tail].std(axis=0),
        prediction_dev=pred_dev,
    )


def first_decade_window(times: np.ndarray, population: np.ndarray) -> tuple[float, float]:
    """Interval from the first sample until the population first falls below a tenth of it."""
    times = np.asarray(times, dtype=float)
    population = np.asarray(population, dtype=float)
    below = np.nonzero(population <= 0.1 * population[0])[0]
    end = times[below[0]] if below.size else times[-1]
    return float(times[0]), float(end)


def fit_exponential(times, population, window: tuple[float, float] | None = None,
                    *, poor_below: float = 0.99) -> ExponentialFit:
    """Least-squares line through ``log(population)`` versus ``t``.

    The fit is flagged ``poor`` when ``r^2 < poor_below``.

    Raises
    ------
    ValueError
        If any sample in the window is not strictly positive, or fewer than
        three samples remain.
    """
    times = np.asarray(times, dtype=float)
    population = np.asarray(population, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    keep = (times >= window[0]) & (times <= window[1])
    t, p = times[keep], population[keep]
    if t.size < 3:
        raise ValueError("need at least three samples in the fit window")
    if np.any(p <= 0):
        raise ValueError("populations must be strictly positive in the fit window")
    y = np.log(p)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return ExponentialFit(float(-slope), float(np.exp(intercept)), float(r2),
                          (float(window[0]), float(window[1])), bool(r2 < poor_below))


def dominant_frequency(times, signal, *, period_hint: float | None = None,
                       pad: int = 8) -> tuple[float, float]:
    """Angular frequency of the strongest Fourier component of ``signal``.

    The signal must be uniformly sampled. It is mean-subtracted and, given
    ``period_hint``, cut to the latest stretch spanning a whole number of hinted
    periods to reduce leakage. The transform is zero-padded by ``pad`` to
    locate the peak between bins; the returned bin width ``2 pi / T`` is that of
    the unpadded record.

    Returns
    -------
    omega, bin_width : float
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    dt = np.diff(times)
    if dt.size == 0 or np.ptp(dt) > 1e-9 * max(dt.mean(), 1.0):
        raise ValueError("signal must be uniformly sampled")
    step = dt.mean()
    if period_hint is not None and np.isfinite(period_hint):
        n_periods = int((times[-1] - times[0]) // period_hint)
        if n_periods >= 1:
            span = n_periods * period_hint
            keep = times >= times[-1] - span - 0.5 * step
            times, signal = times[keep], signal[keep]
    x = signal - signal.mean()
    n = x.size
    spec = np.abs(np.fft.rfft(x, n=pad * n))
    freqs = 2.0 * np.pi * np.fft.rfftfreq(pad * n, d=step)
    k = int(np.argmax(spec[1:]) + 1)
    return float(freqs[k]), float(2.0 * np.pi / (n * step))
