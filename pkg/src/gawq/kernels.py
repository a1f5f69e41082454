"""
Bessel functions and the oscillatory kernel integrals of the cosine band.

The central object is

    I_d(t) = int_0^t exp(-i delta tau) i^d J_d(2 xi tau) dtau,

whose ``t -> inf`` limit is ``exp(i K d) / sqrt(4 xi^2 - delta^2)`` with
``K = pi - arccos(-delta / (2 xi))`` inside the band.  The integrand only
decays like ``tau**-1/2``, so the limit converges conditionally; use
:func:`tail_averaged_integral` when comparing finite-time values with
:func:`closed_form`.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "BandEdgeError",
    "KernelSpec",
    "bessel_j",
    "bessel_j_orders",
    "cumulative_kernel",
    "kernel_integral",
    "tail_averaged_integral",
    "closed_form",
    "clear_cache",
]


class BandEdgeError(ValueError):
    """Detuning at or beyond the band edge, where the closed form breaks down."""


@dataclass(frozen=True)
class KernelSpec:
    """Order ``d = |p - q|``, detuning ``delta = omega_c - Omega`` and hopping ``xi``."""

    order: int
    detuning: float = 0.0
    xi: float = 1.0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"kernel order must be non-negative, got {self.order}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order
# ---------------------------------------------------------------------------

_ASYMPTOTIC_MIN_X = 25.0
_RESCALE = 1e200
_SERIES_MAX_X = 1e-5


def _miller(nmax: int, x: np.ndarray) -> np.ndarray:
    """Downward recurrence normalised with J_0 + 2 sum_k J_2k = 1 (x > 0)."""
    top = max(nmax, float(x.max()))
    start = 2 * ((int(top) + 20 + int(math.sqrt(60.0 * (top + 1.0)))) // 2)
    out = np.zeros((nmax + 1, x.size))
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    two_over_x = 2.0 / x
    for k in range(start, 0, -1):
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalised J_{k-1}
        if (k - 1) <= nmax:
            out[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        big = np.abs(j_cur) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            j_cur *= scale
            j_next *= scale
            norm *= scale
            out *= scale
    norm += j_cur
    return out / norm


def _hankel_j01(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """J_0 and J_1 from the Hankel asymptotic expansion, valid for x >= 25."""
    result = []
    cx, sx = np.cos(x), np.sin(x)
    inv8x = 1.0 / (8.0 * x)
    for nu in (0, 1):
        mu = 4.0 * nu * nu
        p = np.ones_like(x)
        q = np.zeros_like(x)
        term = np.ones_like(x)
        prev = np.full_like(x, np.inf)
        active = np.ones(x.shape, dtype=bool)
        for k in range(1, 60):
            term = term * (mu - (2 * k - 1) ** 2) * inv8x / k
            mag = np.abs(term)
            active &= (mag < prev) & (mag > 1e-18)
            if not active.any():
                break
            t = np.where(active, term, 0.0)
            sign = -1.0 if (k // 2) % 2 else 1.0
            if k % 2:
                q += sign * t
            else:
                p += sign * t
            prev = mag
        # chi = x - (nu/2 + 1/4) pi, expanded to keep the large-x reduction exact
        phase = (nu / 2.0 + 0.25) * math.pi
        cos_chi = cx * math.cos(phase) + sx * math.sin(phase)
        sin_chi = sx * math.cos(phase) - cx * math.sin(phase)
        result.append(np.sqrt(2.0 / (math.pi * x)) * (p * cos_chi - q * sin_chi))
    return result[0], result[1]


def bessel_j_orders(nmax: int, x) -> np.ndarray:
    """J_0(x) ... J_nmax(x) stacked along the first axis.

    Small arguments use Miller's normalised downward recurrence; arguments
    well above the highest order start from the Hankel expansion of J_0, J_1
    and recur upward, which is stable for ``n < x``. Negative ``x`` is
    handled through ``J_n(-x) = (-1)^n J_n(x)``.
    """
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    flat = x.ravel()
    sign = np.where(flat < 0, -1.0, 1.0)
    ax = np.abs(flat)
    out = np.zeros((nmax + 1, flat.size))

    zero = ax == 0.0
    out[0, zero] = 1.0

    asym = ax >= max(_ASYMPTOTIC_MIN_X, nmax + 20.0)
    # two-term series; the recurrence would overflow for tiny x
    tiny = ~zero & (ax < _SERIES_MAX_X)
    if tiny.any():
        half = 0.5 * ax[tiny]
        for n in range(nmax + 1):
            lead = half ** n / float(math.factorial(n))
            out[n, tiny] = lead * (1.0 - half ** 2 / (n + 1.0))
    small = ~zero & ~asym & ~tiny
    if small.any():
        out[:, small] = _miller(nmax, ax[small])
    if asym.any():
        xa = ax[asym]
        j0, j1 = _hankel_j01(xa)
        cols = np.empty((nmax + 1, xa.size))
        cols[0] = j0
        if nmax >= 1:
            cols[1] = j1
        for n in range(1, nmax):
            cols[n + 1] = (2.0 * n / xa) * cols[n] - cols[n - 1]
        out[:, asym] = cols

    parity = np.where(np.arange(nmax + 1)[:, None] % 2 == 1, sign[None, :], 1.0)
    return (out * parity).reshape((nmax + 1,) + shape)


def bessel_j(order: int, x):
    """Bessel function of the first kind J_order(x) for integer order.

    Negative orders follow ``J_{-n} = (-1)^n J_n``.
    """
    order = int(order)
    if order < 0:
        return (-1) ** (-order) * bessel_j(-order, x)
    values = bessel_j_orders(order, x)[order]
    return float(values) if np.ndim(values) == 0 else values


# ---------------------------------------------------------------------------
# Kernel integrals
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_CACHE_SIZE = 64
_CACHE_LOCK = threading.Lock()


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def _panel_width(detuning: float, xi: float) -> float:
    # integrand phase advances by at most pi per panel
    return math.pi / (2.0 * xi + abs(detuning))


def _cumulative(nmax: int, detuning: float, xi: float, times: np.ndarray) -> np.ndarray:
    """Cumulative integrals for orders 0..nmax at sorted ``times`` (>= 0)."""
    h = _panel_width(detuning, xi)
    edges = np.concatenate([[0.0], times])
    steps = np.diff(edges)
    counts = np.maximum(np.ceil(steps / h).astype(int), 1)
    counts[steps == 0] = 0
    total = int(counts.sum())
    result = np.zeros((nmax + 1, times.size), dtype=complex)
    if total == 0:
        return result
    owner = np.repeat(np.arange(times.size), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(total) - first
    width = steps[owner] / counts[owner]
    left = edges[owner] + local * width

    tau = left[:, None] + 0.5 * width[:, None] * (_GL_NODES[None, :] + 1.0)
    weights = 0.5 * width[:, None] * _GL_WEIGHTS[None, :]
    jn = bessel_j_orders(nmax, 2.0 * xi * tau)            # (nmax+1, P, 16)
    phase = np.exp(-1j * detuning * tau) * weights        # (P, 16)
    panels = np.einsum("npk,pk->np", jn, phase)           # (nmax+1, P)
    per_interval = np.zeros((nmax + 1, times.size), dtype=complex)
    np.add.at(per_interval.T, owner, panels.T)
    result = np.cumsum(per_interval, axis=1)
    result *= (1j ** np.arange(nmax + 1))[:, None]
    return result


def cumulative_kernel(orders: Sequence[int], detuning: float, xi: float, times) -> np.ndarray:
    """I_d(t) for every ``d`` in ``orders`` and every ``t`` in ``times``.

    ``times`` must be non-negative and non-decreasing. Returns an array of
    shape ``(len(orders), len(times))``. Results are memoised per
    ``(detuning, xi, times)`` because many atom pairs share the same order.
    """
    times = np.ascontiguousarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-negative and non-decreasing")
    orders = [int(d) for d in orders]
    if any(d < 0 for d in orders):
        raise ValueError("orders must be non-negative")
    nmax = max(orders) if orders else 0
    key = (float(detuning), float(xi), times.size, hash(times.tobytes()))
    with _CACHE_LOCK:
        cached = _CACHE.get(key)
        if cached is not None and cached.shape[0] > nmax:
            _CACHE.move_to_end(key)
            return cached[orders]
    table = _cumulative(nmax, float(detuning), float(xi), times)
    with _CACHE_LOCK:
        _CACHE[key] = table
        _CACHE.move_to_end(key)
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return table[orders]


def kernel_integral(spec: KernelSpec, t: float, *, tail_average: bool = False) -> complex:
    """I_d(t) for a single order and time.

    With ``tail_average=True`` the value is smoothed over the trailing
    oscillation periods (see :func:`tail_averaged_integral`).
    """
    if tail_average:
        return tail_averaged_integral(spec, t)
    if t < 0:
        raise ValueError("t must be non-negative")
    return complex(cumulative_kernel([spec.order], spec.detuning, spec.xi, [float(t)])[0, 0])


def tail_averaged_integral(spec: KernelSpec, t: float, n_nodes: int = 48) -> complex:
    """Nested box average of I_d over the two tail periods ending at ``t``.

    The tail of I_d(t) oscillates at the two frequencies ``2 xi -/+ |delta|``.
    Averaging over one period of each removes both leading oscillations, so
    the result approaches the ``t -> inf`` limit much faster than I_d(t).
    """
    xi, delta = spec.xi, abs(spec.detuning)
    if delta >= 2.0 * xi:
        raise BandEdgeError("tail averaging needs |delta| < 2 xi")
    p1 = 2.0 * math.pi / (2.0 * xi - delta)
    p2 = 2.0 * math.pi / (2.0 * xi + delta)
    if t < p1 + p2:
        raise ValueError(f"t={t} shorter than the averaging window {p1 + p2:.3g}")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    # outer average over s in [t - p2, t], inner over u in [s - p1, s]
    s = t - p2 + 0.5 * p2 * (x + 1.0)
    u = s[:, None] - p1 + 0.5 * p1 * (x[None, :] + 1.0)
    flat = u.ravel()
    order = np.argsort(flat)
    values = np.empty(flat.size, dtype=complex)
    values[order] = cumulative_kernel([spec.order], spec.detuning, xi, flat[order])[0]
    inner = values.reshape(u.shape) @ (0.5 * w)
    return complex(inner @ (0.5 * w))


def closed_form(spec: KernelSpec) -> complex:
    """Limit of I_d(t) as t -> inf for an in-band detuning.

    Returns ``exp(i K d) / sqrt(4 xi^2 - delta^2)`` with
    ``K = pi - arccos(-delta / (2 xi))``; at ``delta = 0`` this is
    ``i^d / (2 xi)``.
    """
    xi, delta = spec.xi, spec.detuning
    if abs(delta) >= 2.0 * xi:
        raise BandEdgeError(
            f"|delta|={abs(delta)} is not inside the band (need < 2 xi = {2 * xi})"
        )
    k = math.pi - math.acos(-delta / (2.0 * xi))
    if delta == 0.0:
        # exact powers of i keep resonant coefficients on their lattice
        return (1j ** (spec.order % 4)) / (2.0 * xi)
    return complex(np.exp(1j * k * spec.order) / math.sqrt(4.0 * xi * xi - delta * delta))
