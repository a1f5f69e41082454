"""
Domain types for giant atoms attached to a coupled-resonator waveguide.

Units
-----
All energies are measured in units of the hopping ``xi`` and all times in
units of ``1/xi``.  Site indices are 1-based, ``1 <= n < m <= n_sites``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

__all__ = [
    "Boundary",
    "ConfigError",
    "WaveguideParams",
    "GiantAtom",
    "Setup",
    "NamedScenario",
    "SCENARIO_SITES",
    "validate",
    "scenario",
    "named_scenario",
    "setup_from_dict",
    "setup_to_dict",
]


class ConfigError(ValueError):
    """Raised when a geometry or parameter set violates a model invariant."""


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class WaveguideParams:
    """Cosine-band coupled-resonator waveguide.

    Parameters
    ----------
    omega_c : float
        Bare resonator frequency (band centre).
    xi : float
        Nearest-neighbour hopping, the energy unit. Must be positive.
    n_sites : int
        Number of resonators kept in the truncated lattice.
    boundary : Boundary
        ``open`` (hard walls) or ``periodic`` (ring).
    """

    omega_c: float = 0.0
    xi: float = 1.0
    n_sites: int = 501
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    def dispersion(self, k):
        """omega(k) = omega_c - 2 xi cos k."""
        return self.omega_c - 2.0 * self.xi * np.cos(k)

    @property
    def band(self) -> tuple[float, float]:
        return (self.omega_c - 2.0 * self.xi, self.omega_c + 2.0 * self.xi)

    def in_band(self, energy: float, margin: float = 0.0) -> bool:
        return abs(energy - self.omega_c) < 2.0 * self.xi - margin


@dataclass(frozen=True)
class GiantAtom:
    """Two-level emitter coupled at sites ``n`` and ``m`` with strength ``g``."""

    n: int
    m: int
    omega: float = 0.0
    g: float = 0.1

    @property
    def size(self) -> int:
        return self.m - self.n

    @property
    def sites(self) -> tuple[int, int]:
        return (self.n, self.m)

    def shifted(self, offset: int) -> "GiantAtom":
        return replace(self, n=self.n + offset, m=self.m + offset)


@dataclass(frozen=True)
class Setup:
    waveguide: WaveguideParams
    atoms: tuple[GiantAtom, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([a.omega for a in self.atoms], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([a.g for a in self.atoms], dtype=float)

    @property
    def span(self) -> tuple[int, int]:
        """Leftmost and rightmost coupling site."""
        return (min(a.n for a in self.atoms), max(a.m for a in self.atoms))

    @property
    def is_braided(self) -> bool:
        """True for the interleaved geometry n_1 < n_2 < ... < n_K < m_1."""
        ns = [a.n for a in self.atoms]
        return all(x < y for x, y in zip(ns, ns[1:])) and ns[-1] < self.atoms[0].m

    def with_waveguide(self, **changes) -> "Setup":
        return replace(self, waveguide=replace(self.waveguide, **changes))

    def with_atoms(self, **changes) -> "Setup":
        return replace(self, atoms=tuple(replace(a, **changes) for a in self.atoms))


def validate(setup: Setup, require_braided: bool = False) -> Setup:
    """Check every invariant of ``setup`` and return it unchanged.

    Raises
    ------
    ConfigError
        Non-positive ``xi``, fewer than three sites, an atom with ``n >= m``,
        negative coupling, a coupling site outside ``[1, n_sites]``, or (when
        ``require_braided``) a non-interleaved geometry.
    """
    wg = setup.waveguide
    if not wg.xi > 0:
        raise ConfigError(f"hopping xi must be positive, got {wg.xi}")
    if int(wg.n_sites) != wg.n_sites or wg.n_sites < 3:
        raise ConfigError(f"n_sites must be an integer >= 3, got {wg.n_sites}")
    if not setup.atoms:
        raise ConfigError("setup needs at least one atom")
    for i, atom in enumerate(setup.atoms, start=1):
        if atom.n >= atom.m:
            raise ConfigError(f"atom {i}: need n < m, got n={atom.n}, m={atom.m}")
        if atom.g < 0:
            raise ConfigError(f"atom {i}: coupling must be non-negative, got {atom.g}")
        for site in atom.sites:
            if not 1 <= site <= wg.n_sites:
                raise ConfigError(
                    f"atom {i}: site {site} out of range [1, {wg.n_sites}]"
                )
    if require_braided and not setup.is_braided:
        raise ConfigError("geometry is not braided (need n_1 < ... < n_K < m_1)")
    return setup


# Coupling sites (n_i, m_i) of the four reference geometries.
SCENARIO_SITES: dict[str, tuple[tuple[int, int], ...]] = {
    "a": ((1, 7), (2, 8), (4, 10)),
    "b": ((1, 9), (5, 13), (7, 15)),
    "c": ((1, 9), (5, 13), (6, 14)),
    "d": ((1, 9), (2, 10), (3, 11)),
}


@dataclass(frozen=True)
class NamedScenario:
    label: str
    setup: Setup
    offset: int = 0

    @property
    def table_sites(self) -> tuple[tuple[int, int], ...]:
        """Coupling sites with the centring offset removed."""
        return tuple((a.n - self.offset, a.m - self.offset) for a in self.setup.atoms)


def centering_offset(sites: Sequence[tuple[int, int]], n_sites: int) -> int:
    """Uniform shift that puts the atomic span in the middle of the lattice."""
    lo = min(n for n, _ in sites)
    hi = max(m for _, m in sites)
    left_gap = (n_sites - (hi - lo + 1)) // 2
    return max(0, left_gap + 1 - lo)


def named_scenario(
    label: str,
    omega: float = 0.0,
    g: float = 0.1,
    n_sites: int = 501,
    *,
    center: bool = True,
    omega_c: float = 0.0,
    xi: float = 1.0,
    boundary: Boundary | str = Boundary.OPEN,
) -> NamedScenario:
    try:
        sites = SCENARIO_SITES[label]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {label!r}; expected one of {sorted(SCENARIO_SITES)}"
        ) from None
    offset = centering_offset(sites, n_sites) if center else 0
    atoms = tuple(GiantAtom(n + offset, m + offset, omega, g) for n, m in sites)
    wg = WaveguideParams(omega_c=omega_c, xi=xi, n_sites=n_sites, boundary=boundary)
    return NamedScenario(label, validate(Setup(wg, atoms)), offset)


def scenario(label: str, omega: float = 0.0, g: float = 0.1, n_sites: int = 501,
             **kwargs) -> Setup:
    """Build one of the reference geometries ``a``-``d``.

    All atoms share frequency ``omega`` and coupling ``g``; the band centre is
    ``omega_c = 0`` unless overridden. By default the atoms are shifted to the
    middle of the lattice, which leaves every inter-site distance unchanged.
    """
    return named_scenario(label, omega, g, n_sites, **kwargs).setup


def setup_from_dict(data: dict) -> Setup:
    """Parse the flat JSON geometry document used by the command-line tool."""
    try:
        wg = WaveguideParams(
            omega_c=float(data.get("omega_c", 0.0)),
            xi=float(data.get("xi", 1.0)),
            n_sites=int(data.get("n_sites", 501)),
            boundary=data.get("boundary", "open"),
        )
        atoms = tuple(
            GiantAtom(int(a["n"]), int(a["m"]), float(a.get("omega", 0.0)),
                      float(a.get("g", 0.1)))
            for a in data["atoms"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed geometry document: {exc}") from exc
    return validate(Setup(wg, atoms))


def setup_to_dict(setup: Setup) -> dict:
    wg = setup.waveguide
    return {
        "omega_c": wg.omega_c,
        "xi": wg.xi,
        "n_sites": wg.n_sites,
        "boundary": wg.boundary.value,
        "atoms": [{"n": a.n, "m": a.m, "omega": a.omega, "g": a.g} for a in setup.atoms],
    }
