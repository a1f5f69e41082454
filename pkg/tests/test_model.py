import json

import numpy as np
import pytest

from gawq.model import (
    SCENARIO_SITES,
    Boundary,
    ConfigError,
    GiantAtom,
    Setup,
    WaveguideParams,
    centering_offset,
    named_scenario,
    scenario,
    setup_from_dict,
    setup_to_dict,
    validate,
)


@pytest.mark.parametrize("label", "abcd")
def test_scenarios_validate(label):
    setup = scenario(label)
    assert validate(setup) is setup
    assert setup.n_atoms == 3


def test_scenario_b_fields():
    named = named_scenario("b", 0.0, 0.1, 501)
    assert named.table_sites == ((1, 9), (5, 13), (7, 15))
    assert np.all(named.setup.omegas == 0.0)
    assert np.all(named.setup.couplings == 0.1)
    assert named.setup.waveguide.omega_c == 0.0


@pytest.mark.parametrize("label", "abcd")
def test_table_sites_match_reference(label):
    assert named_scenario(label).table_sites == SCENARIO_SITES[label]


def test_atom_sizes():
    assert [a.size for a in scenario("a").atoms] == [6, 6, 6]
    for label in "bcd":
        assert [a.size for a in scenario(label).atoms] == [8, 8, 8]


def test_zero_coupling_and_detuned():
    assert np.all(scenario("a", 0.0, 0.0).couplings == 0.0)
    d = scenario("d", 0.5, 0.1)
    assert np.all(d.omegas == 0.5)


def test_centering_keeps_distances():
    raw = scenario("c", center=False)
    centered = scenario("c")
    raw_d = [abs(p - q) for a in raw.atoms for b in raw.atoms for p in a.sites for q in b.sites]
    cen_d = [abs(p - q) for a in centered.atoms for b in centered.atoms for p in a.sites for q in b.sites]
    assert raw_d == cen_d
    lo, hi = centered.span
    assert abs((lo - 1) - (501 - hi)) <= 1


def test_centering_offset_small_lattice():
    assert centering_offset(((1, 3),), 3) == 0
    assert centering_offset(((1, 3),), 7) == 2


def test_unknown_label():
    with pytest.raises(ConfigError):
        scenario("e")


def test_degenerate_atom_rejected():
    setup = Setup(WaveguideParams(), (GiantAtom(5, 5),))
    with pytest.raises(ConfigError, match="n < m"):
        validate(setup)


def test_site_out_of_range():
    setup = Setup(WaveguideParams(n_sites=501), (GiantAtom(1, 600),))
    with pytest.raises(ConfigError, match="out of range"):
        validate(setup)


@pytest.mark.parametrize("xi", [0.0, -1.0])
def test_nonpositive_xi(xi):
    with pytest.raises(ConfigError, match="xi"):
        validate(Setup(WaveguideParams(xi=xi), (GiantAtom(1, 3),)))


def test_negative_coupling_and_small_lattice():
    with pytest.raises(ConfigError):
        validate(Setup(WaveguideParams(), (GiantAtom(1, 3, g=-0.1),)))
    with pytest.raises(ConfigError):
        validate(Setup(WaveguideParams(n_sites=2), (GiantAtom(1, 2),)))


def test_braided_flag():
    assert scenario("a").is_braided
    assert scenario("d").is_braided
    # (c): n_3 = 6 < m_1 = 9 is interleaved, a non-braided pair is not
    sep = Setup(WaveguideParams(n_sites=30), (GiantAtom(1, 3), GiantAtom(5, 8)))
    assert not sep.is_braided
    validate(sep)
    with pytest.raises(ConfigError, match="braided"):
        validate(sep, require_braided=True)


def test_dispersion_range():
    wg = WaveguideParams(omega_c=0.3, xi=0.7)
    k = np.linspace(-np.pi, np.pi, 1001, endpoint=False)
    w = wg.dispersion(k)
    lo, hi = wg.band
    assert w.min() >= lo - 1e-15 and w.max() <= hi + 1e-15
    assert wg.dispersion(0.0) == pytest.approx(0.3 - 1.4)
    assert wg.in_band(0.3) and not wg.in_band(hi)


def test_boundary_coercion():
    assert WaveguideParams(boundary="periodic").boundary is Boundary.PERIODIC
    with pytest.raises(ValueError):
        WaveguideParams(boundary="mobius")


def test_dict_round_trip():
    setup = scenario("b", 0.2, 0.05, 101)
    doc = json.loads(json.dumps(setup_to_dict(setup)))
    assert setup_from_dict(doc) == setup


def test_malformed_document():
    with pytest.raises(ConfigError):
        setup_from_dict({"atoms": [{"n": 1}]})
    with pytest.raises(ConfigError):
        setup_from_dict({"n_sites": 10, "atoms": [{"n": 4, "m": 2}]})


def test_immutability():
    atom = GiantAtom(1, 3)
    with pytest.raises(AttributeError):
        atom.n = 2
    shifted = scenario("a").with_atoms(omega=0.4)
    assert np.all(shifted.omegas == 0.4)
