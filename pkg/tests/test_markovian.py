import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment

from gawq.kernels import BandEdgeError, KernelSpec, tail_averaged_integral
from gawq.markovian import (
    build_liouvillian,
    dark_mode_count,
    decay_matrix,
    effective_hamiltonian,
    gap_scan,
    lowering_operators,
    spectrum,
    unvec,
    vec,
)
from gawq.model import GiantAtom, Setup, WaveguideParams, scenario

G2 = 0.01  # g^2 at g = 0.1


def master_rhs(setup, a, rho):
    """Right-hand side of the master equation applied directly to rho."""
    sm = [op.toarray() for op in lowering_operators(setup.n_atoms)]
    sp = [s.conj().T for s in sm]
    h = sum(w * p @ m for w, p, m in zip(setup.omegas, sp, sm))
    out = -1j * (h @ rho - rho @ h)
    k = setup.n_atoms
    for i in range(k):
        for j in range(k):
            out += a[i, j] * (sm[j] @ rho @ sp[i] - sp[i] @ sm[j] @ rho)
            out += np.conj(a[i, j]) * (sm[i] @ rho @ sp[j] - rho @ sp[j] @ sm[i])
    return out


def same_multiset(x, y, tol):
    cost = np.abs(x[:, None] - y[None, :])
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols].max() <= tol


def random_density(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def test_diagonal_entries():
    assert np.allclose(np.diag(decay_matrix(scenario("a")).a), 0.0, atol=1e-17)
    assert np.allclose(np.diag(decay_matrix(scenario("b")).a), 2 * G2, atol=1e-17)


def test_scenario_a_pair_12():
    assert decay_matrix(scenario("a")).a[0, 1] == pytest.approx(1j * G2, abs=1e-17)


def test_pair_by_quadrature():
    # same coefficient from the tail-averaged time integrals
    setup = scenario("a")
    a1, a2 = setup.atoms[:2]
    total = sum(tail_averaged_integral(KernelSpec(abs(p - q)), 1e4) for p in a1.sites for q in a2.sites)
    assert abs(G2 * total - decay_matrix(setup).a[0, 1]) < 1e-5


@pytest.mark.parametrize("label", "abcd")
def test_resonant_entries_on_gaussian_integers(label):
    a = decay_matrix(scenario(label)).a
    scaled = a * 2.0 / G2
    assert np.allclose(scaled, np.round(scaled.real) + 1j * np.round(scaled.imag), atol=1e-12)


@pytest.mark.parametrize("label", "abcd")
@pytest.mark.parametrize("omega", [0.0, 0.37, -1.2])
def test_gamma_psd(label, omega):
    dm = decay_matrix(scenario(label, omega))
    assert dm.decay_rates().min() >= -1e-10
    assert np.allclose(dm.gamma, dm.gamma.conj().T)


def test_per_row_detuning():
    wg = WaveguideParams(n_sites=40)
    setup = Setup(wg, (GiantAtom(10, 16, 0.0), GiantAtom(12, 18, 0.5)))
    dm = decay_matrix(setup)
    assert dm.k_wavenumber[0] == pytest.approx(np.pi / 2)
    assert dm.k_wavenumber[1] == pytest.approx(np.arccos(-0.25))
    assert abs(dm.a[0, 1] - dm.a[1, 0]) > 1e-4


def test_band_edge_error():
    with pytest.raises(BandEdgeError):
        decay_matrix(scenario("a", omega=2.0))


def test_vectorisation_convention():
    rng = np.random.default_rng(1)
    x, y, rho = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3))
    assert np.allclose(vec(x @ rho @ y), np.kron(y.T, x) @ vec(rho))
    assert np.array_equal(unvec(vec(rho)), rho)


@pytest.mark.parametrize("label,omega", [("a", 0.0), ("b", 0.3), ("c", -0.7), ("d", 0.5)])
def test_liouvillian_matches_direct_rhs(label, omega):
    setup = scenario(label, omega)
    dm = decay_matrix(setup)
    lv = build_liouvillian(setup, dm)
    assert lv.shape == (64, 64)
    rng = np.random.default_rng(3)
    for _ in range(3):
        rho = random_density(8, rng)
        assert np.allclose(unvec(lv @ vec(rho)), master_rhs(setup, dm.a, rho), atol=1e-14)


@pytest.mark.parametrize("label", "abcd")
def test_trace_preservation(label):
    setup = scenario(label, 0.2)
    lv = build_liouvillian(setup)
    assert np.max(np.abs(vec(np.eye(8)).conj() @ lv)) <= 1e-12


def test_sparse_matches_dense():
    setup = scenario("c", 0.1)
    assert np.allclose(build_liouvillian(setup, sparse=True).toarray(), build_liouvillian(setup))


def test_closed_system_limit():
    setup = scenario("b", 0.4, 0.0)
    ev = spectrum(build_liouvillian(setup)).eigenvalues
    assert np.all(np.abs(ev.real) < 1e-12)
    energies = np.array([0.4 * bin(s).count("1") for s in range(8)])
    expected = (-1j * (energies[:, None] - energies[None, :])).ravel()
    assert same_multiset(ev, expected, 1e-12)


@pytest.mark.parametrize("label", "abcd")
@pytest.mark.parametrize("omega", [0.0, 0.45])
def test_dissipative_and_conjugate_spectrum(label, omega):
    lv = build_liouvillian(scenario(label, omega))
    ev = spectrum(lv).eigenvalues
    assert ev.real.max() <= 1e-10
    assert np.min(np.abs(ev)) <= 1e-8
    # rho -> rho^dagger: conj(L) = P L P with P the transpose permutation of vec
    idx = np.arange(64).reshape(8, 8)
    perm = idx.T.reshape(-1)
    assert np.max(np.abs(lv.conj() - lv[np.ix_(perm, perm)])) <= 1e-15
    # defective eigenvalues turn rounding into ~1e-10 shifts, hence the looser bound
    assert same_multiset(ev, ev.conj(), 1e-9)


def test_hermiticity_and_trace_along_evolution():
    rng = np.random.default_rng(11)
    lv = build_liouvillian(scenario("d", 0.2))
    rho0 = random_density(8, rng)
    for t in (0.5, 10.0, 100.0):
        rho = unvec(expm(lv * t) @ vec(rho0))
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
        assert abs(np.trace(rho) - 1) < 1e-10


def test_spectrum_ordering():
    spec = spectrum(build_liouvillian(scenario("d", 0.3)))
    ev = spec.eigenvalues
    key = np.abs(ev.real)
    assert np.all(np.diff(key) >= -1e-15)
    assert spec.gap == pytest.approx(abs(ev[1].real))


def test_gap_examples():
    assert spectrum(build_liouvillian(scenario("a"))).gap <= 1e-6
    assert spectrum(build_liouvillian(scenario("d"))).gap == pytest.approx(0.01, rel=1e-8)
    free = spectrum(build_liouvillian(scenario("c", 0.0, 0.0)))
    assert free.gap == 0.0 and free.zero_multiplicity >= 4


def test_gap_scan_small_grids():
    assert np.array_equal(gap_scan("a", [0.0], g=0.0), np.array([[0.0, 0.0]]))
    table = gap_scan("a", np.linspace(-1, 1, 11))
    assert table.shape == (11, 2)
    assert table[5, 1] <= 1e-6


def test_gap_scan_accepts_setup():
    setup = scenario("d", n_sites=101)
    a = gap_scan(setup, [0.0, 0.3])
    b = gap_scan("d", [0.0, 0.3], n_sites=101)
    assert np.array_equal(a, b)


def test_scenario_d_gap_open_near_centre_closes_where_atoms_decouple():
    # open near resonance; closes where exp(8 i K) = -1, i.e. Omega = +-2 cos(3 pi / 8)
    inner = gap_scan("d", np.linspace(-0.55, 0.55, 23))
    assert inner[:, 1].min() >= 1e-3
    w = 2 * np.cos(3 * np.pi / 8)
    closed = gap_scan("d", [-w, w])
    assert np.all(closed[:, 1] <= 1e-10)


def test_dark_mode_count_reference():
    assert [dark_mode_count(scenario(lab)) for lab in "abcd"] == [3, 2, 1, 0]


def test_gamma_kernel_can_exceed_dark_modes():
    # in (d) coherent exchange mixes the non-radiating combination into radiating ones
    kernel = [int(np.sum(decay_matrix(scenario(lab)).decay_rates() < 1e-10)) for lab in "abcd"]
    assert kernel == [3, 2, 1, 1]


def test_gamma_rates_differ_from_effective_decay_rates():
    # same dark space in (c), but the radiating rates are reshuffled by the exchange terms
    setup = scenario("c")
    rates = np.sort(-2 * np.linalg.eigvals(effective_hamiltonian(setup)).imag)
    assert np.allclose(rates, [0.0, 0.06, 0.06], atol=1e-12)
    assert np.allclose(decay_matrix(setup).decay_rates(), [0.0, 0.04, 0.08], atol=1e-12)


def test_effective_hamiltonian():
    setup = scenario("b", 0.2)
    heff = effective_hamiltonian(setup)
    assert np.allclose(heff, np.diag(setup.omegas) - 1j * decay_matrix(setup).a)


def test_six_atom_scaling():
    wg = WaveguideParams(n_sites=60)
    atoms = tuple(GiantAtom(5 + i, 13 + i, 0.0, 0.1) for i in range(6))
    lv = build_liouvillian(Setup(wg, atoms), sparse=True)
    assert lv.shape == (4096, 4096)
    assert np.max(np.abs(vec(np.eye(64)).conj() @ lv)) <= 1e-12
