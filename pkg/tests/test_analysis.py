import numpy as np
import pytest

from gawq.analysis import (
    GridMismatchError,
    NonOrthogonalError,
    Regime,
    Trajectory,
    beat_periods,
    classify_regime,
    compare_trajectories,
    degenerate_expansion,
    dominant_frequency,
    energy_groups,
    first_decade_window,
    fit_exponential,
    long_time_prediction,
    predict_degenerate,
    predict_multi,
)
from gawq.lattice import (
    BoundState,
    SingleExcitationState,
    SpectralPropagator,
    atomic_excitation,
    atomic_populations,
    build_hamiltonian,
    find_bound_states,
    light_cone_horizon,
)
from gawq.model import scenario


def bics_for(label, n_sites=501):
    setup = scenario(label, n_sites=n_sites)
    ham = build_hamiltonian(setup)
    return setup, ham, find_bound_states(ham, setup)


def synthetic_states(vectors, energies, n_atoms=3):
    return [BoundState(e, SingleExcitationState.from_vector(v, n_atoms), 1.0) for v, e in zip(vectors, energies)]


def random_orthonormal(dim, count, rng, real=False):
    x = rng.normal(size=(dim, count))
    if not real:
        x = x + 1j * rng.normal(size=(dim, count))
    q, _ = np.linalg.qr(x)
    return q.T


def test_classify_regime():
    assert classify_regime(3, False) is Regime.MULTI_BIC_OSCILLATION
    assert classify_regime(2, True) is Regime.DEGENERATE_STEADY
    assert classify_regime(1) is Regime.SINGLE_BIC_PLATEAU
    assert classify_regime(0) is Regime.FULL_DECAY
    assert classify_regime(0, True) is Regime.FULL_DECAY
    with pytest.raises(ValueError):
        classify_regime(-1)


def test_single_state_prediction_is_constant():
    setup, _, bics = bics_for("c")
    psi0 = atomic_excitation(setup, 2)
    pops = predict_multi(bics, psi0, np.linspace(0, 500, 7))
    b = bics[0]
    expected = np.abs(b.atomic_overlaps * np.vdot(b.vector.vector, psi0)) ** 2
    assert np.allclose(pops, expected[None, :], atol=1e-15)


def test_scenario_c_residuals():
    setup, _, bics = bics_for("c")
    pops = predict_multi(bics, atomic_excitation(setup, 2), 0.0)
    assert pops[2] <= 1e-3
    assert pops[0] > 0.01 and pops[1] > 0.01


def test_orthogonal_initial_state_gives_zero():
    setup, _, bics = bics_for("a")
    basis = np.array([b.vector.vector for b in bics]).T
    rng = np.random.default_rng(2)
    psi = rng.normal(size=basis.shape[0]) + 0j
    psi -= basis @ (basis.conj().T @ psi)
    psi /= np.linalg.norm(psi)
    assert np.allclose(predict_multi(bics, psi, np.linspace(0, 100, 5)), 0.0, atol=1e-25)
    _, _, deg = bics_for("b")
    basis = np.array([b.vector.vector for b in deg]).T
    psi = rng.normal(size=basis.shape[0]) + 0j
    psi -= basis @ (basis.conj().T @ psi)
    assert np.allclose(predict_degenerate(deg, psi), 0.0, atol=1e-25)


def test_atom1_oscillates_with_single_period_in_a():
    setup, _, bics = bics_for("a")
    assert abs(bics[1].atomic_overlaps[0]) < 1e-12
    period = beat_periods(bics)["T1"]
    psi0 = atomic_excitation(setup, 2)
    t = np.linspace(0, 300, 31)
    p = predict_multi(bics, psi0, t)[:, 0]
    q = predict_multi(bics, psi0, t + period)[:, 0]
    assert np.allclose(p, q, atol=1e-12)
    assert np.ptp(predict_multi(bics, psi0, np.linspace(0, period, 50))[:, 0]) > 0.05


def test_non_orthogonal_rejected():
    setup, _, bics = bics_for("a")
    bad = [bics[0], BoundState(bics[1].energy, bics[0].vector, 1.0)]
    with pytest.raises(NonOrthogonalError):
        predict_multi(bad, atomic_excitation(setup, 2), 0.0)
    with pytest.raises(ValueError):
        predict_multi([], atomic_excitation(setup, 2), 0.0)


def test_degenerate_basis_invariance():
    setup, _, bics = bics_for("b")
    psi0 = atomic_excitation(setup, 2)
    ref = predict_degenerate(bics, psi0)
    rng = np.random.default_rng(5)
    for _ in range(5):
        u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        mixed = np.array([b.vector.vector for b in bics]).T @ u
        rotated = synthetic_states(mixed.T, [bics[0].energy] * 2)
        assert np.allclose(predict_degenerate(rotated, psi0), ref, atol=1e-12)


def test_degenerate_requires_equal_energies():
    setup, _, bics = bics_for("a")
    with pytest.raises(ValueError, match="degenerate"):
        predict_degenerate(bics[:2], atomic_excitation(setup, 2))


def test_expansion_matches_projector_random_complex():
    rng = np.random.default_rng(9)
    for _ in range(20):
        vecs = random_orthonormal(12, 2, rng)
        states = synthetic_states(vecs, [0.3, 0.3])
        psi = rng.normal(size=12) + 1j * rng.normal(size=12)
        psi /= np.linalg.norm(psi)
        proj = predict_degenerate(states, psi)
        assert np.allclose(degenerate_expansion(states, psi), proj, atol=1e-12)


def test_unconjugated_cross_term_only_valid_for_real_data():
    rng = np.random.default_rng(4)
    vecs = random_orthonormal(10, 2, rng, real=True)
    psi = rng.normal(size=10)
    psi /= np.linalg.norm(psi)
    states = synthetic_states(vecs, [0.0, 0.0])
    assert np.allclose(degenerate_expansion(states, psi, conjugate=False),
                       predict_degenerate(states, psi), atol=1e-12)
    vecs = random_orthonormal(10, 2, rng)
    states = synthetic_states(vecs, [0.0, 0.0])
    psi = psi + 1j * rng.normal(size=10)
    psi /= np.linalg.norm(psi)
    assert not np.allclose(degenerate_expansion(states, psi, conjugate=False),
                           predict_degenerate(states, psi), atol=1e-6)


def test_energy_groups():
    states = synthetic_states(random_orthonormal(6, 3, np.random.default_rng(0)), [0.2, -0.1, 0.2 + 1e-10])
    assert energy_groups(states) == [[1], [0, 2]]


def test_long_time_prediction_kinds():
    expected = {"a": Regime.MULTI_BIC_OSCILLATION, "b": Regime.DEGENERATE_STEADY,
                "c": Regime.SINGLE_BIC_PLATEAU, "d": Regime.FULL_DECAY}
    for label, kind in expected.items():
        setup, _, bics = bics_for(label)
        pred = long_time_prediction(bics, atomic_excitation(setup, 2))
        assert pred.kind is kind
        assert pred.is_stationary == (kind is not Regime.MULTI_BIC_OSCILLATION)
        vals = np.asarray(pred.populations(np.linspace(0, 50, 4)))
        assert np.all(vals >= 0) and np.all(vals.sum(axis=-1) <= 1 + 1e-12)
    setup, _, bics = bics_for("a")
    assert len(long_time_prediction(bics, atomic_excitation(setup, 2)).periods) == 3


def test_beat_periods():
    setup, _, bics = bics_for("a")
    periods = beat_periods(bics)
    e = sorted(b.energy for b in bics)
    assert periods["T1"] == pytest.approx(2 * np.pi / (e[2] - e[0]))
    assert periods["T2_12"] == pytest.approx(2 * np.pi / (e[1] - e[0]))
    assert periods["T2_32"] == pytest.approx(2 * np.pi / (e[2] - e[1]))
    with pytest.raises(ValueError):
        beat_periods(bics[:2])


@pytest.mark.parametrize("label", "abc")
def test_prediction_tracks_exact_late_populations(label):
    setup, ham, bics = bics_for(label, 1001)
    psi0 = atomic_excitation(setup, 2)
    horizon = light_cone_horizon(setup)
    t = np.linspace(horizon / 2, horizon, 300)
    exact = atomic_populations(setup, psi0, t, SpectralPropagator(ham))
    pred = predict_multi(bics, psi0, t)
    assert np.max(pred - exact) <= 0.02


def test_compare_self_is_zero():
    t = np.linspace(0, 10, 101)
    traj = Trajectory(t, np.column_stack([np.sin(t) ** 2, np.cos(t) ** 2]))
    m = compare_trajectories(traj, traj)
    assert np.all(m.max_abs_dev == 0) and np.all(m.rms_dev == 0)
    flat = Trajectory(t, np.full((101, 2), 0.3))
    assert np.all(compare_trajectories(flat, flat).late_time_std < 1e-15)


def test_compare_interpolates_coarse_grid():
    fine_t = np.linspace(0, 10, 1001)
    coarse_t = np.linspace(0, 10, 11)
    a = Trajectory(fine_t, 0.1 * fine_t)
    b = Trajectory(coarse_t, 0.1 * coarse_t)
    m = compare_trajectories(a, b)
    assert m.max_abs_dev[0] < 1e-14
    m = compare_trajectories(b, a, window=(2.0, 8.0))
    assert m.max_abs_dev[0] < 1e-14


def test_compare_errors():
    t = np.linspace(0, 1, 5)
    with pytest.raises(GridMismatchError):
        compare_trajectories(Trajectory(t, np.zeros((5, 2))), Trajectory(t, np.zeros((5, 3))))
    with pytest.raises(GridMismatchError):
        compare_trajectories(Trajectory(t, np.zeros(5)), Trajectory(t + 5, np.zeros(5)))
    with pytest.raises(GridMismatchError):
        Trajectory(t, np.zeros(4))


def test_compare_with_prediction():
    setup, ham, bics = bics_for("b", 1001)
    psi0 = atomic_excitation(setup, 2)
    t = np.linspace(0, light_cone_horizon(setup), 500)
    exact = Trajectory(t, atomic_populations(setup, psi0, t, SpectralPropagator(ham)))
    m = compare_trajectories(exact, exact, long_time_prediction(bics, psi0))
    assert np.all(m.late_time_std <= 1e-3)
    assert np.all(m.prediction_dev <= 0.01)


def test_fit_exponential_exact():
    t = np.linspace(0, 50, 501)
    fit = fit_exponential(t, 0.8 * np.exp(-0.037 * t))
    assert fit.rate == pytest.approx(0.037, abs=1e-6)
    assert fit.amplitude == pytest.approx(0.8)
    assert fit.r_squared >= 0.999999 and not fit.poor


def test_fit_exponential_errors():
    t = np.linspace(0, 5, 6)
    with pytest.raises(ValueError):
        fit_exponential(t, np.array([1, 0.5, 0, 0.1, 0.1, 0.1]))
    with pytest.raises(ValueError):
        fit_exponential(t, np.ones(6), window=(0, 1))


def test_fit_flags_fractional_decay():
    setup, ham, _ = bics_for("c", 1001)
    t = np.linspace(0, light_cone_horizon(setup), 800)
    pops = atomic_populations(setup, atomic_excitation(setup, 2), t, SpectralPropagator(ham))
    assert fit_exponential(t, pops[:, 1]).poor


def test_first_decade_window():
    t = np.linspace(0, 100, 1001)
    lo, hi = first_decade_window(t, np.exp(-0.1 * t))
    assert lo == 0 and hi == pytest.approx(np.log(10) / 0.1, abs=0.1)
    assert first_decade_window(t, np.ones_like(t)) == (0.0, 100.0)


def test_dominant_frequency_synthetic():
    t = np.arange(0, 800, 0.5)
    omega = 0.0271
    sig = 0.3 + 0.1 * np.cos(omega * t + 0.4) + 0.02 * np.cos(0.11 * t)
    peak, width = dominant_frequency(t, sig, period_hint=2 * np.pi / omega)
    assert abs(peak - omega) <= width
    with pytest.raises(ValueError):
        dominant_frequency(np.array([0, 1, 3.0]), np.ones(3))
