import numpy as np
import pytest

from disfilter._linalg import psd_sqrt, spectral_radius
from disfilter.analysis import (
    StabilityCertificate,
    bias_propagation,
    build_stacked_system,
    contraction_certificate,
    eigen_range_report,
    error_recursion_step,
    pbh_detectability,
    pbh_stabilizability,
    stack_errors,
    unstack_errors,
)
from disfilter.filters import DiffusionKalmanFilter
from disfilter.model import NodeObservationModel, StateSpaceModel, make_tracking_model, simulate_trajectory

from oracles import detectable_by_observability, random_modal_system, stabilizable_by_controllability


def test_stack_and_unstack():
    E = stack_errors([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
    assert E.tolist() == [1, 2, 3, 4]
    assert stack_errors([np.array([5.0])]).tolist() == [5.0]
    x = np.arange(12.0)
    assert np.array_equal(stack_errors(unstack_errors(x, 3)), x)
    with pytest.raises(ValueError):
        stack_errors([np.ones(2), np.ones(3)])


def test_stacked_system_trivial():
    model = StateSpaceModel([[0.5, 1.0], [0.0, 0.9]], np.eye(2))
    om = NodeObservationModel([[1.0, 0.0]], [[1.0]])
    sys = build_stacked_system(np.ones((1, 1)), [np.zeros((2, 1))], [om], model)
    assert np.array_equal(sys.C_cal, np.eye(2)) and np.array_equal(sys.F_cal, model.A)


def test_stacked_system_two_scalar_nodes():
    model = StateSpaceModel([[2.0]], [[1.0]])
    oms = [NodeObservationModel([[1.0]], [[1.0]]), NodeObservationModel([[3.0]], [[1.0]])]
    C = np.array([[0.25, 0.75], [0.5, 0.5]])
    sys = build_stacked_system(C, [np.array([[0.5]]), np.array([[0.1]])], oms, model)
    assert np.allclose(sys.F_cal, np.diag([(1 - 0.5) * 2, (1 - 0.3) * 2]))
    assert np.allclose(sys.P_cal, np.diag([0.5, 0.7]))
    assert np.allclose(sys.G_cal, np.diag([0.5, 0.1]))
    assert np.allclose(sys.CF, C @ np.diag([1.0, 1.4]))


def test_reference_block_pattern(ref_scen, modern_limit):
    sys = build_stacked_system(ref_scen.C, modern_limit[1], ref_scen.obs_models, ref_scen.model)
    assert sys.CF.shape == (80, 80)
    blocks = np.abs(sys.C_cal).reshape(20, 4, 20, 4).sum(axis=(1, 3)) > 0
    assert np.array_equal(blocks, ref_scen.network.adjacency().astype(bool) | np.eye(20, dtype=bool))


def test_kronecker_identity(rng):
    N, d = 5, 3
    C = rng.random((N, N))
    C /= C.sum(axis=1, keepdims=True)
    X = [rng.normal(size=(d, d)) for _ in range(N)]
    dense = np.kron(C, np.eye(d)) @ np.block(
        [[X[i] if i == j else np.zeros((d, d)) for j in range(N)] for i in range(N)]
    )
    for l in range(N):
        for i in range(N):
            np.testing.assert_allclose(dense[l * d : (l + 1) * d, i * d : (i + 1) * d], C[l, i] * X[i], atol=1e-13)


def test_error_recursion_trivial_cases(rng):
    model = StateSpaceModel(rng.normal(size=(2, 2)), np.eye(2))
    om = NodeObservationModel([[1.0, 0.0]], [[1.0]])
    sys = build_stacked_system(np.ones((1, 1)), [np.zeros((2, 1))], [om], model)
    assert np.all(error_recursion_step(sys, np.zeros(2), np.zeros(2), np.zeros(1)) == 0)
    e, v = rng.normal(size=2), rng.normal(size=2)
    np.testing.assert_allclose(error_recursion_step(sys, e, v, rng.normal(size=1)), model.A @ e + v, rtol=1e-14)


def replay(scenario, schedule, steps, seed, x1=None):
    """Filter a simulated trajectory and propagate the error recursion alongside.

    Returns the largest relative discrepancy over all steps.
    """
    model, obs, N = scenario.model, scenario.obs_models, scenario.node_count
    traj = simulate_trajectory(model, obs, steps, seed, x1=x1)
    filt = DiffusionKalmanFilter(model, obs, scenario.C, schedule)
    E_rec = np.tile(traj.states[0], N) - filt.x_hat.ravel()
    worst = 0.0
    for n in range(steps - 1):
        filt.step([y[n + 1] for y in traj.observations])
        sys = build_stacked_system(scenario.C, filt.node_gains(), obs, model)
        W = np.concatenate([w[n + 1] for w in traj.observation_noises])
        E_rec = error_recursion_step(sys, E_rec, traj.process_noises[n], W)
        E_sim = stack_errors(traj.states[n + 1] - filt.x_hat)
        worst = max(worst, np.linalg.norm(E_sim - E_rec) / max(np.linalg.norm(E_sim), 1e-300))
    return worst


@pytest.mark.parametrize("schedule", ["modern", "classical"])
def test_replay_small_network(schedule):
    from disfilter.experiment import ExperimentConfig, build_scenario

    scen = build_scenario(ExperimentConfig(nodes=6, edges=9, seed=3))
    assert replay(scen, schedule, 300, seed=5, x1=[1, -1, 0.5, 0.2]) <= 1e-11


def test_pbh_trivial(rng):
    A = rng.normal(size=(4, 4)) * 3
    assert pbh_detectability(A, np.eye(4))
    assert pbh_stabilizability(A, np.eye(4))
    assert not pbh_stabilizability(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]))
    assert pbh_detectability(np.diag([0.5, 0.2]), np.zeros((1, 2)))


def test_pbh_tracking_model():
    model, h, v = make_tracking_model()
    H_h = np.vstack([h.H] * 5)
    H_hv = np.vstack([H_h, v.H])
    assert not pbh_detectability(model.A, H_h)
    assert not detectable_by_observability(model.A, H_h)
    assert pbh_detectability(model.A, H_hv)
    assert detectable_by_observability(model.A, H_hv)
    F = psd_sqrt(model.sigma_v)
    assert np.allclose(F @ F.T, model.sigma_v, atol=1e-15)
    assert pbh_stabilizability(model.A, F)
    assert stabilizable_by_controllability(model.A, F)


def test_pbh_against_rank_oracles():
    rng = np.random.default_rng(12)
    outcomes = set()
    for _ in range(150):
        n = int(rng.integers(1, 6))
        A, H, expect = random_modal_system(rng, n, int(rng.integers(1, 3)))
        assert detectable_by_observability(A, H) == expect
        assert pbh_detectability(A, H) == expect
        assert pbh_stabilizability(A.T, H.T) == stabilizable_by_controllability(A.T, H.T) == expect
        outcomes.add(expect)
    assert outcomes == {True, False}


def test_contraction_simple():
    sys = build_stacked_system(np.ones((1, 1)), [np.zeros((3, 1))], [NodeObservationModel(np.zeros((1, 3)), [[1.0]])],
                               StateSpaceModel(0.5 * np.eye(3), np.eye(3)))
    assert contraction_certificate(sys, 10) == (pytest.approx(0.5), 1)
    sys_id = build_stacked_system(np.ones((1, 1)), [np.zeros((2, 1))], [NodeObservationModel(np.zeros((1, 2)), [[1.0]])],
                                  StateSpaceModel(np.eye(2), np.eye(2)))
    rho, k = contraction_certificate(sys_id, 50)
    assert rho == pytest.approx(1.0) and k is None


def test_spectral_radius_of_powers(rng):
    for _ in range(20):
        T = rng.normal(size=(6, 6)) / 3
        rho = spectral_radius(T)
        for k in range(1, 6):
            assert spectral_radius(np.linalg.matrix_power(T, k)) == pytest.approx(rho**k, rel=1e-9)


def test_bias_propagation(ref_scen, modern_limit):
    sys = build_stacked_system(ref_scen.C, modern_limit[1], ref_scen.obs_models, ref_scen.model)
    assert np.all(bias_propagation(sys, np.zeros(80), 30) == 0)
    E1 = np.arange(80.0)
    assert np.array_equal(bias_propagation(sys, E1, 0), E1)
    np.testing.assert_allclose(bias_propagation(sys, E1, 7), np.linalg.matrix_power(sys.CF, 7) @ E1, rtol=1e-12)


def test_eigen_range_report():
    M = np.tile(np.eye(3), (4, 2, 1, 1))
    assert eigen_range_report(M).tolist() == [[1.0, 1.0]] * 4
    Y = np.array([np.diag([2.0, 1e-14])])
    assert eigen_range_report(Y, information=True).tolist() == [[0.5, 1e12]]
    with pytest.raises(ValueError):
        eigen_range_report(np.array([[[1.0, 1.0], [0.0, 1.0]]]))


def test_certificate_text_roundtrip():
    cert = StabilityCertificate(True, True, 0.99, 12, 0.98, 4, 100, True)
    text = cert.to_text()
    assert "rho_CF: 0.99" in text and "detectable: true" in text
    assert StabilityCertificate.from_text(text) == cert
    none = StabilityCertificate(False, True, 1.0, None, 1.0)
    assert StabilityCertificate.from_text(none.to_text()) == none


def test_monte_carlo_bias_small():
    from disfilter.experiment import ExperimentConfig, build_scenario, monte_carlo_mean_error
    from disfilter.filters import converge_distributed_riccati, distributed_gains

    scen = build_scenario(ExperimentConfig(nodes=5, edges=7, seed=1, dt=0.5, q=0.5))
    M, _, _, ok = converge_distributed_riccati(scen.model, scen.obs_models, scen.C)
    assert ok
    gains = distributed_gains(M, scen.obs_models)
    sys = build_stacked_system(scen.C, gains, scen.obs_models, scen.model)
    x1 = np.array([2.0, -1.0, 0.5, 0.3])
    mean, se = monte_carlo_mean_error(scen, gains, x1, 41, 2000, seed=8)
    E1 = np.tile(x1, 5)
    for n in (1, 10, 40):
        assert np.all(np.abs(mean[n] - bias_propagation(sys, E1, n)) <= 4 * se[n] + 1e-12)
