"""Embedding estimator tests against closed forms and a dense-solve oracle."""

import numpy as np
import pytest

from rkhs_reach import (
    BoxSampler,
    BoxSet,
    Embedding,
    GaussianDisturbance,
    InputError,
    IntegratorChain,
    RBFKernel,
    TransitionSample,
    ZeroPolicy,
    generate_transitions,
    mc_reach,
    ReachProblem,
)

from conftest import BENCH_NOISE_SD, BENCH_SIGMA, make_bench_sample


def single_sample(lam, eta=1.0, normalize=False):
    sample = TransitionSample(
        states=np.array([[0.5, -0.5]]),
        controls=np.array([[0.0]]),
        successors=np.array([[0.4, -0.4]]),
    )
    emb = Embedding(
        sample, RBFKernel(1.0), lam, eta=eta, normalize_weights=normalize
    )
    return sample, emb


def test_single_point_raw_weight_closed_form():
    # M=1: w = eta * k / (1 + lam); at the sample point k = 1
    for lam in (0.1, 1.0, 7.5):
        _, emb = single_sample(lam)
        w = emb.weights(np.array([[0.5, -0.5]]), np.array([[0.0]]))
        assert w.shape == (1, 1)
        assert w[0, 0] == pytest.approx(1.0 / (1.0 + lam), rel=1e-12)


def test_single_point_raw_eta_scaling():
    _, emb = single_sample(2.0, eta=3.0)
    w = emb.weights(np.array([[0.5, -0.5]]), np.array([[0.0]]))
    assert w[0, 0] == pytest.approx(3.0 / 3.0, rel=1e-12)


def test_single_point_normalized_weight_is_one():
    for lam in (0.1, 1.0, 7.5):
        _, emb = single_sample(lam, normalize=True)
        w = emb.weights(np.array([[0.7, 0.1]]), np.array([[0.2]]))
        assert w[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_constant_function_single_point():
    _, emb = single_sample(3.0)
    est = emb.expectation(np.ones(1), np.array([[0.5, -0.5]]), np.array([[0.0]]))
    assert est[0] == pytest.approx(1.0 / 4.0, rel=1e-12)


def dense_weights(emb, states, controls):
    # independent reimplementation with a dense solve
    joint = np.hstack([states, controls]) if controls.shape[1] else states
    sample_joint = emb.sample.joint()
    g = emb.kernel.gram(sample_joint)
    m = emb.count
    k = emb.kernel.cross(sample_joint, joint)
    w = np.linalg.solve(g + emb.lam * m * np.eye(m), k)
    if emb.normalize_weights:
        w = np.maximum(w, 0.0)
        s = w.sum(axis=0)
        w[:, s != 0] /= s[s != 0]
    else:
        w *= emb.eta
    return w


@pytest.mark.parametrize("m_count", [3, 16])
@pytest.mark.parametrize("normalize", [False, True])
def test_weights_match_dense_solve(m_count, normalize):
    rng = np.random.default_rng(m_count)
    sample = TransitionSample(
        states=rng.normal(size=(m_count, 2)),
        controls=rng.normal(size=(m_count, 1)),
        successors=rng.normal(size=(m_count, 2)),
    )
    emb = Embedding(
        sample, RBFKernel(0.8), 0.5, eta=1.3, normalize_weights=normalize
    )
    states = rng.normal(size=(7, 2))
    controls = rng.normal(size=(7, 1))
    got = emb.weights(states, controls)
    want = dense_weights(emb, states, controls)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_far_query_raw_weights_negligible():
    rng = np.random.default_rng(2)
    sample = TransitionSample(
        states=rng.uniform(-1, 1, size=(32, 2)),
        controls=rng.uniform(-1, 1, size=(32, 1)),
        successors=rng.uniform(-1, 1, size=(32, 2)),
    )
    emb = Embedding(sample, RBFKernel(1.0), 1.0, normalize_weights=False)
    # joint distance >= 10 from every sample point -> kernel column <= e^-50
    far = emb.weights(np.array([[20.0, 20.0]]), np.array([[20.0]]))
    reg = emb.gram + emb.lam * emb.count * np.eye(emb.count)
    bound = np.exp(-50.0) * np.abs(np.linalg.inv(reg)).sum(axis=1).max()
    assert np.abs(far).max() <= bound


def test_expectation_linear_in_function():
    rng = np.random.default_rng(3)
    sample = TransitionSample(
        states=rng.normal(size=(20, 2)),
        controls=rng.normal(size=(20, 1)),
        successors=rng.normal(size=(20, 2)),
    )
    emb = Embedding(sample, RBFKernel(0.6), 0.7)
    states = rng.normal(size=(4, 2))
    controls = rng.normal(size=(4, 1))
    f = rng.normal(size=20)
    g = rng.normal(size=20)
    lhs = emb.expectation(2.0 * f - 3.0 * g, states, controls)
    rhs = 2.0 * emb.expectation(f, states, controls) - 3.0 * emb.expectation(
        g, states, controls
    )
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_zero_function_gives_zero():
    rng = np.random.default_rng(4)
    sample = TransitionSample(
        states=rng.normal(size=(10, 2)),
        controls=rng.normal(size=(10, 1)),
        successors=rng.normal(size=(10, 2)),
    )
    emb = Embedding(sample, RBFKernel(0.6), 0.7)
    est = emb.expectation(
        np.zeros(10), rng.normal(size=(3, 2)), rng.normal(size=(3, 1))
    )
    np.testing.assert_array_equal(est, 0.0)


def test_solve_residual_small():
    sample = make_bench_sample(512, 3)
    emb = Embedding(sample, RBFKernel(BENCH_SIGMA), 1.0)
    v = np.sin(np.arange(512.0))
    assert emb.solve_residual(v) <= 1e-8


def test_single_step_tracks_monte_carlo():
    # smooth interior of the benchmark field; the estimator should land
    # within the binary-label regression noise at this density
    system = IntegratorChain(2, sampling_time=0.25)
    disturbance = GaussianDisturbance([BENCH_NOISE_SD, BENCH_NOISE_SD])
    box = BoxSet([-1.0, -1.0], [1.0, 1.0])
    problem = ReachProblem(safe=box, target=box, horizon=1)
    policy = ZeroPolicy(1)
    sample = make_bench_sample(1024, 0)
    emb = Embedding(sample, RBFKernel(BENCH_SIGMA), 1.0)
    probes = np.array(
        [[0.0, 0.0], [0.3, 0.2], [-0.4, -0.1], [0.5, -0.5], [-0.2, 0.4]]
    )
    labels = box.contains(sample.successors).astype(np.float64)
    est = np.clip(
        emb.expectation(labels, probes, np.zeros((5, 1))), 0.0, 1.0
    )
    mc, _ = mc_reach(
        system, disturbance, problem, policy, probes, 50000, seed=21
    )
    assert np.abs(est - mc).max() <= 0.15


def test_more_samples_reduce_error():
    # ridge schedule lam = M^(-1/4); median gap to Monte Carlo at a fixed
    # probe should drop from M=64 to M=2048
    system = IntegratorChain(2, sampling_time=0.25)
    disturbance = GaussianDisturbance([BENCH_NOISE_SD, BENCH_NOISE_SD])
    box = BoxSet([-1.0, -1.0], [1.0, 1.0])
    problem = ReachProblem(safe=box, target=box, horizon=1)
    policy = ZeroPolicy(1)
    # near the safe boundary, where the one-step value is far from 0 and 1
    probes = np.array([[0.9, 0.2], [-0.9, -0.3], [0.8, 0.5]])
    mc, _ = mc_reach(
        system, disturbance, problem, policy, probes, 50000, seed=22
    )
    gaps = {}
    for m_count in (64, 2048):
        errs = []
        for seed in range(5):
            sample = make_bench_sample(m_count, seed)
            emb = Embedding(
                sample, RBFKernel(BENCH_SIGMA), float(m_count) ** -0.25
            )
            labels = box.contains(sample.successors).astype(np.float64)
            est = np.clip(
                emb.expectation(labels, probes, np.zeros((3, 1))), 0.0, 1.0
            )
            errs.append(np.abs(est - mc).max())
        gaps[m_count] = float(np.median(errs))
    assert gaps[2048] < gaps[64]


def test_control_free_sample():
    rng = np.random.default_rng(6)
    sample = TransitionSample(
        states=rng.normal(size=(12, 2)),
        controls=np.zeros((12, 0)),
        successors=rng.normal(size=(12, 2)),
    )
    emb = Embedding(sample, RBFKernel(0.5), 1.0)
    w = emb.weights(rng.normal(size=(3, 2)))
    assert w.shape == (12, 3)
    np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-12)
    with pytest.raises(InputError):
        emb.weights(rng.normal(size=(3, 2)), np.zeros((3, 1)))


def test_validation_errors():
    rng = np.random.default_rng(7)
    sample = TransitionSample(
        states=rng.normal(size=(5, 2)),
        controls=rng.normal(size=(5, 1)),
        successors=rng.normal(size=(5, 2)),
    )
    kernel = RBFKernel(0.5)
    with pytest.raises(InputError):
        Embedding("nope", kernel, 1.0)
    with pytest.raises(InputError):
        Embedding(sample, "nope", 1.0)
    with pytest.raises(InputError):
        Embedding(sample, kernel, 0.0)
    with pytest.raises(InputError):
        Embedding(sample, kernel, -2.0)
    with pytest.raises(InputError):
        Embedding(sample, kernel, 1.0, eta=0.0)
    emb = Embedding(sample, kernel, 1.0)
    with pytest.raises(InputError):
        emb.weights(np.zeros((2, 3)), np.zeros((2, 1)))  # state dim
    with pytest.raises(InputError):
        emb.weights(np.zeros((2, 2)))  # controls required
    with pytest.raises(InputError):
        emb.weights(np.zeros((2, 2)), np.zeros((3, 1)))  # row mismatch
    with pytest.raises(InputError):
        emb.expectation(np.zeros(4), np.zeros((2, 2)), np.zeros((2, 1)))


def test_transition_sample_validation():
    good = dict(
        states=np.zeros((3, 2)),
        controls=np.zeros((3, 1)),
        successors=np.zeros((3, 2)),
    )
    TransitionSample(**good)
    with pytest.raises(InputError):
        TransitionSample(np.zeros((0, 2)), np.zeros((0, 1)), np.zeros((0, 2)))
    with pytest.raises(InputError):
        TransitionSample(
            np.zeros((3, 2)), np.zeros((2, 1)), np.zeros((3, 2))
        )
    with pytest.raises(InputError):
        TransitionSample(
            np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 3))
        )
    bad = np.zeros((3, 2))
    bad[1, 1] = np.nan
    with pytest.raises(InputError):
        TransitionSample(bad, np.zeros((3, 1)), np.zeros((3, 2)))


def test_joint_concatenates_states_and_controls():
    sample = TransitionSample(
        states=np.array([[1.0, 2.0]]),
        controls=np.array([[3.0]]),
        successors=np.array([[0.0, 0.0]]),
    )
    np.testing.assert_array_equal(sample.joint(), [[1.0, 2.0, 3.0]])
    assert sample.count == 1
    assert sample.state_dim == 2
    assert sample.control_dim == 1
