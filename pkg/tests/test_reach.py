"""Backward recursion on the fitted estimator: semantics and invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_reach import (
    AffinePolicy,
    BoxSampler,
    BoxSet,
    ConstantPolicy,
    Embedding,
    GaussianDisturbance,
    InputError,
    IntegratorChain,
    RBFKernel,
    ReachProblem,
    TransitionSample,
    ValueField,
    ZeroPolicy,
    generate_transitions,
    value_recursion,
    value_recursion_max,
)


@pytest.fixture(scope="module")
def controlled():
    """Sample with state-dependent controls, so control inputs matter."""
    system = IntegratorChain(2, sampling_time=0.25)
    sampler = BoxSampler([-1.1, -1.1], [1.1, 1.1])
    disturbance = GaussianDisturbance([0.1, 0.1])
    policy = AffinePolicy([[0.5, -0.3]])
    sample = generate_transitions(system, policy, sampler, disturbance, 400, 0)
    emb = Embedding(sample, RBFKernel(0.3), lam=0.1)
    box = BoxSet([-1.0, -1.0], [1.0, 1.0])
    problem = ReachProblem(safe=box, target=box, horizon=3)
    pts = np.random.default_rng(5).uniform(-1.2, 1.2, size=(40, 2))
    return emb, problem, pts


def test_terminal_row_is_the_exact_indicator(controlled):
    emb, problem, pts = controlled
    field = value_recursion(emb, problem, pts, ZeroPolicy(1))
    want = problem.target.contains(pts).astype(np.float64)
    np.testing.assert_array_equal(field.values[-1], want)


def test_unsafe_starts_are_exactly_zero(controlled):
    emb, problem, pts = controlled
    field = value_recursion(emb, problem, pts, ZeroPolicy(1))
    outside = ~problem.safe.contains(pts)
    assert outside.any()
    for k in range(problem.horizon):
        np.testing.assert_array_equal(field.values[k][outside], 0.0)


def test_values_stay_in_unit_interval(controlled):
    emb, problem, pts = controlled
    field = value_recursion(emb, problem, pts, ZeroPolicy(1))
    assert np.all(field.values >= 0.0) and np.all(field.values <= 1.0)
    fmax = value_recursion_max(emb, problem, pts, [[-0.5], [0.0], [0.5]])
    assert np.all(fmax.values >= 0.0) and np.all(fmax.values <= 1.0)


def test_single_control_grid_matches_constant_policy_bitwise(controlled):
    emb, problem, pts = controlled
    fixed = value_recursion(emb, problem, pts, ConstantPolicy([0.4]))
    maxed = value_recursion_max(emb, problem, pts, [[0.4]])
    np.testing.assert_array_equal(fixed.values, maxed.values)
    np.testing.assert_array_equal(maxed.policy_choices, 0)


def test_max_recursion_dominates_every_fixed_control(controlled):
    emb, problem, pts = controlled
    grid = [[-0.5], [0.0], [0.5]]
    maxed = value_recursion_max(emb, problem, pts, grid)
    for u in grid:
        fixed = value_recursion(emb, problem, pts, ConstantPolicy(u))
        assert np.all(maxed.values >= fixed.values)


def test_enlarging_the_control_grid_never_hurts(controlled):
    # weight columns per control are bitwise identical across calls and
    # normalized weights are nonnegative, so this inequality is exact
    emb, problem, pts = controlled
    small = value_recursion_max(emb, problem, pts, [[0.0]])
    big = value_recursion_max(emb, problem, pts, [[0.0], [0.6], [-0.6]])
    assert np.all(big.values >= small.values)


def test_duplicate_controls_tie_to_the_lowest_index(controlled):
    emb, problem, pts = controlled
    maxed = value_recursion_max(emb, problem, pts, [[0.3], [0.3]])
    np.testing.assert_array_equal(maxed.policy_choices, 0)


def test_one_step_recursion_unrolls_to_manual_weights(controlled):
    emb, problem, pts = controlled
    one = ReachProblem(problem.safe, problem.target, horizon=1)
    policy = ConstantPolicy([0.2])
    field = value_recursion(emb, one, pts, policy)
    w = emb.weights(pts, policy(0, pts))
    term = one.target.contains(emb.sample.successors).astype(np.float64)
    est = np.clip(term @ w, 0.0, 1.0)
    want = one.safe.contains(pts).astype(np.float64) * est
    np.testing.assert_array_equal(field.values[0], want)


def test_recursion_is_deterministic(controlled):
    emb, problem, pts = controlled
    a = value_recursion(emb, problem, pts, ZeroPolicy(1))
    b = value_recursion(emb, problem, pts, ZeroPolicy(1))
    np.testing.assert_array_equal(a.values, b.values)
    c = value_recursion_max(emb, problem, pts, [[0.0], [0.5]])
    d = value_recursion_max(emb, problem, pts, [[0.0], [0.5]])
    np.testing.assert_array_equal(c.values, d.values)
    np.testing.assert_array_equal(c.policy_choices, d.policy_choices)


class RecordingPolicy:
    time_invariant = False

    def __init__(self, control_dim):
        self.control_dim = control_dim
        self.calls = []

    def __call__(self, k, states):
        states = np.atleast_2d(states)
        self.calls.append((k, states.shape[0]))
        return np.zeros((states.shape[0], self.control_dim))


def test_time_invariant_flag_controls_policy_reuse(controlled):
    emb, problem, pts = controlled
    n_pts, n_succ = pts.shape[0], emb.sample.successors.shape[0]

    varying = RecordingPolicy(1)
    value_recursion(emb, problem, pts, varying)
    # horizon 3: points queried at k = 2, 1, 0; successors at k = 2, 1
    assert varying.calls == [
        (2, n_pts), (2, n_succ), (1, n_pts), (1, n_succ), (0, n_pts),
    ]

    frozen = RecordingPolicy(1)
    frozen.time_invariant = True
    value_recursion(emb, problem, pts, frozen)
    assert frozen.calls == [(2, n_pts), (2, n_succ)]


def test_recursion_input_validation(controlled):
    emb, problem, pts = controlled
    with pytest.raises(InputError):
        value_recursion(object(), problem, pts, ZeroPolicy(1))
    with pytest.raises(InputError):
        value_recursion(emb, problem, np.empty((0, 2)), ZeroPolicy(1))
    with pytest.raises(InputError):
        value_recursion(emb, problem, np.zeros((3, 5)), ZeroPolicy(1))
    with pytest.raises(InputError):
        value_recursion(emb, problem, pts, ZeroPolicy(2))  # wrong control dim
    with pytest.raises(InputError):
        value_recursion_max(emb, problem, pts, np.empty((0, 1)))
    with pytest.raises(InputError):
        value_recursion_max(emb, problem, pts, [[0.0, 1.0]])


def test_control_free_sample_rejects_maximization():
    rng = np.random.default_rng(0)
    sample = TransitionSample(
        rng.uniform(-1, 1, (20, 2)),
        np.zeros((20, 0)),
        rng.uniform(-1, 1, (20, 2)),
    )
    emb = Embedding(sample, RBFKernel(0.5), lam=1.0)
    box = BoxSet([-1.0, -1.0], [1.0, 1.0])
    problem = ReachProblem(safe=box, target=box, horizon=2)
    with pytest.raises(InputError, match="control"):
        value_recursion_max(emb, problem, np.zeros((1, 2)), [[0.0]])
    # the fixed-policy recursion ignores the policy entirely
    field = value_recursion(emb, problem, np.zeros((1, 2)), None)
    assert 0.0 <= field.values[0][0] <= 1.0


def test_value_field_validation():
    with pytest.raises(InputError):
        ValueField(points=np.zeros((4, 2)), values=np.zeros((2, 3)))
    field = ValueField(points=np.zeros((3, 2)), values=np.zeros((2, 3)))
    assert field.horizon == 1


@settings(deadline=None, max_examples=40)
@given(
    seed=st.integers(0, 10**6),
    count=st.integers(2, 8),
    horizon=st.integers(1, 3),
    half=st.floats(0.3, 1.5),
)
def test_recursion_invariants_on_tiny_samples(seed, count, horizon, half):
    rng = np.random.default_rng(seed)
    states = rng.uniform(-1, 1, (count, 2))
    controls = rng.uniform(-1, 1, (count, 1))
    successors = states + 0.1 * rng.normal(size=(count, 2))
    emb = Embedding(
        TransitionSample(states, controls, successors), RBFKernel(0.5), lam=0.5
    )
    safe = BoxSet([-half, -half], [half, half])
    small = ReachProblem(
        safe, BoxSet([-half / 2, -half / 2], [half / 2, half / 2]), horizon
    )
    big = ReachProblem(safe, safe, horizon)
    pts = rng.uniform(-1.2, 1.2, (6, 2))
    policy = ConstantPolicy([0.0])
    f_small = value_recursion(emb, small, pts, policy)
    f_big = value_recursion(emb, big, pts, policy)
    for field, problem in ((f_small, small), (f_big, big)):
        assert np.all(field.values >= 0.0) and np.all(field.values <= 1.0)
        np.testing.assert_array_equal(
            field.values[-1], problem.target.contains(pts).astype(float)
        )
        unsafe = ~safe.contains(pts)
        assert np.all(field.values[:-1][:, unsafe] == 0.0)
    # growing the target can only raise values: weights are nonnegative
    assert np.all(f_small.values <= f_big.values + 1e-12)
