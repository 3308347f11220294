"""Finite-horizon reach-avoid value recursion over sampled transitions.

The quantity computed is the probability that a trajectory hits the
target set exactly at the final step while staying inside the safe set at
every earlier step (the initial state included). Its exact backward
recursion is

    V_N(x) = 1 if x is in the target set else 0
    V_k(x) = 1_safe(x) * E[ V_{k+1}(y) | x, u = policy_k(x) ]

and the policy-optimizing variant takes a sup over controls inside the
expectation. This module evaluates the recursion with the conditional
expectation replaced by a fitted :class:`~rkhs_reach.embedding.Embedding`
estimate: at each step the previous value estimates at the sampled
successor states act as the function being averaged. Estimates are
clamped to [0, 1] before the safe-set indicator is applied, so every
returned value is a valid probability.

The grid and Monte Carlo oracles implement the same recursion and event
definition independently; :func:`exact_terminal` and :func:`exact_step`
spell out the shared semantics in one place.
"""

from dataclasses import dataclass

import numpy as np

from .embedding import Embedding
from .errors import InputError

__all__ = [
    "BoxSet",
    "PredicateSet",
    "ReachProblem",
    "ValueField",
    "value_recursion",
    "value_recursion_max",
    "exact_terminal",
    "exact_step",
]


class BoxSet:
    """Axis-aligned box with inclusive faces: lower <= x <= upper."""

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InputError("box bounds must be equal-length vectors")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InputError("box bounds must be finite")
        if np.any(lower > upper):
            raise InputError("box has lower bound above upper bound")
        self.lower = lower
        self.upper = upper

    @property
    def dim(self):
        return self.lower.shape[0]

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.dim:
            raise InputError(
                f"points have dimension {points.shape[1]}, box has {self.dim}"
            )
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)


class PredicateSet:
    """Membership set defined by a vectorized predicate on state rows."""

    def __init__(self, fn, dim=None, description=""):
        self.fn = fn
        self.dim = dim
        self.description = description

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.dim is not None and points.shape[1] != self.dim:
            raise InputError(
                f"points have dimension {points.shape[1]}, set expects {self.dim}"
            )
        out = np.asarray(self.fn(points))
        if out.shape != (points.shape[0],):
            raise InputError("set predicate must return one boolean per row")
        return out.astype(bool)


@dataclass(frozen=True)
class ReachProblem:
    """Safe set, target set, and horizon of one reach-avoid instance."""

    safe: object
    target: object
    horizon: int

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise InputError(f"horizon must be an integer >= 1, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))


@dataclass
class ValueField:
    """Values of every recursion step at a fixed evaluation-point set.

    ``values[k][p]`` is the probability estimate for starting at
    ``points[p]`` with ``horizon - k`` steps remaining; row ``horizon``
    is the exact target indicator. ``policy_choices[k][p]``, present for
    the maximizing recursion, is the index into the control grid chosen
    at step k.
    """

    points: np.ndarray
    values: np.ndarray
    policy_choices: np.ndarray = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.points.shape[0]:
            raise InputError("values must have one column per evaluation point")

    @property
    def horizon(self):
        return self.values.shape[0] - 1


def exact_terminal(target_indicator):
    """Terminal condition of the exact recursion: the target indicator."""
    return np.asarray(target_indicator, dtype=np.float64)


def exact_step(safe_indicator, expected_next):
    """One exact backward step: safe indicator times expected next value."""
    return np.asarray(safe_indicator, dtype=np.float64) * np.asarray(
        expected_next, dtype=np.float64
    )


def _clamped_step(weights, next_values, safe_mask):
    est = next_values @ weights
    np.clip(est, 0.0, 1.0, out=est)
    est *= safe_mask
    return est


def _policy_controls(policy, k, points, control_dim):
    if control_dim == 0:
        return None
    controls = np.atleast_2d(np.asarray(policy(k, points), dtype=np.float64))
    if controls.shape != (points.shape[0], control_dim):
        raise InputError(
            f"policy returned shape {controls.shape}, expected "
            f"{(points.shape[0], control_dim)}"
        )
    return controls


def _prepare(emb, problem, points):
    if not isinstance(emb, Embedding):
        raise InputError("emb must be a fitted Embedding")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0:
        raise InputError("evaluation-point set is empty")
    if points.shape[1] != emb.sample.state_dim:
        raise InputError(
            f"evaluation points have dimension {points.shape[1]}, "
            f"sample has {emb.sample.state_dim}"
        )
    successors = emb.sample.successors
    mask_pts = problem.safe.contains(points).astype(np.float64)
    mask_succ = problem.safe.contains(successors).astype(np.float64)
    term_pts = exact_terminal(problem.target.contains(points))
    term_succ = exact_terminal(problem.target.contains(successors))
    return points, successors, mask_pts, mask_succ, term_pts, term_succ


def value_recursion(emb, problem, points, policy):
    """Run the backward recursion under a fixed policy.

    Parameters
    ----------
    emb : Embedding
    problem : ReachProblem
    points : (P, n) array
        States at which values are reported.
    policy : callable
        ``policy(k, states) -> controls`` with one row per state. Ignored
        when the sample has no control columns. Policies carrying a true
        ``time_invariant`` attribute are evaluated once and their weight
        matrices reused across steps.

    Returns
    -------
    ValueField
    """
    points, successors, mask_pts, mask_succ, term_pts, term_succ = _prepare(
        emb, problem, points
    )
    n_steps = problem.horizon
    values = np.empty((n_steps + 1, points.shape[0]))
    values[n_steps] = term_pts
    v_succ = term_succ
    m = emb.sample.control_dim
    reuse = m == 0 or getattr(policy, "time_invariant", False)
    w_pts = w_succ = None
    for k in range(n_steps - 1, -1, -1):
        if w_pts is None or not reuse:
            w_pts = emb.weights(points, _policy_controls(policy, k, points, m))
        values[k] = _clamped_step(w_pts, v_succ, mask_pts)
        if k > 0:
            if w_succ is None or not reuse:
                w_succ = emb.weights(
                    successors, _policy_controls(policy, k, successors, m)
                )
            v_succ = _clamped_step(w_succ, v_succ, mask_succ)
    return ValueField(points=points, values=values)


def value_recursion_max(emb, problem, points, control_grid):
    """Run the backward recursion maximizing over a finite control grid.

    At every step and every state the clamped expectation estimate is
    computed for each control in the grid and the largest is kept; ties
    resolve to the lowest grid index. With a single-entry grid the result
    matches :func:`value_recursion` under the matching constant policy
    exactly.

    Returns
    -------
    ValueField
        With ``policy_choices`` filled with argmax indices.
    """
    control_grid = np.atleast_2d(np.asarray(control_grid, dtype=np.float64))
    if control_grid.shape[0] == 0:
        raise InputError("control grid is empty")
    m = emb.sample.control_dim
    if m == 0:
        raise InputError("sample has no control columns, cannot maximize")
    if control_grid.shape[1] != m:
        raise InputError(
            f"control grid entries have dimension {control_grid.shape[1]}, "
            f"sample controls have {m}"
        )
    points, successors, mask_pts, mask_succ, term_pts, term_succ = _prepare(
        emb, problem, points
    )
    n_pts = points.shape[0]
    n_succ = successors.shape[0]
    w_pts = [
        emb.weights(points, np.tile(u, (n_pts, 1))) for u in control_grid
    ]
    w_succ = [
        emb.weights(successors, np.tile(u, (n_succ, 1))) for u in control_grid
    ]
    n_steps = problem.horizon
    values = np.empty((n_steps + 1, n_pts))
    values[n_steps] = term_pts
    choices = np.empty((n_steps, n_pts), dtype=np.int64)
    v_succ = term_succ
    for k in range(n_steps - 1, -1, -1):
        candidates = np.stack([_clamped_step(w, v_succ, mask_pts) for w in w_pts])
        values[k] = candidates.max(axis=0)
        choices[k] = candidates.argmax(axis=0)
        if k > 0:
            v_succ = np.stack(
                [_clamped_step(w, v_succ, mask_succ) for w in w_succ]
            ).max(axis=0)
    return ValueField(points=points, values=values, policy_choices=choices)
