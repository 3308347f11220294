"""Independent ground-truth estimators for reach-avoid probabilities.

Two oracles with disjoint numerics serve as references for the kernel
estimator: a dense-grid backward recursion for 2-D linear systems under
Gaussian noise, and a Monte Carlo rollout estimator for anything the
package can simulate. Both implement the exact recursion semantics from
:mod:`rkhs_reach.reach` (target indicator at the final step, safe-set
indicator multiplying every earlier step).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _backend
from .errors import InputError
from .reach import BoxSet, ReachProblem, ValueField, exact_step, exact_terminal
from .systems import GaussianDisturbance

__all__ = ["DPGrid", "default_dp_grid", "dp_reach", "mc_reach"]


@dataclass(frozen=True)
class DPGrid:
    """Computation grid and quadrature resolution for the grid oracle.

    The grid must cover the union of the safe and target boxes; the
    recursion treats the field as zero outside the grid, which is exact
    there because those states are unsafe.
    """

    lower: tuple
    upper: tuple
    shape: tuple = (201, 201)
    quad_nodes: int = 25

    def __post_init__(self):
        if len(self.lower) != 2 or len(self.upper) != 2 or len(self.shape) != 2:
            raise InputError("grid oracle supports exactly 2 state dimensions")
        if any(s < 2 for s in self.shape):
            raise InputError("grid needs at least 2 nodes per axis")
        if self.quad_nodes < 2:
            raise InputError("quadrature needs at least 2 nodes per axis")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise InputError("grid box is degenerate")

    def axes(self):
        return [
            np.linspace(self.lower[d], self.upper[d], self.shape[d])
            for d in range(2)
        ]


def default_dp_grid(problem, shape=(201, 201), quad_nodes=25):
    """Grid spanning the union of the problem's safe and target boxes."""
    safe, target = problem.safe, problem.target
    if not isinstance(safe, BoxSet) or not isinstance(target, BoxSet):
        raise InputError("the grid oracle requires box safe and target sets")
    lower = np.minimum(safe.lower, target.lower)
    upper = np.maximum(safe.upper, target.upper)
    return DPGrid(tuple(lower), tuple(upper), tuple(shape), int(quad_nodes))


def _base_rule(quad_nodes):
    # Gauss-Legendre nodes and weights on [-1, 1]; the backup rescales
    # them per query onto the +-4 sd window clipped to the grid
    return np.polynomial.legendre.leggauss(quad_nodes)


def _box_hit_probability(means, box, sd):
    # closed-form E[1_box(mean + w)] for diagonal Gaussian w
    p = np.ones(means.shape[0])
    for d in range(2):
        p *= ndtr((box.upper[d] - means[:, d]) / sd[d]) - ndtr(
            (box.lower[d] - means[:, d]) / sd[d]
        )
    return p


def dp_reach(system, disturbance, problem, eval_points, policy, grid=None):
    """Backward recursion on a dense grid, for 2-D Gaussian problems.

    The first backward step integrates the target indicator in closed
    form (products of normal CDF differences), so the discontinuous
    terminal condition never meets the interpolator; the remaining steps
    use tensor Gauss-Legendre quadrature with multilinear interpolation
    of the stored grid field. The field drops to zero at the safe-set
    boundary, which coincides with the grid edge, so each query's
    integration window is clipped to the grid per axis: the excluded
    region contributes exactly zero and the quadrature never integrates
    across the jump, keeping its fast convergence.

    Parameters
    ----------
    system : object with ``dense_a``/``dense_b`` and ``n == 2``
    disturbance : GaussianDisturbance
    problem : ReachProblem with box safe and target sets
    eval_points : (P, 2) array
        Where values are reported (independent of the computation grid).
    policy : callable as in :func:`rkhs_reach.reach.value_recursion`
    grid : DPGrid, optional

    Returns
    -------
    ValueField
    """
    if getattr(system, "n", None) != 2:
        raise InputError("the grid oracle supports only 2-D systems")
    if not isinstance(disturbance, GaussianDisturbance):
        raise InputError(
            "the grid oracle supports only Gaussian disturbances; use the "
            "Monte Carlo oracle otherwise"
        )
    if disturbance.dim != 2:
        raise InputError("disturbance dimension must be 2")
    safe, target = problem.safe, problem.target
    if not isinstance(safe, BoxSet) or not isinstance(target, BoxSet):
        raise InputError("the grid oracle requires box safe and target sets")
    if grid is None:
        grid = default_dp_grid(problem)
    if np.any(np.array(grid.lower) > np.minimum(safe.lower, target.lower)) or np.any(
        np.array(grid.upper) < np.maximum(safe.upper, target.upper)
    ):
        raise InputError("grid does not cover the safe and target boxes")

    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
    if eval_points.shape[1] != 2:
        raise InputError("evaluation points must be 2-D")
    a = system.dense_a()
    b = system.dense_b()
    m = b.shape[1]
    sd = disturbance.sd
    axes = grid.axes()
    ax1, ax2 = axes
    g1, g2 = np.meshgrid(ax1, ax2, indexing="ij")
    grid_pts = np.column_stack([g1.ravel(), g2.ravel()])
    origin = (ax1[0], ax2[0])
    steps = (ax1[1] - ax1[0], ax2[1] - ax2[0])
    glx, glw = _base_rule(grid.quad_nodes)

    def means_at(pts, k):
        mu = pts @ a.T
        if m > 0 and policy is not None:
            mu = mu + np.atleast_2d(policy(k, pts)) @ b.T
        return mu

    time_invariant = policy is None or getattr(policy, "time_invariant", False)
    mask_grid = safe.contains(grid_pts).astype(np.float64)
    mask_eval = safe.contains(eval_points).astype(np.float64)
    n_steps = problem.horizon
    rows = np.empty((n_steps + 1, eval_points.shape[0]))
    rows[n_steps] = exact_terminal(target.contains(eval_points))
    v_grid = None
    means_grid = means_eval = None
    for k in range(n_steps - 1, -1, -1):
        if means_grid is None or not time_invariant:
            means_grid = means_at(grid_pts, k)
            means_eval = means_at(eval_points, k)
        if k == n_steps - 1:
            exp_grid = _box_hit_probability(means_grid, target, sd)
            exp_eval = _box_hit_probability(means_eval, target, sd)
        else:
            v2d = v_grid.reshape(grid.shape)
            exp_grid = _backend.dp_backup(
                v2d, origin, steps, sd, means_grid, glx, glw
            )
            exp_eval = _backend.dp_backup(
                v2d, origin, steps, sd, means_eval, glx, glw
            )
        rows[k] = exact_step(mask_eval, np.clip(exp_eval, 0.0, 1.0))
        if k > 0:
            v_grid = exact_step(mask_grid, np.clip(exp_grid, 0.0, 1.0))
    return ValueField(points=eval_points, values=rows)


def mc_reach(
    system,
    disturbance,
    problem,
    policy,
    x0s,
    rollouts,
    seed,
    chunk_size=65536,
):
    """Monte Carlo estimate of the reach-avoid probability per start state.

    Simulates ``rollouts`` closed-loop trajectories from each row of
    ``x0s`` and counts those inside the safe set at steps 0 through N-1
    and inside the target at step N. Each start state gets its own
    deterministic random stream derived from ``seed`` and its row index,
    so appending more start states leaves earlier estimates unchanged.

    Returns
    -------
    (values, halfwidths)
        Hit fractions and 95% binomial confidence half-widths, one per
        start state.
    """
    rollouts = int(rollouts)
    if rollouts < 1:
        raise InputError(f"rollouts must be >= 1, got {rollouts}")
    x0s = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
    if x0s.shape[1] != system.n:
        raise InputError(
            f"start states have dimension {x0s.shape[1]}, system has {system.n}"
        )
    n_steps = problem.horizon
    m = getattr(system, "m", 0)
    streams = np.random.SeedSequence(seed).spawn(x0s.shape[0])
    values = np.empty(x0s.shape[0])
    halfwidths = np.empty(x0s.shape[0])
    for p, x0 in enumerate(x0s):
        rng = np.random.default_rng(streams[p])
        hits = 0
        done = 0
        while done < rollouts:
            count = min(chunk_size, rollouts - done)
            states = np.repeat(x0[None, :], count, axis=0)
            alive = np.ones(count, dtype=bool)
            for k in range(n_steps):
                alive &= problem.safe.contains(states)
                controls = policy(k, states) if (m > 0 and policy is not None) else None
                draws = disturbance.draw(rng, count)
                states = system.step(states, controls, draws)
            hits += int(np.count_nonzero(alive & problem.target.contains(states)))
            done += count
        frac = hits / rollouts
        values[p] = frac
        halfwidths[p] = 1.96 * np.sqrt(frac * (1.0 - frac) / rollouts)
    return values, halfwidths
