"""Conditional distribution embeddings estimated from sampled transitions.

Given transitions ``(x_i, u_i) -> y_i`` drawn from a stochastic system,
the estimator solves a kernel ridge regression in closed form so that the
conditional expectation of any function ``f`` of the successor state is
approximated by a weighted sum of its sampled values:

    E[f(y) | x, u]  ~=  sum_i  w_i(x, u) * f(y_i)

The weight vector is ``w(x, u) = scale * (G + lam*M*I)^{-1} k(x, u)``,
where ``G`` is the Gram matrix over the joint sample points, ``k`` the
kernel column at the query, and ``M`` the sample count. ``scale`` is
either the constant ``eta`` (raw mode) or chosen per query so the weights
sum to one (normalized mode, the default). Raw weights shrink toward zero
as the ridge grows, which biases expectation estimates toward zero;
normalization removes that systematic shrinkage and is what makes the
estimates usable as probabilities.

Normalized mode also clips negative solve outputs to zero before
rescaling, so each weight vector is a convex combination of the sampled
values. That keeps every estimate inside the range of ``f`` and makes the
estimator monotone: raising ``f`` pointwise can never lower an estimate.
Monotonicity is what lets a larger candidate-control set only improve the
estimated safety values. Raw mode keeps the signed solve output.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InputError, NumericalError
from .kernels import RBFKernel

__all__ = ["TransitionSample", "Embedding"]


def _as_matrix(name, arr, rows=None):
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got ndim={a.ndim}")
    if rows is not None and a.shape[0] != rows:
        raise InputError(
            f"{name} has {a.shape[0]} rows, expected {rows} to match states"
        )
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class TransitionSample:
    """A set of sampled one-step transitions.

    Fields
    ------
    states : (M, n) array
        Where each transition started.
    controls : (M, m) array
        Control applied at each start state; m may be 0 for uncontrolled
        sampling.
    successors : (M, n) array
        Observed next states.
    metadata : dict
        Free-form record of how the sample was drawn (system name, seed,
        policy description).
    """

    states: np.ndarray
    controls: np.ndarray
    successors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        states = _as_matrix("states", self.states)
        if states.shape[0] < 1:
            raise InputError("sample set must contain at least one transition")
        m_rows = states.shape[0]
        controls = np.asarray(self.controls, dtype=np.float64)
        if controls.ndim == 1:
            controls = controls[:, None]
        if controls.size == 0:
            controls = controls.reshape(m_rows, 0)
        controls = _as_matrix("controls", controls, rows=m_rows)
        successors = _as_matrix("successors", self.successors, rows=m_rows)
        if successors.shape[1] != states.shape[1]:
            raise InputError(
                f"successors have dimension {successors.shape[1]}, "
                f"states have {states.shape[1]}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "successors", successors)

    @property
    def count(self):
        return self.states.shape[0]

    @property
    def state_dim(self):
        return self.states.shape[1]

    @property
    def control_dim(self):
        return self.controls.shape[1]

    def joint(self):
        """Sample points in the joint state-control space."""
        if self.control_dim == 0:
            return self.states
        return np.hstack([self.states, self.controls])


class Embedding:
    """Fitted conditional-expectation estimator over a transition sample.

    Parameters
    ----------
    sample : TransitionSample
    kernel : RBFKernel
        Kernel on the joint state-control space.
    lam : float
        Ridge parameter; the regularizer added to the Gram matrix is
        ``lam * M * I``.
    eta : float
        Constant weight scale used in raw mode. Ignored when
        ``normalize_weights`` is true.
    normalize_weights : bool
        When true (default), negative weights are clipped to zero and each
        weight vector is rescaled to sum to 1 (a convex combination).
    """

    def __init__(self, sample, kernel, lam, eta=1.0, normalize_weights=True):
        if not isinstance(sample, TransitionSample):
            raise InputError("sample must be a TransitionSample")
        if not isinstance(kernel, RBFKernel):
            raise InputError("kernel must be an RBFKernel")
        lam = float(lam)
        if not np.isfinite(lam) or lam <= 0.0:
            raise InputError(f"ridge parameter must be positive, got {lam}")
        eta = float(eta)
        if not np.isfinite(eta) or eta <= 0.0:
            raise InputError(f"weight scale eta must be positive, got {eta}")
        self.sample = sample
        self.kernel = kernel
        self.lam = lam
        self.eta = eta
        self.normalize_weights = bool(normalize_weights)
        self._joint = sample.joint()
        self.gram = kernel.gram(self._joint)
        m = sample.count
        reg = self.gram + (lam * m) * np.eye(m)
        try:
            self._factor = cho_factor(reg, lower=True)
        except np.linalg.LinAlgError as exc:  # cannot happen for lam*M > 0
            raise NumericalError(f"ridge system factorization failed: {exc}")
        self._reg = reg

    @property
    def count(self):
        return self.sample.count

    def _joint_queries(self, states, controls):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.sample.state_dim:
            raise InputError(
                f"query states have dimension {states.shape[1]}, "
                f"sample has {self.sample.state_dim}"
            )
        m = self.sample.control_dim
        if m == 0:
            if controls is not None and np.size(controls) != 0:
                raise InputError("sample has no control columns, got controls")
            return states
        if controls is None:
            raise InputError(f"sample has {m} control columns, controls required")
        controls = np.atleast_2d(np.asarray(controls, dtype=np.float64))
        if controls.shape != (states.shape[0], m):
            raise InputError(
                f"controls must have shape {(states.shape[0], m)}, "
                f"got {controls.shape}"
            )
        return np.hstack([states, controls])

    def weights(self, states, controls=None):
        """Weight vectors for a batch of queries, as an (M, P) matrix.

        Column p holds the weights for query p; an expectation estimate
        is the dot product of a column with the function's values at the
        sampled successors.
        """
        queries = self._joint_queries(states, controls)
        k = self.kernel.cross(self._joint, queries)
        w = cho_solve(self._factor, k)
        if self.normalize_weights:
            np.maximum(w, 0.0, out=w)
            colsum = w.sum(axis=0)
            nonzero = colsum != 0.0
            w[:, nonzero] /= colsum[nonzero]
        elif self.eta != 1.0:
            w *= self.eta
        if not np.all(np.isfinite(w)):
            raise NumericalError("weight computation produced non-finite values")
        return w

    def expectation(self, f_at_successors, states, controls=None):
        """Estimated ``E[f(y) | x, u]`` for each query row.

        ``f_at_successors[i]`` must be ``f`` evaluated at the i-th sampled
        successor. Normalized-mode estimates stay inside the range of
        ``f``; raw-mode estimates are unclamped weighted sums.
        """
        f = np.asarray(f_at_successors, dtype=np.float64)
        if f.shape != (self.count,):
            raise InputError(
                f"function values must have shape ({self.count},), got {f.shape}"
            )
        return f @ self.weights(states, controls)

    def solve_residual(self, v):
        """Relative residual of the regularized solve on right-hand side v."""
        v = np.asarray(v, dtype=np.float64)
        x = cho_solve(self._factor, v)
        return float(np.linalg.norm(self._reg @ x - v) / np.linalg.norm(v))
