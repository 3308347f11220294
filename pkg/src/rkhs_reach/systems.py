"""Benchmark dynamics, disturbance samplers, policies, and sample generation.

Two discrete-time linear systems ship with the package: a chain of
integrators of arbitrary dimension, and the in-plane relative motion of a
chaser spacecraft about a circular-orbit target (Clohessy-Wiltshire
dynamics) discretized exactly under zero-order hold.
"""

import math
import warnings

import numpy as np
from scipy.linalg import expm, solve_discrete_are
from scipy.special import gammaln

from . import _backend
from .embedding import TransitionSample
from .errors import InputError, NumericalError
from .reach import PredicateSet

__all__ = [
    "IntegratorChain",
    "CWHSystem",
    "GaussianDisturbance",
    "BetaDisturbance",
    "ZeroDisturbance",
    "BoxSampler",
    "ZeroPolicy",
    "ConstantPolicy",
    "AffinePolicy",
    "cwh_lqr_policy",
    "cwh_sets",
    "generate_transitions",
]

EARTH_MU = 3.986004418e14  # m^3 / s^2
EARTH_RADIUS = 6371.0e3  # m


class IntegratorChain:
    """Discrete n-dimensional integrator chain with control on the last state.

    State component i is the sampled integral of component i+1, and the
    scalar control enters through the final component. The state matrix
    is upper-triangular Toeplitz with ``T^j / j!`` on the j-th
    superdiagonal and the input vector has ``T^(n-i) / (n-i)!`` in row i
    (0-indexed). Entries beyond float range underflow to zero, which for
    sub-second sampling times makes the matrix effectively banded; the
    matrix apply exploits that and never materializes A, so dimensions in
    the tens of thousands stay cheap.
    """

    name = "integrator"

    def __init__(self, n, sampling_time=0.25):
        n = int(n)
        if n < 1:
            raise InputError(f"dimension must be >= 1, got {n}")
        sampling_time = float(sampling_time)
        if not np.isfinite(sampling_time) or sampling_time <= 0.0:
            raise InputError(f"sampling time must be positive, got {sampling_time}")
        self.n = n
        self.m = 1
        self.sampling_time = sampling_time
        log_t = math.log(sampling_time)
        j = np.arange(n)
        with np.errstate(under="ignore"):
            coeffs = np.exp(j * log_t - gammaln(j + 1.0))
        nonzero = np.nonzero(coeffs)[0]
        self._coeffs = coeffs[: nonzero[-1] + 1]
        powers = n - j  # row i couples to the control through T^(n-i)/(n-i)!
        with np.errstate(under="ignore"):
            self._b = np.exp(powers * log_t - gammaln(powers + 1.0))

    @property
    def bandwidth(self):
        """Number of nonzero superdiagonals plus one."""
        return self._coeffs.shape[0]

    def dense_a(self):
        if self.n > 4096:
            raise InputError("dense state matrix is limited to n <= 4096")
        a = np.zeros((self.n, self.n))
        for j in range(min(self.bandwidth, self.n)):
            idx = np.arange(self.n - j)
            a[idx, idx + j] = self._coeffs[j]
        return a

    def dense_b(self):
        return self._b[:, None].copy()

    def apply_a(self, states):
        """Row-wise product with the state matrix, via the banded form."""
        return _backend.chain_apply(self._coeffs, states)

    def step(self, states, controls, disturbances):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        out = self.apply_a(states)
        if controls is not None and np.size(controls) > 0:
            controls = np.atleast_2d(np.asarray(controls, dtype=np.float64))
            if controls.shape != (states.shape[0], 1):
                raise InputError(
                    f"controls must have shape {(states.shape[0], 1)}, "
                    f"got {controls.shape}"
                )
            out += controls @ self._b[None, :]
        if disturbances is not None:
            out += disturbances
        return out


class CWHSystem:
    """In-plane spacecraft relative motion, exactly discretized.

    State is ``(x, y, vx, vy)`` in meters and meters per second in the
    target's rotating frame; control is a force in newtons, bounded per
    axis by ``control_bound``. The continuous equations

        ax = 3 w^2 x + 2 w vy + Fx / mass
        ay = -2 w vx + Fy / mass

    are discretized in closed form under zero-order hold, and the result
    is checked at construction against a matrix-exponential reference.
    """

    name = "cwh"
    n = 4
    m = 2

    def __init__(
        self,
        sampling_time=20.0,
        orbital_rate=None,
        mass=300.0,
        orbit_altitude=850.0e3,
        control_bound=0.1,
    ):
        sampling_time = float(sampling_time)
        if sampling_time <= 0.0:
            raise InputError("sampling time must be positive")
        mass = float(mass)
        if mass <= 0.0:
            raise InputError("mass must be positive")
        if orbital_rate is None:
            semi_major = EARTH_RADIUS + float(orbit_altitude)
            orbital_rate = math.sqrt(EARTH_MU / semi_major**3)
        orbital_rate = float(orbital_rate)
        if orbital_rate <= 0.0:
            raise InputError("orbital rate must be positive")
        self.sampling_time = sampling_time
        self.orbital_rate = orbital_rate
        self.mass = mass
        self.control_bound = float(control_bound)

        w = orbital_rate
        t = sampling_time
        s = math.sin(w * t)
        c = math.cos(w * t)
        self._a = np.array(
            [
                [4.0 - 3.0 * c, 0.0, s / w, 2.0 * (1.0 - c) / w],
                [
                    6.0 * (s - w * t),
                    1.0,
                    -2.0 * (1.0 - c) / w,
                    (4.0 * s - 3.0 * w * t) / w,
                ],
                [3.0 * w * s, 0.0, c, 2.0 * s],
                [-6.0 * w * (1.0 - c), 0.0, -2.0 * s, 4.0 * c - 3.0],
            ]
        )
        self._b = (
            np.array(
                [
                    [(1.0 - c) / w**2, 2.0 * (t - s / w) / w],
                    [
                        -2.0 * (t - s / w) / w,
                        4.0 * (1.0 - c) / w**2 - 1.5 * t**2,
                    ],
                    [s / w, 2.0 * (1.0 - c) / w],
                    [-2.0 * (1.0 - c) / w, 4.0 * s / w - 3.0 * t],
                ]
            )
            / mass
        )
        self._verify_discretization()

    def _verify_discretization(self):
        w = self.orbital_rate
        a_cont = np.array(
            [
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [3.0 * w * w, 0.0, 0.0, 2.0 * w],
                [0.0, 0.0, -2.0 * w, 0.0],
            ]
        )
        b_cont = np.array(
            [[0.0, 0.0], [0.0, 0.0], [1.0 / self.mass, 0.0], [0.0, 1.0 / self.mass]]
        )
        block = np.zeros((6, 6))
        block[:4, :4] = a_cont
        block[:4, 4:] = b_cont
        phi = expm(block * self.sampling_time)
        err_a = np.abs(phi[:4, :4] - self._a).max()
        err_b = np.abs(phi[:4, 4:] - self._b).max()
        if err_a > 1e-10 or err_b > 1e-10:
            raise NumericalError(
                f"closed-form discretization disagrees with the matrix "
                f"exponential (A err {err_a:.2e}, B err {err_b:.2e})"
            )

    def default_disturbance(self):
        """Diagonal Gaussian acting on the discrete state update."""
        return GaussianDisturbance.from_covariance_diagonal(
            [1e-4, 1e-4, 5e-8, 5e-8]
        )

    def dense_a(self):
        return self._a.copy()

    def dense_b(self):
        return self._b.copy()

    def step(self, states, controls, disturbances):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != 4:
            raise InputError("CWH states must have 4 components")
        out = states @ self._a.T
        if controls is not None and np.size(controls) > 0:
            controls = np.atleast_2d(np.asarray(controls, dtype=np.float64))
            if controls.shape != (states.shape[0], 2):
                raise InputError(
                    f"controls must have shape {(states.shape[0], 2)}, "
                    f"got {controls.shape}"
                )
            if np.any(np.abs(controls) > self.control_bound):
                warnings.warn(
                    f"controls exceed the declared bound {self.control_bound}",
                    stacklevel=2,
                )
            out += controls @ self._b.T
        if disturbances is not None:
            out += disturbances
        return out


class GaussianDisturbance:
    """Independent zero-mean Gaussian noise per state component."""

    kind = "gaussian"

    def __init__(self, sd):
        sd = np.atleast_1d(np.asarray(sd, dtype=np.float64))
        if sd.ndim != 1 or np.any(sd <= 0.0) or not np.all(np.isfinite(sd)):
            raise InputError("standard deviations must be positive and finite")
        self.sd = sd

    @classmethod
    def from_covariance_diagonal(cls, diag):
        diag = np.atleast_1d(np.asarray(diag, dtype=np.float64))
        if np.any(diag <= 0.0):
            raise InputError("covariance diagonal must be positive")
        return cls(np.sqrt(diag))

    @property
    def dim(self):
        return self.sd.shape[0]

    def draw(self, rng, count):
        return rng.normal(0.0, self.sd, size=(count, self.dim))


class BetaDisturbance:
    """Independent Beta-distributed noise per component, support [0, 1].

    The raw Beta distribution has mean alpha / (alpha + beta), so the
    disturbance carries positive drift unless ``centered`` shifts the
    mean to zero.
    """

    kind = "beta"

    def __init__(self, alpha, beta, dim, centered=False):
        alpha = float(alpha)
        beta = float(beta)
        if alpha <= 0.0 or beta <= 0.0:
            raise InputError("Beta shape parameters must be positive")
        self.alpha = alpha
        self.beta = beta
        self.dim = int(dim)
        if self.dim < 1:
            raise InputError("disturbance dimension must be >= 1")
        self.centered = bool(centered)

    def draw(self, rng, count):
        draws = rng.beta(self.alpha, self.beta, size=(count, self.dim))
        if self.centered:
            draws -= self.alpha / (self.alpha + self.beta)
        return draws


class ZeroDisturbance:
    """Degenerate noise-free disturbance, a testing hook."""

    kind = "none"

    def __init__(self, dim):
        self.dim = int(dim)

    def draw(self, rng, count):
        return np.zeros((count, self.dim))


class BoxSampler:
    """Uniform sampler over an axis-aligned box."""

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        if lower.shape != upper.shape or np.any(lower > upper):
            raise InputError("sampler box bounds are inconsistent")
        self.lower = lower
        self.upper = upper

    @property
    def dim(self):
        return self.lower.shape[0]

    def draw(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))


class ZeroPolicy:
    """Zero control at every state and step."""

    time_invariant = True

    def __init__(self, control_dim):
        self.control_dim = int(control_dim)
        self.description = "zero"

    def __call__(self, k, states):
        return np.zeros((np.atleast_2d(states).shape[0], self.control_dim))


class ConstantPolicy:
    """The same control vector at every state and step."""

    time_invariant = True

    def __init__(self, control):
        self.control = np.atleast_1d(np.asarray(control, dtype=np.float64))
        self.description = "constant:" + ",".join(
            format(v, ".17g") for v in self.control
        )

    def __call__(self, k, states):
        count = np.atleast_2d(states).shape[0]
        return np.tile(self.control, (count, 1))


class AffinePolicy:
    """Saturated linear state feedback ``u = clip(offset - gain @ x)``."""

    time_invariant = True

    def __init__(self, gain, offset=None, lower=None, upper=None):
        self.gain = np.atleast_2d(np.asarray(gain, dtype=np.float64))
        m = self.gain.shape[0]
        self.offset = (
            np.zeros(m)
            if offset is None
            else np.atleast_1d(np.asarray(offset, dtype=np.float64))
        )
        if self.offset.shape != (m,):
            raise InputError("offset length must match gain rows")
        self.lower = lower
        self.upper = upper
        self.description = f"affine-feedback({m}x{self.gain.shape[1]})"

    def __call__(self, k, states):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        u = self.offset - states @ self.gain.T
        if self.lower is not None or self.upper is not None:
            np.clip(u, self.lower, self.upper, out=u)
        return u


def cwh_lqr_policy(system, state_weight=None, control_weight=None):
    """Stabilizing feedback for the CWH system from a discrete Riccati solve.

    Weights default to penalizing velocity error more strongly than
    position error, which produces gentle approaches that respect the
    small force bound. Controls saturate at the system's declared bound.
    """
    if not isinstance(system, CWHSystem):
        raise InputError("cwh_lqr_policy requires a CWHSystem")
    q = np.diag([1.0, 1.0, 1e3, 1e3]) if state_weight is None else state_weight
    r = np.eye(2) * 1e4 if control_weight is None else control_weight
    a, b = system.dense_a(), system.dense_b()
    p = solve_discrete_are(a, b, q, r)
    gain = np.linalg.solve(r + b.T @ p @ b, b.T @ p @ a)
    bound = system.control_bound
    return AffinePolicy(gain, lower=-bound, upper=bound)


def cwh_sets():
    """Target and safe sets of the rendezvous benchmark.

    The target is a small docking box just below the origin with tight
    velocity bounds (strict inequalities on the approach axis); the safe
    set is the line-of-sight cone ``|x| < |y|`` with looser velocity
    bounds. Returned as ``(target, safe)``.
    """

    def in_target(z):
        return (
            (np.abs(z[:, 0]) <= 0.1)
            & (z[:, 1] > -0.1)
            & (z[:, 1] < 0.0)
            & (np.abs(z[:, 2]) <= 0.01)
            & (np.abs(z[:, 3]) <= 0.01)
        )

    def in_safe(z):
        return (
            (np.abs(z[:, 0]) < np.abs(z[:, 1]))
            & (np.abs(z[:, 2]) <= 0.05)
            & (np.abs(z[:, 3]) <= 0.05)
        )

    target = PredicateSet(in_target, dim=4, description="docking box")
    safe = PredicateSet(in_safe, dim=4, description="line-of-sight cone")
    return target, safe


def generate_transitions(
    system, policy, state_sampler, disturbance, count, seed, metadata=None
):
    """Draw one-step transitions ``(x_i, u_i) -> y_i`` reproducibly.

    Start states come from ``state_sampler``, controls from the policy at
    step 0, and successors from one system step under the disturbance.
    The draw order (states first, then disturbances) is fixed, so equal
    arguments give bit-identical samples.
    """
    count = int(count)
    if count < 1:
        raise InputError(f"sample count must be >= 1, got {count}")
    if state_sampler.dim != system.n:
        raise InputError(
            f"state sampler dimension {state_sampler.dim} does not match "
            f"system dimension {system.n}"
        )
    if disturbance.dim != system.n:
        raise InputError(
            f"disturbance dimension {disturbance.dim} does not match "
            f"system dimension {system.n}"
        )
    rng = np.random.default_rng(seed)
    states = state_sampler.draw(rng, count)
    controls = policy(0, states)
    draws = disturbance.draw(rng, count)
    successors = system.step(states, controls, draws)
    meta = {
        "system": system.name,
        "dim": str(system.n),
        "seed": str(seed),
        "count": str(count),
        "policy": getattr(policy, "description", type(policy).__name__),
        "disturbance": disturbance.kind,
    }
    if metadata:
        meta.update(metadata)
    return TransitionSample(
        states=states, controls=controls, successors=successors, metadata=meta
    )
