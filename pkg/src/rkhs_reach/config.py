"""Run configuration: defaults, config-file parsing, and builders.

A config file is flat ``key = value`` text (``#`` comments allowed).
Command-line flags override file values, which override defaults. The
same coercion rules apply to both sources, so ``--horizon 5`` and
``horizon = 5`` in a file behave identically.
"""

import dataclasses
import os

import numpy as np

from .errors import InputError
from .reach import BoxSet, ReachProblem
from .systems import (
    AffinePolicy,
    BetaDisturbance,
    BoxSampler,
    ConstantPolicy,
    CWHSystem,
    GaussianDisturbance,
    IntegratorChain,
    ZeroDisturbance,
    ZeroPolicy,
    cwh_lqr_policy,
    cwh_sets,
)

__all__ = [
    "RunConfig",
    "parse_config_file",
    "apply_overrides",
    "build_system",
    "build_disturbance",
    "build_policy",
    "build_sets",
    "build_problem",
    "default_sample_box",
    "evaluation_points",
    "parse_box",
    "parse_point",
    "parse_control_grid",
    "CWH_SAMPLE_BOX",
]

# Position tube straddling the target, velocities near rest. Transition
# samples for the rendezvous system are drawn here by default.
CWH_SAMPLE_BOX = (-0.9, 0.9, -1.0, -0.1, -0.05, 0.05, -0.05, 0.05)


@dataclasses.dataclass
class RunConfig:
    system: str = "integrator"
    dim: int = 2
    sampling_time: float | None = None
    disturbance: str = "gaussian"
    noise_sd: float | None = None
    beta_alpha: float = 0.5
    beta_beta: float = 0.5
    beta_centered: bool = False
    sigma: float = 0.1
    lam: float = 1.0
    eta: float = 1.0
    normalize_weights: bool = True
    horizon: int = 3
    samples: int = 1024
    seed: int = 0
    policy: str = "zero"
    sample_box: str = ""
    grid: str = "101x101:-1.1,1.1,-1.1,1.1"
    point: str = ""
    points_file: str = ""
    mode: str = "fixed"
    control_grid: str = ""
    safe_box: str = "-1,1"
    target_box: str = "-1,1"
    rollouts: int = 100000
    dp_grid: str = "201x201"
    dp_quad: int = 25


# Config-file spellings that differ from the field name.
_KEY_ALIASES = {"lambda": "lam"}

_OPTIONAL_FLOAT_FIELDS = {"sampling_time", "noise_sd"}
_BOOL_FIELDS = {"normalize_weights", "beta_centered"}


def _field_types():
    # annotations may arrive as type objects or strings depending on how
    # the module is evaluated; normalize to category names
    types = {}
    for field in dataclasses.fields(RunConfig):
        t = field.type
        if t is int or t == "int":
            types[field.name] = "int"
        elif t is float or t == "float":
            types[field.name] = "float"
        else:
            types[field.name] = "str"
    return types


_FIELD_TYPES = _field_types()


def coerce_value(name, raw):
    """Convert the string ``raw`` to the type of config field ``name``."""
    name = _KEY_ALIASES.get(name, name)
    if name not in _FIELD_TYPES:
        raise InputError(f"unknown configuration key: {name}")
    raw = raw.strip()
    if name in _BOOL_FIELDS:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return name, True
        if lowered in ("false", "0", "no", "off"):
            return name, False
        raise InputError(f"{name} must be true or false, got {raw!r}")
    kind = _FIELD_TYPES[name]
    try:
        if name in _OPTIONAL_FLOAT_FIELDS or kind == "float":
            return name, float(raw)
        if kind == "int":
            return name, int(raw)
    except ValueError:
        raise InputError(f"{name} expects a number, got {raw!r}")
    return name, raw


def parse_config_file(path):
    """Parse a flat key=value config file into a dict of coerced values."""
    if not os.path.exists(path):
        raise InputError(f"config file not found: {path}")
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(
                    f"{path}:{lineno}: expected key = value, got {line!r}"
                )
            key, _, raw = line.partition("=")
            try:
                name, value = coerce_value(key.strip(), raw)
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}")
            values[name] = value
    return values


def apply_overrides(cfg, overrides):
    """Apply ``{field: value}`` on top of ``cfg``; None entries are skipped."""
    updates = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, str):
            key, value = coerce_value(key, value)
        else:
            key = _KEY_ALIASES.get(key, key)
        updates[key] = value
    return dataclasses.replace(cfg, **updates)


def validate(cfg):
    if cfg.system not in ("integrator", "cwh"):
        raise InputError(f"system must be integrator or cwh, got {cfg.system!r}")
    if cfg.disturbance not in ("gaussian", "beta", "none"):
        raise InputError(
            f"disturbance must be gaussian, beta, or none, got {cfg.disturbance!r}"
        )
    if cfg.mode not in ("fixed", "max"):
        raise InputError(f"mode must be fixed or max, got {cfg.mode!r}")
    if cfg.dim < 1:
        raise InputError(f"dim must be positive, got {cfg.dim}")
    if cfg.system == "cwh" and cfg.dim not in (2, 4):
        # dim is ignored for the rendezvous system (state is 4-D), but a
        # value other than the default or 4 signals a misconfiguration.
        raise InputError("dim cannot be overridden for the cwh system")
    if cfg.sigma <= 0:
        raise InputError(f"sigma must be positive, got {cfg.sigma}")
    if cfg.lam <= 0:
        raise InputError(f"lambda must be positive, got {cfg.lam}")
    if cfg.eta <= 0:
        raise InputError(f"eta must be positive, got {cfg.eta}")
    if cfg.horizon < 1:
        raise InputError(f"horizon must be at least 1, got {cfg.horizon}")
    if cfg.samples < 1:
        raise InputError(f"samples must be at least 1, got {cfg.samples}")
    if cfg.rollouts < 1:
        raise InputError(f"rollouts must be at least 1, got {cfg.rollouts}")
    if cfg.dp_quad < 2:
        raise InputError(f"dp_quad must be at least 2, got {cfg.dp_quad}")
    if cfg.sampling_time is not None and cfg.sampling_time <= 0:
        raise InputError("sampling_time must be positive")
    if cfg.noise_sd is not None and cfg.noise_sd < 0:
        raise InputError("noise_sd must be nonnegative")
    if cfg.beta_alpha <= 0 or cfg.beta_beta <= 0:
        raise InputError("beta shape parameters must be positive")
    return cfg


def build_system(cfg):
    if cfg.system == "integrator":
        sampling_time = 0.25 if cfg.sampling_time is None else cfg.sampling_time
        return IntegratorChain(cfg.dim, sampling_time=sampling_time)
    sampling_time = 20.0 if cfg.sampling_time is None else cfg.sampling_time
    return CWHSystem(sampling_time=sampling_time)


def build_disturbance(cfg, system):
    n = system.n
    if cfg.disturbance == "none":
        return ZeroDisturbance(n)
    if cfg.disturbance == "beta":
        return BetaDisturbance(
            cfg.beta_alpha, cfg.beta_beta, n, centered=cfg.beta_centered
        )
    if cfg.noise_sd is not None:
        return GaussianDisturbance(np.full(n, cfg.noise_sd))
    if isinstance(system, CWHSystem):
        return system.default_disturbance()
    return GaussianDisturbance(np.full(n, 0.1))


def build_policy(cfg, system, control_dim=None):
    """Build the policy named by ``cfg.policy``.

    ``control_dim`` overrides the system's control dimension when the
    policy must match an externally supplied sample file.
    """
    m = system.m if control_dim is None else control_dim
    name = cfg.policy
    if name == "zero":
        return ZeroPolicy(m)
    if name.startswith("constant:"):
        values = _parse_floats(name[len("constant:") :], "policy constant")
        if len(values) != m:
            raise InputError(
                f"constant policy has {len(values)} entries, control dimension is {m}"
            )
        return ConstantPolicy(np.asarray(values, dtype=np.float64))
    if name == "lqr":
        if not isinstance(system, CWHSystem):
            raise InputError("the lqr policy is only defined for the cwh system")
        return cwh_lqr_policy(system)
    raise InputError(f"unknown policy: {name!r}")


def _parse_floats(text, what):
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}")


def parse_box(text, dim, what):
    """Parse ``lo,hi`` (broadcast) or ``lo1,hi1,...,lon,hin`` into a BoxSet."""
    values = _parse_floats(text, what)
    if len(values) == 2:
        values = values * dim
    if len(values) != 2 * dim:
        raise InputError(
            f"{what}: expected 2 or {2 * dim} numbers for dimension {dim}, "
            f"got {len(values)}"
        )
    lower = np.array(values[0::2], dtype=np.float64)
    upper = np.array(values[1::2], dtype=np.float64)
    return BoxSet(lower, upper)


def parse_point(text, dim, what="point"):
    values = _parse_floats(text, what)
    if len(values) != dim:
        raise InputError(
            f"{what}: expected {dim} coordinates, got {len(values)}"
        )
    return np.asarray(values, dtype=np.float64).reshape(1, dim)


def parse_control_grid(text, control_dim):
    """Parse ``u1a,u1b;u2a,u2b;...`` into an (n_controls, m) array."""
    if not text.strip():
        raise InputError("mode=max requires a control_grid")
    rows = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        values = _parse_floats(chunk, "control_grid")
        if len(values) != control_dim:
            raise InputError(
                f"control_grid entry {chunk!r} has {len(values)} entries, "
                f"control dimension is {control_dim}"
            )
        rows.append(values)
    if not rows:
        raise InputError("control_grid is empty")
    return np.asarray(rows, dtype=np.float64)


def build_sets(cfg, dim):
    """Return ``(safe, target)`` sets for the configured system."""
    if cfg.system == "cwh":
        target, safe = cwh_sets()
        return safe, target
    safe = parse_box(cfg.safe_box, dim, "safe_box")
    target = parse_box(cfg.target_box, dim, "target_box")
    return safe, target


def build_problem(cfg, dim):
    safe, target = build_sets(cfg, dim)
    return ReachProblem(safe=safe, target=target, horizon=cfg.horizon)


def _inflated(box, factor=1.1):
    center = (box.lower + box.upper) / 2.0
    half = (box.upper - box.lower) / 2.0
    return BoxSet(center - factor * half, center + factor * half)


def default_sample_box(cfg, dim):
    """Sampling box for initial states: the safe box inflated by 10%.

    The rendezvous system instead uses a fixed tube around the approach
    corridor, since its safe set is a cone rather than a box.
    """
    if cfg.sample_box:
        return parse_box(cfg.sample_box, dim, "sample_box")
    if cfg.system == "cwh":
        values = list(CWH_SAMPLE_BOX)
        lower = np.array(values[0::2])
        upper = np.array(values[1::2])
        return BoxSet(lower, upper)
    safe = parse_box(cfg.safe_box, dim, "safe_box")
    return _inflated(safe)


def build_sampler(cfg, dim):
    box = default_sample_box(cfg, dim)
    return BoxSampler(box.lower, box.upper)


def parse_grid(text):
    """Parse ``n1xn2:lo1,hi1,lo2,hi2`` into (shape, BoxSet)."""
    head, _, tail = text.partition(":")
    parts = head.lower().split("x")
    if len(parts) != 2:
        raise InputError(f"grid shape must be n1xn2, got {head!r}")
    try:
        shape = (int(parts[0]), int(parts[1]))
    except ValueError:
        raise InputError(f"grid shape must be n1xn2, got {head!r}")
    if shape[0] < 2 or shape[1] < 2:
        raise InputError(f"grid must have at least 2 points per axis, got {head!r}")
    if not tail:
        raise InputError(f"grid must include bounds after a colon, got {text!r}")
    box = parse_box(tail, 2, "grid bounds")
    return shape, box


def grid_points(shape, box):
    ax0 = np.linspace(box.lower[0], box.upper[0], shape[0])
    ax1 = np.linspace(box.lower[1], box.upper[1], shape[1])
    g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
    return np.column_stack([g0.ravel(), g1.ravel()])


def evaluation_points(cfg, dim):
    """Resolve where to evaluate: points file, single point, or 2-D grid."""
    if cfg.points_file:
        points, _, _ = read_value_table_points(cfg.points_file, dim)
        return points
    if cfg.point:
        return parse_point(cfg.point, dim)
    if dim != 2:
        raise InputError(
            "grid evaluation is 2-D only; pass point=... or points_file=... "
            f"for dimension {dim}"
        )
    shape, box = parse_grid(cfg.grid)
    return grid_points(shape, box)


def read_value_table_points(path, dim):
    """Read just the coordinate columns from any table with x headers."""
    from .io import _numbered_block, _parse_table

    names, data, metadata = _parse_table(path)
    n = _numbered_block(names, "x", 0)
    if n == 0:
        raise InputError(f"{path}: header must start with x1")
    if n != dim:
        raise InputError(f"{path}: points are {n}-D, expected {dim}-D")
    if data.shape[0] == 0:
        raise InputError(f"{path}: no points")
    return data[:, :n], None, metadata
