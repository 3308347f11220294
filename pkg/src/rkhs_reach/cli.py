"""Command-line interface.

Subcommands:

``generate``
    Draw one-step transitions from a built-in system and write them to
    CSV.
``reach``
    Fit the kernel estimator on a transition CSV and run the backward
    recursion at the requested evaluation points.
``oracle-dp``
    Dense-grid reference recursion (2-D Gaussian problems only).
``oracle-mc``
    Monte Carlo reference rollouts.
``compare``
    Point-by-point error statistics between two value tables.
``bench-dims``
    End-to-end timing of fit plus recursion across state dimensions.

Every subcommand that runs numerics accepts ``--config FILE`` plus
per-key override flags; see :mod:`rkhs_reach.config`. Exit codes: 0 on
success, 2 for configuration problems, 3 for numerical failures, 4 for
file-format and IO problems.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from . import __version__, _backend
from .config import (
    RunConfig,
    apply_overrides,
    build_disturbance,
    build_policy,
    build_sampler,
    build_sets,
    build_system,
    evaluation_points,
    parse_box,
    parse_config_file,
    parse_control_grid,
    validate,
)
from .embedding import Embedding
from .errors import FileFormatError, InputError, NumericalError
from .io import (
    read_transitions_csv,
    read_value_table,
    write_mc_csv,
    write_table,
    write_transitions_csv,
    write_values_csv,
)
from .kernels import RBFKernel
from .oracle import default_dp_grid, dp_reach, mc_reach
from .reach import ReachProblem, value_recursion, value_recursion_max
from .systems import generate_transitions

__all__ = ["main"]

# (flag, config field); every value is passed as text and coerced by the
# same rules as config-file entries
_CONFIG_FLAGS = [
    ("--system", "system"),
    ("--dim", "dim"),
    ("--sampling-time", "sampling_time"),
    ("--disturbance", "disturbance"),
    ("--noise-sd", "noise_sd"),
    ("--beta-alpha", "beta_alpha"),
    ("--beta-beta", "beta_beta"),
    ("--beta-centered", "beta_centered"),
    ("--sigma", "sigma"),
    ("--lambda", "lam"),
    ("--eta", "eta"),
    ("--normalize-weights", "normalize_weights"),
    ("--horizon", "horizon"),
    ("--samples", "samples"),
    ("--seed", "seed"),
    ("--policy", "policy"),
    ("--sample-box", "sample_box"),
    ("--grid", "grid"),
    ("--point", "point"),
    ("--points-file", "points_file"),
    ("--mode", "mode"),
    ("--control-grid", "control_grid"),
    ("--safe-box", "safe_box"),
    ("--target-box", "target_box"),
    ("--rollouts", "rollouts"),
    ("--dp-grid", "dp_grid"),
    ("--dp-quad", "dp_quad"),
]


def _add_config_args(parser):
    parser.add_argument(
        "--config", metavar="FILE", help="key = value configuration file"
    )
    group = parser.add_argument_group("configuration overrides")
    for flag, name in _CONFIG_FLAGS:
        group.add_argument(flag, dest=name, metavar="V", default=None)


def _load_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = apply_overrides(cfg, parse_config_file(args.config))
    overrides = {}
    for _, name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return validate(apply_overrides(cfg, overrides))


def _embedding_metadata(cfg, sample):
    return {
        "samples": str(sample.count),
        "sigma": format(cfg.sigma, ".17g"),
        "lambda": format(cfg.lam, ".17g"),
        "horizon": str(cfg.horizon),
        "mode": cfg.mode,
        "backend": _backend.active_backend(),
    }


def _print_summary(label, values):
    print(
        f"{label} min={values.min():.6f} mean={values.mean():.6f} "
        f"max={values.max():.6f} points={values.shape[0]}"
    )


def _cmd_generate(args):
    cfg = _load_config(args)
    system = build_system(cfg)
    disturbance = build_disturbance(cfg, system)
    policy = build_policy(cfg, system)
    sampler = build_sampler(cfg, system.n)
    sample = generate_sample(cfg, system, disturbance, policy, sampler)
    write_transitions_csv(args.out, sample)
    print(
        f"wrote {sample.count} transitions ({sample.state_dim}-D state, "
        f"{sample.control_dim}-D control, seed {cfg.seed}) to {args.out}"
    )
    return 0


def generate_sample(cfg, system, disturbance, policy, sampler):
    return generate_transitions(
        system,
        policy,
        sampler,
        disturbance,
        cfg.samples,
        cfg.seed,
        metadata={"sampling_time": format(system.sampling_time, ".17g")},
    )


def _cmd_reach(args):
    cfg = _load_config(args)
    sample = read_transitions_csv(args.sample_file)
    n = sample.state_dim
    safe, target = build_sets(cfg, n)
    problem = ReachProblem(safe=safe, target=target, horizon=cfg.horizon)
    points = evaluation_points(cfg, n)
    kernel = RBFKernel(cfg.sigma)
    _backend.warmup()
    t0 = time.perf_counter()
    emb = Embedding(
        sample,
        kernel,
        cfg.lam,
        eta=cfg.eta,
        normalize_weights=cfg.normalize_weights,
    )
    fit_seconds = time.perf_counter() - t0
    t0 = time.perf_counter()
    if cfg.mode == "max":
        control_grid = parse_control_grid(cfg.control_grid, sample.control_dim)
        field = value_recursion_max(emb, problem, points, control_grid)
    else:
        system = build_system(cfg)
        policy = build_policy(cfg, system, control_dim=sample.control_dim)
        field = value_recursion(emb, problem, points, policy)
    recursion_seconds = time.perf_counter() - t0
    if args.out:
        write_values_csv(args.out, field, _embedding_metadata(cfg, sample))
    print(
        f"fit_seconds={fit_seconds:.3f} recursion_seconds={recursion_seconds:.3f} "
        f"backend={_backend.active_backend()}"
    )
    if args.summary:
        _print_summary("v0", field.values[0])
    return 0


def _parse_shape(text):
    parts = text.lower().split("x")
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError:
        raise InputError(f"grid shape must be like 201x201, got {text!r}")
    if len(shape) != 2 or any(s < 2 for s in shape):
        raise InputError(f"grid shape must be like 201x201, got {text!r}")
    return shape


def _cmd_oracle_dp(args):
    cfg = _load_config(args)
    system = build_system(cfg)
    disturbance = build_disturbance(cfg, system)
    safe, target = build_sets(cfg, system.n)
    problem = ReachProblem(safe=safe, target=target, horizon=cfg.horizon)
    points = evaluation_points(cfg, system.n)
    policy = build_policy(cfg, system)
    grid = default_dp_grid(
        problem, shape=_parse_shape(cfg.dp_grid), quad_nodes=cfg.dp_quad
    )
    _backend.warmup()
    t0 = time.perf_counter()
    field = dp_reach(system, disturbance, problem, points, policy, grid)
    seconds = time.perf_counter() - t0
    if args.out:
        metadata = {
            "oracle": "dp",
            "dp_grid": cfg.dp_grid,
            "dp_quad": str(cfg.dp_quad),
            "horizon": str(cfg.horizon),
        }
        write_values_csv(args.out, field, metadata)
    print(f"seconds={seconds:.3f} backend={_backend.active_backend()}")
    if args.summary:
        _print_summary("v0", field.values[0])
    return 0


def _cmd_oracle_mc(args):
    cfg = _load_config(args)
    system = build_system(cfg)
    disturbance = build_disturbance(cfg, system)
    safe, target = build_sets(cfg, system.n)
    problem = ReachProblem(safe=safe, target=target, horizon=cfg.horizon)
    points = evaluation_points(cfg, system.n)
    policy = build_policy(cfg, system)
    t0 = time.perf_counter()
    values, halfwidths = mc_reach(
        system, disturbance, problem, policy, points, cfg.rollouts, cfg.seed
    )
    seconds = time.perf_counter() - t0
    if args.out:
        metadata = {
            "oracle": "mc",
            "rollouts": str(cfg.rollouts),
            "seed": str(cfg.seed),
            "horizon": str(cfg.horizon),
        }
        write_mc_csv(args.out, points, values, halfwidths, metadata)
    print(f"seconds={seconds:.3f} rollouts={cfg.rollouts}")
    if args.summary:
        _print_summary("value", values)
        print(f"halfwidth mean={halfwidths.mean():.6f} max={halfwidths.max():.6f}")
    return 0


def _cmd_compare(args):
    points_a, values_a, _ = read_value_table(args.table_a)
    points_b, values_b, _ = read_value_table(args.table_b)
    if points_a.shape != points_b.shape or not np.array_equal(points_a, points_b):
        raise InputError(
            "the two tables evaluate different point sets; regenerate them "
            "with matching --grid/--point arguments"
        )
    err = np.abs(values_a - values_b)
    box = parse_box(args.safe_box, points_a.shape[1], "safe-box")
    interior = np.all(
        (points_a > box.lower) & (points_a < box.upper), axis=1
    )
    line = (
        f"points={err.shape[0]} max_error={err.max():.6f} "
        f"mean_error={err.mean():.6f}"
    )
    if interior.any():
        line += f" interior_max_error={err[interior].max():.6f}"
    else:
        line += " interior_max_error=nan"
    print(line)
    if args.out:
        n = points_a.shape[1]
        names = [f"x{i + 1}" for i in range(n)] + ["value_a", "value_b", "abs_error"]
        rows = np.column_stack([points_a, values_a, values_b, err])
        write_table(args.out, names, rows)
    return 0


def _cmd_bench_dims(args):
    cfg = _load_config(args)
    if cfg.system != "integrator":
        raise InputError("bench-dims supports only the integrator system")
    try:
        dims = [int(d) for d in args.dims.split(",") if d.strip()]
    except ValueError:
        raise InputError(f"--dims expects comma-separated integers, got {args.dims!r}")
    if not dims or any(d < 1 for d in dims):
        raise InputError(f"--dims entries must be positive, got {args.dims!r}")
    if args.repeats < 1:
        raise InputError("--repeats must be at least 1")
    kernel = RBFKernel(cfg.sigma)
    _backend.warmup()
    rows = []
    for n in dims:
        cfg_n = apply_overrides(cfg, {"dim": n})
        system = build_system(cfg_n)
        disturbance = build_disturbance(cfg_n, system)
        policy = build_policy(cfg_n, system)
        sampler = build_sampler(cfg_n, n)
        sample = generate_sample(cfg_n, system, disturbance, policy, sampler)
        safe, target = build_sets(cfg_n, n)
        problem = ReachProblem(safe=safe, target=target, horizon=cfg.horizon)
        x0 = np.zeros((1, n))
        times = []
        value = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            emb = Embedding(
                sample,
                kernel,
                cfg.lam,
                eta=cfg.eta,
                normalize_weights=cfg.normalize_weights,
            )
            field = value_recursion(emb, problem, x0, policy)
            times.append(time.perf_counter() - t0)
            value = field.values[0, 0]
        med = statistics.median(times)
        rows.append((float(n), med, value))
        print(
            f"n={n} seconds={med:.3f} value={value:.6f} "
            f"(median of {args.repeats}, backend={_backend.active_backend()})"
        )
    if args.out:
        write_table(args.out, ["n", "seconds", "value"], rows, int_columns=(0,))
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rkhs-reach",
        description=(
            "Kernel-based reach-avoid probability estimation from sampled "
            "transitions, with grid and Monte Carlo reference oracles."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw transitions and write a sample CSV")
    _add_config_args(p)
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser(
        "reach", help="fit the estimator on a sample CSV and run the recursion"
    )
    _add_config_args(p)
    p.add_argument("--sample-file", required=True, metavar="CSV")
    p.add_argument("--out", metavar="CSV")
    p.add_argument("--summary", action="store_true", help="print v0 statistics")
    p.set_defaults(func=_cmd_reach)

    p = sub.add_parser(
        "oracle-dp", help="dense-grid reference values (2-D Gaussian only)"
    )
    _add_config_args(p)
    p.add_argument("--out", metavar="CSV")
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=_cmd_oracle_dp)

    p = sub.add_parser("oracle-mc", help="Monte Carlo reference values")
    _add_config_args(p)
    p.add_argument("--out", metavar="CSV")
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=_cmd_oracle_mc)

    p = sub.add_parser(
        "compare", help="error statistics between two value tables"
    )
    p.add_argument("table_a", metavar="A.csv")
    p.add_argument("table_b", metavar="B.csv")
    p.add_argument(
        "--safe-box",
        default="-1,1",
        metavar="BOX",
        help="box whose strict interior defines interior_max_error",
    )
    p.add_argument("--out", metavar="CSV", help="write per-point errors")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser(
        "bench-dims", help="time fit plus recursion across state dimensions"
    )
    _add_config_args(p)
    p.add_argument("--dims", required=True, metavar="N1,N2,...")
    p.add_argument("--repeats", type=int, default=3, metavar="R")
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=_cmd_bench_dims)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except FileFormatError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
