"""Command-line experiment runner.

Usage::

    ladpm sample --config exp.json [--seed S] [--out DIR] [--threads K]
    ladpm sweep-lambda --config exp.json [--lambdas 0,0.1,0.2]
    ladpm convergence --config exp.json [--steps 10,20,40,80]
    ladpm validate-theory [--config exp.json] [--trials T]

Exit codes: 0 success, 2 config error, 3 numeric/invariant failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_LA_GRID,
    StepParams,
    expected_sq_error,
    optimal_lambda,
    parameter_grid,
    se_multiplier,
    simulate_assumption1,
    theory_checks,
    xhat_mse_trace,
)
from .config import DEFAULT_TRIALS, THEORY_AXES, ExperimentConfig
from .errors import ConfigError, InvariantError, LadpmError
from .io import write_json, write_rows, write_samples_binary, write_samples_csv, write_trajectory_csv
from .metrics import moment_report, sliced_wasserstein
from .rng import block_normals, stream
from .samplers import run_sampler

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# stream domain for sliced-W projection directions
_PROJECTION_DOMAIN = 2**34

DEFAULT_CONVERGENCE_STEPS = (10, 20, 40, 80)
DEFAULT_SWEEP = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4)
WORKED_EXAMPLE = {"gamma": 0.9, "gamma_next": 0.45, "phi": 0.1, "phi_next": 0.3, "x_norm_sq": 1.0}
STATIONARITY_TOL = 1e-10
BOUNDARY_TOL = 1e-12


def _csv_list(text: str, kind=float) -> list:
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _base_report(cfg: ExperimentConfig | None, command: str, seed: int) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash() if cfg is not None else None,
        "seed": seed,
    }


def _distance(cfg: ExperimentConfig, samples, reference) -> tuple[str, float]:
    """W1 in one dimension, sliced W1 otherwise; projections keyed by the seed."""
    projections = int(cfg.metrics.get("projections", 128))
    rng = stream(cfg.seed, _PROJECTION_DOMAIN)
    name = "w1" if reference.shape[1] == 1 else "sliced_w1"
    return name, sliced_wasserstein(samples, reference, projections, rng)


def _reference_size(cfg: ExperimentConfig, n: int) -> int:
    return int(cfg.metrics.get("reference_samples", n))


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------


def cmd_sample(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run the configured sampler and score it against the analytic target."""
    t0 = time.perf_counter()
    sc = cfg.sampler_config()
    samples, traj = run_sampler(sc, cfg.build_oracle(), cfg.schedule, dim=cfg.target.dim, threads=threads)

    n_ref = _reference_size(cfg, len(samples))
    ref_a, ref_b = cfg.reference_draw(n_ref, 0), cfg.reference_draw(n_ref, 1)
    name, dist = _distance(cfg, samples, ref_a)
    _, calib = _distance(cfg, ref_b, ref_a)
    moments = moment_report(samples, cfg.target)

    report = _base_report(cfg, "sample", cfg.seed)
    report.update(
        method=sc.method,
        steps=sc.steps,
        num_samples=len(samples),
        metric=name,
        metric_value=dist,
        w1_iid_calibration=calib,
        mean_error=moments["mean_error"],
        variance_error=moments["variance_error"],
        wall_clock_s=time.perf_counter() - t0,
    )

    out = _out_dir(cfg)
    write_samples_csv(out / "samples.csv", samples)
    write_samples_binary(out / "samples.npy", samples)
    if traj is not None:
        write_trajectory_csv(out / "trajectory.csv", traj)
    write_json(out / "report.json", report)
    return report


def cmd_sweep_lambda(cfg: ExperimentConfig, lambdas=None, threads: int = 1) -> dict:
    """One run per lookahead strength; run k uses seed + k.

    The per-step x_hat error is measured against each chain's own output, so it
    tracks how fast the estimates settle rather than distance to the target.
    """
    t0 = time.perf_counter()
    lambdas = list(lambdas if lambdas is not None else cfg.sweep.get("la_strengths", DEFAULT_SWEEP))
    if not lambdas or any(la < 0 for la in lambdas):
        raise ConfigError("la_strengths must be a non-empty list of non-negative values")

    base = cfg.sampler_config()
    n_rec = base.record_trajectories or min(base.num_samples, 256)
    n_ref = _reference_size(cfg, base.num_samples)
    ref = cfg.reference_draw(n_ref, 0)

    curve, step_rows = [], []
    for k, la in enumerate(lambdas):
        seed = cfg.seed + k
        sc = cfg.sampler_config(la_strength=float(la), seed=seed, record_trajectories=n_rec)
        samples, traj = run_sampler(sc, cfg.build_oracle(seed), cfg.schedule, dim=cfg.target.dim, threads=threads)
        name, dist = _distance(cfg, samples, ref)
        e_hat, e_til = xhat_mse_trace(traj, traj.output)
        curve.append((float(la), dist, float(np.mean(e_hat))))
        for j, i in enumerate(range(sc.steps, 0, -1)):
            step_rows.append((float(la), i, float(e_hat[j]), float(e_til[j])))

    metric = np.array([c[1] for c in curve])
    best = int(np.argmin(metric))
    report = _base_report(cfg, "sweep-lambda", cfg.seed)
    report.update(
        metric=name,
        curve=[{"la_strength": c[0], "metric": c[1], "xhat_mse_mean": c[2]} for c in curve],
        argmin_la_strength=curve[best][0],
        interior_minimum=bool(0 < best < len(curve) - 1),
        wall_clock_s=time.perf_counter() - t0,
    )

    out = _out_dir(cfg)
    write_rows(out / "curve.csv", ["la_strength", "metric", "xhat_mse_mean"], curve)
    write_rows(out / "xhat_mse_steps.csv", ["la_strength", "step", "xhat_mse", "xtilde_mse"], step_rows)
    write_json(out / "report.json", report)
    return report


def fit_slope(steps, errors) -> float:
    """Order estimate: minus the least-squares slope of log(error) vs log(N)."""
    return float(-np.polyfit(np.log(steps), np.log(errors), 1)[0])


def cmd_convergence(cfg: ExperimentConfig, steps=None, threads: int = 1) -> dict:
    """Terminal error against the identity flow map of a standard-normal target.

    Unless the config sets a spacing, steps are uniform in logSNR: with uniform
    time steps the final step's logSNR gap shrinks too slowly for high orders.
    """
    t0 = time.perf_counter()
    if cfg.oracle_block.get("kind") != "standard_normal" or cfg.oracle_block.get("noise_scale", 0.0) > 0:
        raise ConfigError("convergence needs the exact standard_normal oracle", None)
    steps = list(steps if steps is not None else cfg.convergence.get("steps", DEFAULT_CONVERGENCE_STEPS))
    if len(steps) < 2:
        raise ConfigError("convergence needs at least two step counts")
    methods = cfg.convergence.get("methods", [cfg.sampler.get("method", "ddim")])
    spacing = cfg.sampler.get("spacing", "uniform-logsnr")

    oracle, dim = cfg.build_oracle(), cfg.target.dim
    rows, slopes = [], {}
    for method in methods:
        errs = []
        for n_steps in steps:
            sc = cfg.sampler_config(method=method, steps=int(n_steps), spacing=spacing, la_strength=0.0,
                                    record_trajectories=0)
            if not sc.deterministic:
                raise ConfigError(f"convergence needs a deterministic method, got {method!r}")
            samples, _ = run_sampler(sc, oracle, cfg.schedule, dim=dim, threads=threads)
            z_n = block_normals(sc.seed, range(sc.num_samples), 1, dim)[0]
            z_0 = samples.provenance["z0"]
            err = float(np.sqrt(np.mean(np.sum((z_0 - z_n) ** 2, axis=1))))
            errs.append(err)
            rows.append((method, int(n_steps), err))
        if min(errs) <= 0:
            raise InvariantError(f"{method}: zero terminal error, slope undefined")
        slopes[method] = fit_slope(steps, errs)

    report = _base_report(cfg, "convergence", cfg.seed)
    report.update(steps=steps, spacing=spacing, slopes=slopes, wall_clock_s=time.perf_counter() - t0)
    out = _out_dir(cfg)
    write_rows(out / "convergence.csv", ["method", "steps", "terminal_error"], rows)
    write_json(out / "report.json", report)
    return report


def cmd_validate_theory(cfg: ExperimentConfig | None, trials: int | None = None, seed: int | None = None,
                        out: str | None = None) -> dict:
    """Closed-form checks on a parameter grid plus Monte-Carlo on chosen points.

    Raises :class:`InvariantError` (after writing the report) if any check fails.
    """
    t0 = time.perf_counter()
    theory = cfg.theory if cfg is not None else {}
    axes = cfg.theory_axes if cfg is not None else THEORY_AXES
    seed = seed if seed is not None else (cfg.seed if cfg is not None else 0)
    trials = int(trials if trials is not None else theory.get("trials", DEFAULT_TRIALS))
    if trials < 2:
        raise ConfigError("trials must be >= 2")
    xs = float(theory.get("x_norm_sq", 1.0))

    grid = parameter_grid(**axes, x_norm_sq=xs)
    checks = theory_checks(grid)

    # points exactly on the sign boundary phi^2 = gamma (1 - gamma) ||x||^2
    g = np.unique(np.asarray(grid.gamma))
    ph = np.sqrt(g * (1 - g) * xs)
    boundary = StepParams(g, 0.5 * g, ph, ph + 0.1, xs).validate()
    boundary_max = float(np.max(np.abs(optimal_lambda(boundary))))

    mc_reports, mc_ok = [], True
    for k, pt in enumerate(theory.get("mc_points", [WORKED_EXAMPLE])):
        try:
            p = StepParams(**pt).validate()
        except TypeError as e:
            raise ConfigError(f"theory.mc_points[{k}]: {e}") from None
        x = np.array([np.sqrt(p.x_norm_sq)])
        mc = simulate_assumption1(p, x, DEFAULT_LA_GRID, trials, stream(seed, k))
        exact = expected_sq_error(DEFAULT_LA_GRID, p)
        z = np.abs(mc.mse - exact) / mc.stderr
        within = bool(np.all(z <= se_multiplier(trials)))
        mc_ok &= within
        mc_reports.append({
            "params": pt,
            "optimal_lambda": float(optimal_lambda(p)),
            "empirical_argmin": mc.argmin,
            "max_abs_z": float(np.max(z)),
            "se_multiplier": se_multiplier(trials),
            "within_3se": within,
        })

    passed = {
        "stationarity": checks["max_stationarity_residual"] < STATIONARITY_TOL,
        "convexity": checks["min_curvature"] > 0,
        "sign_equivalence": checks["sign_mismatches"] == 0,
        "boundary_zero": boundary_max <= BOUNDARY_TOL,
        "monte_carlo_3se": mc_ok,
    }
    report = _base_report(cfg, "validate-theory", seed)
    report.update(grid=checks, boundary_max_abs_lambda=boundary_max, monte_carlo=mc_reports, trials=trials,
                  checks=passed, ok=all(passed.values()), wall_clock_s=time.perf_counter() - t0)

    out_dir = Path(out if out is not None else (cfg.out if cfg is not None else "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "report.json", report)
    if not report["ok"]:
        failed = [k for k, v in passed.items() if not v]
        raise InvariantError(f"theory checks failed: {', '.join(failed)}")
    return report


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; affects speed only")

    parser = argparse.ArgumentParser(prog="ladpm", description="Lookahead diffusion sampler experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw samples and score them")
    p = sub.add_parser("sweep-lambda", parents=[common], help="metric versus lookahead strength")
    p.add_argument("--lambdas", help="comma-separated strengths (overrides config)")
    p = sub.add_parser("convergence", parents=[common], help="order check on the identity flow map")
    p.add_argument("--steps", help="comma-separated step counts (overrides config)")
    p = sub.add_parser("validate-theory", parents=[common], help="check the optimal-strength formulas")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
    return parser


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    return ExperimentConfig.from_file(args.config, seed=args.seed, out=args.out)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "sample":
            report = cmd_sample(_load(args), args.threads)
        elif args.command == "sweep-lambda":
            lambdas = _csv_list(args.lambdas) if args.lambdas else None
            report = cmd_sweep_lambda(_load(args), lambdas, args.threads)
        elif args.command == "convergence":
            steps = _csv_list(args.steps, int) if args.steps else None
            report = cmd_convergence(_load(args), steps, args.threads)
        else:
            cfg = _load(args) if args.config else None
            report = cmd_validate_theory(cfg, args.trials, args.seed, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (LadpmError, ArithmeticError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: ok ({report['wall_clock_s']:.2f} s)")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
