"""Command-line interface.

Subcommands: forward, reconstruct, adjoint-check, gradient-check, tcc,
sweep, grid-convergence.  Every run echoes its fully-resolved config into
the output directory; nonzero exits leave a machine-readable error.json
there.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.

Configs are JSON documents mirroring ExperimentConfig; flags are sugar via
dotted-key overrides (`--overrides iteration.tau=1.5,noise.seed=3`).  The
output directory resolves from --output-dir, then the config, then the
ROTWAVE_OUTPUT_DIR environment variable, then ./rotwave_out.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import pathlib
import sys

import numpy as np

from .errors import ConfigurationError, NearResonanceError
from .experiments import (
    ExperimentConfig,
    apply_overrides,
    build_problem,
    manufacture_truth,
    run_experiment,
    sweep,
)
from .grid import build_grid, build_stencils
from .inversion import (
    GradientPair,
    ParameterMetric,
    DataVector,
    adjoint_gradient,
    calibrate_gradient_sign,
    data_inner,
    data_norm,
    observation_mask,
    observe,
    sensitivity,
    tcc_probe,
)
from .grid import ScalarField


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(args) -> ExperimentConfig:
    if args.config:
        doc = json.loads(pathlib.Path(args.config).read_text())
        config = ExperimentConfig.from_dict(doc)
    else:
        config = ExperimentConfig()
    if args.overrides:
        pairs = {}
        for chunk in args.overrides.split(","):
            if "=" not in chunk:
                raise ConfigurationError(f"override {chunk!r} is not key=value")
            key, _, value = chunk.partition("=")
            pairs[key.strip()] = _parse_value(value.strip())
        config = apply_overrides(config, pairs)
    return config


def _output_dir(args, config) -> pathlib.Path:
    path = (
        args.output_dir
        or config.output_dir
        or os.environ.get("ROTWAVE_OUTPUT_DIR")
        or "rotwave_out"
    )
    out = pathlib.Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(config: ExperimentConfig, outdir: pathlib.Path) -> ExperimentConfig:
    config = ExperimentConfig.from_dict(
        {**json.loads(config.to_json()), "output_dir": str(outdir)}
    )
    (outdir / "config.json").write_text(config.to_json())
    return config


def cmd_forward(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    truth, grid, stencils, problem, psi, y = build_problem(config)
    rows = [["theta", "re_psi", "im_psi"]]
    for th, v in zip(grid.nodes, psi.values):
        rows.append([repr(th), repr(v.real), repr(v.imag)])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    (outdir / "state.csv").write_text(buf.getvalue())
    print(
        f"forward: n={config.n} (omega,m)=({truth.omega_freq:g},{truth.m}) "
        f"state written to {outdir/'state.csv'}"
    )
    return 0


def cmd_reconstruct(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    record = run_experiment(config)
    print(
        f"reconstruct: K={record.stop_index} ({record.stop_reason}) "
        f"residual={record.final_residual:.3e} "
        f"rel_err_gamma={record.rel_err_gamma:.3e} "
        f"rel_err_omega={record.rel_err_omega:.3e}"
    )
    return 0


def _random_pair(metric, grid, rng):
    dom = metric.project_mean_zero(rng.standard_normal(grid.n))
    return GradientPair(dgamma=rng.standard_normal(), domega=ScalarField(values=dom))


def _smooth_pair(metric, grid, rng):
    # smooth directions keep finite-difference truncation well under 1e-6
    from scipy.special import eval_legendre

    coeffs = rng.standard_normal(5) / np.arange(1, 6) ** 1.5
    dom = sum(c * eval_legendre(l + 1, np.cos(grid.nodes)) for l, c in enumerate(coeffs))
    dom = metric.project_mean_zero(dom)
    return GradientPair(dgamma=rng.standard_normal(), domega=ScalarField(values=dom))


def cmd_adjoint_check(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    truth, grid, stencils, problem, psi, y = build_problem(config)
    metric = ParameterMetric(
        grid, stencils, config.iteration.parameter_metric, config.iteration.gamma_scale
    )
    sign = calibrate_gradient_sign(problem, metric, truth.gamma_true, truth.omega_exact(grid).values)
    rng = np.random.default_rng(config.noise.seed)
    system, state = problem.state(truth.gamma_true, truth.omega_exact(grid).values)
    mask = observation_mask(grid, problem.scheme)
    worst = 0.0
    for _ in range(args.trials):
        yv = rng.standard_normal(len(mask))
        if not problem.scheme.real_part_only:
            yv = yv + 1j * rng.standard_normal(len(mask))
        data = DataVector(values=yv, mask=mask, scheme=problem.scheme)
        dp = _random_pair(metric, grid, rng)
        lhs = data_inner(
            grid, sensitivity(dp, state, system, grid, stencils, problem.scheme), data
        )
        grad, _ = adjoint_gradient(problem, data, state, system, metric, sign=sign)
        rhs = metric.pair_inner(dp, grad)
        # normalized by ||dp|| * ||y|| (the acceptance-contract scaling)
        rel = abs(lhs - rhs) / max(metric.pair_norm(dp) * data_norm(grid, data), 1e-300)
        worst = max(worst, rel)
    print(f"adjoint-check: max relative mismatch {worst:.3e} over {args.trials} trials")
    (outdir / "adjoint_check.json").write_text(
        json.dumps({"max_relative_mismatch": worst, "trials": args.trials})
    )
    return 0 if worst <= 1e-10 else 3


def cmd_gradient_check(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    truth, grid, stencils, problem, psi, y = build_problem(config)
    metric = ParameterMetric(
        grid, stencils, config.iteration.parameter_metric, config.iteration.gamma_scale
    )
    gamma0 = truth.gamma_true * 1.7
    omega0 = 0.5 * truth.omega_exact(grid).values
    sign = calibrate_gradient_sign(problem, metric, gamma0, omega0)

    def misfit(ga, om):
        d = problem.observed(ga, om)
        return 0.5 * data_norm(
            grid, DataVector(values=d.values - y.values, mask=d.mask, scheme=d.scheme)
        ) ** 2

    system, state = problem.state(gamma0, omega0)
    obs = observe(state, problem.scheme, grid)
    res = DataVector(values=obs.values - y.values, mask=obs.mask, scheme=obs.scheme)
    grad, _ = adjoint_gradient(problem, res, state, system, metric, sign=sign)
    rng = np.random.default_rng(config.noise.seed)
    worst = 0.0
    step = 1e-5
    for _ in range(args.trials):
        dp = _smooth_pair(metric, grid, rng)
        fd = (
            misfit(gamma0 + step * dp.dgamma, omega0 + step * dp.domega.values)
            - misfit(gamma0 - step * dp.dgamma, omega0 - step * dp.domega.values)
        ) / (2 * step)
        pred = metric.pair_inner(dp, grad)
        worst = max(worst, abs(fd - pred) / max(abs(fd), 1e-300))
    print(f"gradient-check: max relative FD mismatch {worst:.3e} over {args.trials} trials")
    (outdir / "gradient_check.json").write_text(
        json.dumps({"max_relative_mismatch": worst, "trials": args.trials})
    )
    return 0 if worst <= 1e-6 else 3


def cmd_tcc(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    truth, grid, stencils, problem, psi, y = build_problem(config)
    metric = ParameterMetric(
        grid, stencils, config.iteration.parameter_metric, config.iteration.gamma_scale
    )
    radius = args.radius if args.radius is not None else config.probe.radius
    samples = args.samples if args.samples is not None else config.probe.samples
    report = tcc_probe(
        problem,
        truth.gamma_true,
        truth.omega_exact(grid).values,
        radius=radius,
        n_samples=samples,
        rng_seed=config.noise.seed,
        metric=metric,
    )
    rows = [["sample", "ratio"]] + [
        [str(i), repr(r)] for i, r in enumerate(report.ratios)
    ]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    (outdir / "tcc_ratios.csv").write_text(buf.getvalue())
    print(
        f"tcc: radius={report.radius:g} samples={report.samples} "
        f"max={report.max_ratio:.4f} median={report.median_ratio:.4f} "
        f"skipped={report.skipped}"
    )
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    values = [_parse_value(v) for v in args.values.split(",")] if args.values else []
    records, summary = sweep(config, args.axis, values)
    (outdir / "sweep_summary.csv").write_text(summary)
    done = sum(1 for r in records if r is not None)
    print(f"sweep: {done}/{len(records)} runs complete, summary at {outdir/'sweep_summary.csv'}")
    return 0


def cmd_grid_convergence(args) -> int:
    config = _load_config(args)
    outdir = _output_dir(args, config)
    config = _echo_config(config, outdir)
    truth = manufacture_truth(config.truth, config.truth_overrides)
    sizes = [int(v) for v in args.sizes.split(",")]
    rows = [["n", "rel_l2_error"]]
    errors = []
    for n in sizes:
        grid = build_grid(n, truth.r)
        stencils = build_stencils(grid)
        from .operator import RotationProfile, assemble_forward, solve, Parameters

        rot = RotationProfile.from_values(truth.omega_exact(grid).values, stencils)
        system = assemble_forward(
            Parameters(gamma=truth.gamma_true, omega=rot, omega_ref=truth.omega_ref),
            truth.omega_freq,
            truth.m,
            grid,
            stencils,
        )
        psi = solve(system, truth.source(grid))
        ref = truth.psi_exact(grid)
        w = grid.weights
        err = float(
            np.sqrt(np.sum(np.abs(psi.values - ref.values) ** 2 * w))
            / np.sqrt(np.sum(np.abs(ref.values) ** 2 * w))
        )
        errors.append(err)
        rows.append([str(n), repr(err)])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    (outdir / "grid_convergence.csv").write_text(buf.getvalue())
    order = float(-np.polyfit(np.log(sizes), np.log(errors), 1)[0])
    print(f"grid-convergence: errors {['%.3e' % e for e in errors]} observed order {order:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotwave",
        description="Separated inertial-wave solves and rotation/viscosity recovery.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--overrides", help="comma-separated dotted-key=value pairs")
        p.add_argument("--output-dir", help="output directory")

    common(sub.add_parser("forward", help="solve the forward problem, write state.csv"))
    common(sub.add_parser("reconstruct", help="run a reconstruction experiment"))
    p = sub.add_parser("adjoint-check", help="verify the discrete adjoint identity")
    common(p)
    p.add_argument("--trials", type=int, default=20)
    p = sub.add_parser("gradient-check", help="verify gradients against finite differences")
    common(p)
    p.add_argument("--trials", type=int, default=5)
    p = sub.add_parser("tcc", help="sample the tangential-cone ratio")
    common(p)
    p.add_argument("--radius", type=float, default=None, help="overrides probe.radius")
    p.add_argument("--samples", type=int, default=None, help="overrides probe.samples")
    p = sub.add_parser("sweep", help="run experiments along one axis")
    common(p)
    p.add_argument("--axis", default="noise_levels")
    p.add_argument("--values", default="0.01,0.05,0.2")
    p = sub.add_parser("grid-convergence", help="manufactured-solution convergence study")
    common(p)
    p.add_argument("--sizes", default="50,100,200,400")
    return parser


_COMMANDS = {
    "forward": cmd_forward,
    "reconstruct": cmd_reconstruct,
    "adjoint-check": cmd_adjoint_check,
    "gradient-check": cmd_gradient_check,
    "tcc": cmd_tcc,
    "sweep": cmd_sweep,
    "grid-convergence": cmd_grid_convergence,
}


def _write_error(args, config, kind: str, message: str) -> None:
    try:
        outdir = _output_dir(args, config) if config else pathlib.Path(
            args.output_dir or os.environ.get("ROTWAVE_OUTPUT_DIR") or "rotwave_out"
        )
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "error.json").write_text(
            json.dumps({"error": kind, "message": message})
        )
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = None
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        _write_error(args, config, "configuration", str(exc))
        return 2
    except (NearResonanceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_error(args, config, "numerical", str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
