#!/usr/bin/env python3
"""Empirical tangential-cone-condition probe around the default ground truth."""
import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from rotwave import ExperimentConfig, ParameterMetric, tcc_probe
from rotwave.experiments import build_problem


def main():
    config = ExperimentConfig(run_id="tcc", n=100, truth="m3_default")
    truth, grid, stencils, problem, psi, y = build_problem(config)
    metric = ParameterMetric(grid, stencils, "H2", gamma_scale=1.0)
    for radius in (0.1, 0.01):
        report = tcc_probe(
            problem,
            truth.gamma_true,
            truth.omega_exact(grid).values,
            radius=radius,
            n_samples=100,
            rng_seed=42,
            metric=metric,
        )
        print(
            f"radius={radius:<5g} max={report.max_ratio:.4f} "
            f"median={report.median_ratio:.4f} skipped={report.skipped}"
        )


if __name__ == "__main__":
    main()
