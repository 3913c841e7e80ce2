#!/usr/bin/env python3
"""Polar data-leakage study: full vs 20% vs 50% observation loss at 1% noise."""
import os
import pathlib
import sys

import numpy as np

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from rotwave import ExperimentConfig, IterationConfig, NoiseSpec, sweep


def main():
    outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out/leakage")
    base = ExperimentConfig(
        run_id="leak33",
        n=100,
        truth="m3_default",
        noise=NoiseSpec(relative_level=0.01, seed=0),
        iteration=IterationConfig(max_iter=800, gamma_scale=3000.0),
        output_dir=str(outdir),
    )
    # epsilon = fraction * pi/2 removes `fraction` of the observed interval
    records, summary = sweep(
        base, "epsilon_values", [0.0, 0.2 * np.pi / 2, 0.5 * np.pi / 2]
    )
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep_summary.csv").write_text(summary)
    print(summary)


if __name__ == "__main__":
    main()
