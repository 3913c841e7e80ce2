#!/usr/bin/env python3
"""Noise sweep at (omega, m) = (1, 2): levels 1%, 5%, 10%, 20%."""
import os
import pathlib
import sys

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from rotwave import ExperimentConfig, IterationConfig, sweep


def main():
    outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out/noise_sweep")
    base = ExperimentConfig(
        run_id="m2",
        n=100,
        truth="m2_default",
        iteration=IterationConfig(max_iter=800, gamma_scale=3000.0),
        output_dir=str(outdir),
    )
    records, summary = sweep(base, "noise_levels", [0.01, 0.05, 0.10, 0.20])
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep_summary.csv").write_text(summary)
    print(summary)


if __name__ == "__main__":
    main()
