#!/usr/bin/env python3
"""Clean full-data reconstruction at (omega, m) = (3, 3) on the default grid."""
import os
import sys

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from rotwave import ExperimentConfig, IterationConfig, run_experiment


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "out/clean33"
    config = ExperimentConfig(
        run_id="clean33",
        n=100,
        truth="m3_default",
        iteration=IterationConfig(max_iter=500, gamma_scale=3000.0),
        output_dir=outdir,
    )
    record = run_experiment(config)
    print(
        f"K={record.stop_index} ({record.stop_reason})  "
        f"residual={record.final_residual:.3e}  "
        f"rel_err(gamma)={record.rel_err_gamma:.3e}  "
        f"rel_err(Omega)={record.rel_err_omega:.3e}  "
        f"[{record.wall_ms:.0f} ms]"
    )


if __name__ == "__main__":
    main()
