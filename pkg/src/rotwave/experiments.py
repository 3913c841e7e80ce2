"""Manufactured ground truths, synthetic noise and reproducible experiments.

Ground truths are closed-form pairs (psi*, Omega*) chosen so that psi* is an
admissible separated field of the requested azimuthal order: it must satisfy
the pole conditions *and* vanish like sin^|m| there, otherwise the
manufactured source falls outside L^2 and the discretization error stops
contracting.  Sources are produced by exact symbolic differentiation of the
operator applied to psi*, never by the solver's own stencils, so solving on
any grid measures genuine discretization error (no inverse crime).

Experiment configs are plain JSON documents; unknown keys are rejected.  A
run writes a JSON record plus a per-iteration CSV, and sweeps aggregate the
records into a summary CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import sympy as sp

from .errors import ConfigurationError
from .grid import ComplexField, Grid, ScalarField, build_grid, build_stencils
from .inversion import (
    DataVector,
    InverseProblem,
    IterationConfig,
    LineSearchConfig,
    ObservationScheme,
    ReconstructionTrace,
    data_norm,
    nesterov_landweber,
    observe,
)
from .operator import RotationProfile, assemble_forward, solve

_THETA = sp.symbols("theta", positive=True)

ITERATION_CSV_HEADER = "iter,residual,gamma,rel_err_gamma,rel_err_omega,step_size"
SWEEP_CSV_HEADER = (
    "run_id,noise,epsilon,scheme,K,final_residual,rel_err_gamma,rel_err_omega,wall_ms"
)


# ----------------------------------------------------------------------
# symbolic catalogue
# ----------------------------------------------------------------------


def _psi_shape(name: str, m: int, coeffs: dict) -> sp.Expr:
    """Closed-form state shapes (complex amplitude applied separately)."""
    b = sp.Rational(coeffs.get("b", 0)).limit_denominator(10**6)
    if name == "sin_power":
        return sp.sin(_THETA) ** abs(m) * (1 + b * sp.cos(_THETA))
    if name == "clamped_sin2":
        return sp.sin(_THETA) ** 2 * (1 + b * sp.cos(_THETA))
    if name == "cos_poly":  # m = 0 shapes
        a = sp.Rational(coeffs.get("a", 1)).limit_denominator(10**6)
        return a * sp.cos(_THETA) + b * sp.cos(_THETA) ** 2
    raise ConfigurationError(f"unknown state shape {name!r}")


def _omega_profile(name: str, coeffs: dict) -> sp.Expr:
    ratio = lambda key, default: sp.Rational(coeffs.get(key, default)).limit_denominator(10**6)
    if name == "constant":
        return ratio("a", 1) * sp.Integer(1)
    if name == "solar_like":  # a + b cos^2; default mean-zero
        b = ratio("b", 1)
        a = coeffs.get("a")
        a = -b / 3 if a is None else sp.Rational(a).limit_denominator(10**6)
        return a + b * sp.cos(_THETA) ** 2
    if name == "odd_poly":
        return (
            ratio("a", 0)
            + ratio("b", 1) * sp.cos(_THETA)
            + ratio("c", sp.Rational(-1, 2)) * sp.cos(_THETA) ** 3
        )
    raise ConfigurationError(f"unknown rotation profile {name!r}")


def _delta_m_sym(expr: sp.Expr, m: int, r: sp.Expr) -> sp.Expr:
    th = _THETA
    return (
        sp.diff(sp.sin(th) * sp.diff(expr, th), th) / sp.sin(th)
        - m * m * expr / sp.sin(th) ** 2
    ) / r**2


def _check_admissible(shape: sp.Expr, m: int) -> None:
    """Reject shapes that are not order-m fields.

    Admissible shapes factor as sin^|m|(theta) times a smooth even function
    about both poles; that is exactly what makes them traces of smooth
    fields of azimuthal order m.  Checking only the pole conditions is not
    enough: a shape with the wrong vanishing rate or parity (sin^2 at
    m = 1, sin^3 at m = 2, ...) can satisfy them while the manufactured
    source leaves L^2 and breaks the convergence of the solve.
    """
    ratio = sp.simplify(shape / sp.sin(_THETA) ** abs(m))
    for pole in (sp.Integer(0), sp.pi):
        lim = sp.limit(ratio, _THETA, pole, "+" if pole == 0 else "-")
        if not lim.is_finite:
            raise ConfigurationError(
                f"state shape is not an admissible order-{m} field: "
                f"shape/sin^|m| diverges at theta={pole}"
            )
    for pole, name in ((sp.Integer(0), "0"), (sp.pi, "pi")):
        t = sp.symbols("t", positive=True)
        odd_part = sp.simplify(
            ratio.subs(_THETA, pole + t) - ratio.subs(_THETA, pole - t)
        )
        if odd_part != 0:
            raise ConfigurationError(
                f"state shape is not an admissible order-{m} field: "
                f"shape/sin^|m| is not even about theta={name}"
            )


TRUTH_PRESETS = {
    # clean full-data reconstruction instance
    "m3_default": dict(
        psi_name="sin_power",
        psi_coeffs={},
        amplitude=1.0,
        phase=0.4,
        omega_name="solar_like",
        omega_coeffs={},
        gamma_true=0.05,
        m=3,
        omega_freq=3.0,
        omega_ref=0.0,
        r=1.0,
    ),
    # noise-sweep instance
    "m2_default": dict(
        psi_name="sin_power",
        psi_coeffs={},
        amplitude=1.0,
        phase=0.4,
        omega_name="solar_like",
        omega_coeffs={},
        gamma_true=0.05,
        m=2,
        omega_freq=1.0,
        omega_ref=0.0,
        r=1.0,
    ),
    # axisymmetric forward-only instance
    "m0_default": dict(
        psi_name="cos_poly",
        psi_coeffs={"a": 1, "b": 0},
        amplitude=1.0,
        phase=0.0,
        omega_name="constant",
        omega_coeffs={"a": 1},
        gamma_true=0.5,
        m=0,
        omega_freq=2.0,
        omega_ref=0.0,
        r=1.0,
    ),
}


class GroundTruth:
    """Closed-form truth with the source computed by exact differentiation."""

    def __init__(
        self,
        psi_name,
        psi_coeffs,
        amplitude,
        phase,
        omega_name,
        omega_coeffs,
        gamma_true,
        m,
        omega_freq,
        omega_ref,
        r,
    ):
        self.psi_name = psi_name
        self.psi_coeffs = dict(psi_coeffs)
        self.amplitude = float(amplitude)
        self.phase = float(phase)
        self.omega_name = omega_name
        self.omega_coeffs = dict(omega_coeffs)
        self.gamma_true = float(gamma_true)
        self.m = int(m)
        self.omega_freq = float(omega_freq)
        self.omega_ref = float(omega_ref)
        self.r = float(r)
        if self.gamma_true <= 0:
            raise ConfigurationError("gamma_true must be positive")

        shape = _psi_shape(psi_name, self.m, self.psi_coeffs)
        _check_admissible(shape, self.m)
        omega = _omega_profile(omega_name, self.omega_coeffs)
        r_sym = sp.Rational(self.r).limit_denominator(10**6)
        gamma_sym = sp.Rational(self.gamma_true).limit_denominator(10**9)
        omf_sym = sp.Rational(self.omega_freq).limit_denominator(10**9)
        oref_sym = sp.Rational(self.omega_ref).limit_denominator(10**9)

        amp = self.amplitude * np.exp(1j * self.phase)
        lap = _delta_m_sym(shape, self.m, r_sym)
        bilap = _delta_m_sym(lap, self.m, r_sym)
        alpha = sp.diff(
            sp.diff(omega * sp.sin(_THETA) ** 2, _THETA) / sp.sin(_THETA), _THETA
        ) / (r_sym**2 * sp.sin(_THETA))
        beta = omega - oref_sym
        source = (
            gamma_sym * bilap
            + sp.I * omf_sym * lap
            - sp.I * self.m * beta * lap
            + sp.I * self.m * alpha * shape
        )

        self._psi_fn = sp.lambdify(_THETA, shape, "numpy")
        self._omega_fn = sp.lambdify(_THETA, omega, "numpy")
        self._source_fn = sp.lambdify(_THETA, sp.simplify(source), "numpy")
        self._amp = amp

    def psi_exact(self, grid: Grid) -> ComplexField:
        vals = self._amp * np.broadcast_to(
            self._psi_fn(grid.nodes), grid.nodes.shape
        ).astype(complex)
        return ComplexField(m=self.m, values=np.array(vals))

    def omega_exact(self, grid: Grid) -> ScalarField:
        vals = np.broadcast_to(self._omega_fn(grid.nodes), grid.nodes.shape)
        return ScalarField(values=np.array(vals, dtype=float))

    def source(self, grid: Grid) -> ComplexField:
        vals = self._amp * np.asarray(self._source_fn(grid.nodes), dtype=complex)
        return ComplexField(m=self.m, values=vals)


def manufacture_truth(name: str, overrides: dict | None = None) -> GroundTruth:
    """Instantiate a catalogue truth, optionally overriding its fields."""
    if name not in TRUTH_PRESETS:
        raise ConfigurationError(
            f"unknown truth {name!r}; catalogue: {sorted(TRUTH_PRESETS)}"
        )
    preset = dict(TRUTH_PRESETS[name])
    for key, value in (overrides or {}).items():
        if key not in preset:
            raise ConfigurationError(f"unknown truth override {key!r}")
        preset[key] = value
    return GroundTruth(**preset)


# ----------------------------------------------------------------------
# noise
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    relative_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.relative_level < 1.0:
            raise ConfigurationError("relative noise level must lie in [0, 1)")


def add_noise(y: DataVector, spec: NoiseSpec, grid: Grid) -> tuple[DataVector, float]:
    """Additive Gaussian noise rescaled to the exact relative 2-norm level.

    The calibration ||noise||_2 / ||y||_2 uses plain 2-norms; the returned
    delta is the weighted data norm of the injected noise, which is what the
    discrepancy rule compares residuals against.
    """
    if spec.relative_level == 0.0:
        return y, 0.0
    rng = np.random.default_rng(spec.seed)
    draw = rng.standard_normal(len(y.values))
    if np.iscomplexobj(y.values):
        draw = draw + 1j * rng.standard_normal(len(y.values))
    draw *= spec.relative_level * np.linalg.norm(y.values) / np.linalg.norm(draw)
    noisy = DataVector(values=y.values + draw, mask=y.mask, scheme=y.scheme)
    delta = data_norm(grid, DataVector(values=draw, mask=y.mask, scheme=y.scheme))
    return noisy, delta


# ----------------------------------------------------------------------
# experiment configuration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = "full"
    epsilon: float = 0.0
    real_part_only: bool = False

    def build(self) -> ObservationScheme:
        return ObservationScheme(
            kind=self.kind, epsilon=self.epsilon, real_part_only=self.real_part_only
        )


@dataclass(frozen=True)
class ProbeConfig:
    radius: float = 0.1
    samples: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    run_id: str = "run"
    n: int = 100
    truth: str = "m3_default"
    truth_overrides: dict = field(default_factory=dict)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    iteration: IterationConfig = field(default_factory=IterationConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    gamma_init_scale: float = 3.0
    allow_negative_gamma: bool = False
    residual_floor_rel: float = 1e-8
    output_dir: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return _dataclass_from_dict(cls, doc, "config")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


_NESTED = {
    "scheme": SchemeConfig,
    "noise": NoiseSpec,
    "iteration": IterationConfig,
    "line_search": LineSearchConfig,
    "probe": ProbeConfig,
}


def _dataclass_from_dict(cls, doc: dict, path: str):
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path} must be an object")
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(doc) - fields
    if unknown:
        raise ConfigurationError(f"unknown keys in {path}: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in _NESTED and isinstance(value, dict):
            kwargs[key] = _dataclass_from_dict(_NESTED[key], value, f"{path}.{key}")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {path}: {exc}") from exc


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply dotted-key overrides like {'iteration.tau': 1.5}."""
    doc = asdict(config)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = doc
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigurationError(f"unknown override path {dotted!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigurationError(f"unknown override path {dotted!r}")
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(doc)


# ----------------------------------------------------------------------
# run record and experiment driver
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    config: dict
    stop_index: int
    stop_reason: str
    final_residual: float
    rel_err_gamma: float
    rel_err_omega: float
    wall_ms: float
    iteration_csv: str | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _rel_errors(grid, truth, gamma, omega_values):
    w = grid.weights
    om_true = truth.omega_exact(grid).values
    eg = abs(gamma - truth.gamma_true) / abs(truth.gamma_true)
    denom = math.sqrt(float(np.sum(om_true**2 * w)))
    eo = math.sqrt(float(np.sum((omega_values - om_true) ** 2 * w))) / denom
    return eg, eo


def build_problem(config: ExperimentConfig):
    """Grid, truth and problem bundle plus clean synthetic data."""
    truth = manufacture_truth(config.truth, config.truth_overrides)
    grid = build_grid(config.n, truth.r)
    stencils = build_stencils(grid)
    scheme = config.scheme.build()
    rot = RotationProfile.from_values(truth.omega_exact(grid).values, stencils)
    system = assemble_forward(
        _params(truth, rot), truth.omega_freq, truth.m, grid, stencils
    )
    psi = solve(system, truth.source(grid))
    y_clean = observe(psi, scheme, grid)
    problem = InverseProblem(
        grid=grid,
        stencils=stencils,
        m=truth.m,
        omega_freq=truth.omega_freq,
        source=truth.source(grid),
        scheme=scheme,
        omega_ref=truth.omega_ref,
        allow_negative_gamma=config.allow_negative_gamma,
    )
    return truth, grid, stencils, problem, psi, y_clean


def _params(truth, rot):
    from .operator import Parameters

    return Parameters(gamma=truth.gamma_true, omega=rot, omega_ref=truth.omega_ref)


def iteration_table(
    grid: Grid, truth: GroundTruth, trace: ReconstructionTrace
) -> str:
    """Per-iteration CSV text (iter,residual,gamma,rel errors,step size)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ITERATION_CSV_HEADER.split(","))
    for k, ((gamma, omega), res) in enumerate(zip(trace.iterates, trace.residuals)):
        eg, eo = _rel_errors(grid, truth, gamma, omega)
        step = trace.step_sizes[k - 1] if k >= 1 else float("nan")
        writer.writerow([k, repr(res), repr(gamma), repr(eg), repr(eo), repr(step)])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig) -> RunRecord:
    """Manufacture, observe, corrupt, reconstruct and record one experiment."""
    start = time.perf_counter()
    truth, grid, stencils, problem, psi, y_clean = build_problem(config)
    y_delta, delta = add_noise(y_clean, config.noise, grid)
    # the relative floor wins over any absolute residual_floor in the config
    floor = config.residual_floor_rel * data_norm(grid, y_delta)
    iteration = replace(config.iteration, residual_floor=floor)
    gamma_init = config.gamma_init_scale * truth.gamma_true
    if not config.allow_negative_gamma:
        gamma_init = abs(gamma_init)
    trace = nesterov_landweber(
        problem, y_delta, delta, iteration, gamma_init=gamma_init
    )
    gamma_k, omega_k = trace.iterates[trace.stop_index]
    eg, eo = _rel_errors(grid, truth, gamma_k, omega_k)
    wall_ms = (time.perf_counter() - start) * 1e3

    csv_path = None
    if config.output_dir is not None:
        import pathlib

        outdir = pathlib.Path(config.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = str(outdir / f"{config.run_id}_iterations.csv")
        with open(csv_path, "w") as fh:
            fh.write(iteration_table(grid, truth, trace))
    record = RunRecord(
        config=json.loads(config.to_json()),
        stop_index=trace.stop_index,
        stop_reason=trace.stop_reason,
        final_residual=trace.residuals[trace.stop_index],
        rel_err_gamma=eg,
        rel_err_omega=eo,
        wall_ms=wall_ms,
        iteration_csv=csv_path,
    )
    if config.output_dir is not None:
        import pathlib

        path = pathlib.Path(config.output_dir) / f"{config.run_id}_record.json"
        path.write_text(record.to_json())
    return record


SWEEP_AXES = ("noise_levels", "epsilon_values", "schemes")


def sweep(base: ExperimentConfig, axis: str, values: list) -> tuple[list[RunRecord], str]:
    """Run a family of experiments along one axis; returns records + summary CSV."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; one of {SWEEP_AXES}")
    records = []
    rows = [SWEEP_CSV_HEADER.split(",")]
    for i, value in enumerate(values):
        cfg = base
        if axis == "noise_levels":
            cfg = replace(base, noise=replace(base.noise, relative_level=float(value)))
        elif axis == "epsilon_values":
            eps = float(value)
            kind = "full" if eps == 0.0 else "restricted"
            cfg = replace(
                base, scheme=replace(base.scheme, kind=kind, epsilon=eps)
            )
        else:
            cfg = replace(base, scheme=SchemeConfig(**value))
        cfg = replace(cfg, run_id=f"{base.run_id}_{axis}_{i}")
        try:
            rec = run_experiment(cfg)
        except Exception as exc:  # keep sweeping, record the failure
            records.append(None)
            rows.append([cfg.run_id, "", "", "", "", "", "", "", f"error: {exc}"])
            continue
        records.append(rec)
        rows.append(
            [
                cfg.run_id,
                repr(cfg.noise.relative_level),
                repr(cfg.scheme.epsilon),
                cfg.scheme.kind + ("+re" if cfg.scheme.real_part_only else ""),
                str(rec.stop_index),
                repr(rec.final_residual),
                repr(rec.rel_err_gamma),
                repr(rec.rel_err_omega),
                repr(rec.wall_ms),
            ]
        )
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return records, buf.getvalue()
