"""Separated inertial-wave solves on a rotating sphere and the simultaneous
recovery of viscosity and latitudinal differential rotation from surface
observations via accelerated Landweber iteration with adjoint-state
gradients."""

from .errors import ConfigurationError, NearResonanceError
from .grid import (
    ComplexField,
    DerivativeStencils,
    Grid,
    ScalarField,
    apply_bilaplacian_m,
    apply_delta_m,
    boundary_trace,
    build_grid,
    build_stencils,
    inner_product,
    norm_sobolev,
)
from .operator import (
    Coefficients,
    EmbeddingConstants,
    Parameters,
    RotationProfile,
    WaveSystem,
    apply_B_prime,
    assemble_adjoint,
    assemble_forward,
    compute_coefficients,
    frequency_condition,
    smallness_condition,
    solve,
)
from .inversion import (
    DataVector,
    GradientPair,
    InverseProblem,
    IterationConfig,
    LineSearchConfig,
    ObservationScheme,
    ParameterMetric,
    ReconstructionTrace,
    adjoint_gradient,
    calibrate_gradient_sign,
    data_inner,
    data_norm,
    forward,
    nesterov_landweber,
    observe,
    observe_adjoint,
    riesz_map,
    sensitivity,
    tcc_probe,
)
from .experiments import (
    ExperimentConfig,
    GroundTruth,
    NoiseSpec,
    ProbeConfig,
    RunRecord,
    SchemeConfig,
    add_noise,
    manufacture_truth,
    run_experiment,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
