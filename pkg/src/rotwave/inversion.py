"""Observation operators, adjoint-state gradients and Nesterov-Landweber.

The forward map of the parameter identification problem is F = L o S where
S(gamma, Omega) solves the separated wave equation and L restricts the state
to the observed colatitudes (optionally taking the real part).  Gradients
come from one adjoint solve per evaluation:

    z = B*^-1 L* residual,
    d/dgamma  ->  sigma * Re <delta^2 psi, z>
    d/dOmega  ->  sigma * m * Im{ adjoint-of-alpha-map (conj(psi) z)
                                  - (delta_m conj(psi)) z }

with the overall sign sigma fixed once per run by an adjoint identity check.
The Omega gradient density is mapped into the parameter space by a Riesz
solve in the configured Sobolev metric (H1 or H2), which acts as a
smoothing preconditioner and pins the weighted mean to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import eval_legendre

from .errors import ConfigurationError, NearResonanceError
from .grid import ComplexField, DerivativeStencils, Grid, ScalarField, _check_field
from .operator import (
    Parameters,
    RotationProfile,
    WaveSystem,
    alpha_operator,
    apply_B_prime,
    assemble_forward,
    solve,
)

# ----------------------------------------------------------------------
# observation schemes
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ObservationScheme:
    """Which part of the surface state is measured."""

    kind: str = "full"  # "full" | "restricted"
    epsilon: float = 0.0
    real_part_only: bool = False

    def __post_init__(self):
        if self.kind == "full":
            if self.epsilon != 0.0:
                raise ConfigurationError("full scheme requires epsilon = 0")
        elif self.kind == "restricted":
            if not 0.0 < self.epsilon < math.pi / 2:
                raise ConfigurationError(
                    f"restricted scheme needs 0 < epsilon < pi/2, got {self.epsilon}"
                )
        else:
            raise ConfigurationError(f"unknown scheme kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class DataVector:
    values: np.ndarray  # complex, or real when real_part_only
    mask: np.ndarray  # observed node indices
    scheme: ObservationScheme


def observation_mask(grid: Grid, scheme: ObservationScheme) -> np.ndarray:
    eps = scheme.epsilon
    return np.where((grid.nodes > eps) & (grid.nodes < math.pi - eps))[0]


def observe(psi: ComplexField, scheme: ObservationScheme, grid: Grid) -> DataVector:
    """Restrict the state to the observed window, optionally real part only."""
    _check_field(grid, psi)
    mask = observation_mask(grid, scheme)
    vals = psi.values[mask]
    if scheme.real_part_only:
        vals = vals.real.copy()
    return DataVector(values=vals, mask=mask, scheme=scheme)


def observe_adjoint(
    d: DataVector, scheme: ObservationScheme, grid: Grid, m: int = 0
) -> ComplexField:
    """Zero-extension back to the full grid (real data embed as complex).

    The azimuthal tag m is metadata for downstream pairing; the data vector
    itself does not carry one.
    """
    out = np.zeros(grid.n, dtype=complex)
    out[d.mask] = d.values
    return ComplexField(m=m, values=out)


def data_norm(grid: Grid, d: DataVector) -> float:
    """Weighted L^2 norm over the observed window."""
    return float(np.sqrt(np.sum(np.abs(d.values) ** 2 * grid.weights[d.mask])))


def data_inner(grid: Grid, a: DataVector, b: DataVector) -> float:
    """Real inner product on the data space."""
    return float(np.sum((a.values * np.conj(b.values)).real * grid.weights[a.mask]))


# ----------------------------------------------------------------------
# parameter metric and Riesz map
# ----------------------------------------------------------------------


class ParameterMetric:
    """Product metric gamma_scale * dgamma^2 + ||dOmega||_{H1 or H2}^2.

    The Omega block is realized by the closure operator A = -delta_0 (H1) or
    delta_0^2 (H2); the Riesz map solves A q = g with the weighted mean of q
    pinned to zero.  The bilinear form is evaluated as <u, A v>_w with A on
    the second argument, which reproduces the raw density exactly and keeps
    the discrete adjoint identity at roundoff level.
    """

    def __init__(self, grid, stencils, name: str = "H2", gamma_scale: float = 1.0):
        if name not in ("H1", "H2"):
            raise ConfigurationError(f"unknown parameter metric {name!r}")
        if gamma_scale <= 0:
            raise ConfigurationError("gamma_scale must be positive")
        self.grid = grid
        self.name = name
        self.gamma_scale = float(gamma_scale)
        lap0 = stencils.delta_matrix(0)
        self.operator = -lap0 if name == "H1" else lap0 @ lap0
        n = grid.n
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = self.operator
        kkt[:n, n] = 1.0
        kkt[n, :n] = grid.weights
        self._kkt_lu = lu_factor(kkt, check_finite=False)

    def project_mean_zero(self, g: np.ndarray) -> np.ndarray:
        w = self.grid.weights
        return g - np.sum(g * w) / np.sum(w)

    def riesz(self, g: np.ndarray) -> np.ndarray:
        """Solve the metric operator against a mean-zero projected density."""
        rhs = np.concatenate([self.project_mean_zero(g), [0.0]])
        sol = lu_solve(self._kkt_lu, rhs, check_finite=False)
        return sol[: self.grid.n].copy()

    def omega_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(u * (self.operator @ v) * self.grid.weights))

    def pair_inner(self, a: "GradientPair", b: "GradientPair") -> float:
        return self.gamma_scale * a.dgamma * b.dgamma + self.omega_inner(
            a.domega.values, b.domega.values
        )

    def pair_norm(self, a: "GradientPair") -> float:
        return math.sqrt(max(self.pair_inner(a, a), 0.0))


def riesz_map(
    g: ScalarField | np.ndarray,
    metric: str,
    grid: Grid,
    stencils: DerivativeStencils,
) -> ScalarField:
    """Riesz representative of an L^2 density in the H1 or H2 metric."""
    vals = g.values if isinstance(g, ScalarField) else np.asarray(g, float)
    pm = ParameterMetric(grid, stencils, metric)
    return ScalarField(values=pm.riesz(vals))


@dataclass(frozen=True, eq=False)
class GradientPair:
    """Riesz representative of a parameter-space functional."""

    dgamma: float
    domega: ScalarField


# ----------------------------------------------------------------------
# problem bundle and forward/sensitivity/adjoint machinery
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InverseProblem:
    """Everything fixed during a reconstruction run."""

    grid: Grid
    stencils: DerivativeStencils
    m: int
    omega_freq: float
    source: ComplexField
    scheme: ObservationScheme
    omega_ref: float = 0.0
    allow_negative_gamma: bool = False

    def parameters(self, gamma: float, omega_values: np.ndarray) -> Parameters:
        return Parameters(
            gamma=gamma,
            omega=RotationProfile.from_values(omega_values, self.stencils),
            omega_ref=self.omega_ref,
        )

    def state(self, gamma: float, omega_values: np.ndarray):
        sys = assemble_forward(
            self.parameters(gamma, omega_values),
            self.omega_freq,
            self.m,
            self.grid,
            self.stencils,
            _allow_any_gamma=self.allow_negative_gamma,
        )
        psi = solve(sys, self.source)
        return sys, psi

    def observed(self, gamma: float, omega_values: np.ndarray) -> DataVector:
        return observe(self.state(gamma, omega_values)[1], self.scheme, self.grid)


def forward(
    p: Parameters,
    f: ComplexField,
    omega_freq: float,
    m: int,
    scheme: ObservationScheme,
    grid: Grid,
    stencils: DerivativeStencils,
) -> DataVector:
    """F(p) = observe(solve(B(p), f))."""
    sys = assemble_forward(p, omega_freq, m, grid, stencils)
    return observe(solve(sys, f), scheme, grid)


def sensitivity(
    dp: GradientPair,
    psi: ComplexField,
    system: WaveSystem,
    grid: Grid,
    stencils: DerivativeStencils,
    scheme: ObservationScheme,
) -> DataVector:
    """Directional derivative F'(p) dp = -L B^-1 B'(dp) psi at the state psi."""
    rhs = apply_B_prime(dp.dgamma, dp.domega, psi, grid, stencils, system.m)
    dpsi = ComplexField(m=system.m, values=system.solve_values(-rhs.values))
    return observe(dpsi, scheme, grid)


def _gradient_parts(problem, system, psi_values, residual):
    """Adjoint state and raw gradient functional (sign convention sigma=+1).

    The Omega density pairs the weighted transpose of the alpha coefficient
    map against Im(conj(psi) z), which is the discretely exact counterpart
    of the analytic (sin/r^2) d/dtheta((1/sin) d/dtheta(.)) form.
    """
    grid, st, m = problem.grid, problem.stencils, problem.m
    w = grid.weights
    ext = np.zeros(grid.n, dtype=complex)
    ext[residual.mask] = residual.values
    z = system.solve_weighted_adjoint(ext, w)
    lap = st.delta_matrix(m)
    raw_gamma = float(np.sum((lap @ (lap @ psi_values)) * np.conj(z) * w).real)
    if m != 0:
        c = np.imag(np.conj(psi_values) * z)
        aop = alpha_operator(grid, st)
        density = m * ((aop.T @ (w * c)) / w - np.imag((lap @ np.conj(psi_values)) * z))
    else:
        density = np.zeros(grid.n)
    return raw_gamma, density


def _gradient_parts_continuous(problem, parameters, psi_values, residual):
    """Analytic-adjoint route: continuous-mode operator for the adjoint state
    and the differential form of the Omega density (cross-validation only)."""
    from .operator import assemble_adjoint

    grid, st, m = problem.grid, problem.stencils, problem.m
    w = grid.weights
    ext = np.zeros(grid.n, dtype=complex)
    ext[residual.mask] = residual.values
    adj = assemble_adjoint(
        parameters,
        problem.omega_freq,
        m,
        grid,
        st,
        mode="continuous",
        _allow_any_gamma=problem.allow_negative_gamma,
    )
    z = adj.solve_values(ext)
    lap = st.delta_matrix(m)
    raw_gamma = float(np.sum((lap @ (lap @ psi_values)) * np.conj(z) * w).real)
    if m != 0:
        c = np.imag(np.conj(psi_values) * z)
        sin = np.sin(grid.nodes)
        density = m * (
            sin / grid.r**2 * (st.d1 @ ((st.d1 @ c) / sin))
            - np.imag((lap @ np.conj(psi_values)) * z)
        )
    else:
        density = np.zeros(grid.n)
    return raw_gamma, density


def adjoint_gradient(
    problem: InverseProblem,
    residual: DataVector,
    psi: ComplexField,
    system: WaveSystem,
    metric: ParameterMetric,
    sign: float = -1.0,
    mode: str = "algebraic",
    parameters=None,
):
    """Riesz gradient of the misfit functional driven by a data residual.

    Returns (pair, density) where pair is the GradientPair in the metric and
    density the raw (pre-Riesz) Omega functional density; the latter gives
    the squared gradient norm as gamma_scale*dgamma^2 + <domega, density>_w.

    mode "algebraic" (default) uses the exact discrete adjoint via the
    forward factorization; "continuous" discretizes the analytic adjoint
    operator and density directly and needs the Parameters of the linearization
    point (the two agree to discretization error).
    """
    if mode == "algebraic":
        raw_gamma, density = _gradient_parts(problem, system, psi.values, residual)
    elif mode == "continuous":
        if parameters is None:
            raise ValueError("continuous mode needs the linearization parameters")
        raw_gamma, density = _gradient_parts_continuous(
            problem, parameters, psi.values, residual
        )
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    dgamma = sign * raw_gamma / metric.gamma_scale
    g = sign * density
    domega = metric.riesz(g)
    return GradientPair(dgamma=dgamma, domega=ScalarField(values=domega)), g


def calibrate_gradient_sign(
    problem: InverseProblem,
    metric: ParameterMetric,
    gamma: float,
    omega_values: np.ndarray,
    rng_seed: int = 0,
) -> float:
    """Fix the overall adjoint sign by one sensitivity/adjoint identity check."""
    rng = np.random.default_rng(rng_seed)
    system, psi = problem.state(gamma, omega_values)
    mask = observation_mask(problem.grid, problem.scheme)
    y_vals = rng.standard_normal(len(mask))
    if not problem.scheme.real_part_only:
        y_vals = y_vals + 1j * rng.standard_normal(len(mask))
    y = DataVector(values=y_vals, mask=mask, scheme=problem.scheme)
    dgamma = rng.standard_normal()
    domega = metric.project_mean_zero(rng.standard_normal(problem.grid.n))
    dp = GradientPair(dgamma=dgamma, domega=ScalarField(values=domega))
    lhs = data_inner(
        problem.grid,
        sensitivity(dp, psi, system, problem.grid, problem.stencils, problem.scheme),
        y,
    )
    raw_gamma, density = _gradient_parts(problem, system, psi.values, y)
    w = problem.grid.weights
    rhs = dgamma * raw_gamma + float(np.sum(domega * density * w))
    sign = -1.0 if abs(lhs + rhs) <= abs(lhs - rhs) else 1.0
    mismatch = abs(lhs - sign * rhs) / max(abs(lhs), 1e-300)
    if mismatch > 1e-8:
        raise ArithmeticError(f"adjoint sign calibration failed (mismatch {mismatch:.2e})")
    return sign


# ----------------------------------------------------------------------
# Nesterov-Landweber iteration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LineSearchConfig:
    mu0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class IterationConfig:
    nesterov_alpha: float = 3.0
    tau: float = 1.1
    max_iter: int = 500
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    parameter_metric: str = "H2"
    gamma_scale: float = 1.0
    residual_floor: float = 0.0  # absolute floor on the stopping threshold

    def __post_init__(self):
        if self.tau <= 1.0:
            raise ConfigurationError("discrepancy factor tau must exceed 1")
        if self.nesterov_alpha < 3.0:
            raise ConfigurationError("nesterov_alpha must be at least 3")


@dataclass(frozen=True, eq=False)
class ReconstructionTrace:
    iterates: list  # (gamma_k, omega_k values) for k = 0..K
    residuals: list  # ||F(p_k) - y||_Y for k = 0..K
    step_sizes: list  # accepted mu_k per update (length K)
    stop_index: int
    stop_reason: str  # discrepancy | residual_floor | max_iter |
    #                   line_search_failure | near_resonance
    threshold: float
    delta: float
    sign: float


def nesterov_landweber(
    problem: InverseProblem,
    y_delta: DataVector,
    delta: float,
    config: IterationConfig,
    gamma_init: float,
    omega_init: np.ndarray | None = None,
) -> ReconstructionTrace:
    """Accelerated Landweber with discrepancy stopping.

    Two-line iteration with momentum weight (k-1)/(k+alpha-1), gradient step
    from a warm-started backtracking line search (Armijo decrease on the
    half-squared misfit).  A monotone safeguard falls back to a plain
    gradient step from p_k whenever the accelerated step would increase the
    misfit; this keeps the residual history nonincreasing, which the
    discrepancy principle relies on.
    """
    grid = problem.grid
    metric = ParameterMetric(
        grid, problem.stencils, config.parameter_metric, config.gamma_scale
    )
    if delta < 0:
        raise ConfigurationError("noise level delta must be nonnegative")
    ls = config.line_search
    threshold = max(config.tau * delta, config.residual_floor)

    gamma = float(gamma_init)
    omega = (
        np.zeros(grid.n) if omega_init is None else np.asarray(omega_init, float).copy()
    )
    try:
        sign = calibrate_gradient_sign(problem, metric, gamma, omega)
    except NearResonanceError:
        return ReconstructionTrace(
            iterates=[(gamma, omega.copy())],
            residuals=[float("nan")],
            step_sizes=[],
            stop_index=0,
            stop_reason="near_resonance",
            threshold=threshold,
            delta=delta,
            sign=-1.0,
        )

    def misfit(ga, om):
        d = problem.observed(ga, om)
        r = DataVector(values=d.values - y_delta.values, mask=d.mask, scheme=d.scheme)
        return r, data_norm(grid, r)

    iterates = [(gamma, omega.copy())]
    _, res0 = misfit(gamma, omega)
    residuals = [res0]
    step_sizes: list[float] = []
    stop_reason = "max_iter"
    stop_index = config.max_iter
    gamma_prev, omega_prev = gamma, omega.copy()
    mu_start = ls.mu0
    res_current = res0

    k = 0
    while True:
        if res_current <= threshold:
            stop_index = k
            stop_reason = "discrepancy" if config.tau * delta >= res_current else "residual_floor"
            break
        if k >= config.max_iter:
            stop_index = k
            stop_reason = "max_iter"
            break
        k += 1
        weight = (k - 1) / (k + config.nesterov_alpha - 1)
        z_gamma = gamma + weight * (gamma - gamma_prev)
        z_omega = omega + weight * (omega - omega_prev)
        if z_gamma <= 0 and not problem.allow_negative_gamma:
            z_gamma, z_omega = gamma, omega  # momentum point infeasible

        accepted = None
        failure = None
        for src_gamma, src_omega, is_fallback in (
            (z_gamma, z_omega, False),
            (gamma, omega, True),
        ):
            try:
                system, psi = problem.state(src_gamma, src_omega)
            except NearResonanceError:
                failure = "near_resonance"
                break
            obs = observe(psi, problem.scheme, grid)
            res_vec = DataVector(
                values=obs.values - y_delta.values, mask=obs.mask, scheme=obs.scheme
            )
            grad, g_density = adjoint_gradient(
                problem, res_vec, psi, system, metric, sign=sign
            )
            phi0 = 0.5 * data_norm(grid, res_vec) ** 2
            decrease = metric.gamma_scale * grad.dgamma**2 + float(
                np.sum(grad.domega.values * g_density * grid.weights)
            )
            decrease = max(decrease, 0.0)
            mu = mu_start
            for _ in range(ls.max_backtracks):
                trial_gamma = src_gamma - mu * grad.dgamma
                trial_omega = src_omega - mu * grad.domega.values
                if trial_gamma > 0 or problem.allow_negative_gamma:
                    try:
                        _, trial_res = misfit(trial_gamma, trial_omega)
                    except NearResonanceError:
                        mu *= ls.shrink
                        continue
                    phi = 0.5 * trial_res**2
                    armijo = phi <= phi0 - ls.armijo_c * mu * decrease
                    monotone = trial_res <= res_current or is_fallback
                    if armijo and monotone:
                        accepted = (trial_gamma, trial_omega, trial_res, mu)
                        break
                mu *= ls.shrink
            if accepted is not None:
                break
        if failure is not None:
            stop_index = k - 1
            stop_reason = failure
            break
        if accepted is None:
            stop_index = k - 1
            stop_reason = "line_search_failure"
            break
        gamma_prev, omega_prev = gamma, omega
        gamma, omega, res_current, mu = accepted
        iterates.append((gamma, omega.copy()))
        residuals.append(res_current)
        step_sizes.append(mu)
        mu_start = mu / ls.shrink

    return ReconstructionTrace(
        iterates=iterates,
        residuals=residuals,
        step_sizes=step_sizes,
        stop_index=stop_index,
        stop_reason=stop_reason,
        threshold=threshold,
        delta=delta,
        sign=sign,
    )


# ----------------------------------------------------------------------
# tangential-cone-condition probe
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TCCReport:
    ratios: np.ndarray
    max_ratio: float
    median_ratio: float
    skipped: int
    radius: float
    samples: int


def _smooth_direction(rng, grid, metric, degree_cap=6):
    """Random unit-norm parameter direction with a smooth Omega part."""
    dgamma = rng.standard_normal()
    coeffs = rng.standard_normal(degree_cap) / np.arange(1, degree_cap + 1) ** 1.5
    domega = np.zeros(grid.n)
    x = np.cos(grid.nodes)
    for l, c in enumerate(coeffs, start=1):
        domega += c * eval_legendre(l, x)
    domega = metric.project_mean_zero(domega)
    pair = GradientPair(dgamma=dgamma, domega=ScalarField(values=domega))
    norm = metric.pair_norm(pair)
    return GradientPair(
        dgamma=dgamma / norm, domega=ScalarField(values=domega / norm)
    )


def tcc_probe(
    problem: InverseProblem,
    gamma_truth: float,
    omega_truth: np.ndarray,
    radius: float,
    n_samples: int,
    rng_seed: int,
    metric: ParameterMetric | None = None,
    cauchy_projection: bool = False,
) -> TCCReport:
    """Empirical tangential-cone ratio over random parameter pairs.

    For pairs p, p~ in the metric ball of the given radius around the truth
    the probe evaluates

        ||F(p) - F(p~) - F'(p)(p - p~)||_Y
        ---------------------------------------------
        ||p - p~||_{R x X} * ||F(p) - F(p~)||_Y

    Pairs with ||F(p) - F(p~)|| below 1e-13 are skipped and counted.  With
    `cauchy_projection` and a restricted scheme, sampled states are adjusted
    by a smooth blend to share the truth state's Cauchy data at the window
    boundary before observation (the constraint under which the partial-data
    convergence theory holds; reconstructions themselves never use it).
    """
    if radius <= 0:
        raise ConfigurationError("probe radius must be positive")
    if n_samples < 1:
        raise ConfigurationError("probe needs at least one sample")
    grid = problem.grid
    metric = metric or ParameterMetric(grid, problem.stencils)
    rng = np.random.default_rng(rng_seed)

    projector = None
    if cauchy_projection and problem.scheme.kind == "restricted":
        _, psi_truth = problem.state(gamma_truth, omega_truth)
        projector = _cauchy_projector(problem, psi_truth.values)

    def point(direction, rad):
        g = gamma_truth + rad * direction.dgamma
        om = omega_truth + rad * direction.domega.values
        return g, om

    ratios = []
    skipped = 0
    for _ in range(n_samples):
        d1 = _smooth_direction(rng, grid, metric)
        d2 = _smooth_direction(rng, grid, metric)
        g1, om1 = point(d1, radius * rng.random())
        g2, om2 = point(d2, radius * rng.random())
        if g1 <= 0 or g2 <= 0:
            skipped += 1
            continue
        try:
            sys1, psi1 = problem.state(g1, om1)
            _, psi2 = problem.state(g2, om2)
        except NearResonanceError:
            skipped += 1
            continue
        v1, v2 = psi1.values, psi2.values
        if projector is not None:
            v1, v2 = projector(v1), projector(v2)
        f1 = observe(ComplexField(m=problem.m, values=v1), problem.scheme, grid)
        f2 = observe(ComplexField(m=problem.m, values=v2), problem.scheme, grid)
        diff = DataVector(values=f1.values - f2.values, mask=f1.mask, scheme=f1.scheme)
        diff_norm = data_norm(grid, diff)
        if diff_norm < 1e-13:
            skipped += 1
            continue
        step = GradientPair(
            dgamma=g1 - g2, domega=ScalarField(values=om1 - om2)
        )
        lin = sensitivity(step, psi1, sys1, grid, problem.stencils, problem.scheme)
        rem = DataVector(
            values=f1.values - f2.values - lin.values, mask=f1.mask, scheme=f1.scheme
        )
        ratios.append(
            data_norm(grid, rem) / (metric.pair_norm(step) * diff_norm)
        )
    ratios = np.asarray(ratios)
    return TCCReport(
        ratios=ratios,
        max_ratio=float(ratios.max()) if len(ratios) else float("nan"),
        median_ratio=float(np.median(ratios)) if len(ratios) else float("nan"),
        skipped=skipped,
        radius=radius,
        samples=n_samples,
    )


def _cauchy_projector(problem, psi_truth):
    """Blend correction matching value and slope of the truth at the window edge."""
    grid = problem.grid
    mask = observation_mask(grid, problem.scheme)
    lo, hi = mask[0], mask[-1]
    theta = grid.nodes
    width = max(problem.scheme.epsilon, 4 * grid.h)

    def hermite_bump(t0, slope_sign):
        t = (theta - t0) * slope_sign / width
        val = np.where((t >= 0) & (t < 1), (1 - t) ** 2 * (1 + 2 * t), 0.0)
        der = np.where((t >= 0) & (t < 1), (1 - t) ** 2 * t * width * slope_sign, 0.0)
        return val, der

    d1 = problem.stencils.d1

    def project(v):
        dv = d1 @ (v - psi_truth)
        out = v.copy()
        for idx, sgn in ((lo, 1.0), (hi, -1.0)):
            val_mismatch = v[idx] - psi_truth[idx]
            der_mismatch = dv[idx]
            bump_v, bump_d = hermite_bump(theta[idx], sgn)
            out = out - val_mismatch * bump_v - der_mismatch * bump_d
        return out

    return project
