"""Separated wave operator: assembly, solve, derivative and diagnostics.

The forward boundary-value operator for azimuthal order m at temporal
frequency omega is

    B = gamma * delta_m^2 + i omega delta_m - i m beta delta_m + i m alpha

with rotation-derived coefficients

    alpha(theta) = (Omega'' + 3 Omega' cot(theta) - 2 Omega) / r^2
    beta(theta)  = Omega(theta) - Omega_ref

and the Gamma_m pole closure baked into delta_m.  The adjoint is available
in two modes: `algebraic` is the exact adjoint of the discrete matrix with
respect to the weighted inner product (W^-1 B^H W), `continuous` discretizes
the analytic adjoint  gamma delta_m^2 - i omega delta_m + i m delta_m(beta .)
- i m alpha  directly; the two agree to discretization error on fields
compatible with the pole conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .errors import ConfigurationError, NearResonanceError
from .grid import ComplexField, DerivativeStencils, Grid, ScalarField, _check_field

PIVOT_RTOL = 1e-14  # near-resonance threshold on the smallest LU pivot


@dataclass(frozen=True, eq=False)
class RotationProfile:
    """Axisymmetric rotation Omega(theta) with cached derivatives."""

    values: ScalarField
    d1: ScalarField
    d2: ScalarField

    @classmethod
    def from_values(
        cls, values: np.ndarray | ScalarField, stencils: DerivativeStencils
    ) -> "RotationProfile":
        v = values.values if isinstance(values, ScalarField) else np.asarray(values, float)
        return cls(
            values=ScalarField(values=v),
            d1=ScalarField(values=stencils.d1 @ v),
            d2=ScalarField(values=stencils.d2 @ v),
        )


@dataclass(frozen=True, eq=False)
class Parameters:
    """Unknowns of the inverse problem plus the rotating-frame reference."""

    gamma: float
    omega: RotationProfile
    omega_ref: float = 0.0


@dataclass(frozen=True, eq=False)
class Coefficients:
    alpha: ScalarField
    beta: ScalarField
    alpha_tilde: ScalarField


def alpha_operator(grid: Grid, stencils: DerivativeStencils) -> np.ndarray:
    """Matrix of the linear map Omega -> alpha_Omega (expanded form)."""
    cot = np.cos(grid.nodes) / np.sin(grid.nodes)
    n = grid.n
    return (stencils.d2 + 3.0 * cot[:, None] * stencils.d1 - 2.0 * np.eye(n)) / grid.r**2


def compute_coefficients(
    omega: RotationProfile, omega_ref: float, grid: Grid
) -> Coefficients:
    """Rotation-derived coefficients alpha, beta and alpha-tilde."""
    om = omega.values.values
    cot = np.cos(grid.nodes) / np.sin(grid.nodes)
    alpha = (omega.d2.values + 3.0 * cot * omega.d1.values - 2.0 * om) / grid.r**2
    beta = om - omega_ref
    alpha_tilde = omega.d1.values * np.sin(grid.nodes) + 2.0 * om * np.cos(grid.nodes)
    return Coefficients(
        alpha=ScalarField(values=alpha),
        beta=ScalarField(values=beta),
        alpha_tilde=ScalarField(values=alpha_tilde),
    )


class WaveSystem:
    """Assembled separated operator with a lazily cached LU factorization.

    Immutable after assembly; concurrent solves against one factorization
    are safe (the factorization itself is computed on first use).
    """

    def __init__(self, matrix, m, omega_freq, role, grid):
        self.matrix = matrix
        self.m = m
        self.omega_freq = omega_freq
        self.role = role
        self.grid = grid
        self._lu = None
        self._scale = None

    def factorization(self):
        if self._lu is None:
            lu, piv = lu_factor(self.matrix, check_finite=False)
            # raw LU pivots under-report near-singularity; use the LAPACK
            # reciprocal condition estimate from the factorization instead
            gecon = get_lapack_funcs("gecon", (lu,))
            rcond, _ = gecon(lu, np.linalg.norm(self.matrix, 1), norm="1")
            if rcond < PIVOT_RTOL:
                raise NearResonanceError(self.omega_freq, self.m, float(rcond))
            self._lu = (lu, piv)
        return self._lu

    def solve_values(self, rhs: np.ndarray) -> np.ndarray:
        lu = self.factorization()
        return lu_solve(lu, rhs, check_finite=False)

    def solve_weighted_adjoint(self, rhs: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Solve (W^-1 A^H W) z = rhs reusing this system's factorization."""
        lu = self.factorization()
        return lu_solve(lu, weights * rhs, trans=2, check_finite=False) / weights

    def bandwidth(self) -> int:
        """Largest |i - j| with a structurally nonzero entry."""
        i, j = np.nonzero(np.abs(self.matrix) > 0)
        return int(np.max(np.abs(i - j))) if len(i) else 0


def _mean_pin(grid: Grid, scale: float) -> np.ndarray:
    """Rank-one term pinning the constant mode of the m = 0 operator.

    delta_0 annihilates constants, so the axisymmetric problem is posed on
    mean-zero fields; scale * P with P x = mean_w(x) * 1 removes the null
    space, acts as zero on discretely mean-zero fields, and is self-adjoint
    in the weighted inner product (so both adjoint modes stay consistent).
    """
    w = grid.weights
    return scale * np.outer(np.ones(grid.n), w) / np.sum(w)


def _assemble_matrix(gamma, omega, omega_ref, omega_freq, m, grid, stencils):
    lap = stencils.delta_matrix(m)
    bilap = stencils.bilaplacian_matrix(m)
    coeff = compute_coefficients(omega, omega_ref, grid)
    mat = gamma * bilap + 1j * omega_freq * lap
    if m != 0:
        mat = mat - 1j * m * coeff.beta.values[:, None] * lap
        mat = mat + 1j * m * np.diag(coeff.alpha.values)
    else:
        mat = mat + _mean_pin(grid, float(np.max(np.abs(mat))))
    return np.ascontiguousarray(mat.astype(complex))


def assemble_forward(
    p: Parameters,
    omega_freq: float,
    m: int,
    grid: Grid,
    stencils: DerivativeStencils,
    _allow_any_gamma: bool = False,
) -> WaveSystem:
    """Assemble gamma delta_m^2 + i omega delta_m - i m beta delta_m + i m alpha."""
    if p.gamma <= 0 and not _allow_any_gamma:
        raise ConfigurationError(f"forward operator needs gamma > 0, got {p.gamma}")
    mat = _assemble_matrix(p.gamma, p.omega, p.omega_ref, omega_freq, m, grid, stencils)
    return WaveSystem(mat, m, omega_freq, "forward", grid)


def assemble_adjoint(
    p: Parameters,
    omega_freq: float,
    m: int,
    grid: Grid,
    stencils: DerivativeStencils,
    mode: str = "algebraic",
    _allow_any_gamma: bool = False,
) -> WaveSystem:
    """Assemble the adjoint operator.

    algebraic:  exact discrete adjoint W^-1 B^H W of the forward matrix.
    continuous: discretization of
                gamma delta^2 - i omega delta + i m delta(beta .) - i m alpha.
    """
    if p.gamma <= 0 and not _allow_any_gamma:
        raise ConfigurationError(f"adjoint operator needs gamma > 0, got {p.gamma}")
    if mode == "algebraic":
        fwd = _assemble_matrix(p.gamma, p.omega, p.omega_ref, omega_freq, m, grid, stencils)
        w = grid.weights
        mat = fwd.conj().T * (w[None, :] / w[:, None])
    elif mode == "continuous":
        lap = stencils.delta_matrix(m)
        bilap = stencils.bilaplacian_matrix(m)
        coeff = compute_coefficients(p.omega, p.omega_ref, grid)
        mat = p.gamma * bilap - 1j * omega_freq * lap
        if m != 0:
            mat = mat + 1j * m * (lap * coeff.beta.values[None, :])
            mat = mat - 1j * m * np.diag(coeff.alpha.values)
        else:
            mat = mat + _mean_pin(grid, float(np.max(np.abs(mat))))
        mat = mat.astype(complex)
    else:
        raise ValueError(f"unknown adjoint mode {mode!r}")
    return WaveSystem(np.ascontiguousarray(mat), m, omega_freq, "adjoint", grid)


def solve(system: WaveSystem, rhs: ComplexField) -> ComplexField:
    """Solve the assembled system for one right-hand side."""
    if rhs.m != system.m:
        raise ValueError(f"rhs has order {rhs.m}, system expects {system.m}")
    return ComplexField(m=system.m, values=system.solve_values(rhs.values.astype(complex)))


def apply_B_prime(
    dgamma: float,
    domega: ScalarField | np.ndarray,
    psi: ComplexField,
    grid: Grid,
    stencils: DerivativeStencils,
    m: int,
) -> ComplexField:
    """Parameter derivative of the operator applied to a state:

        dgamma * delta^2 psi - i m dOmega (delta psi) + i m alpha_dOmega psi.

    The operator is affine in (gamma, Omega), so this is exact, not a
    linearization.
    """
    _check_field(grid, psi, m)
    dom = domega.values if isinstance(domega, ScalarField) else np.asarray(domega, float)
    lap = stencils.delta_matrix(m)
    out = dgamma * (lap @ (lap @ psi.values))
    if m != 0:
        alpha_d = alpha_operator(grid, stencils) @ dom
        out = out - 1j * m * dom * (lap @ psi.values) + 1j * m * alpha_d * psi.values
    return ComplexField(m=m, values=out)


# ----------------------------------------------------------------------
# well-posedness diagnostics (report-only)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingConstants:
    """Sobolev embedding constants entering the diagnostics (defaults 1)."""

    h1_to_l6: float = 1.0
    h_half_to_l3: float = 1.0
    h2_to_l3: float = 1.0
    h2_to_linf: float = 1.0
    h1_to_l4: float = 1.0


@dataclass(frozen=True)
class DiagnosticReport:
    satisfied: bool
    lhs: float
    rhs: float
    description: str


def _h1_full_norm(grid: Grid, stencils: DerivativeStencils, values: np.ndarray) -> float:
    w = grid.weights
    l2sq = float(np.sum(values**2 * w))
    gradsq = float(np.sum((stencils.d1 @ values) ** 2 * w)) / grid.r**2
    return float(np.sqrt(l2sq + gradsq))


def frequency_condition(
    p: Parameters,
    omega_freq: float,
    grid: Grid,
    stencils: DerivativeStencils,
    constants: EmbeddingConstants = EmbeddingConstants(),
) -> DiagnosticReport:
    """Large-frequency invertibility bound: |omega| against
    (4/gamma^3) (C1 C2)^4 (||Omega-Omega_ref||_H1^2 + 9 ||Omega||_H1^2)^2."""
    om = p.omega.values.values
    c = constants.h1_to_l6 * constants.h_half_to_l3
    nb = _h1_full_norm(grid, stencils, om - p.omega_ref)
    na = _h1_full_norm(grid, stencils, om)
    rhs = 4.0 / p.gamma**3 * c**4 * (nb**2 + 9.0 * na**2) ** 2
    return DiagnosticReport(
        satisfied=abs(omega_freq) > rhs,
        lhs=abs(omega_freq),
        rhs=rhs,
        description="|omega| exceeds the large-frequency invertibility threshold",
    )


def smallness_condition(
    p: Parameters,
    m: int,
    grid: Grid,
    constants: EmbeddingConstants = EmbeddingConstants(),
) -> DiagnosticReport:
    """Uniqueness bound: ||Omega'||_L2 |m| C1 C2 / r compared against gamma."""
    w = grid.weights
    dnorm = float(np.sqrt(np.sum(p.omega.d1.values**2 * w)))
    lhs = dnorm * abs(m) / grid.r * constants.h2_to_l3 * constants.h1_to_l6
    return DiagnosticReport(
        satisfied=lhs < p.gamma,
        lhs=lhs,
        rhs=p.gamma,
        description="rotation-shear norm is small compared to the viscosity",
    )
