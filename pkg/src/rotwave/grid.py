"""Colatitude discretization of separated fields on a rotating sphere.

A field of azimuthal order m lives on a uniform cell-centered grid

    theta_j = (j + 1/2) * h,   h = pi / n,   j = 0 .. n-1,

so no node ever touches a pole and 1/sin(theta) stays finite everywhere.
Integrals use the midpoint rule with the area weight r^2 sin(theta) h (the
2*pi azimuthal factor is omitted consistently).

The separated Laplace-Beltrami operator

    delta_m = (1/(r^2 sin)) d/dtheta (sin d/dtheta) - m^2/(r^2 sin^2)

is discretized with a 5-point second-derivative stencil and a 6-point
first-derivative stencil (exact through degree 5).  The extra order on the
first derivative matters: the cot(theta) factor amplifies the stencil error
by 1/theta near the poles, and only the degree-5 exactness keeps the
odd-parity fields at full fourth-order accuracy there.

Pole conditions enter through two ghost layers per pole, eliminated against
the two m-dependent homogeneous conditions

    m = 0:     psi'  = psi''' = 0
    |m| = 1:   psi   = psi''  = 0
    |m| >= 2:  psi   = psi'   = 0

evaluated at theta in {0, pi} with 6-point one-sided formulas.  The ghost
elimination keeps the operator banded and is reused by the bilaplacian,
which is formed as the composition delta_m(delta_m(.)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

# derivative orders constrained at each pole, keyed by min(|m|, 2)
POLE_CONDITIONS = {0: (1, 3), 1: (0, 2), 2: (0, 1)}

_GHOST_LAYERS = 2
_FUNCTIONAL_POINTS = 6  # nodes per pole-condition functional (2 ghosts + 4 interior)


def fd_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the `order`-th derivative at x0.

    Solves the scaled Taylor-moment system, exact on polynomials of degree
    len(nodes)-1.  Well conditioned for the small stencils used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    k = len(nodes)
    if order >= k:
        raise ValueError(f"need more than {k} nodes for derivative order {order}")
    scale = max(float(np.max(np.abs(nodes - x0))), np.finfo(float).tiny)
    t = (nodes - x0) / scale
    moments = np.vander(t, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(moments, rhs) / scale**order


@dataclass(frozen=True, eq=False)
class Grid:
    """Cell-centered colatitude grid with quadrature weights r^2 sin(theta) h."""

    n: int
    r: float
    h: float
    nodes: np.ndarray
    weights: np.ndarray


def build_grid(n: int, r: float = 1.0) -> Grid:
    """Build the uniform pole-free grid with n cells on (0, pi).

    n must be at least 16 so the one-sided boundary stencils have support.
    """
    if n < 16:
        raise ConfigurationError(f"grid needs n >= 16, got n={n}")
    if r <= 0:
        raise ConfigurationError(f"sphere radius must be positive, got r={r}")
    h = math.pi / n
    nodes = (np.arange(n) + 0.5) * h
    weights = r * r * np.sin(nodes) * h
    return Grid(n=n, r=r, h=h, nodes=nodes, weights=weights)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex separated field tagged with its azimuthal order m."""

    m: int
    values: np.ndarray

    @classmethod
    def sample(cls, grid: Grid, m: int, fn) -> "ComplexField":
        return cls(m=m, values=np.asarray(fn(grid.nodes), dtype=complex))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real latitudinal profile (an m = 0 field)."""

    values: np.ndarray

    @classmethod
    def sample(cls, grid: Grid, fn) -> "ScalarField":
        return cls(values=np.asarray(fn(grid.nodes), dtype=float))


def _check_field(grid: Grid, f: ComplexField, m: int | None = None) -> None:
    if len(f.values) != grid.n:
        raise ValueError(f"field length {len(f.values)} != grid size {grid.n}")
    if m is not None and f.m != m:
        raise ValueError(f"field has azimuthal order {f.m}, expected {m}")


class DerivativeStencils:
    """Banded derivative matrices and per-m ghost closures for one grid.

    Public attributes:
      d1, d2   -- n x n first/second derivative matrices acting on plain
                  nodal fields with one-sided stencils near the poles (no
                  boundary conditions assumed); used for rotation profiles
                  and Sobolev seminorms.

    The boundary-value operators are obtained from `delta_matrix(m)` /
    `bilaplacian_matrix(m)`, which embed the ghost closure for the pole
    conditions of azimuthal order m.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n, h = grid.n, grid.h
        theta = grid.nodes
        self._theta_ext = (np.arange(-_GHOST_LAYERS, n + _GHOST_LAYERS) + 0.5) * h

        self.d1 = self._plain_matrix(order=1, width=6)
        self.d2 = self._plain_matrix(order=2, width=6)
        self._d1_ext = self._extended_matrix(order=1)
        self._d2_ext = self._extended_matrix(order=2)

        self._ext_cache: dict[int, np.ndarray] = {}
        self._delta_cache: dict[int, np.ndarray] = {}
        self._bilap_cache: dict[int, np.ndarray] = {}

        # one-sided trace functionals over the first/last 6 interior nodes
        self._trace_north = {
            d: fd_weights(0.0, theta[:_FUNCTIONAL_POINTS], d) for d in range(4)
        }
        self._trace_south = {
            d: fd_weights(math.pi, theta[-_FUNCTIONAL_POINTS:], d) for d in range(4)
        }

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    def _plain_matrix(self, order: int, width: int) -> np.ndarray:
        """n x n derivative matrix, windows clipped into the grid."""
        n = self.grid.n
        theta = self.grid.nodes
        out = np.zeros((n, n))
        for j in range(n):
            start = j - 2 if j < n // 2 else j - 3
            start = min(max(start, 0), n - width)
            cols = np.arange(start, start + width)
            out[j, cols] = fd_weights(theta[j], theta[cols], order)
        return out

    def _extended_matrix(self, order: int) -> np.ndarray:
        """n x (n+4) stencil matrix over the ghost-extended grid.

        d2 uses the 5-point centered stencil; d1 uses 6 points with the
        extra node on the equator side (degree-5 exactness, see module
        docstring for why).
        """
        n = self.grid.n
        g = _GHOST_LAYERS
        theta = self.grid.nodes
        out = np.zeros((n, n + 2 * g))
        for j in range(n):
            if order == 2:
                cols = np.arange(j - 2, j + 3)
            elif j < n // 2:
                cols = np.arange(j - 2, j + 4)
            else:
                cols = np.arange(j - 3, j + 3)
            out[j, cols + g] = fd_weights(theta[j], self._theta_ext[cols + g], order)
        return out

    def extension_matrix(self, m: int) -> np.ndarray:
        """(n+4) x n map filling two ghost layers per pole from Gamma_m."""
        key = min(abs(int(m)), 2)
        cached = self._ext_cache.get(key)
        if cached is not None:
            return cached

        n, h = self.grid.n, self.grid.h
        g = _GHOST_LAYERS
        orders = POLE_CONDITIONS[key]
        ext = np.zeros((n + 2 * g, n))
        ext[g : n + g, :] = np.eye(n)

        # north pole: functional over ext nodes [0..5] evaluated at theta=0
        pts = self._theta_ext[:_FUNCTIONAL_POINTS]
        ghost_coef = np.zeros((2, g))
        inner_coef = np.zeros((2, _FUNCTIONAL_POINTS - g))
        for i, d in enumerate(orders):
            w = fd_weights(0.0, pts, d) * h**d  # h^d normalization for conditioning
            ghost_coef[i] = w[:g]
            inner_coef[i] = w[g:]
        fill = -np.linalg.solve(ghost_coef, inner_coef)
        ext[0, : _FUNCTIONAL_POINTS - g] = fill[0]
        ext[1, : _FUNCTIONAL_POINTS - g] = fill[1]

        # south pole, mirrored
        pts = self._theta_ext[-_FUNCTIONAL_POINTS:]
        for i, d in enumerate(orders):
            w = fd_weights(math.pi, pts, d) * h**d
            ghost_coef[i] = w[-g:]
            inner_coef[i] = w[:-g]
        fill = -np.linalg.solve(ghost_coef, inner_coef)
        ext[n + g, n - (_FUNCTIONAL_POINTS - g) :] = fill[0]
        ext[n + g + 1, n - (_FUNCTIONAL_POINTS - g) :] = fill[1]

        self._ext_cache[key] = ext
        return ext

    def delta_matrix(self, m: int) -> np.ndarray:
        """Dense banded matrix of delta_m including the Gamma_m closure."""
        key = abs(int(m))
        cached = self._delta_cache.get(key)
        if cached is not None:
            return cached
        theta = self.grid.nodes
        r = self.grid.r
        cot = np.cos(theta) / np.sin(theta)
        ext = self.extension_matrix(key)
        lap = (self._d2_ext + cot[:, None] * self._d1_ext) @ ext
        lap -= np.diag(key * key / np.sin(theta) ** 2)
        lap /= r * r
        self._delta_cache[key] = lap
        return lap

    def bilaplacian_matrix(self, m: int) -> np.ndarray:
        key = abs(int(m))
        cached = self._bilap_cache.get(key)
        if cached is None:
            lap = self.delta_matrix(key)
            cached = lap @ lap
            self._bilap_cache[key] = cached
        return cached

    def trace_weights(self, pole: str, order: int) -> np.ndarray:
        """One-sided weights estimating the order-th derivative at a pole."""
        table = self._trace_north if pole == "north" else self._trace_south
        return table[order]


def build_stencils(grid: Grid) -> DerivativeStencils:
    return DerivativeStencils(grid)


# ----------------------------------------------------------------------
# operations
# ----------------------------------------------------------------------


def inner_product(grid: Grid, f: ComplexField, g: ComplexField) -> complex:
    """Weighted L^2 pairing sum f_j conj(g_j) w_j of two same-m fields."""
    if f.m != g.m:
        raise ValueError(f"cannot pair fields of different order: {f.m} vs {g.m}")
    _check_field(grid, f)
    _check_field(grid, g)
    return complex(np.sum(f.values * np.conj(g.values) * grid.weights))


def apply_delta_m(
    grid: Grid, stencils: DerivativeStencils, m: int, psi: ComplexField
) -> ComplexField:
    """Apply the separated Laplacian with the Gamma_m ghost closure."""
    _check_field(grid, psi, m)
    return ComplexField(m=m, values=stencils.delta_matrix(m) @ psi.values)


def apply_bilaplacian_m(
    grid: Grid, stencils: DerivativeStencils, m: int, psi: ComplexField
) -> ComplexField:
    """Two applications of delta_m with the closure re-applied in between."""
    _check_field(grid, psi, m)
    lap = stencils.delta_matrix(m)
    return ComplexField(m=m, values=lap @ (lap @ psi.values))


def weighted_mean(grid: Grid, values: np.ndarray):
    return np.sum(values * grid.weights) / np.sum(grid.weights)


def norm_sobolev(
    grid: Grid, stencils: DerivativeStencils, psi: ComplexField, s: str
) -> float:
    """Discrete L2 / H1 / H2 norm of a separated field.

    H1 is the surface-gradient seminorm sqrt(|psi'/r|^2 + |m psi/(r sin)|^2)
    in weighted L2; H2 is the weighted L2 norm of delta_m psi.  These are the
    mean-zero Sobolev norms, so for m = 0 a non-mean-zero field triggers a
    warning for s in {H1, H2}.
    """
    _check_field(grid, psi)
    v = psi.values
    w = grid.weights
    if s == "L2":
        return float(np.sqrt(np.sum(np.abs(v) ** 2 * w)))
    if s not in ("H1", "H2"):
        raise ValueError(f"unknown Sobolev order {s!r}; expected L2, H1 or H2")
    if psi.m == 0:
        scale = float(np.max(np.abs(v))) or 1.0
        # tolerance tracks the midpoint-quadrature error of the mean itself
        if abs(weighted_mean(grid, v)) > max(1e-8, grid.h**2) * scale:
            warnings.warn(
                "H1/H2 norms assume a mean-zero field for m = 0", stacklevel=2
            )
    if s == "H1":
        grad2 = np.abs(stencils.d1 @ v) ** 2 / grid.r**2
        if psi.m != 0:
            grad2 = grad2 + (psi.m**2) * np.abs(v) ** 2 / (
                grid.r**2 * np.sin(grid.nodes) ** 2
            )
        return float(np.sqrt(np.sum(grad2 * w)))
    lap = stencils.delta_matrix(psi.m) @ v
    return float(np.sqrt(np.sum(np.abs(lap) ** 2 * w)))


def boundary_trace(
    grid: Grid, stencils: DerivativeStencils, m: int, psi: ComplexField
) -> tuple[complex, complex, complex, complex]:
    """One-sided estimates of the Gamma_m quantities at both poles.

    Returns (north first, north second, south first, south second) for the
    two derivative orders constrained at order m.  Uses interior nodes only,
    so it measures how well psi satisfies the conditions rather than
    assuming them.
    """
    _check_field(grid, psi)
    orders = POLE_CONDITIONS[min(abs(int(m)), 2)]
    head = psi.values[:_FUNCTIONAL_POINTS]
    tail = psi.values[-_FUNCTIONAL_POINTS:]
    north = [complex(stencils.trace_weights("north", d) @ head) for d in orders]
    south = [complex(stencils.trace_weights("south", d) @ tail) for d in orders]
    return north[0], north[1], south[0], south[1]
