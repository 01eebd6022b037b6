"""Quadrature-defined quantities of the multiscale model and its limit.

Densities, scale functions and speed densities are tabulated on a shared
uniform grid over the truncated domain [-L, L]. Transformed coordinates
xi = f(x) are never gridded directly: integrals in xi are evaluated on the
x-grid through the substitution d xi = f'(x) dx.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .model import HomogenizedSpec, ModelSpec, homogenize
from .quadrature import QuadratureError, QuadratureGrid, integrate_to_tolerance

NODES_PER_PERIOD = 20


def bessel_series(inv_sigma: float, tol: float = 1e-15) -> float:
    """Period average of exp(cos(y) / sigma) as sum_m (2 sigma)^(-2m) / (m!)^2."""
    if inv_sigma < 0:
        raise ValueError("inv_sigma must be non-negative")
    q = 0.25 * inv_sigma * inv_sigma
    total, term, m = 1.0, 1.0, 0
    while True:
        m += 1
        term *= q / (m * m)
        total += term
        if term < tol * total:
            return total


def working_grid(spec: ModelSpec, max_spacing: float | None = None,
                 length: float | None = None) -> QuadratureGrid:
    """Uniform grid on [-L, L] resolving the fast period.

    The default spacing is min(eps^2/10, 1e-3) for multiscale models.
    """
    L = spec.truncation_length() if length is None else length
    if max_spacing is None:
        max_spacing = 1e-3
        if spec.multiscale:
            max_spacing = min(max_spacing, spec.eps ** 2 / 10.0)
    return QuadratureGrid.uniform(-L, L, max_spacing)


@dataclass(frozen=True)
class CellConstants:
    Z_plus: float
    Z_minus: float
    K: float
    Z_eps: float
    Z: float
    # additive shift turning the anchored log-kernel into exp(2 F_c / sigma^2) form
    fast_offset: float = 0.0


def _fast_potential(spec: ModelSpec, n: int) -> tuple[np.ndarray, float]:
    """Centered antiderivative F_c of f1 over one period, scaled by 2/sigma^2."""
    y = np.linspace(0.0, spec.period, n + 1)
    F = QuadratureGrid.simpson(0.0, spec.period, n + 1).cumulative(spec.f1(y))
    s2 = float(spec.sigma(np.zeros(1))[0]) ** 2
    mean = F[:-1].mean()
    return 2.0 * (F[:-1] - mean) / s2, -2.0 * mean / s2


def _period_averages(spec: ModelSpec, tol: float) -> tuple[float, float, float]:
    if spec.f1 is None:
        return 1.0, 1.0, 0.0
    if not spec.constant_sigma:
        raise NotImplementedError("cell constants need a constant diffusion coefficient")
    if spec.kind == "langevin":
        s = spec.noise
        two_pi = 2.0 * math.pi
        zp = integrate_to_tolerance(lambda y: np.exp(np.cos(y) / s), 0.0, two_pi, tol) / two_pi
        zm = integrate_to_tolerance(lambda y: np.exp(-np.cos(y) / s), 0.0, two_pi, tol) / two_pi
        return zp, zm, 1.0 / s
    n, prev = 256, None
    for _ in range(14):
        Fc, offset = _fast_potential(spec, n)
        cur = np.array([np.exp(Fc).mean(), np.exp(-Fc).mean()])
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * cur.max():
            return float(cur[0]), float(cur[1]), offset
        prev, n = cur, 2 * n
    raise QuadratureError("period averages did not converge")


def _log_kernel_eps(spec: ModelSpec, grid: QuadratureGrid, offset: float) -> np.ndarray:
    """log of sigma(0)^2/sigma(x)^2 exp(int_0^x 2 b_eps / sigma^2), shifted by ``offset``."""
    x = grid.nodes
    if spec.kind == "langevin":
        out = -spec.alpha * x * x / (2.0 * spec.noise)
        return out + np.cos(x / spec.eps) / spec.noise
    s2 = spec.sigma(x) ** 2
    lam = grid.cumulative_from(2.0 * spec.drift(x) / s2, 0.0)
    s0 = float(spec.sigma(np.zeros(1))[0]) ** 2
    return lam + np.log(s0 / s2) + offset


def _log_kernel(homog: HomogenizedSpec, grid: QuadratureGrid) -> np.ndarray:
    x = grid.nodes
    if homog.theta is not None:
        return -homog.theta * x * x / (2.0 * homog.sigma_eff)
    s2 = homog.sigma_bar(x) ** 2
    lam = grid.cumulative_from(2.0 * homog.b(x) / s2, 0.0)
    s0 = float(homog.sigma_bar(np.zeros(1))[0]) ** 2
    return lam + np.log(s0 / s2)


def _check_truncation(kernel: np.ndarray, grid: QuadratureGrid, mass: float, what: str):
    edge = max(kernel[0], kernel[-1]) * (grid.upper - grid.lower)
    if edge > 1e-8 * mass:
        raise QuadratureError(f"{what} has non-negligible mass at the truncation boundary")


def compute_cell_constants(spec: ModelSpec, tol: float = 1e-12,
                           grid: QuadratureGrid | None = None) -> CellConstants:
    """Z+-, K = 1/(Z+ Z-), and the normalizations Z_eps, Z on the working grid."""
    zp, zm, offset = _period_averages(spec, tol)
    K = 1.0 / (zp * zm)
    grid = working_grid(spec) if grid is None else grid
    k_eps = np.exp(_log_kernel_eps(spec, grid, offset))
    Z_eps = float(grid.integrate(k_eps))
    if spec.kind == "langevin":
        Z = math.sqrt(2.0 * math.pi * spec.noise / spec.alpha)
        k = np.exp(-spec.alpha * grid.nodes ** 2 / (2.0 * spec.noise))
        if abs(grid.integrate(k) - Z) > 1e-8 * Z:
            raise QuadratureError("limit normalization disagrees with its closed form")
    elif spec.multiscale:
        # b = K f0 and sigma_bar^2 = K sigma^2, so K cancels from the limit kernel
        Z = float(grid.integrate(np.exp(_log_kernel(HomogenizedSpec(spec.f0, spec.sigma), grid))))
    else:
        Z = Z_eps
    return CellConstants(zp, zm, K, Z_eps, Z, offset)


@dataclass(frozen=True, eq=False)
class DensityTable:
    grid: QuadratureGrid
    mu_eps: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    sandwich_lo: float
    sandwich_hi: float
    Z_eps: float
    Z: float
    eps: float
    period: float


def invariant_density(spec: ModelSpec, homog: HomogenizedSpec | None = None,
                      grid: QuadratureGrid | None = None,
                      cells: CellConstants | None = None) -> DensityTable:
    """Invariant densities mu_eps (multiscale) and mu (limit), normalized on the grid."""
    grid = working_grid(spec) if grid is None else grid
    if homog is None:
        homog = homogenize(spec)
    offset = cells.fast_offset if cells is not None else _period_averages(spec, 1e-12)[2]
    k_eps = np.exp(_log_kernel_eps(spec, grid, offset))
    k = np.exp(_log_kernel(homog, grid))
    Z_eps, Z = float(grid.integrate(k_eps)), float(grid.integrate(k))
    _check_truncation(k_eps, grid, Z_eps, "mu_eps")
    _check_truncation(k, grid, Z, "mu")
    mu_eps, mu = k_eps / Z_eps, k / Z
    if spec.kind == "langevin":
        lo = Z / Z_eps * math.exp(-1.0 / spec.noise)
        hi = Z / Z_eps * math.exp(1.0 / spec.noise)
    else:
        ratio = mu_eps / mu
        lo, hi = float(ratio.min()), float(ratio.max())
    return DensityTable(grid, mu_eps, mu, lo, hi, Z_eps, Z, spec.eps, spec.period)


@dataclass(frozen=True, eq=False)
class ScaleTable:
    """Scale functions and speed densities tabulated in x-coordinates.

    ``rho_eps_sq[i]`` is rho_eps(f_eps(x_i))^2 = 1/(sigma^2 f_eps'^2). The
    speed measure in x-coordinates is ``w_eps = rho_eps_sq * fprime_eps``.
    """

    grid: QuadratureGrid
    f_eps: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    fprime_eps: np.ndarray = field(repr=False)
    fprime: np.ndarray = field(repr=False)
    rho_eps_sq: np.ndarray = field(repr=False)
    rho_sq: np.ndarray = field(repr=False)
    C_rho_eps: float
    C_rho: float

    def speed(self, which: str = "eps") -> np.ndarray:
        if which == "eps":
            return self.rho_eps_sq * self.fprime_eps
        return self.rho_sq * self.fprime

    def scale(self, which: str = "eps") -> np.ndarray:
        return self.f_eps if which == "eps" else self.f

    def to_transformed(self, x, which: str = "eps"):
        """xi = f(x) by interpolation on the grid."""
        return np.interp(x, self.grid.nodes, self.scale(which))

    def from_transformed(self, xi, which: str = "eps"):
        """x = g(xi), the inverse scale function."""
        return np.interp(xi, self.scale(which), self.grid.nodes)


def scale_tables(spec: ModelSpec, homog: HomogenizedSpec | None = None,
                 grid: QuadratureGrid | None = None) -> ScaleTable:
    """Scale functions f_eps, f and speed densities rho_eps^2, rho^2."""
    grid = working_grid(spec) if grid is None else grid
    if homog is None:
        homog = homogenize(spec)
    x = grid.nodes
    s2_eps = spec.sigma(x) ** 2
    s2 = homog.sigma_bar(x) ** 2
    fp_eps = np.exp(-grid.cumulative_from(2.0 * spec.drift(x) / s2_eps, 0.0))
    fp = np.exp(-grid.cumulative_from(2.0 * homog.b(x) / s2, 0.0))
    f_eps = grid.cumulative_from(fp_eps, 0.0)
    f = grid.cumulative_from(fp, 0.0)
    if np.any(np.diff(f_eps) <= 0) or np.any(np.diff(f) <= 0):
        raise QuadratureError("scale function is not monotone on the grid")
    C_rho_eps = float(grid.integrate(1.0 / (s2_eps * fp_eps)))
    C_rho = float(grid.integrate(1.0 / (s2 * fp)))
    return ScaleTable(grid, f_eps, f, fp_eps, fp, 1.0 / (s2_eps * fp_eps ** 2),
                      1.0 / (s2 * fp ** 2), C_rho_eps, C_rho)


def harmonicity_residual(spec: ModelSpec, grid: QuadratureGrid | None = None,
                         table: ScaleTable | None = None) -> float:
    """Max over interior nodes of |b f' + sigma^2 f''/2| / (f' (1 + |b|)).

    ``spec`` supplies the generator; pass the limit as ``homog.as_model()``
    to check the limit scale function. f'' comes from fourth-order central
    differences of the tabulated f'.
    """
    grid = working_grid(spec) if grid is None else grid
    if table is None:
        table = scale_tables(spec, HomogenizedSpec(spec.drift, spec.sigma), grid)
    x = grid.nodes
    b = spec.drift(x)
    fp = table.fprime_eps
    fpp = grid.derivative(fp)
    res = np.abs(b * fp + 0.5 * spec.sigma(x) ** 2 * fpp) / (fp * (1.0 + np.abs(b)))
    return float(res[2:-2].max())


class _SpeedIntegrals:
    """Cumulative integrals of w and f w, for integrals of (c0 + c1 xi) rho^2 d xi."""

    def __init__(self, table: ScaleTable, which: str):
        grid = table.grid
        self.x = grid.nodes
        self.f = table.scale(which)
        w = table.speed(which)
        self.W0 = grid.cumulative(w)
        self.W1 = grid.cumulative(self.f * w)
        # analytic Gaussian-type tail envelope beyond each end: w(L) / |d log w / dx|
        lw = np.log(w)
        h = grid.uniform_spacing
        slope_hi = -(lw[-1] - lw[-2]) / h
        slope_lo = (lw[1] - lw[0]) / h
        self.tail_hi = w[-1] / slope_hi if slope_hi > 0 else math.inf
        self.tail_lo = w[0] / slope_lo if slope_lo > 0 else math.inf

    def between(self, xi_a: float, xi_b: float, c0: float, c1: float) -> float:
        """int_{xi_a}^{xi_b} (c0 + c1 xi) rho(xi)^2 d xi."""
        if xi_a < self.f[0] or xi_b > self.f[-1]:
            raise QuadratureError("transformed point outside the tabulated range")
        W0 = np.interp([xi_a, xi_b], self.f, self.W0)
        W1 = np.interp([xi_a, xi_b], self.f, self.W1)
        return c0 * (W0[1] - W0[0]) + c1 * (W1[1] - W1[0])


def expected_exit_time(a: float, b: float, x: float, table: ScaleTable,
                       which: str = "eps") -> float:
    """Mean exit time of the transformed process from (a, b) started at x.

    All three points are transformed coordinates xi = f(x).
    """
    if not a <= x <= b or a == b:
        raise ValueError(f"need a <= x <= b with a < b, got a={a}, x={x}, b={b}")
    if x == a or x == b:
        return 0.0
    s = _SpeedIntegrals(table, which)
    upper = s.between(x, b, 2.0 * b, -2.0)
    lower = s.between(a, x, -2.0 * a, 2.0)
    return (x - a) / (b - a) * upper + (b - x) / (b - a) * lower


def expected_hitting_time(x: float, y: float, table: ScaleTable, which: str = "eps",
                          rel_tol: float = 0.01) -> float:
    """Mean first time the transformed process started at x reaches y."""
    if x == y:
        return 0.0
    s = _SpeedIntegrals(table, which)
    if y < x:
        tail = s.between(x, s.f[-1], 1.0, 0.0)
        trunc = s.tail_hi
        core = s.between(y, x, -2.0 * y, 2.0)
    else:
        tail = s.between(s.f[0], x, 1.0, 0.0)
        trunc = s.tail_lo
        core = s.between(x, y, 2.0 * y, -2.0)
    gap = abs(x - y)
    result = 2.0 * gap * (tail + trunc) + core
    if not (math.isfinite(result) and 2.0 * gap * trunc <= rel_tol * result):
        raise QuadratureError("truncated speed-density tail is too heavy; enlarge the grid")
    return result


def char_fn_mu(theta: float, sigma_eff: float) -> float:
    """Characteristic function of the limit invariant law at frequency 1."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return math.exp(-sigma_eff / (2.0 * theta))


def char_fn_mu_eps(table: DensityTable) -> complex:
    """int exp(ix) mu_eps(x) dx by quadrature."""
    grid = table.grid
    if grid.scheme == "simpson":
        spacing = grid.uniform_spacing
    else:
        spacing = (grid.upper - grid.lower) / grid.n_nodes
    if table.period * table.eps / spacing < NODES_PER_PERIOD:
        raise QuadratureError("grid does not resolve the fast period (aliasing risk)")
    x = grid.nodes
    return complex(grid.integrate(np.cos(x) * table.mu_eps),
                   grid.integrate(np.sin(x) * table.mu_eps))


def export_tables_csv(path, density: DensityTable, scale: ScaleTable) -> None:
    """Write x, mu, mu_eps, f, f_eps, rho_sq, rho_eps_sq columns."""
    cols = (density.grid.nodes, density.mu, density.mu_eps, scale.f, scale.f_eps,
            scale.rho_sq, scale.rho_eps_sq)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "mu", "mu_eps", "f", "f_eps", "rho_sq", "rho_eps_sq"])
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
