"""Quadrature grids shared by every analytic integral in the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson


class QuadratureError(RuntimeError):
    """Raised when a grid cannot deliver the requested accuracy."""


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and weights on ``[lower, upper]``.

    ``scheme`` is ``"simpson"`` (uniform nodes, odd count) or
    ``"gauss-legendre"`` (panels of Gauss-Legendre nodes). Only uniform
    Simpson grids support cumulative integration and finite differences.
    """

    lower: float
    upper: float
    n_nodes: int
    scheme: str
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")
        if self.n_nodes < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if self.scheme == "simpson" and self.n_nodes % 2 == 0:
            raise ValueError("composite Simpson needs an odd node count")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def simpson(cls, lower: float, upper: float, n_nodes: int) -> "QuadratureGrid":
        if n_nodes % 2 == 0:
            n_nodes += 1
        x = np.linspace(lower, upper, n_nodes)
        h = (upper - lower) / (n_nodes - 1)
        w = np.full(n_nodes, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return cls(float(lower), float(upper), n_nodes, "simpson", x, w * h / 3.0)

    @classmethod
    def uniform(cls, lower: float, upper: float, max_spacing: float) -> "QuadratureGrid":
        """Simpson grid whose spacing does not exceed ``max_spacing``."""
        n_int = int(np.ceil((upper - lower) / max_spacing))
        n_int += n_int % 2
        return cls.simpson(lower, upper, max(n_int, 2) + 1)

    @classmethod
    def gauss_legendre(cls, lower: float, upper: float, n_panels: int,
                       order: int = 8) -> "QuadratureGrid":
        t, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(lower, upper, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        wt = (half[:, None] * w[None, :]).ravel()
        return cls(float(lower), float(upper), x.size, "gauss-legendre", x, wt)

    @property
    def uniform_spacing(self) -> float:
        if self.scheme != "simpson":
            raise QuadratureError("spacing is only defined for uniform grids")
        return (self.upper - self.lower) / (self.n_nodes - 1)

    def integrate(self, values) -> float | complex:
        return np.dot(self.weights, values)

    def cumulative(self, values) -> np.ndarray:
        """Running integral from ``lower`` to every node (zero at the first node)."""
        if self.scheme != "simpson":
            raise QuadratureError("cumulative integration needs a uniform grid")
        values = np.asarray(values)
        if np.iscomplexobj(values):
            return self.cumulative(values.real) + 1j * self.cumulative(values.imag)
        return cumulative_simpson(values, dx=self.uniform_spacing, initial=0.0)

    def cumulative_from(self, values, anchor: float) -> np.ndarray:
        """Running integral from ``anchor`` (which must be a node) to every node."""
        values = np.asarray(values)
        if np.iscomplexobj(values):
            return self.cumulative_from(values.real, anchor) + 1j * self.cumulative_from(values.imag, anchor)
        h = self.uniform_spacing
        i = self.index_of(anchor)
        out = np.zeros(values.shape, dtype=float)
        # accumulate outward from the anchor so large far-field values never cancel
        if i < values.size - 1:
            out[i:] = cumulative_simpson(values[i:], dx=h, initial=0.0)
        if i > 0:
            out[:i + 1] = -cumulative_simpson(values[i::-1], dx=h, initial=0.0)[::-1]
        return out

    def index_of(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.nodes - x)))
        if not np.isclose(self.nodes[i], x, rtol=0.0, atol=1e-9 * (self.upper - self.lower)):
            raise QuadratureError(f"{x} is not a grid node")
        return i

    def derivative(self, values) -> np.ndarray:
        """Fourth-order central differences (second order in the two end nodes)."""
        h = self.uniform_spacing
        v = np.asarray(values, dtype=float)
        d = np.empty_like(v)
        d[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
        d[1] = (v[2] - v[0]) / (2.0 * h)
        d[-2] = (v[-1] - v[-3]) / (2.0 * h)
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
        return d

    def refined(self) -> "QuadratureGrid":
        """Same interval with halved spacing (or doubled panel count)."""
        if self.scheme == "simpson":
            return QuadratureGrid.simpson(self.lower, self.upper, 2 * self.n_nodes - 1)
        order = 8
        return QuadratureGrid.gauss_legendre(self.lower, self.upper,
                                             2 * self.n_nodes // order, order)


def integrate_to_tolerance(fn, lower: float, upper: float, tol: float,
                           n_panels: int = 4, max_levels: int = 20) -> float:
    """Integrate ``fn`` with Gauss-Legendre panels, doubling until two levels agree."""
    grid = QuadratureGrid.gauss_legendre(lower, upper, n_panels)
    prev = grid.integrate(fn(grid.nodes))
    for _ in range(max_levels):
        grid = grid.refined()
        cur = grid.integrate(fn(grid.nodes))
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return float(cur)
        prev = cur
    raise QuadratureError(f"no convergence to {tol} after {max_levels} refinements")
