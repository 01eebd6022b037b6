"""Multiscale diffusion models, their homogenized limits, and assumption checks.

The multiscale process solves

    dX = [f0(X) + f1(X / eps) / eps] dt + sigma(X) dW

with ``f1`` periodic. The overdamped Langevin instance uses
``f0(x) = -alpha x``, ``f1(y) = -sin(y)`` and ``sigma = sqrt(2 s)``, where
``s`` is the noise strength; its homogenized limit is an Ornstein-Uhlenbeck
process with drift ``-alpha K x`` and squared diffusion ``2 s K``.

All coefficient callables take and return numpy arrays and must be pure.
The small callable classes below exist so that models can be pickled into
worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Evaluator = Callable[[np.ndarray], np.ndarray]

GAUSSIAN_TAIL = 1e-14


class AssumptionError(ValueError):
    """A model fails one of the standing numerical assumption checks."""


@dataclass(frozen=True)
class LinearDrift:
    slope: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class NegSine:
    def __call__(self, y):
        return -np.sin(y)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x):
        return np.full(np.shape(x), self.value, dtype=float)


@dataclass(frozen=True)
class ModelSpec:
    """Coefficients of the multiscale SDE.

    ``f1=None`` means there is no fast term (plain diffusion); ``period`` is
    the period of ``f1`` in the fast variable. ``alpha`` and ``noise`` are
    set only for the Langevin instance.
    """

    f0: Evaluator
    f1: Evaluator | None
    sigma: Evaluator
    eps: float
    x0: float = 0.0
    period: float = 1.0
    kind: str = "general"
    alpha: float | None = None
    noise: float | None = None
    constant_sigma: bool = field(default=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.kind not in ("general", "langevin"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def langevin(cls, alpha: float, sigma: float, eps: float, x0: float = 0.0) -> "ModelSpec":
        if alpha <= 0 or sigma <= 0:
            raise ValueError("alpha and sigma must be positive")
        return cls(LinearDrift(-alpha), NegSine(), Constant(math.sqrt(2.0 * sigma)), eps,
                   x0=x0, period=2.0 * math.pi, kind="langevin", alpha=alpha, noise=sigma,
                   constant_sigma=True)

    @classmethod
    def diffusion(cls, drift: Evaluator, sigma: Evaluator, x0: float = 0.0,
                  constant_sigma: bool = False) -> "ModelSpec":
        """A single-scale diffusion, expressed as a model without fast term."""
        return cls(drift, None, sigma, 1.0, x0=x0, constant_sigma=constant_sigma)

    @property
    def multiscale(self) -> bool:
        return self.f1 is not None

    def with_eps(self, eps: float) -> "ModelSpec":
        if self.kind == "langevin":
            return ModelSpec.langevin(self.alpha, self.noise, eps, self.x0)
        return ModelSpec(self.f0, self.f1, self.sigma, eps, self.x0, self.period,
                         self.kind, self.alpha, self.noise, self.constant_sigma)

    def with_x0(self, x0: float) -> "ModelSpec":
        return ModelSpec(self.f0, self.f1, self.sigma, self.eps, x0, self.period,
                         self.kind, self.alpha, self.noise, self.constant_sigma)

    def drift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.f0(x)
        if self.f1 is not None:
            out = out + self.f1(x / self.eps) / self.eps
        return out

    def truncation_length(self) -> float:
        """Half-width L of the truncated working domain.

        For the Langevin instance the Gaussian envelope exp(-alpha x^2/(2 s))
        drops below 1e-14 at x = +-L.
        """
        if self.kind == "langevin":
            return math.sqrt(2.0 * self.noise / self.alpha * math.log(1.0 / GAUSSIAN_TAIL))
        return 8.0


def drift_eps(spec: ModelSpec, x):
    """Multiscale drift ``f0(x) + f1(x/eps)/eps``; scalar in, scalar out."""
    out = spec.drift(x)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"drift is not finite at x={x!r}")
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HomogenizedSpec:
    """Limit diffusion ``dX = b(X) dt + sigma_bar(X) dW``.

    For an Ornstein-Uhlenbeck limit ``theta`` is the mean-reversion rate and
    ``sigma_eff`` the noise strength, so ``sigma_bar = sqrt(2 sigma_eff)``.
    """

    b: Evaluator
    sigma_bar: Evaluator
    K: float = 1.0
    theta: float | None = None
    sigma_eff: float | None = None
    x0: float = 0.0

    @classmethod
    def ou(cls, theta: float, sigma_eff: float, K: float = 1.0, x0: float = 0.0) -> "HomogenizedSpec":
        if theta <= 0 or sigma_eff <= 0:
            raise ValueError("theta and sigma_eff must be positive")
        return cls(LinearDrift(-theta), Constant(math.sqrt(2.0 * sigma_eff)), K,
                   theta, sigma_eff, x0)

    def as_model(self) -> ModelSpec:
        """The limit process as a single-scale model, for simulation."""
        return ModelSpec.diffusion(self.b, self.sigma_bar, x0=self.x0,
                                   constant_sigma=self.sigma_eff is not None)


def homogenize(spec: ModelSpec, K: float | None = None) -> HomogenizedSpec:
    """Homogenized limit of ``spec``.

    Langevin models map to the OU limit with ``theta = alpha K`` and
    ``sigma_eff = sigma K``. A model without fast term is its own limit.
    """
    if spec.kind == "langevin":
        if K is None:
            from .analytic import compute_cell_constants
            K = compute_cell_constants(spec).K
        return HomogenizedSpec.ou(spec.alpha * K, spec.noise * K, K=K, x0=spec.x0)
    if not spec.multiscale:
        return HomogenizedSpec(spec.f0, spec.sigma, 1.0, x0=spec.x0)
    raise NotImplementedError("homogenized coefficients are only derived for the Langevin instance")


@dataclass(frozen=True)
class ScheduleConfig:
    """Coupled schedule ``T_eps = C eps^-eta`` with ``dt = eps^2 / dt_divisor``."""

    eps_values: tuple[float, ...]
    horizon_constant: float = 1.0
    horizon_exponent: float = 1.5
    dt_divisor: float = 20.0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        object.__setattr__(self, "eps_values", eps)
        if not eps:
            raise ValueError("schedule needs at least one eps value")
        if any(e <= 0 for e in eps):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be strictly decreasing")
        if self.horizon_constant <= 0:
            raise ValueError("horizon constant must be positive")
        if self.horizon_exponent < 0:
            raise ValueError("horizon exponent must be non-negative")
        if self.dt_divisor <= 0:
            raise ValueError("dt divisor must be positive")

    @property
    def coupled(self) -> bool:
        """True when the horizon diverges as eps -> 0 (eta > 0)."""
        return self.horizon_exponent > 0

    def horizon(self, eps: float) -> float:
        return self.horizon_constant * eps ** (-self.horizon_exponent)

    def dt(self, eps: float) -> float:
        return eps * eps / self.dt_divisor

    def horizons(self) -> list[float]:
        return [self.horizon(e) for e in self.eps_values]


@dataclass
class AssumptionReport:
    name: str
    holds: bool
    violations: list = field(default_factory=list)
    detail: str = ""

    def __bool__(self):
        return self.holds


def check_assumption_clt(homog: HomogenizedSpec, S: float, gamma: float, grid) -> AssumptionReport:
    """Sweep ``sign(y) b(y) / sigma_bar(y)^2 <= -gamma`` over grid nodes with |y| > S."""
    if S <= 0 or gamma <= 0:
        raise ValueError("S and gamma must be positive")
    y = grid.nodes[np.abs(grid.nodes) > S]
    if y.size == 0:
        raise ValueError(f"grid has no nodes beyond |y| = {S}")
    ratio = np.sign(y) * homog.b(y) / homog.sigma_bar(y) ** 2
    bad = y[ratio > -gamma]
    return AssumptionReport("CLT", bad.size == 0, bad.tolist(),
                            f"max ratio {ratio.max():.6g} vs -gamma {-gamma:.6g}")


def sweep_domain_length(spec: ModelSpec, S: float = 1.0) -> float:
    """Half-width used for assumption sweeps."""
    if spec.kind == "langevin":
        return max(S + 5.0, 6.0 * math.sqrt(spec.noise / spec.alpha))
    return S + 5.0


def check_assumption_c(spec: ModelSpec, grid, n_periodic: int = 257) -> AssumptionReport:
    """Diffusion bounds away from zero and periodicity of the fast drift."""
    problems = []
    s = spec.sigma(grid.nodes)
    if not np.all(np.isfinite(s)) or s.min() <= 0:
        problems.append(f"sigma not bounded below by a positive constant (min {s.min():.3g})")
    if spec.f1 is not None:
        y = np.linspace(0.0, spec.period, n_periodic)
        a, b = spec.f1(y), spec.f1(y + spec.period)
        if np.any(np.abs(b - a) > 1e-12 * (1.0 + np.abs(a))):
            problems.append("f1 is not periodic with the declared period")
    return AssumptionReport("C", not problems, problems,
                            f"sigma in [{s.min():.6g}, {s.max():.6g}]")


def check_model(spec: ModelSpec, homog: HomogenizedSpec, S: float = 1.0,
                gamma: float | None = None) -> list[AssumptionReport]:
    """Run every numerical assumption check; raise AssumptionError on failure."""
    from .quadrature import QuadratureGrid

    L = sweep_domain_length(spec, S)
    grid = QuadratureGrid.uniform(-L, L, 1e-2)
    if gamma is None:
        y = grid.nodes[np.abs(grid.nodes) > S]
        gamma = 0.5 * float(np.min(-np.sign(y) * homog.b(y) / homog.sigma_bar(y) ** 2))
    reports = [check_assumption_c(spec, grid)]
    if gamma > 0:
        reports.append(check_assumption_clt(homog, S, gamma, grid))
    else:
        reports.append(AssumptionReport("CLT", False, [], "limit drift is not confining beyond S"))
    failed = [r for r in reports if not r]
    if failed:
        msg = "; ".join(f"assumption ({r.name}) fails: {r.detail} {r.violations[:5]}" for r in failed)
        raise AssumptionError(msg)
    return reports
