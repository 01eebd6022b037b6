"""Poisson equation -A Phi = h for one-dimensional diffusions.

The solution is the explicit double integral

    Phi(x) = -int_0^x 2 H(y) / (sigma(y)^2 mu(y)) dy,   H(y) = int_{-inf}^y h mu,

evaluated with cumulative quadrature on the density grid. Because h is
centered, H(y) also equals -int_y^inf h mu; the right-tail form is used for
y > 0 so that H/mu keeps its relative accuracy in both tails.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytic import DensityTable
from .model import HomogenizedSpec, ModelSpec


class PoissonError(RuntimeError):
    pass


def _coefficients(process):
    if isinstance(process, HomogenizedSpec):
        return process.b, process.sigma_bar
    return process.drift, process.sigma


@dataclass(frozen=True, eq=False)
class CenteredTest:
    h: Callable
    values: np.ndarray = field(repr=False)
    centered_against: str
    subtracted_mean: complex | float

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


def center_test(h: Callable, density: DensityTable, against: str = "mu_eps") -> CenteredTest:
    """Subtract the quadrature mean of ``h`` under ``mu_eps`` or ``mu``."""
    if against not in ("mu_eps", "mu"):
        raise ValueError("against must be 'mu_eps' or 'mu'")
    x = density.grid.nodes
    vals = np.asarray(h(x))
    if vals.ndim == 0:
        vals = np.full(x.shape, vals)
    mu = getattr(density, against)
    mean = density.grid.integrate(vals * mu)
    if not np.iscomplexobj(vals):
        mean = float(mean)
    else:
        mean = complex(mean)
    return CenteredTest(h, vals - mean, against, mean)


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    grid: object
    Phi: np.ndarray = field(repr=False)
    Phi_prime: np.ndarray = field(repr=False)
    tau_sq: float
    dirichlet_gap: float
    dirichlet_energy: float
    channel_tau_sq: tuple
    sigma_sq: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    @property
    def relative_gap(self) -> float:
        return self.dirichlet_gap / max(self.dirichlet_energy, 1e-300)


def _channels(a: np.ndarray):
    if np.iscomplexobj(a):
        return [a.real, a.imag]
    return [a]


def _variance_parts(Phi, Phi_prime, h, s2, mu, grid):
    taus, gaps, energies = [], [], []
    for P, dP, hc in zip(_channels(Phi), _channels(Phi_prime), _channels(h)):
        energy = grid.integrate(0.5 * s2 * dP * dP * mu)
        pairing = grid.integrate(P * hc * mu)
        taus.append(float(2.0 * energy))
        gaps.append(float(abs(energy - pairing)))
        energies.append(float(energy))
    return taus, gaps, energies


def _tail_masses(hm: np.ndarray, mu: np.ndarray, grid) -> tuple:
    """Integrals of h mu beyond -L and L from the Gaussian-type envelope h(L) mu(L) / kappa.

    kappa = -d log mu / dx at the boundary (one-sided, second order); exact
    for h linear and mu Gaussian.
    """
    h = grid.uniform_spacing
    lm = np.log(mu)
    k_hi = -(3.0 * lm[-1] - 4.0 * lm[-2] + lm[-3]) / (2.0 * h)
    k_lo = (-3.0 * lm[0] + 4.0 * lm[1] - lm[2]) / (2.0 * h)
    hi = hm[-1] / k_hi if k_hi > 0 else 0.0
    lo = hm[0] / k_lo if k_lo > 0 else 0.0
    return lo, hi


def solve_poisson(test: CenteredTest, density: DensityTable, process,
                  centering_tol: float = 1e-6) -> PoissonSolution:
    """Solve -A Phi = h for the process whose invariant density matches ``test``.

    ``process`` is the ModelSpec for a test centered against mu_eps, or the
    HomogenizedSpec for one centered against mu.
    """
    grid = density.grid
    x = grid.nodes
    mu = getattr(density, test.centered_against)
    _, sigma = _coefficients(process)
    s2 = sigma(x) ** 2
    hm = test.values * mu
    H_left = grid.cumulative(hm)
    drift = abs(H_left[-1])
    if drift > centering_tol:
        raise PoissonError(f"centering drift |H(L)| = {drift:.3g} exceeds {centering_tol:.1g}")
    H_right = grid.cumulative_from(hm, grid.upper)
    lo_tail, hi_tail = _tail_masses(hm, mu, grid)
    H = np.where(x <= 0.0, H_left + lo_tail, H_right - hi_tail)
    Phi_prime = -2.0 * H / (s2 * mu)
    Phi = grid.cumulative_from(Phi_prime, 0.0)
    taus, gaps, energies = _variance_parts(Phi, Phi_prime, test.values, s2, mu, grid)
    tau_sq = sum(taus)
    gap = max(gaps)
    if gap > 1e-5 * (1.0 + tau_sq):
        raise PoissonError(f"Dirichlet-form gap {gap:.3g} signals an inconsistent solve")
    return PoissonSolution(grid, Phi, Phi_prime, tau_sq, gap, sum(energies), tuple(taus),
                           s2, test.values)


def asymptotic_variance(sol: PoissonSolution, density: DensityTable, process,
                        against: str = "mu_eps") -> float:
    """tau^2 = int sigma^2 |Phi'|^2 mu, summed over real and imaginary channels."""
    x = density.grid.nodes
    _, sigma = _coefficients(process)
    mu = getattr(density, against)
    s2 = sigma(x) ** 2
    return float(sum(density.grid.integrate(s2 * dP * dP * mu) for dP in _channels(sol.Phi_prime)))


def poisson_residual(sol: PoissonSolution, process, trim: int = 2) -> float:
    """max |-(b Phi' + sigma^2 Phi''/2) - h| / max |h| over interior nodes."""
    x = sol.grid.nodes
    b, _ = _coefficients(process)
    bx = b(x)
    worst, scale = 0.0, 0.0
    for dP, hc in zip(_channels(sol.Phi_prime), _channels(sol.h)):
        d2 = sol.grid.derivative(dP)
        lhs = -(bx * dP + 0.5 * sol.sigma_sq * d2)
        worst = max(worst, float(np.max(np.abs(lhs - hc)[trim:-trim])))
        scale = max(scale, float(np.max(np.abs(hc))))
    return worst / scale if scale > 0 else worst


def export_solution(sol: PoissonSolution, csv_path, json_path) -> None:
    x = sol.grid.nodes
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        if np.iscomplexobj(sol.Phi):
            w.writerow(["x", "Phi_re", "Phi_im", "Phi_prime_re", "Phi_prime_im"])
            for row in zip(x, sol.Phi.real, sol.Phi.imag, sol.Phi_prime.real, sol.Phi_prime.imag):
                w.writerow([repr(float(v)) for v in row])
        else:
            w.writerow(["x", "Phi", "Phi_prime"])
            for row in zip(x, sol.Phi, sol.Phi_prime):
                w.writerow([repr(float(v)) for v in row])
    with open(json_path, "w") as fh:
        json.dump({"tau_sq": sol.tau_sq, "dirichlet_gap": sol.dirichlet_gap,
                   "channel_tau_sq": list(sol.channel_tau_sq)}, fh, indent=2)
