"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line, printed in the terminal summary.
Thresholds are the frozen acceptance values; nothing here is tuned to the
outcome.
"""

import math
import time

import numpy as np
import pytest

from conftest import record
from msdiff.analytic import (bessel_series, char_fn_mu_eps, compute_cell_constants,
                             harmonicity_residual, invariant_density)
from msdiff.estimator import EstimatorConfig, delta_method_std, g_inverse
from msdiff.experiments import (clt_experiment, consistency_experiment, dt_sensitivity,
                                hitting_experiment, normality_experiment, tail_experiment)
from msdiff.harness import ExperimentConfig, emit, run
from msdiff.model import HomogenizedSpec, ModelSpec, ScheduleConfig, homogenize
from msdiff.poisson import center_test, solve_poisson
from msdiff.quadrature import QuadratureGrid
from msdiff.sdesim import simulate_replicates

SCHEDULE = ScheduleConfig((0.2, 0.1, 0.05), 1.0, 1.5)
LANGEVIN = ModelSpec.langevin(1.0, 1.0, 0.2)
K_EXPECTED = 0.62376289

MET_CONFIG = """
[experiment]
name = met
[model]
alpha = 1.0
sigma = 1.0
eps = 0.2, 0.1, 0.05
[schedule]
horizon_constant = 1.0
horizon_exponent = 1.5
[simulation]
n_replicates = 50
base_seed = 0
[met]
tests = cos
max_final_mse.cos = 0.01
"""


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_cell_constant():
    def compute():
        c = compute_cell_constants(LANGEVIN, 1e-14)
        return c.K, 1.0 / bessel_series(1.0, 1e-16) ** 2
    (K_quad, K_series), dt = timed(compute)
    agree = abs(K_quad - K_series) <= 1e-10
    close = abs(K_quad - K_EXPECTED) <= 1e-8
    ok = agree and close and dt < 1.0
    record(1, ok, f"K quadrature {K_quad:.10f}, series {K_series:.10f}, |K - {K_EXPECTED}| = "
                  f"{abs(K_quad - K_EXPECTED):.3g} (tol 1e-8), {dt:.2f}s")
    assert agree and dt < 1.0
    assert close, "computed K differs from the stated value"


def test_criterion_02_harmonicity():
    def compute():
        L = LANGEVIN.truncation_length()
        h = 0.2 ** 2 / 10
        return [harmonicity_residual(LANGEVIN, QuadratureGrid.uniform(-L, L, s)) for s in (h, h / 2)]
    (r1, r2), dt = timed(compute)
    order = math.log2(r1 / r2)
    ok = r1 <= 1e-4 and order >= 1.8 and dt < 5
    record(2, ok, f"residual {r1:.3g} (<= 1e-4), order {order:.2f} (>= 1.8), {dt:.2f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_03_dirichlet_identity():
    def compute():
        homog = homogenize(LANGEVIN)
        gaps = {}
        for eps in (0.4, 0.2, 0.1):
            m = LANGEVIN.with_eps(eps)
            d = invariant_density(m, homog)
            gaps[eps] = solve_poisson(center_test(np.cos, d), d, m).relative_gap
        gaps["limit"] = solve_poisson(center_test(np.cos, d, "mu"), d, homog).relative_gap
        return gaps
    gaps, dt = timed(compute)
    worst = max(gaps.values())
    ok = worst <= 1e-5 and dt < 5
    record(3, ok, f"max relative gap {worst:.3g} (<= 1e-5), {dt:.2f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_04_ou_oracle():
    def compute():
        homog = homogenize(LANGEVIN)
        d = invariant_density(LANGEVIN, homog)
        return homog, solve_poisson(center_test(lambda x: x, d, "mu"), d, homog)
    (homog, sol), dt = timed(compute)
    err = float(np.max(np.abs(sol.Phi_prime - 1 / homog.theta)))
    tau_exact = 2 * homog.sigma_eff / homog.theta ** 2
    rel = abs(sol.tau_sq - tau_exact) / tau_exact
    ok = err <= 1e-6 and rel <= 1e-6 and dt < 2
    record(4, ok, f"max|Phi' - 1/theta| {err:.3g}, tau^2 relative error {rel:.3g}, {dt:.2f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_05_hitting_time():
    homog = homogenize(LANGEVIN)
    rep = hitting_experiment(homog.as_model(), 1.0, 0.0, 1e-4, 50.0, 2000, seed=0)
    s = rep.summary
    ok = rep.passed and s["censored"] == 0 and rep.wall_clock < 60
    record(5, ok, f"MC {s['mc_mean']:.4f} vs formula {s['formula']:.4f}, "
                  f"{s['standard_errors_apart']:.2f} SE (<= 3), {rep.wall_clock:.1f}s")
    assert ok, "see the acceptance summary line"


@pytest.fixture(scope="module")
def met_runs(tmp_path_factory):
    cfg = ExperimentConfig.from_ini(MET_CONFIG)
    out = []
    for tag in ("first", "second"):
        rep = run(cfg)
        d = tmp_path_factory.mktemp(tag)
        emit(rep, d, ("csv", "json", "dat"))
        out.append((rep, d))
    return out


def test_criterion_06_mean_ergodic(met_runs):
    rep, _ = met_runs[0]
    mses = [r["mse_cos"] for r in rep.rows]
    ok = rep.passed and rep.wall_clock < 600
    record(6, ok, "mse " + ", ".join(f"{m:.4g}" for m in mses)
           + f" (strictly decreasing, final <= 0.01), {rep.wall_clock:.0f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_11_determinism(met_runs):
    (_, a), (_, b) = met_runs
    same = (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    record(11, same, "summary.csv byte-identical across two runs" if same else "summary.csv differs")
    assert same


@pytest.fixture(scope="module")
def stationary_runs():
    # one simulation serves both the CLT and the estimator-normality criteria
    model = LANGEVIN.with_eps(0.05)
    t0 = time.perf_counter()
    accs = simulate_replicates(model, 0.05 ** 2 / 20, 400.0, 0, 200)
    return model, accs, time.perf_counter() - t0


def test_criterion_07_clt(stationary_runs):
    model, accs, sim_time = stationary_runs
    rep = clt_experiment(model, 400.0, 200, accumulators=accs, max_ks=0.12)
    total = sim_time + rep.wall_clock
    ok = rep.passed and total < 1200
    record(7, ok, f"KS {rep.summary['ks_statistic']:.4f} (<= 0.12), z mean {rep.summary['z_mean']:.3f}, "
                  f"z std {rep.summary['z_std']:.3f}, {total:.0f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_08_tail():
    rep = tail_experiment(LANGEVIN, SCHEDULE, 0.5, 200, seed=0, max_final_fraction=0.05)
    fr = [r["fraction"] for r in rep.rows]
    ok = rep.passed and rep.wall_clock < 600
    record(8, ok, "fractions " + ", ".join(f"{f:.3f}" for f in fr)
           + f" (nonincreasing, final <= 0.05), {rep.wall_clock:.0f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_09_consistency():
    homog = homogenize(LANGEVIN)
    rep = consistency_experiment(LANGEVIN, SCHEDULE, EstimatorConfig(homog.sigma_eff), 20, seed=0,
                                 theta0=homog.theta, max_final_median=0.15)
    med = [r["median_relative_error"] for r in rep.rows]
    ok = rep.passed and rep.wall_clock < 600
    record(9, ok, "median relative errors " + ", ".join(f"{m:.4f}" for m in med)
           + f" (nonincreasing, final <= 0.15), {rep.wall_clock:.0f}s")
    assert ok, "see the acceptance summary line"


def test_criterion_10_normality(stationary_runs):
    model, accs, sim_time = stationary_runs
    homog = homogenize(LANGEVIN)
    cfg = EstimatorConfig(homog.sigma_eff)
    d = invariant_density(model, homog)
    tau = math.sqrt(solve_poisson(center_test(np.cos, d), d, model).tau_sq)
    rep = normality_experiment(LANGEVIN, 0.05, 400.0, 200, tau, homog.theta, cfg,
                               accumulators=accs, max_ks=0.12)
    th, s = homog.theta, homog.sigma_eff
    v0 = math.exp(-s / (2 * th))
    fd = (g_inverse(v0 + 1e-6, s) - g_inverse(v0 - 1e-6, s)) / 2e-6
    fd_rel = abs(delta_method_std(th, cfg, 1.0) - abs(fd)) / abs(fd)
    total = sim_time + rep.wall_clock
    ok = rep.passed and fd_rel <= 1e-5 and total < 1200
    record(10, ok, f"KS {rep.summary['ks_statistic']:.4f} (<= 0.12), delta-method vs finite "
                   f"difference {fd_rel:.2g} (<= 1e-5), {total:.0f}s")
    assert fd_rel <= 1e-5
    ks_ok = rep.passed
    assert ks_ok, f"KS {rep.summary['ks_statistic']:.4f} exceeds 0.12"


def test_criterion_12_char_fn_decay():
    def compute():
        eps = (0.7, 0.5, 0.4)
        gaps = [abs(char_fn_mu_eps(invariant_density(LANGEVIN.with_eps(e))) - math.exp(-0.5)) for e in eps]
        x = [1 / e ** 2 for e in eps]
        lg = [math.log(g) for g in gaps]
        return [(lg[i + 1] - lg[i]) / (x[i + 1] - x[i]) for i in range(2)]
    (s1, s2), dt = timed(compute)
    ok = s1 < 0 and s2 < s1 and dt < 10
    record(12, ok, f"log-slopes in 1/eps^2: {s1:.4f}, {s2:.4f} (each steeper), {dt:.2f}s")
    assert ok, "see the acceptance summary line"


def test_dt_halving_insensitivity():
    """Halving dt at eps = 0.05 moves the mean cos average by less than 3 pooled SE."""
    r = dt_sensitivity(LANGEVIN, 0.05, SCHEDULE.horizon(0.05), SCHEDULE.dt(0.05), np.cos, 50, seed=0)
    assert r["difference"] <= 3 * r["standard_error"]
