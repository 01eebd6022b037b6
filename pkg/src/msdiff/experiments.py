"""Replication experiments behind every empirical limit-theorem check.

Each function returns an ExperimentReport with per-eps rows, per-replicate
records and threshold decisions. Thresholds are arguments; callers (the
harness or the acceptance tests) supply them.
"""

from __future__ import annotations

import math
import time
from typing import Callable, Sequence

import numpy as np

from .analytic import (char_fn_mu, char_fn_mu_eps, compute_cell_constants, expected_hitting_time,
                       harmonicity_residual, invariant_density, scale_tables, bessel_series,
                       working_grid)
from .estimator import (EstimateRecord, EstimatorConfig, delta_method_std, histogram, ks_normal,
                        _project)
from .model import ModelSpec, ScheduleConfig, homogenize
from .poisson import center_test, poisson_residual, solve_poisson
from .report import ExperimentReport, at_most, holds
from .sdesim import first_passage_batch, simulate_replicates

MIN_NORMALITY_REPLICATES = 50


def indicator_unit(x):
    """Indicator of [-1, 1]."""
    return (np.abs(x) <= 1.0).astype(float)


def one(x):
    return np.ones_like(x, dtype=float)


TEST_FUNCTIONS: dict[str, Callable] = {"cos": np.cos, "indicator": indicator_unit, "one": one}


def _strictly_decreasing(v) -> bool:
    return all(b < a for a, b in zip(v, v[1:]))


def _nonincreasing(v) -> bool:
    return all(b <= a for a, b in zip(v, v[1:]))


def coeff_experiment(spec: ModelSpec, eps_values: Sequence[float], tol: float = 1e-12,
                     agreement_tol: float = 1e-10, harmonic_tol: float = 1e-4,
                     expected_K: float | None = None, expected_K_tol: float = 1e-8,
                     max_spacing: float | None = None, length: float | None = None) -> ExperimentReport:
    """Cell constants, densities and characteristic values along an eps list."""
    t0 = time.perf_counter()
    rep = ExperimentReport("coeff")
    cells = compute_cell_constants(spec, tol)
    series = 1.0 / bessel_series(1.0 / spec.noise) ** 2 if spec.kind == "langevin" else cells.K
    homog = homogenize(spec, cells.K)
    rep.summary = {"K_quadrature": cells.K, "K_series": series, "Z_plus": cells.Z_plus,
                   "Z_minus": cells.Z_minus, "theta": homog.theta, "sigma_eff": homog.sigma_eff,
                   "char_fn_mu": char_fn_mu(homog.theta, homog.sigma_eff)}
    rep.decisions.append(at_most("K quadrature vs series", abs(cells.K - series), agreement_tol))
    if expected_K is not None:
        rep.decisions.append(at_most("K vs expected value", abs(cells.K - expected_K), expected_K_tol))
    for eps in eps_values:
        model = spec.with_eps(eps)
        c = compute_cell_constants(model, tol)
        dens = invariant_density(model, homog, working_grid(model, max_spacing, length), cells=c)
        cf_eps = char_fn_mu_eps(dens)
        res = harmonicity_residual(model, dens.grid)
        rep.rows.append({"eps": eps, "K": c.K, "Z_eps": dens.Z_eps, "Z": dens.Z,
                         "sandwich_lo": dens.sandwich_lo, "sandwich_hi": dens.sandwich_hi,
                         "char_fn_mu_eps_re": cf_eps.real, "char_fn_mu_eps_im": cf_eps.imag,
                         "char_fn_gap": abs(cf_eps - rep.summary["char_fn_mu"]),
                         "harmonicity_residual": res})
        rep.decisions.append(at_most(f"harmonicity residual eps={eps:g}", res, harmonic_tol))
    rep.series["char_fn_gap_vs_eps"] = ([r["eps"] for r in rep.rows],
                                        [r["char_fn_gap"] for r in rep.rows])
    rep.wall_clock = time.perf_counter() - t0
    return rep


def poisson_experiment(spec: ModelSpec, eps_values: Sequence[float],
                       max_relative_gap: float = 1e-5, max_spacing: float | None = None,
                       length: float | None = None) -> ExperimentReport:
    """Solve -A Phi = cos - mean at each eps and for the limit."""
    t0 = time.perf_counter()
    rep = ExperimentReport("poisson")
    homog = homogenize(spec)
    for eps in eps_values:
        model = spec.with_eps(eps)
        dens = invariant_density(model, homog, working_grid(model, max_spacing, length))
        sol = solve_poisson(center_test(np.cos, dens, "mu_eps"), dens, model)
        rep.rows.append({"eps": eps, "tau_sq": sol.tau_sq, "dirichlet_gap": sol.dirichlet_gap,
                         "relative_gap": sol.relative_gap,
                         "max_abs_Phi_prime": float(np.max(np.abs(sol.Phi_prime))),
                         "residual": poisson_residual(sol, model)})
        rep.decisions.append(at_most(f"relative Dirichlet gap eps={eps:g}", sol.relative_gap,
                                     max_relative_gap))
    last = spec.with_eps(eps_values[-1])
    dens = invariant_density(last, homog, working_grid(last, max_spacing, length))
    sol = solve_poisson(center_test(np.cos, dens, "mu"), dens, homog)
    rep.summary = {"limit_tau_sq": sol.tau_sq, "limit_relative_gap": sol.relative_gap,
                   "limit_residual": poisson_residual(sol, homog)}
    rep.decisions.append(at_most("relative Dirichlet gap limit", sol.relative_gap, max_relative_gap))
    rep.series["tau_sq_vs_eps"] = (list(eps_values), [r["tau_sq"] for r in rep.rows])
    rep.wall_clock = time.perf_counter() - t0
    return rep


def met_experiment(spec: ModelSpec, schedule: ScheduleConfig, tests: dict[str, Callable],
                   n_replicates: int, seed: int = 0, max_final_mse: dict | None = None,
                   workers: int = 1) -> ExperimentReport:
    """Per-eps mean squared error of T^-1 int phi(X) dt against int phi d mu_eps."""
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    t0 = time.perf_counter()
    rep = ExperimentReport("met")
    names = list(tests)
    fns = [tests[n] for n in names]
    homog = homogenize(spec)
    for eps in schedule.eps_values:
        model = spec.with_eps(eps)
        dens = invariant_density(model, homog)
        x = dens.grid.nodes
        targets = [float(dens.grid.integrate(np.broadcast_to(f(x), x.shape) * dens.mu_eps))
                   for f in fns]
        for name, f in zip(names, fns):
            # constants are integrated exactly by the sample path
            if np.ptp(np.broadcast_to(f(x), x.shape)) == 0.0:
                targets[names.index(name)] = float(f(np.zeros(1))[0])
        T, dt = schedule.horizon(eps), schedule.dt(eps)
        accs = simulate_replicates(model, dt, T, seed, n_replicates, fns, workers)
        avgs = np.array([a.averages() for a in accs])
        err2 = (avgs - np.array(targets)) ** 2
        row = {"eps": eps, "T": T, "dt": dt, "n_replicates": n_replicates,
               "blown_up": sum(a.blown_up for a in accs)}
        for j, name in enumerate(names):
            row[f"target_{name}"] = targets[j]
            row[f"mse_{name}"] = float(np.mean(err2[:, j]))
        rep.rows.append(row)
        rep.steps += sum(a.steps for a in accs)
        for a, av in zip(accs, avgs):
            rep.records.append({"eps": eps, "T": T, "seed": a.seed, "replicate_id": a.replicate_id,
                                **{f"avg_{n}": float(v) for n, v in zip(names, av)}})
    for name in names:
        mses = [r[f"mse_{name}"] for r in rep.rows]
        rep.series[f"l2_error_{name}"] = (list(schedule.eps_values), mses)
        if max_final_mse and name in max_final_mse:
            if len(mses) > 1:
                rep.decisions.append(holds(f"mse_{name} strictly decreasing", _strictly_decreasing(mses),
                                           "strictly decreasing"))
            rep.decisions.append(at_most(f"final mse_{name}", mses[-1], max_final_mse[name]))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def dt_sensitivity(spec: ModelSpec, eps: float, T: float, dt: float, test: Callable,
                   n_replicates: int, seed: int = 0, workers: int = 1) -> dict:
    """Mean time average at dt and dt/2 over the same replicates, with a pooled standard error."""
    means, ses = [], []
    for h in (dt, dt / 2.0):
        accs = simulate_replicates(spec.with_eps(eps), h, T, seed, n_replicates, [test], workers)
        v = np.array([a.averages()[0] for a in accs])
        means.append(float(v.mean()))
        ses.append(float(v.std(ddof=1) / math.sqrt(v.size)))
    return {"mean_dt": means[0], "mean_half_dt": means[1], "difference": abs(means[0] - means[1]),
            "standard_error": math.hypot(*ses)}


def _cos_tau(spec: ModelSpec) -> tuple[float, float]:
    dens = invariant_density(spec)
    test = center_test(np.cos, dens, "mu_eps")
    sol = solve_poisson(test, dens, spec)
    return math.sqrt(sol.tau_sq), float(test.subtracted_mean)


def clt_experiment(spec: ModelSpec, T: float, n_replicates: int, seed: int = 0,
                   max_ks: float | None = None, dt: float | None = None, workers: int = 1,
                   accumulators=None, bins: int = 30, hist_range=(-4.0, 4.0)) -> ExperimentReport:
    """Standardized time averages of cos - mean against N(0, 1)."""
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    t0 = time.perf_counter()
    rep = ExperimentReport("clt")
    tau, mean = _cos_tau(spec)
    dt = spec.eps ** 2 / 20.0 if dt is None else dt
    accs = accumulators
    if accs is None:
        accs = simulate_replicates(spec, dt, T, seed, n_replicates, (), workers)
    # the real part of the complex channel is int cos(X) dt
    z = np.array([(a.sum_complex.real - a.elapsed * mean) / (math.sqrt(a.elapsed) * tau) for a in accs])
    ks = ks_normal(z)
    rep.steps = sum(a.steps for a in accs)
    rep.summary = {"tau": tau, "mean_cos_mu_eps": mean, "ks_statistic": ks["statistic"],
                   "ks_critical_value_05": ks["critical_value_05"], "ks_pvalue": ks["pvalue"],
                   "z_mean": float(z.mean()), "z_std": float(z.std(ddof=1)) if z.size > 1 else 0.0}
    rep.rows.append({"eps": spec.eps, "T": T, "dt": dt, "n_replicates": len(accs), "tau": tau,
                     "ks_statistic": ks["statistic"]})
    rep.records = [{"eps": spec.eps, "T": a.elapsed, "seed": a.seed, "replicate_id": a.replicate_id,
                    "z": float(v)} for a, v in zip(accs, z)]
    rep.series["standardized_histogram"] = histogram(z, bins, *hist_range)
    if ks["degenerate"]:
        rep.flags.append("degenerate standardized sample")
    if max_ks is not None:
        rep.decisions.append(at_most("KS statistic", ks["statistic"], max_ks))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def tail_experiment(spec: ModelSpec, schedule: ScheduleConfig, delta: float, n_replicates: int,
                    seed: int = 0, max_final_fraction: float | None = None,
                    workers: int = 1) -> ExperimentReport:
    """Exceedance fraction of |X(T_eps)| / sqrt(T_eps) > delta along the schedule."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    t0 = time.perf_counter()
    rep = ExperimentReport("tail")
    for eps in schedule.eps_values:
        T = schedule.horizon(eps)
        accs = simulate_replicates(spec.with_eps(eps), schedule.dt(eps), T, seed, n_replicates,
                                   (), workers)
        ends = np.array([a.last_state for a in accs])
        frac = float(np.mean(np.abs(ends) / math.sqrt(T) > delta))
        rep.rows.append({"eps": eps, "T": T, "dt": schedule.dt(eps), "n_replicates": n_replicates,
                         "fraction": frac})
        rep.steps += sum(a.steps for a in accs)
    fr = [r["fraction"] for r in rep.rows]
    rep.series["exceedance_vs_eps"] = (list(schedule.eps_values), fr)
    rep.decisions.append(holds("fractions nonincreasing", _nonincreasing(fr), "nonincreasing"))
    if max_final_fraction is not None:
        rep.decisions.append(at_most("final exceedance fraction", fr[-1], max_final_fraction))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def hitting_experiment(process: ModelSpec, x_start: float, target: float, dt: float, T_max: float,
                       n_replicates: int, seed: int = 0, max_standard_errors: float | None = 3.0,
                       grid_spacing: float = 1e-3) -> ExperimentReport:
    """Monte-Carlo mean first passage against the speed-density formula."""
    t0 = time.perf_counter()
    rep = ExperimentReport("hitting")
    model = process.with_x0(x_start)
    table = scale_tables(model, homogenize(model), working_grid(model, grid_spacing))
    xi, yi = table.to_transformed(x_start), table.to_transformed(target)
    formula = expected_hitting_time(float(xi), float(yi), table)
    recs = first_passage_batch(model, dt, T_max, seed, range(n_replicates), target)
    hits = np.array([r.hit_time for r in recs if not r.censored])
    censored = sum(r.censored for r in recs)
    mean = float(hits.mean()) if hits.size else math.nan
    se = float(hits.std(ddof=1) / math.sqrt(hits.size)) if hits.size > 1 else math.nan
    n_se = abs(mean - formula) / se if se > 0 else math.inf
    rep.summary = {"formula": formula, "mc_mean": mean, "standard_error": se, "censored": censored,
                   "standard_errors_apart": n_se}
    rep.rows.append({"x_start": x_start, "target": target, "dt": dt, "n_replicates": n_replicates,
                     "formula": formula, "mc_mean": mean, "standard_error": se, "censored": censored})
    rep.records = [{"replicate_id": r.replicate_id, "hit_time": r.hit_time, "censored": int(r.censored)}
                   for r in recs]
    rep.steps = int(round(sum(r.hit_time for r in recs) / dt))
    if max_standard_errors is not None:
        rep.decisions.append(at_most("|MC mean - formula| / SE", n_se, max_standard_errors))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def _estimates(spec: ModelSpec, T: float, accs, cfg: EstimatorConfig, theta0: float,
               scale: float | None) -> list[EstimateRecord]:
    out = []
    for a in accs:
        c = a.complex_average()
        theta, flag = _project(c, cfg)
        z = math.sqrt(a.elapsed) * (theta - theta0) / scale if scale else math.nan
        out.append(EstimateRecord(spec.eps, a.elapsed, c, theta, z, flag, a.seed, a.replicate_id))
    return out


def _estimate_rows(recs: Sequence[EstimateRecord]) -> list[dict]:
    return [{"eps": r.eps, "T": r.T, "seed": r.seed, "replicate_id": r.replicate_id,
             "re_c": r.c_hat.real, "im_c": r.c_hat.imag, "theta_hat": r.theta_hat,
             "std_error": r.standardized_error, "boundary_flag": int(r.boundary)} for r in recs]


def consistency_experiment(spec: ModelSpec, schedule: ScheduleConfig, cfg: EstimatorConfig,
                           n_replicates: int, seed: int = 0, theta0: float | None = None,
                           max_final_median: float | None = None, workers: int = 1,
                           sampler: Callable | None = None) -> ExperimentReport:
    """Median absolute relative error of theta_hat per eps along the schedule.

    ``sampler(eps, T, n)`` may replace the simulation with a list of
    accumulator-like objects exposing ``complex_average``, ``elapsed``,
    ``seed`` and ``replicate_id``.
    """
    t0 = time.perf_counter()
    rep = ExperimentReport("estimate")
    if theta0 is None:
        theta0 = homogenize(spec).theta
    if not schedule.coupled:
        rep.flags.append("schedule invalid: horizon does not diverge (eta = 0)")
        rep.decisions.append(holds("schedule couples T to eps", False, "eta > 0"))
    medians = []
    for eps in schedule.eps_values:
        model = spec.with_eps(eps)
        T = schedule.horizon(eps)
        if sampler is not None:
            accs = sampler(eps, T, n_replicates)
        else:
            accs = simulate_replicates(model, schedule.dt(eps), T, seed, n_replicates, (), workers)
            rep.steps += sum(a.steps for a in accs)
        recs = _estimates(model, T, accs, cfg, theta0, None)
        rel = np.array([abs(r.theta_hat - theta0) / theta0 for r in recs])
        medians.append(float(np.median(rel)))
        rep.rows.append({"eps": eps, "T": T, "n_replicates": n_replicates, "median_relative_error": medians[-1],
                         "mean_theta_hat": float(np.mean([r.theta_hat for r in recs])),
                         "boundary_count": sum(r.boundary for r in recs)})
        rep.records.extend(_estimate_rows(recs))
    rep.summary = {"theta0": theta0, "sigma_eff": cfg.sigma_eff}
    rep.series["median_relative_error_vs_eps"] = (list(schedule.eps_values), medians)
    rep.decisions.append(holds("median errors nonincreasing", _nonincreasing(medians), "nonincreasing"))
    if max_final_median is not None:
        rep.decisions.append(at_most("final median relative error", medians[-1], max_final_median))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def normality_experiment(spec: ModelSpec, eps: float, T: float, n_replicates: int, tau: float,
                         theta0: float, cfg: EstimatorConfig, seed: int = 0,
                         max_ks: float | None = None, workers: int = 1, accumulators=None,
                         bins: int = 30, hist_range=(-4.0, 4.0)) -> ExperimentReport:
    """KS test of sqrt(T)(theta_hat - theta0) / delta_method_std against N(0, 1)."""
    t0 = time.perf_counter()
    rep = ExperimentReport("estimate")
    model = spec.with_eps(eps)
    scale = delta_method_std(theta0, cfg, tau)
    accs = accumulators
    if accs is None:
        accs = simulate_replicates(model, eps * eps / 20.0, T, seed, n_replicates, (), workers)
        rep.steps = sum(a.steps for a in accs)
    recs = _estimates(model, T, accs, cfg, theta0, scale)
    z = np.array([r.standardized_error for r in recs])
    ks = ks_normal(z)
    if len(recs) < MIN_NORMALITY_REPLICATES:
        rep.flags.append(f"underpowered: {len(recs)} < {MIN_NORMALITY_REPLICATES} replicates")
    if ks["degenerate"]:
        rep.flags.append("degenerate standardized sample")
    rep.summary = {"theta0": theta0, "tau": tau, "delta_method_std": scale,
                   "ks_statistic": ks["statistic"], "ks_critical_value_05": ks["critical_value_05"],
                   "ks_pvalue": ks["pvalue"], "boundary_count": sum(r.boundary for r in recs)}
    rep.rows.append({"eps": eps, "T": T, "n_replicates": len(recs), "ks_statistic": ks["statistic"],
                     "delta_method_std": scale})
    rep.records = _estimate_rows(recs)
    rep.series["standardized_histogram"] = histogram(z, bins, *hist_range)
    if max_ks is not None:
        rep.decisions.append(at_most("KS statistic", ks["statistic"], max_ks))
    rep.wall_clock = time.perf_counter() - t0
    return rep
