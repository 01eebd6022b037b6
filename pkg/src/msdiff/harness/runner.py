"""Dispatch a validated config to its experiment."""

from __future__ import annotations

import time

from .. import experiments as ex
from ..estimator import EstimatorConfig
from ..model import ModelSpec, ScheduleConfig, check_model, homogenize
from ..report import ExperimentReport
from .config import EXPERIMENT_DEFAULTS, ConfigError, ExperimentConfig


def build_model(cfg: ExperimentConfig) -> ModelSpec:
    return ModelSpec.langevin(cfg.alpha, cfg.sigma, cfg.eps[0], cfg.x0)


def build_schedule(cfg: ExperimentConfig) -> ScheduleConfig:
    return ScheduleConfig(cfg.eps, cfg.horizon_constant, cfg.horizon_exponent, cfg.dt_divisor)


def _tests(cfg: ExperimentConfig) -> dict:
    names = [t.strip() for t in cfg.param("tests").split(",") if t.strip()]
    unknown = [n for n in names if n not in ex.TEST_FUNCTIONS]
    if not names or unknown:
        raise ConfigError(f"[met] tests must name some of {sorted(ex.TEST_FUNCTIONS)}")
    return {n: ex.TEST_FUNCTIONS[n] for n in names}


def _estimate(cfg, spec, schedule) -> ExperimentReport:
    homog = homogenize(spec)
    est = EstimatorConfig(homog.sigma_eff, cfg.number("theta_min"), cfg.number("theta_max"),
                          cfg.number("projection_floor"))
    cons = ex.consistency_experiment(spec, schedule, est, int(cfg.number("consistency_replicates")),
                                     cfg.base_seed, homog.theta, cfg.number("max_final_median"),
                                     cfg.workers)
    final = spec.with_eps(cfg.eps[-1])
    tau, _ = ex._cos_tau(final)
    norm = ex.normality_experiment(spec, cfg.eps[-1], cfg.number("normality_T"), cfg.n_replicates,
                                   tau, homog.theta, est, cfg.base_seed, cfg.number("max_ks"),
                                   cfg.workers, bins=int(cfg.number("bins")))
    rep = ExperimentReport("estimate", rows=cons.rows + norm.rows,
                           decisions=cons.decisions + norm.decisions,
                           records=cons.records + norm.records,
                           series={**cons.series, **norm.series},
                           summary={**cons.summary, **norm.summary},
                           steps=cons.steps + norm.steps, flags=cons.flags + norm.flags)
    return rep


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the configured experiment; assumption failures abort before any simulation."""
    t0 = time.perf_counter()
    spec = build_model(cfg)
    schedule = build_schedule(cfg)
    homog = homogenize(spec)
    check_model(spec, homog)
    name = cfg.experiment
    if name == "coeff":
        rep = ex.coeff_experiment(spec, cfg.eps, cfg.tol, cfg.number("agreement_tol"),
                                  cfg.number("harmonic_tol"), cfg.number("expected_K"),
                                  cfg.number("expected_K_tol"), cfg.max_spacing, cfg.length)
    elif name == "poisson":
        rep = ex.poisson_experiment(spec, cfg.eps, cfg.number("max_relative_gap"),
                                    cfg.max_spacing, cfg.length)
    elif name == "met":
        tests = _tests(cfg)
        limits = {n: cfg.number(f"max_final_mse.{n}") for n in tests}
        limits = {k: v for k, v in limits.items() if v is not None}
        rep = ex.met_experiment(spec, schedule, tests, cfg.n_replicates, cfg.base_seed, limits,
                                cfg.workers)
    elif name == "clt":
        final = spec.with_eps(cfg.eps[-1])
        rep = ex.clt_experiment(final, cfg.number("T"), cfg.n_replicates, cfg.base_seed,
                                cfg.number("max_ks"), schedule.dt(cfg.eps[-1]), cfg.workers,
                                bins=int(cfg.number("bins")),
                                hist_range=(cfg.number("hist_lo"), cfg.number("hist_hi")))
    elif name == "tail":
        rep = ex.tail_experiment(spec, schedule, cfg.number("delta"), cfg.n_replicates,
                                 cfg.base_seed, cfg.number("max_final_fraction"), cfg.workers)
    elif name == "hitting":
        rep = ex.hitting_experiment(homog.as_model(), cfg.number("x_start"), cfg.number("target"),
                                    cfg.number("dt"), cfg.number("T_max"), cfg.n_replicates,
                                    cfg.base_seed, cfg.number("max_standard_errors"))
    else:
        rep = _estimate(cfg, spec, schedule)
    rep.config = {"ini": cfg.to_ini()}
    rep.wall_clock = time.perf_counter() - t0
    return rep

