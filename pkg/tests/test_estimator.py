import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from msdiff.analytic import char_fn_mu
from msdiff.estimator import (EstimatorConfig, delta_method_std, g_inverse, histogram, is_boundary,
                              ks_normal, mde_estimate)
from msdiff.experiments import consistency_experiment, normality_experiment
from msdiff.model import ModelSpec, ScheduleConfig


def test_closed_form_examples():
    assert mde_estimate(math.exp(-1), EstimatorConfig(2.0)) == pytest.approx(1.0, rel=1e-15)
    # -0.6238 / (2 log 0.55), imaginary part discarded
    assert mde_estimate(0.55 + 0.02j, EstimatorConfig(0.6238)) == pytest.approx(0.52171411205, rel=1e-10)


@given(st.floats(0.02, 9.9), st.floats(0.1, 3.0))
def test_inversion_identity(theta, s):
    cfg = EstimatorConfig(s)
    v = char_fn_mu(theta, s)
    if cfg.projection_floor < v < 1 - cfg.projection_floor:
        assert mde_estimate(v, cfg) == pytest.approx(theta, rel=1e-12)


def test_monotone_in_real_part():
    cfg = EstimatorConfig(0.62)
    r = np.linspace(0.01, 0.9, 400)
    th = [mde_estimate(complex(v, 0.1), cfg) for v in r]
    assert np.all(np.diff(th) > 0)


@given(st.floats(0.05, 0.95), st.floats(-0.5, 0.5))
def test_projection_is_argmin(re, im):
    cfg = EstimatorConfig(0.62)
    c = complex(re, im)
    th = mde_estimate(c, cfg)
    grid = np.linspace(cfg.theta_min, cfg.theta_max, 1000)
    best = np.min(np.abs(c - np.exp(-cfg.sigma_eff / (2 * grid))))
    assert abs(c - math.exp(-cfg.sigma_eff / (2 * th))) <= best + 1e-15


def test_boundary_flags():
    cfg = EstimatorConfig(0.62)
    assert is_boundary(-0.2 + 0j, cfg) and is_boundary(1.0 + 0j, cfg)
    assert mde_estimate(0.99999999 + 0j, cfg) == cfg.theta_max
    assert not is_boundary(0.6 + 0j, cfg)


@pytest.mark.parametrize("kw", [dict(theta_min=1.0, theta_max=0.5), dict(projection_floor=0.5),
                                dict(sigma_eff=0.0)])
def test_config_invariants(kw):
    base = dict(sigma_eff=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        EstimatorConfig(**base)


def test_delta_method():
    cfg = EstimatorConfig(1.0)
    assert delta_method_std(0.7, cfg, 0.0) == 0.0
    th = 0.5
    assert delta_method_std(th, EstimatorConfig(2 * th), 1.3) == pytest.approx(th * math.e * 1.3, rel=1e-14)
    for th, s in [(0.62, 0.62), (2.0, 0.3), (0.1, 1.5)]:
        v0 = math.exp(-s / (2 * th))
        fd = (g_inverse(v0 + 1e-6, s) - g_inverse(v0 - 1e-6, s)) / 2e-6
        assert delta_method_std(th, EstimatorConfig(s), 1.0) == pytest.approx(abs(fd), rel=1e-5)
    with pytest.raises(ValueError):
        delta_method_std(20.0, cfg, 1.0)


def test_ks_examples():
    res = ks_normal(np.zeros(200))
    assert res["statistic"] == pytest.approx(0.5) and res["degenerate"]
    z = np.random.default_rng(2024).standard_normal(200)
    res = ks_normal(z)
    assert res["critical_value_05"] == pytest.approx(1.3581 / math.sqrt(200), rel=1e-3)
    assert res["statistic"] < res["critical_value_05"]


def test_histogram_binning():
    centers, counts = histogram([-5.0, -3.99, 0.0, 3.99, 5.0])
    assert len(centers) == 30 and centers[0] == pytest.approx(-4 + 4 / 30)
    assert counts.sum() == 3


def _exact_sampler(theta0, s):
    v = char_fn_mu(theta0, s)

    def sample(eps, T, n):
        return [SimpleNamespace(complex_average=lambda: complex(v), elapsed=T, seed=0, replicate_id=i)
                for i in range(n)]
    return sample


def test_consistency_pipeline_identity():
    spec = ModelSpec.langevin(1, 1, 0.2)
    cfg = EstimatorConfig(0.6)
    rep = consistency_experiment(spec, ScheduleConfig((0.2, 0.1)), cfg, 5, theta0=0.8,
                                 sampler=_exact_sampler(0.8, 0.6))
    assert all(r["median_relative_error"] <= 1e-14 for r in rep.rows)
    assert rep.passed and len(rep.records) == 10


def test_constant_horizon_marked_invalid():
    spec = ModelSpec.langevin(1, 1, 0.2)
    rep = consistency_experiment(spec, ScheduleConfig((0.2, 0.1), horizon_exponent=0.0),
                                 EstimatorConfig(0.6), 3, theta0=0.8, sampler=_exact_sampler(0.8, 0.6))
    assert not rep.passed and any("invalid" in f for f in rep.flags)


def test_normality_degenerate_and_underpowered():
    spec = ModelSpec.langevin(1, 1, 0.2)
    accs = _exact_sampler(0.8, 0.6)(0.2, 100.0, 10)
    rep = normality_experiment(spec, 0.2, 100.0, 10, 1.0, 0.8, EstimatorConfig(0.6), accumulators=accs)
    assert rep.summary["ks_statistic"] == pytest.approx(0.5)
    assert any("underpowered" in f for f in rep.flags)
    assert any("degenerate" in f for f in rep.flags)
