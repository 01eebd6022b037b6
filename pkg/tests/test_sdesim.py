import math

import numpy as np
import pytest

from msdiff.analytic import invariant_density
from msdiff.model import Constant, LinearDrift, ModelSpec, ScheduleConfig, homogenize
from msdiff.rng import normal_block, normal_matrix, uniform_block
from msdiff.sdesim import (BlowUpError, PathSimConfig, endpoint_tail_statistic, first_passage,
                           first_passage_batch, read_path, simulate_accumulate, simulate_batch,
                           simulate_replicates, write_accumulators_csv, write_path)

FROZEN = ModelSpec.diffusion(Constant(0.0), Constant(0.0), x0=0.3, constant_sigma=True)


def test_rng_is_counter_addressable():
    full = normal_block(11, 3, 0, 10_000)
    np.testing.assert_array_equal(full[4097:], normal_block(11, 3, 4097, 10_000 - 4097))
    np.testing.assert_array_equal(full, normal_block(11, 3, 0, 10_000))
    u = uniform_block(0, 0, 0, 100_000)
    assert 0 < u.min() and u.max() < 1


def test_rng_stream_independence():
    n = 100_000
    a, b = normal_block(0, 0, 0, n), normal_block(0, 1, 0, n)
    c = normal_block(1, 0, 0, n)
    for x, y in ((a, b), (a, c)):
        assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(n)
    assert abs(a.mean()) < 4 / math.sqrt(n) and abs(a.std() - 1) < 0.02


def test_normal_matrix_columns():
    m = normal_matrix(5, [2, 9], 100, 50)
    np.testing.assert_array_equal(m[:, 1], normal_block(5, 9, 100, 50))


def test_config_rules():
    with pytest.raises(ValueError):
        PathSimConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        PathSimConfig(1e-12, 1e4)
    cfg = PathSimConfig(0.01 ** 2 / 10, 1.0)
    with pytest.raises(ValueError):
        cfg.check(ModelSpec.langevin(1, 1, 0.01))
    PathSimConfig(0.1 ** 2 / 20, 1.0).check(ModelSpec.langevin(1, 1, 0.1))


def test_constant_test_and_frozen_dynamics():
    lang = ModelSpec.langevin(1, 1, 0.2)
    acc = simulate_accumulate(lang, PathSimConfig(0.002, 3.0, seed=4), [lambda x: np.full_like(x, 2.5)])
    assert acc.averages()[0] == 2.5
    acc = simulate_accumulate(FROZEN, PathSimConfig(0.01, 2.0), [np.cos])
    assert acc.last_state == 0.3
    assert acc.averages()[0] == pytest.approx(math.cos(0.3), rel=1e-14)


def test_accumulator_invariants():
    lang = ModelSpec.langevin(1, 1, 0.2)
    acc = simulate_accumulate(lang, PathSimConfig(0.002, 5.0, seed=1))
    assert acc.elapsed == pytest.approx(acc.steps * 0.002)
    assert abs(acc.sum_complex) <= acc.elapsed


def test_determinism_and_batch_independence():
    lang = ModelSpec.langevin(1, 1, 0.2)
    one = simulate_batch(lang, 0.002, 10.0, 3, [7], [np.cos])[0]
    many = simulate_batch(lang, 0.002, 10.0, 3, [1, 7, 2], [np.cos])
    assert many[1].replicate_id == 7
    assert one.sum_complex == many[1].sum_complex
    np.testing.assert_array_equal(one.sum_real, many[1].sum_real)
    again = simulate_batch(lang, 0.002, 10.0, 3, [7], [np.cos])[0]
    assert again.last_state == one.last_state


def test_worker_pool_matches_serial():
    lang = ModelSpec.langevin(1, 1, 0.2)
    serial = simulate_replicates(lang, 0.002, 2.0, 0, 5, [np.cos])
    pooled = simulate_replicates(lang, 0.002, 2.0, 0, 5, [np.cos], workers=2)
    assert [a.replicate_id for a in pooled] == list(range(5))
    assert [a.sum_complex for a in serial] == [a.sum_complex for a in pooled]


@pytest.fixture(scope="module")
def ergodic_run():
    eps = 0.1
    m = ModelSpec.langevin(1, 1, eps)
    d = invariant_density(m)
    target = float(d.grid.integrate(np.cos(d.grid.nodes) * d.mu_eps))
    accs = simulate_batch(m, eps ** 2 / 20, 50.0, 0, range(50), [np.cos])
    return m, d, sum(abs(a.averages()[0] - target) <= 0.05 for a in accs)


def test_ergodic_average_matches_clt_prediction(ergodic_run):
    from scipy import stats

    from msdiff.poisson import center_test, solve_poisson
    m, d, close = ergodic_run
    tau = math.sqrt(solve_poisson(center_test(np.cos, d), d, m).tau_sq)
    p = 2 * stats.norm.cdf(0.05 * math.sqrt(50.0) / tau) - 1
    lo, hi = stats.binom.interval(0.999, 50, p)
    assert lo <= close <= hi


@pytest.mark.xfail(strict=True, reason="45/50 within 0.05 needs tau/sqrt(T) <= 0.025; here it is 0.078")
def test_ergodic_average_tight_threshold(ergodic_run):
    assert ergodic_run[2] >= 45


def test_ou_weak_order():
    h = homogenize(ModelSpec.langevin(1, 1, 0.2))
    accs = simulate_batch(h.as_model(), 1e-3, 10.0, 0, range(1000))
    x2 = np.array([a.last_state for a in accs]) ** 2
    exact = h.sigma_eff / h.theta * (1 - math.exp(-2 * h.theta * 10.0))
    assert abs(x2.mean() - exact) <= 3 * x2.std(ddof=1) / math.sqrt(x2.size)


def test_blow_up_flagged():
    bad = ModelSpec.diffusion(LinearDrift(5.0), Constant(1.0), x0=1.0, constant_sigma=True)
    with pytest.raises(BlowUpError):
        simulate_accumulate(bad, PathSimConfig(0.01, 50.0))
    acc = simulate_batch(bad, 0.01, 50.0, 0, [0])[0]
    assert acc.blown_up and math.isnan(acc.sum_complex.real)


def test_first_passage_examples():
    rec = first_passage(FROZEN, PathSimConfig(0.01, 1.0), 0.3)
    assert rec.hit_time == 0.0 and not rec.censored
    ode = ModelSpec.diffusion(LinearDrift(-1.0), Constant(0.0), x0=1.0, constant_sigma=True)
    rec = first_passage(ode, PathSimConfig(1e-3, 5.0), 0.5)
    assert abs(rec.hit_time - math.log(2)) <= 1e-3
    rec = first_passage(ode, PathSimConfig(1e-3, 0.5), 0.5)
    assert rec.censored and rec.hit_time == 0.5


def test_first_passage_batch_consistent():
    h = homogenize(ModelSpec.langevin(1, 1, 0.2)).as_model().with_x0(1.0)
    recs = first_passage_batch(h, 1e-3, 20.0, 2, [0, 1, 2], 0.0)
    solo = first_passage_batch(h, 1e-3, 20.0, 2, [1], 0.0)[0]
    assert recs[1].hit_time == solo.hit_time


def test_tail_statistic_trivial_cases():
    sch = ScheduleConfig((0.2, 0.1))
    rows = endpoint_tail_statistic(FROZEN, sch, 0.1, 5)
    assert [r["fraction"] for r in rows] == [0.0, 0.0]
    lang = ModelSpec.langevin(1, 1, 0.2)
    rows = endpoint_tail_statistic(lang, ScheduleConfig((0.2,)), 1e9, 5)
    assert rows[0]["fraction"] == 0.0
    with pytest.raises(ValueError):
        endpoint_tail_statistic(lang, sch, 0.0, 5)


def test_path_dump_roundtrip(tmp_path):
    lang = ModelSpec.langevin(1, 1, 0.2)
    acc = simulate_accumulate(lang, PathSimConfig(0.002, 1.0, store_path=True))
    p = tmp_path / "p.bin"
    write_path(p, acc.path)
    raw = p.read_bytes()
    assert raw[:8] == b"MSPATH01"
    assert int.from_bytes(raw[8:16], "little") == acc.steps
    assert len(raw) == 16 + 8 * (acc.steps + 1)
    np.testing.assert_array_equal(read_path(p), acc.path)
    assert acc.path[-1] == acc.last_state
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_path(p)


def test_accumulator_csv(tmp_path):
    lang = ModelSpec.langevin(1, 1, 0.2)
    accs = simulate_batch(lang, 0.002, 1.0, 0, [0, 1], [np.cos])
    p = tmp_path / "a.csv"
    write_accumulators_csv(p, accs, ["cos"])
    lines = p.read_text().splitlines()
    assert lines[0].endswith("sum_cos") and len(lines) == 3
