import math

import numpy as np
import pytest

from autopos import (
    Constellation,
    ErrorClass,
    RangingModelParams,
    draw_measurement,
    simulate_epoch,
    simulate_scenario,
    summarize,
)
from autopos.scenario import DEFAULT_CONSTELLATION

from conftest import exact_matrix
from oracles import expected_class_fractions, ordered_pair_distances


class ScriptedRng:
    """Duck-typed generator that serves preset values per draw kind."""

    def __init__(self, uniform01, lognormal=5.0, uniform_range=0.0, normal=0.0):
        self._u01 = list(uniform01)
        self._lognormal = lognormal
        self._uniform_range = uniform_range
        self._normal = normal

    def random(self, n):
        return np.array([self._u01.pop(0) for _ in range(n)])

    def lognormal(self, mean, sigma, n):
        return np.full(n, self._lognormal)

    def uniform(self, low, high):
        return np.broadcast_to(self._uniform_range, np.shape(low)).astype(float)

    def normal(self, loc, scale, n):
        return np.full(n, self._normal)


SCENARIO2 = dict(sigma_r=0.9, d_max=100.0, p_out=0.07, mp_mean=0.8, mp_sigma=1.07)


def test_failure_is_deterministic_at_max_range():
    params = RangingModelParams(**SCENARIO2, seed=1)
    rng = np.random.default_rng(0)
    for _ in range(200):
        r, cls = draw_measurement(100.0, params, rng)
        assert r is None and cls is ErrorClass.FAILED
    r, cls = draw_measurement(150.0, params, rng)
    assert cls is ErrorClass.FAILED


def test_classifier_threshold_enters_multipath_branch():
    # at half the maximum range the multipath case needs p_eps > 0.65
    params = RangingModelParams(**SCENARIO2, seed=1)
    rng = ScriptedRng(uniform01=[0.99, 0.70], lognormal=2.0)
    r, cls = draw_measurement(50.0, params, rng)
    assert cls is ErrorClass.NLOS
    assert r == pytest.approx(52.0)

    rng = ScriptedRng(uniform01=[0.99, 0.64], normal=0.25)
    r, cls = draw_measurement(50.0, params, rng)
    assert cls is ErrorClass.LOS
    assert r == pytest.approx(50.25)


def test_multipath_guard_falls_through():
    # lognormal sample >= d, classifier value above p_out: ends up LOS
    params = RangingModelParams(**SCENARIO2, seed=1)
    rng = ScriptedRng(uniform01=[0.99, 0.70], lognormal=80.0, normal=-0.1)
    r, cls = draw_measurement(50.0, params, rng)
    assert cls is ErrorClass.LOS
    assert r == pytest.approx(49.9)


def test_outlier_branch():
    params = RangingModelParams(**SCENARIO2, seed=1)
    rng = ScriptedRng(uniform01=[0.99, 0.05], uniform_range=30.0)
    r, cls = draw_measurement(50.0, params, rng)
    assert cls is ErrorClass.OUTLIER
    assert r == pytest.approx(80.0)


def test_gaussian_only_scenario_is_all_los():
    params = RangingModelParams(
        sigma_r=0.9, d_max=100.0, p_out=0.0, nlos_enabled=False,
        failures_enabled=False, seed=3,
    )
    cons = Constellation.from_coords(DEFAULT_CONSTELLATION)
    matrices = simulate_scenario(cons, params, 20)
    s = summarize(matrices)
    assert s.los == 1.0 and s.nlos == 0.0 and s.outlier == 0.0 and s.failed == 0.0


def test_gaussian_residuals_match_sigma():
    # one pair, many epochs: residuals behave like N(0, sigma_r^2)
    params = RangingModelParams(
        sigma_r=0.9, d_max=100.0, p_out=0.0, nlos_enabled=False,
        failures_enabled=False, seed=11,
    )
    cons = Constellation.from_coords([(0, 0), (12.0, 0), (6.0, 8.0)])
    n_epochs = 100_000 // 6
    residuals = []
    dist = cons.distance_matrix()
    for t in range(n_epochs):
        m = simulate_epoch(cons, params, t)
        off = ~np.eye(3, dtype=bool)
        residuals.append(m.ranges[off] - dist[off])
    res = np.concatenate(residuals)
    n = res.size
    assert n >= 99_000
    assert abs(res.mean()) < 3 * 0.9 / math.sqrt(n)
    assert abs(res.std() - 0.9) / 0.9 < 0.05


def test_determinism_same_seed_same_epoch():
    params = RangingModelParams(**SCENARIO2, seed=42)
    cons = Constellation.from_coords(DEFAULT_CONSTELLATION)
    a = simulate_epoch(cons, params, 7)
    b = simulate_epoch(cons, params, 7)
    np.testing.assert_array_equal(a.ranges, b.ranges)
    np.testing.assert_array_equal(a.classes, b.classes)
    c = simulate_epoch(cons, params, 8)
    assert not np.array_equal(a.ranges, c.ranges)


def test_epoch_entry_counts():
    params = RangingModelParams(**SCENARIO2, seed=5)
    cons = Constellation.from_coords([(0, 0), (3, 0), (0, 4)])
    m = simulate_epoch(cons, params, 0)
    attempted = np.count_nonzero(~np.eye(3, dtype=bool))
    assert attempted == 6
    # 13-node default over 1000 epochs: 156000 directed attempts
    assert 13 * 12 * 1000 == 156_000


def test_no_negative_ranges_and_failure_rate():
    params = RangingModelParams(
        sigma_r=0.9, d_max=50.0, p_out=0.2, mp_mean=0.8, mp_sigma=1.07, seed=17
    )
    cons = Constellation.from_coords([(0, 0), (20.0, 0), (0.0, 15.0)])
    failed = 0
    total = 0
    for t in range(20_000):
        m = simulate_epoch(cons, params, t)
        ok = ~np.isnan(m.ranges)
        assert np.all(m.ranges[ok] >= 0.0)
        failed += int(m.classes[0, 1] == int(ErrorClass.FAILED))
        total += 1
    # pair (0, 1) sits at d = 20 with d_max = 50: failure rate 0.4
    assert abs(failed / total - 0.4) < 0.01


def test_class_fractions_match_analytic_oracle_single_pair():
    params = RangingModelParams(**SCENARIO2, seed=23)
    cons = Constellation.from_coords([(0, 0), (30.0, 0), (15.0, 20.0)])
    matrices = simulate_scenario(cons, params, 30_000 // 6)
    s = summarize(matrices)
    exp = expected_class_fractions(ordered_pair_distances(cons.as_array()), params)
    for got, want in zip((s.los, s.nlos, s.outlier, s.failed), exp):
        assert abs(got - want) < 0.02


def test_summarize_rejects_empty_and_sums_to_one():
    with pytest.raises(ValueError):
        summarize([])
    params = RangingModelParams(**SCENARIO2, seed=2)
    cons = Constellation.from_coords(DEFAULT_CONSTELLATION)
    s = summarize([simulate_epoch(cons, params, t) for t in range(5)])
    assert s.los + s.nlos + s.outlier + s.failed == pytest.approx(1.0, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        RangingModelParams(sigma_r=0.0)
    with pytest.raises(ValueError):
        RangingModelParams(p_out=1.5)
    with pytest.raises(ValueError):
        RangingModelParams(seed=-1)


def test_exact_matrix_helper_round_trips(exact4):
    m = exact_matrix(exact4)
    assert m.pair_range(0, 1) == pytest.approx(4.0)
    assert m.pair_range(1, 2) == pytest.approx(math.sqrt(13))
