import numpy as np
import pytest

from sharkfin.detector import (ThresholdTable, detect, estimate_change_points,
                               merge_across_windows, simulate_threshold,
                               threshold_cache_key)
from sharkfin.presets import SHARK_WEST
from sharkfin.renewal import (ConfigurationError, EventSequence, RenewalSpec,
                              simulate_compound, simulate_renewal)
from sharkfin.series import StatisticSeries


def make_series(grid, values, valid=None, h=150.0, step=None):
    grid = np.asarray(grid, dtype=float)
    if valid is None:
        valid = np.ones(grid.size, dtype=bool)
    step = step if step is not None else float(grid[1] - grid[0])
    return StatisticSeries(grid=grid, values=np.asarray(values, dtype=float),
                           valid=np.asarray(valid, dtype=bool), h=h, n=1,
                           grid_step=step)


# ---------------------------------------------------------------------------
# threshold simulation


def test_threshold_alpha_monotonicity():
    strict = simulate_threshold(1000.0, [150.0], 5.0, 0.01, 2000, seed=9)
    loose = simulate_threshold(1000.0, [150.0], 5.0, 0.05, 2000, seed=9)
    assert strict.Q >= loose.Q


def test_threshold_multi_window_dominates_single():
    single = simulate_threshold(1000.0, [150.0], 5.0, 0.05, 2000, seed=10)
    multi = simulate_threshold(1000.0, [100.0, 150.0, 200.0], 5.0, 0.05, 2000, seed=10)
    assert multi.Q >= single.Q
    # shared Brownian path per replicate: the per-window quantile of the
    # common window must coincide with the single-window run
    assert multi.per_h_max_quantiles[150.0] == single.per_h_max_quantiles[150.0]


def test_threshold_reproducible_and_bracketed():
    a = simulate_threshold(1000.0, [150.0], 3.0, 0.05, 10000, seed=42)
    b = simulate_threshold(1000.0, [150.0], 3.0, 0.05, 10000, seed=42)
    assert a.Q == b.Q
    assert 2.0 <= a.Q <= 5.0


def test_threshold_workers_do_not_change_result():
    a = simulate_threshold(1000.0, [150.0], 5.0, 0.05, 1500, seed=11, workers=1)
    b = simulate_threshold(1000.0, [150.0], 5.0, 0.05, 1500, seed=11, workers=3)
    assert a.Q == b.Q


def test_threshold_validation():
    with pytest.raises(ConfigurationError):
        simulate_threshold(1000.0, [150.0], 5.0, 1.5, 1000, seed=1)
    with pytest.raises(ConfigurationError):
        simulate_threshold(1000.0, [150.0], 5.0, 0.05, 50, seed=1)
    with pytest.raises(ValueError):
        simulate_threshold(1000.0, [600.0], 5.0, 0.05, 1000, seed=1)


def test_threshold_table_roundtrip(tmp_path):
    table = simulate_threshold(1000.0, [100.0, 150.0], 5.0, 0.05, 500, seed=12)
    path = tmp_path / "table.json"
    table.save(path)
    back = ThresholdTable.load(path)
    assert back == table
    assert back.cache_key() == table.cache_key()
    assert threshold_cache_key(1000.0, [150.0, 100.0], 5.0, 0.05, 500, 12) \
        == table.cache_key()


# ---------------------------------------------------------------------------
# successive argmax estimation


def test_estimate_two_separated_peaks():
    grid = np.arange(0.0, 1001.0, 10.0)
    values = np.zeros(grid.size)
    values[np.searchsorted(grid, 300.0)] = 10.0
    values[np.searchsorted(grid, 700.0)] = -8.0
    found = estimate_change_points(make_series(grid, values), Q=3.0, h=150.0)
    assert found == [300.0, 700.0]


def test_estimate_excludes_nearby_secondary_peak():
    grid = np.arange(0.0, 1001.0, 10.0)
    values = np.zeros(grid.size)
    values[np.searchsorted(grid, 300.0)] = 10.0
    values[np.searchsorted(grid, 380.0)] = 8.0     # within h of the first
    found = estimate_change_points(make_series(grid, values), Q=3.0, h=150.0)
    assert found == [300.0]


def test_estimate_exclusion_interval_is_open():
    grid = np.arange(0.0, 1001.0, 10.0)
    values = np.zeros(grid.size)
    values[np.searchsorted(grid, 300.0)] = 10.0
    values[np.searchsorted(grid, 450.0)] = 8.0     # exactly h away: kept
    found = estimate_change_points(make_series(grid, values), Q=3.0, h=150.0)
    assert found == [300.0, 450.0]


def test_estimate_nothing_above_threshold():
    grid = np.arange(0.0, 1001.0, 10.0)
    found = estimate_change_points(make_series(grid, np.ones(grid.size)),
                                   Q=3.0, h=150.0)
    assert found == []


def test_estimate_ignores_invalid_nodes():
    grid = np.arange(0.0, 1001.0, 10.0)
    values = np.zeros(grid.size)
    values[5] = 50.0
    valid = np.ones(grid.size, dtype=bool)
    valid[5] = False
    found = estimate_change_points(make_series(grid, values, valid), Q=3.0, h=150.0)
    assert found == []


def test_estimates_pairwise_separated_property():
    rng = np.random.default_rng(3)
    grid = np.arange(0.0, 2001.0, 5.0)
    for _ in range(10):
        values = rng.normal(0, 3, grid.size)
        found = estimate_change_points(make_series(grid, values), Q=2.0, h=100.0)
        gaps = np.diff(found)
        assert np.all(gaps >= 100.0)


# ---------------------------------------------------------------------------
# merging across window sizes


def test_merge_single_window_is_identity():
    assert merge_across_windows({150.0: [200.0, 600.0]}) \
        == [(200.0, 150.0), (600.0, 150.0)]


def test_merge_prefers_smaller_window():
    merged = merge_across_windows({100.0: [500.0], 200.0: [510.0]})
    assert merged == [(500.0, 100.0)]


def test_merge_disjoint_union_sorted():
    merged = merge_across_windows({100.0: [700.0], 200.0: [300.0]})
    assert merged == [(300.0, 200.0), (700.0, 100.0)]


# ---------------------------------------------------------------------------
# detection


@pytest.fixture(scope="module")
def table_150():
    return simulate_threshold(1000.0, [150.0], 5.0, 0.05, 4000, seed=20)


def test_detect_empty_sequence(table_150):
    empty = EventSequence(np.empty(0), 1000.0)
    res = detect(empty, 1000.0, 1, [150.0], table_150)
    assert not res.reject
    assert res.global_max == 0.0
    assert res.change_points == ()


def test_detect_mismatched_table(table_150):
    seq = simulate_renewal(RenewalSpec.gamma(1, 1), 1000.0, seed=21)
    with pytest.raises(ConfigurationError):
        detect(seq, 1000.0, 1, [100.0], table_150)
    with pytest.raises(ConfigurationError):
        detect(seq, 500.0, 1, [150.0], table_150)
    with pytest.raises(ConfigurationError):
        detect(seq, 1000.0, 2, [150.0], table_150)   # horizon != n*T


def test_detect_deterministic(table_150):
    seq = simulate_compound(SHARK_WEST, seed=22)
    r1 = detect(seq, 1000.0, 1, [150.0], table_150)
    r2 = detect(seq, 1000.0, 1, [150.0], table_150)
    assert r1.reject == r2.reject
    assert r1.global_max == r2.global_max
    assert r1.change_points == r2.change_points
    assert np.array_equal(r1.per_h_series[150.0].values,
                          r2.per_h_series[150.0].values)


def test_detect_strong_change(table_150):
    seq = simulate_compound(SHARK_WEST, seed=23)
    res = detect(seq, 1000.0, 1, [150.0], table_150)
    assert res.reject
    assert res.global_max > res.Q
    primary = max(res.change_points, key=lambda cp: abs(cp.value))
    assert abs(primary.location - 500.0) <= 30.0
    assert abs(primary.value) == pytest.approx(res.global_max)


def test_detect_level_smoke(table_150):
    spec = RenewalSpec.gamma(1, 1)
    rejects = sum(
        detect(simulate_renewal(spec, 1000.0, seed=24, stream=(r,)),
               1000.0, 1, [150.0], table_150).reject
        for r in range(200))
    assert 0.0 <= rejects / 200 <= 0.12


def test_detect_json_dict(table_150):
    seq = simulate_compound(SHARK_WEST, seed=25)
    res = detect(seq, 1000.0, 1, [150.0], table_150)
    d = res.to_json_dict({150.0: "G_h150.csv"})
    assert d["reject"] is True
    assert d["series"] == {"150.0": "G_h150.csv"}
    assert all(set(cp) == {"location", "h", "value"} for cp in d["change_points"])
