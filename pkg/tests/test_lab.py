import json
import math

import numpy as np
import pytest

from sharkfin.filtered import s_hat
from sharkfin.lab import (check_H0_limit, check_alternative_limit,
                          check_estimator_consistency, check_window_lln,
                          check_window_variance_forms, ks_critical_2samp,
                          ks_critical_normal, ks_statistic_2samp,
                          ks_statistic_normal, run_verification_suite)
from sharkfin.presets import DISTORTION_A, DISTORTION_B, SHARK_WEST
from sharkfin.renewal import (ChangePointModel, RenewalSpec, WindowConfig,
                              simulate_compound, simulate_renewal)
from sharkfin.theory import (TheoryParams, distortion, shark_fin,
                             simulate_L_paths)


def brute_ks_2samp(x, y):
    pts = sorted(set(list(x) + list(y)))
    best = 0.0
    for t in pts:
        fx = sum(1 for v in x if v <= t) / len(x)
        fy = sum(1 for v in y if v <= t) / len(y)
        best = max(best, abs(fx - fy))
    return best


# ---------------------------------------------------------------------------
# KS utilities


def test_ks_2samp_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.normal(0, 1, 40)
        y = rng.normal(0.3, 1.2, 55)
        assert ks_statistic_2samp(x, y) == pytest.approx(brute_ks_2samp(x, y))


def test_ks_normal_statistic():
    x = np.array([-1.0, 0.0, 1.0])
    from scipy.special import ndtr
    cdf = ndtr(np.sort(x))
    expected = max(max((i + 1) / 3 - c for i, c in enumerate(cdf)),
                   max(c - i / 3 for i, c in enumerate(cdf)))
    assert ks_statistic_normal(x) == pytest.approx(expected)
    draws = np.random.default_rng(2).standard_normal(5000)
    assert ks_statistic_normal(draws) < ks_critical_normal(0.01, 5000)


def test_ks_critical_values():
    # c(0.05) = 1.3581, c(0.01) = 1.6276 up to rounding
    assert ks_critical_2samp(0.05, 100, 100) == pytest.approx(
        1.3581 * math.sqrt(0.02), rel=1e-3)
    assert ks_critical_normal(0.01, 10000) == pytest.approx(
        1.6276 / (100.0 + 0.12 + 0.0011), rel=1e-3)


# ---------------------------------------------------------------------------
# degenerate inputs


def test_insufficient_replicates_fail_with_note():
    rep = check_H0_limit(RenewalSpec.gamma(1, 1), 1000.0, 150.0, (1, 4, 16),
                         n_reps=1, seed=0)
    assert not rep.passed
    assert any("insufficient" in note for note in rep.notes)
    rep = check_alternative_limit(SHARK_WEST, 150.0, (1, 4), n_reps=1, seed=0)
    assert not rep.passed and rep.notes


# ---------------------------------------------------------------------------
# null-hypothesis limit


def test_h0_probes_exchangeable_under_null():
    # stationarity: marginals at distant probes share one distribution
    spec = RenewalSpec.gamma(1, 1)
    scale = math.sqrt(300.0)
    samples = np.empty((400, 2))
    for r in range(400):
        seq = simulate_renewal(spec, 1000.0, seed=70, stream=(r,))
        ev = seq.events
        for j, t in enumerate((300.0, 700.0)):
            diff = (np.searchsorted(ev, t + 150.0, side="right")
                    - 2 * np.searchsorted(ev, t, side="right")
                    + np.searchsorted(ev, t - 150.0, side="right"))
            samples[r, j] = diff / scale
    ks = ks_statistic_2samp(samples[:, 0], samples[:, 1])
    assert ks < ks_critical_2samp(0.01, 400, 400)


def test_h0_limit_example_configuration():
    rep = check_H0_limit(RenewalSpec.gamma(1, 1), 1000.0, 150.0, (1, 4, 16),
                         n_reps=500, seed=1, grid_step=5.0)
    assert rep.passed
    assert rep.metrics["mean_ks"][-1] < rep.metrics["mean_ks"][0]
    # final level also clears the plain 5% two-sample critical value
    crit = ks_critical_2samp(0.05, rep.details["n_reps"], rep.details["n_ref"])
    assert rep.metrics["max_ks"][-1] < crit
    assert json.loads(rep.to_json())["experiment"] == "h0_limit"


# ---------------------------------------------------------------------------
# alternative limit


def test_alternative_limit_smoke_passes():
    rep = check_alternative_limit(DISTORTION_A, 150.0, (1, 4, 16), n_reps=150,
                                  seed=3, grid_step=5.0)
    assert rep.passed
    assert set(rep.metrics) == {"ks_gamma_vs_limit",
                                "ks_estimated_vs_distorted_limit"}


def test_corollary_case_estimated_statistic_matches_plain_limit():
    # equal means, different variances: no systematic term, no distortion
    phi1 = RenewalSpec.gamma(2, 10)      # mu 0.2, sigma2 0.02
    phi2 = RenewalSpec.gamma(0.5, 2.5)   # mu 0.2, sigma2 0.08
    model = ChangePointModel(phi1, phi2, c=500.0, T=1000.0)
    h = 150.0
    p = TheoryParams.from_model(model, h)
    assert shark_fin(500.0, p) == 0.0
    assert distortion(500.0, p) == pytest.approx(1.0, abs=1e-12)

    cfg = WindowConfig(1000.0, (h,), 5.0)
    vals = []
    for r in range(300):
        seq = simulate_compound(model, seed=71, stream=(r,))
        ev = seq.events
        diff = (np.searchsorted(ev, 650.0, side="right")
                - 2 * np.searchsorted(ev, 500.0, side="right")
                + np.searchsorted(ev, 350.0, side="right"))
        vals.append(diff / s_hat(seq, 500.0, h, 1))
    grid, ref = simulate_L_paths(cfg, p, seed=72, n_paths=1200)
    ref_c = ref[:, np.searchsorted(grid, 500.0)]
    assert ks_statistic_2samp(np.asarray(vals), ref_c) \
        < ks_critical_2samp(0.01, 300, 1200)


# ---------------------------------------------------------------------------
# laws of large numbers and estimator consistency


def test_window_lln_strong_change_decreases():
    rep = check_window_lln(SHARK_WEST, 150.0, (1, 4, 16), seed=4, grid_step=5.0)
    sups = rep.metrics["sup_rate_error_right"]
    assert sups[2] < sups[1] < sups[0]
    # rate reaches 20, so the absolute tolerance gate is out of reach here
    assert not rep.passed


def test_window_lln_flat_model_compares_to_constant_rate():
    spec = RenewalSpec.gamma(1, 2)
    model = ChangePointModel(spec, spec, c=500.0, T=1000.0)
    rep = check_window_lln(model, 150.0, (4, 16, 64), seed=5, grid_step=5.0)
    assert rep.passed


def test_estimator_consistency_passes_for_distortion_models():
    for model in (DISTORTION_A, DISTORTION_B):
        rep = check_estimator_consistency(model, 150.0, (1, 4, 16), seed=6,
                                          grid_step=5.0)
        assert rep.passed, rep.notes
        for key in ("sup_mu_right_error", "sup_sigma2_right_error",
                    "sup_scaling_ratio_error"):
            vals = rep.metrics[key]
            assert vals[2] < vals[1] < vals[0]
        assert rep.metrics["sup_scaling_ratio_error"][-1] < 0.05


# ---------------------------------------------------------------------------
# variance-form adjudication


def test_window_variance_forms_smoke():
    rep = check_window_variance_forms(DISTORTION_A, 150.0, seed=7, n_reps=200)
    assert rep.passed
    assert rep.metrics["max_rel_dev_mixture"][0] < 0.02
    assert rep.metrics["max_rel_dev_sum_variant"][0] > 0.02
    assert len(rep.details["probes"]) == 5


def test_window_variance_forms_rejects_bad_probes():
    with pytest.raises(ValueError):
        check_window_variance_forms(DISTORTION_A, 150.0, seed=7, n_reps=10,
                                    probes=[900.0])


# ---------------------------------------------------------------------------
# packaged suite


def test_verification_suite_smoke_all_pass():
    reports = run_verification_suite(scale="smoke")
    names = [r.experiment for r in reports]
    assert names == ["h0_limit", "alternative_limit", "window_lln",
                     "estimator_consistency_shape_change",
                     "estimator_consistency_rate_change",
                     "window_variance_forms"]
    assert all(r.passed for r in reports), [
        (r.experiment, r.notes) for r in reports if not r.passed]
    # reports serialize and summarize
    for r in reports:
        assert json.loads(r.to_json())["passed"] is True
        assert "PASS" in r.summary()


def test_verification_suite_rejects_unknown_scale():
    with pytest.raises(ValueError):
        run_verification_suite(scale="huge")


def test_reports_reproducible_bit_exactly():
    kwargs = dict(n_reps=60, seed=9, grid_step=5.0)
    a = check_H0_limit(RenewalSpec.gamma(1, 1), 1000.0, 150.0, (1, 2), **kwargs)
    b = check_H0_limit(RenewalSpec.gamma(1, 1), 1000.0, 150.0, (1, 2), **kwargs)
    assert a.to_json() == b.to_json()


def test_trend_criteria_require_three_levels():
    # two scales are never enough to claim a convergence trend
    rep = check_H0_limit(RenewalSpec.gamma(1, 1), 1000.0, 150.0, (1, 16),
                         n_reps=200, seed=10, grid_step=5.0)
    assert not rep.passed
