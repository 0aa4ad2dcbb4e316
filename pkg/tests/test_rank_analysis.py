import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liouvlearn import measurement as ms
from liouvlearn import rank_analysis as ra
from liouvlearn.exceptions import DegenerateData


def test_one_setting_never_full_rank():
    assert ra.single_pair_rank_probability([1, 5, 10], n_samples=200).probabilities.tolist() == [0, 0, 0]


def test_gram_shortcut_agrees_with_svd():
    rng = np.random.default_rng(3)
    for r in (25, 40, 55, 70, 120):
        prep = rng.integers(0, 6, (30, r, 2))
        meas = rng.integers(0, 3, (30, r, 2))
        fast = ra.full_rank_mask(ra._observed(prep, meas, (0, 1)))
        slow = [ra.pair_rank(prep[s], meas[s], (0, 1)) == 51 for s in range(30)]
        assert fast.tolist() == slow


def test_observed_mask_matches_measurement_module():
    table = ms.draw_settings(4, 40, 9)
    mask = ra._observed(table.prep[None], table.meas[None], (1, 3))[0]
    assert np.array_equal(np.nonzero(mask)[0], ms.observed_rows(table, (1, 3)))


def test_scan_deterministic_and_monotone():
    grid = list(range(30, 131, 10))
    a = ra.single_pair_rank_probability(grid, 300, seed=4)
    b = ra.single_pair_rank_probability(grid, 300, seed=4)
    assert np.array_equal(a.probabilities, b.probabilities)
    p = a.probabilities
    sigma = np.sqrt(0.25 / 300)
    assert np.all(np.diff(p) > -3 * sigma)
    assert np.all((p >= 0) & (p <= 1))
    assert a.threshold is not None and a.threshold >= 30


def test_threshold_none_when_all_zero():
    assert ra.single_pair_rank_probability([5], 10).threshold is None


def test_stderr():
    res = ra.RankScanResult(np.array([1, 2]), np.array([0.5, 1.0]), 100)
    assert np.allclose(res.stderr, [0.05, 0.0])


def _synthetic(seed, r0=60.0, mu=15.0, n=1000):
    rng = np.random.default_rng(seed)
    r = np.arange(20, 221, 10)
    p = rng.binomial(n, ra.gumbel(r, r0, mu)) / n
    return ra.RankScanResult(r, p, n)


def test_gumbel_recovers_synthetic():
    # sigma is the spread of the estimator over binomial redraws; the residual-based
    # standard error understates it because points pinned at 0 or 1 carry no noise
    fits = np.array([[f.r0, f.mu] for f in (ra.fit_gumbel(_synthetic(s)) for s in range(40))])
    sigma = fits.std(axis=0, ddof=1)
    assert np.all(sigma < 1.5)
    assert np.all(np.abs(fits.mean(axis=0) - [60, 15]) < 3 * sigma / np.sqrt(len(fits)))
    assert np.all(np.abs(fits - [60, 15]) < 4 * sigma)


def test_gumbel_exact_data():
    r = np.arange(20, 221, 10)
    res = ra.RankScanResult(r, ra.gumbel(r, 57.76, 15.0), 1000)
    fit = ra.fit_gumbel(res)
    assert fit.r0 == pytest.approx(57.76, abs=1e-6) and fit.mu == pytest.approx(15.0, abs=1e-6)
    assert res.fit is fit and fit.residual < 1e-10
    assert fit(57.76) == pytest.approx(math.exp(-1))


def test_gumbel_degenerate():
    r = np.arange(20, 221, 10)
    with pytest.raises(DegenerateData):
        ra.fit_gumbel(ra.RankScanResult(r, np.ones(len(r)), 1000))
    p = np.zeros(len(r))
    p[5:] = 1
    p[4] = 0.5
    with pytest.raises(DegenerateData):
        ra.fit_gumbel(ra.RankScanResult(r, p, 1000))


def test_recommend_r_examples():
    assert ra.recommend_r(2, 1 / math.e, (57.76, 15.0)) == 58
    # 57.76 + 15 (log 45 - log log 2) = 120.36, which rounds up to 121
    value = 57.76 + 15.0 * (math.log(45) - math.log(math.log(2)))
    assert value == pytest.approx(120.36, abs=0.01)
    assert ra.recommend_r(10, 0.5, (57.76, 15.0)) == 121
    assert ra.recommend_r(10, 0.99, (57.76, 15.0)) > ra.recommend_r(10, 0.5, (57.76, 15.0))
    fit = ra.GumbelFit(57.76, 15.0, 0.0)
    assert ra.recommend_r(10, 0.5, fit) == 121
    for bad in (0, 1, 1.5):
        with pytest.raises(ValueError):
            ra.recommend_r(3, bad, fit)
    with pytest.raises(ValueError):
        ra.recommend_r(1, 0.5, fit)


@given(st.integers(2, 30), st.integers(2, 30), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_recommend_r_monotone(n1, n2, d1, dd):
    lo, hi = sorted((n1, n2))
    fit = (57.76, 15.0)
    assert ra.recommend_r(lo, d1, fit) <= ra.recommend_r(hi, d1, fit)
    assert ra.recommend_r(lo, d1, fit) <= ra.recommend_r(lo, d1 + dd, fit)


def test_multi_pair_n2_matches_single():
    grid = [50, 60, 70]
    single = ra.single_pair_rank_probability(grid, 400, seed=7)
    multi = ra.multi_pair_rank_probability(grid, [2, 3], 400, seed=8)
    se = np.sqrt(0.25 / 400)
    assert np.all(np.abs(multi.probabilities[:, 0] - single.probabilities) < 4 * np.sqrt(2) * se)
    assert np.all(multi.probabilities[:, 1] <= multi.probabilities[:, 0] + 3 * np.sqrt(2) * se)
    with pytest.raises(ValueError):
        ra.multi_pair_rank_probability(grid, [1], 10)


def test_half_contour_interpolates():
    probs = np.array([[0.0, 0.0], [0.4, 0.2], [0.8, 0.6]])
    out = ra.half_contour([10, 20, 30], [2, 3], probs)
    assert out[2] == pytest.approx(22.5) and out[3] == pytest.approx(27.5)
    assert ra.half_contour([10, 20], [4], np.array([[0.0], [0.1]])) == {}


def test_contour_fit_on_planted_surface():
    r = np.arange(20, 301, 5)
    n = np.arange(2, 9)
    pairs = n * (n - 1) / 2
    probs = ra.gumbel(r[:, None], 58.0, 15.0) ** pairs[None]
    contour = ra.half_contour(r, n, probs)
    ns = np.array(sorted(contour))
    slope, _ = np.polyfit(np.log(ns), [contour[k] for k in ns], 1)
    assert 25 < slope < 40


def test_independence_prediction():
    assert np.allclose(ra.independence_prediction([0.5, 1.0], 3), [0.125, 1.0])
    assert np.allclose(ra.independence_prediction([0.3], 2), [0.3])
