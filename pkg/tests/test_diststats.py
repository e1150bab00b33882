"""Distance pools, tail fits, and the classifier against hand oracles."""

import math

import numpy as np
import pytest
from scipy import stats

from svshape.checkpoint import KINDS
from svshape.diststats import (
    Diagnostics,
    DistancePool,
    DistributionClass,
    DistributionLabel,
    MIN_FIT_SAMPLES,
    all_pairs_distances,
    classify_pool,
    cosine_distance,
    fit_normal,
    fit_pareto,
    histogram,
    pairwise_distances,
    polar_histogram,
    remove_zeros,
    _profile_pareto_mle,
)
from svshape.errors import (
    DegenerateSamplesError,
    LengthMismatchError,
    NonFiniteError,
    RankMismatchError,
    TooFewSamplesError,
    ZeroNormError,
)
from svshape.spectral import SpectrumStack
from conftest import LAYOUTS, structured_stacks


def gpd_samples(rng, shape, scale, loc, n):
    """Inverse-CDF generalized Pareto draws (independent of scipy's sampler)."""
    u = rng.uniform(size=n)
    return loc + scale / shape * ((1.0 - u) ** (-shape) - 1.0)


def fit_pool(values, source="test"):
    values = np.asarray(values, dtype=np.float64)
    return DistancePool(values, source=source, candidates=values.size)


# ---------------------------------------------------------------- distance


def test_hand_computed_distance():
    # cos([3,4],[4,3]) = 24/25, so the distance is 1/25
    assert cosine_distance([3.0, 4.0], [4.0, 3.0]) == pytest.approx(0.04, abs=1e-15)
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0, abs=1e-15)


def test_identical_vectors_give_exact_zero():
    rng = np.random.default_rng(12)
    for _ in range(200):
        x = rng.standard_normal(rng.integers(2, 40))
        assert cosine_distance(x, x) == 0.0


def test_positive_scaling_is_near_invariant():
    rng = np.random.default_rng(13)
    for _ in range(100):
        x = rng.standard_normal(16)
        for factor in (2.0, 0.125, 3.7e5):
            assert cosine_distance(x, factor * x) <= 1e-12


def test_distance_symmetry_and_range():
    rng = np.random.default_rng(14)
    for _ in range(500):
        x = rng.standard_normal(12)
        y = rng.standard_normal(12)
        d_xy = cosine_distance(x, y)
        d_yx = cosine_distance(y, x)
        assert abs(d_xy - d_yx) <= 1e-12
        assert 0.0 <= d_xy <= 2.0


def test_huge_norms_do_not_overflow():
    x = np.array([3e200, 4e200])
    y = np.array([4e200, 3e200])
    assert cosine_distance(x, y) == pytest.approx(0.04, rel=1e-12)


def test_distance_input_validation():
    with pytest.raises(ZeroNormError):
        cosine_distance([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(LengthMismatchError):
        cosine_distance([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(NonFiniteError):
        cosine_distance([np.nan, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="1-D"):
        cosine_distance(np.ones((2, 2)), np.ones((2, 2)))


# ------------------------------------------------------------------- pools


def test_pool_counts_and_sources():
    stacks = structured_stacks(seed=3, layout=LAYOUTS["two-group"])
    num_layers = 16
    same = pairwise_distances(stacks[KINDS[0]], stacks[KINDS[0]])
    assert same.source == "q-q"
    assert same.size == same.candidates == num_layers * (num_layers - 1) // 2
    cross = pairwise_distances(stacks[KINDS[0]], stacks[KINDS[1]])
    assert cross.source == "q-k"
    assert cross.size == cross.candidates == num_layers * num_layers
    assert not cross.zeros_removed


def test_all_pairs_candidates_and_recomposition():
    stacks = structured_stacks(seed=3, layout=LAYOUTS["two-group"])
    pooled = all_pairs_distances(stacks)
    total = 7 * 16
    assert pooled.candidates == total * (total - 1) // 2 == 6216
    assert pooled.zeros_removed

    # the pooled values are exactly the union of the 28 per-pair pools
    pieces = []
    kinds = list(KINDS)
    for i, a in enumerate(kinds):
        for b in kinds[i:]:
            pieces.append(pairwise_distances(stacks[a], stacks[b]).values)
    union = np.concatenate(pieces)
    union = union[union > 0.0]
    assert np.array_equal(np.sort(union), np.sort(pooled.values))


def test_pool_validation():
    with pytest.raises(ValueError, match="within"):
        DistancePool(np.array([0.5, 2.5]), "bad", candidates=2)
    with pytest.raises(ValueError, match="candidate count"):
        DistancePool(np.array([0.5, 0.7]), "bad", candidates=1)
    with pytest.raises(ValueError, match="1-D"):
        DistancePool(np.ones((2, 2)), "bad", candidates=4)


def test_remove_zeros_bookkeeping():
    pool = DistancePool(np.array([0.0, 0.5, 0.0, 0.1]), "mixed", candidates=4)
    cleaned = remove_zeros(pool)
    assert cleaned.size == 2
    assert cleaned.candidates == 4
    assert cleaned.zeros_removed
    np.testing.assert_array_equal(np.sort(cleaned.values), [0.1, 0.5])


def test_remove_zeros_tolerance_drops_rounding_residue():
    pool = DistancePool(np.array([1e-15, 0.5, 0.0, 1e-7]), "mixed", candidates=4)
    assert remove_zeros(pool).size == 3  # exact cut keeps the 1e-15 residue
    cleaned = remove_zeros(pool, tolerance=1e-12)
    np.testing.assert_array_equal(np.sort(cleaned.values), [1e-7, 0.5])
    with pytest.raises(ValueError, match="tolerance"):
        remove_zeros(pool, tolerance=-1.0)


def test_rank_mismatch_rejected():
    a = SpectrumStack.from_matrix("q", np.tile([[3.0, 2.0]], (3, 1)))
    b = SpectrumStack.from_matrix("k", np.tile([[3.0, 2.0, 1.0]], (3, 1)))
    with pytest.raises(RankMismatchError):
        pairwise_distances(a, b)
    with pytest.raises(RankMismatchError):
        all_pairs_distances([a, b])


# -------------------------------------------------------------------- fits


def test_pareto_fit_recovers_shape():
    rng = np.random.default_rng(31)
    raw = gpd_samples(rng, shape=0.8, scale=1.0, loc=0.0, n=8000)
    # rescale into the distance range; the MLE shape is scale-equivariant
    values = 0.001 + raw * (1.5 / raw.max())
    fit = fit_pareto(fit_pool(values))
    assert fit.loc == float(values.min())
    assert fit.shape == pytest.approx(0.8, rel=0.10)
    assert fit.ks_statistic < 0.02
    assert fit.tail_index == fit.shape
    assert set(fit.to_dict()) == {"shape", "loc", "scale", "ks_statistic"}


def test_profile_mle_fallback_agrees_with_scipy():
    rng = np.random.default_rng(32)
    raw = gpd_samples(rng, shape=0.6, scale=0.02, loc=0.0, n=6000)
    shape, scale = _profile_pareto_mle(raw)
    assert shape == pytest.approx(0.6, rel=0.10)
    c, _, s = stats.genpareto.fit(raw, floc=0.0)
    assert shape == pytest.approx(c, rel=0.02)
    assert scale == pytest.approx(s, rel=0.05)


def test_normal_fit_matches_hand_formulas():
    rng = np.random.default_rng(33)
    values = np.clip(rng.normal(1.0, 0.1, size=5000), 0.0, 2.0)
    fit = fit_normal(fit_pool(values))
    n = values.size
    mean = sum(values) / n
    stddev = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    assert fit.mean == pytest.approx(mean, rel=1e-12)
    assert fit.stddev == pytest.approx(stddev, rel=1e-9)
    assert fit.ks_statistic < 0.02
    # NamedTuple: unpacks in (mean, stddev, ks) order
    m, s, ks = fit
    assert (m, s, ks) == (fit.mean, fit.stddev, fit.ks_statistic)


def test_fits_reject_small_or_degenerate_pools():
    small = fit_pool(np.linspace(0.1, 0.2, MIN_FIT_SAMPLES - 1))
    flat = fit_pool(np.full(100, 0.25))
    for fit in (fit_pareto, fit_normal, classify_pool):
        with pytest.raises(TooFewSamplesError):
            fit(small)
        with pytest.raises(DegenerateSamplesError):
            fit(flat)


# -------------------------------------------------------------- classifier


def test_classifier_both_directions():
    rng = np.random.default_rng(34)
    heavy_raw = gpd_samples(rng, shape=1.2, scale=1.0, loc=0.0, n=4000)
    heavy = fit_pool(0.001 + heavy_raw * (1.8 / heavy_raw.max()))
    verdict = classify_pool(heavy)
    assert verdict.label is DistributionLabel.POWER_LAW
    assert verdict.is_power_law
    assert verdict.score > 0

    light = fit_pool(np.clip(rng.normal(1.0, 0.15, size=4000), 0.0, 2.0))
    verdict = classify_pool(light)
    assert verdict.label is DistributionLabel.NON_POWER_LAW
    assert not verdict.is_power_law
    assert verdict.score <= 0


def test_classifier_score_is_min_margin():
    rng = np.random.default_rng(35)
    raw = gpd_samples(rng, shape=0.9, scale=1.0, loc=0.0, n=3000)
    pool = fit_pool(0.001 + raw * (1.6 / raw.max()))
    verdict = classify_pool(pool)
    diag = verdict.diagnostics
    assert verdict.score == pytest.approx(
        min(diag.normal_ks - diag.pareto_ks, diag.skewness - 1.0), abs=1e-15
    )
    assert diag.skewness == pytest.approx(float(stats.skew(pool.values)), abs=1e-12)
    assert diag.pareto_ks == pytest.approx(
        fit_pareto(pool).ks_statistic, abs=1e-12
    )
    assert diag.normal_ks == pytest.approx(fit_normal(pool).ks_statistic, abs=1e-12)
    # the label is exactly "score positive"
    assert verdict.is_power_law == (verdict.score > 0)


def test_classification_dict_round_trip():
    verdict = DistributionClass(
        label=DistributionLabel.POWER_LAW,
        score=0.25,
        diagnostics=Diagnostics(pareto_ks=0.02, normal_ks=0.3, skewness=2.5),
    )
    again = DistributionClass.from_dict(verdict.to_dict())
    assert again == verdict
    assert verdict.to_dict()["label"] == "power-law"


# -------------------------------------------------------------- histograms


def test_histogram_is_a_density():
    rng = np.random.default_rng(36)
    pool = fit_pool(rng.uniform(0.0, 1.5, size=2000))
    edges, densities = histogram(pool, bins=40)
    assert edges.shape == (41,)
    assert densities.shape == (40,)
    assert float(np.sum(densities * np.diff(edges))) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError, match="bins"):
        histogram(pool, bins=1)
    with pytest.raises(TooFewSamplesError):
        histogram(fit_pool(np.array([0.5])), bins=4)


def test_polar_histogram_counts():
    rng = np.random.default_rng(37)
    pool = fit_pool(rng.uniform(0.2, 1.2, size=512))
    edges, counts = polar_histogram(pool, sectors=36)
    assert edges.shape == (37,)
    assert counts.shape == (36,)
    assert int(counts.sum()) == pool.size
    assert edges[0] == 0.0 and edges[-1] == 360.0
    with pytest.raises(ValueError, match="sectors"):
        polar_histogram(pool, sectors=3)
    with pytest.raises(DegenerateSamplesError):
        polar_histogram(fit_pool(np.full(10, 0.4)), sectors=8)
    with pytest.raises(TooFewSamplesError):
        polar_histogram(fit_pool(np.array([0.4])), sectors=8)
