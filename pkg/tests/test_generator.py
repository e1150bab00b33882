"""Generator determinism, count laws, and the pair self-test."""

import json

import numpy as np
import pytest

from svshape.diststats import DistributionLabel
from svshape.errors import UnreadableFileError
from svshape.generator import (
    ConstantCount,
    DEFAULT_MEDIAN_FRACTION,
    DEFAULT_TAIL_INDEX,
    GaussianCount,
    GeneratorConfig,
    ParetoCount,
    count_law_from_dict,
    draw_template,
    expected_label,
    generate_matrix,
    generate_pair_and_validate,
    generate_row,
    generate_template,
    scale_for_median,
)
from svshape.rng import stream


# -------------------------------------------------------------- count laws


def test_constant_count_clamps():
    law = ConstantCount(count=10)
    rng = stream(0, "x")
    assert law.draw(rng, 64) == 10
    assert law.draw(rng, 4) == 4
    assert ConstantCount(count=0).draw(rng, 64) == 0
    with pytest.raises(ValueError):
        ConstantCount(count=-1)


def test_gaussian_count_defaults_and_bounds():
    law = GaussianCount()
    rng = stream(1, "g")
    n = 100
    draws = np.array([law.draw(rng, n) for _ in range(4000)])
    assert draws.min() >= 0 and draws.max() <= n
    # defaults center on n/2 with spread n/10
    assert abs(draws.mean() - 50.0) < 1.0
    assert abs(draws.std() - 10.0) < 1.0
    fixed = GaussianCount(mean=3.0, sigma=0.5)
    small = np.array([fixed.draw(rng, n) for _ in range(1000)])
    assert abs(small.mean() - 3.0) < 0.2
    with pytest.raises(ValueError):
        GaussianCount(sigma=0.0)


def test_scale_for_median_is_the_gpd_median():
    for shape in (0.4, 1.0, 1.78, 3.0):
        median = 5.0
        scale = scale_for_median(median, shape)
        # plug back into the quantile function at u = 1/2
        value = scale / shape * ((1.0 - 0.5) ** (-shape) - 1.0)
        assert value == pytest.approx(median, rel=1e-12)
    with pytest.raises(ValueError):
        scale_for_median(0.0, 1.0)


def test_pareto_count_median_tracks_row_length():
    law = ParetoCount()
    assert law.shape == DEFAULT_TAIL_INDEX
    rng = stream(2, "p")
    n = 256
    draws = np.array([law.draw(rng, n) for _ in range(20000)])
    assert draws.min() >= 0 and draws.max() <= n
    target = n * DEFAULT_MEDIAN_FRACTION
    assert abs(np.median(draws) - target) <= 1.5
    # an explicit scale is honored: big scale pushes the median up
    wide = ParetoCount(scale=50.0)
    wide_draws = np.array([wide.draw(rng, n) for _ in range(4000)])
    assert np.median(wide_draws) > 4 * target
    with pytest.raises(ValueError):
        ParetoCount(shape=0.0)
    with pytest.raises(ValueError):
        ParetoCount(scale=-1.0)


def test_count_law_dict_round_trips():
    laws = [
        ConstantCount(count=5),
        GaussianCount(),
        GaussianCount(mean=4.0, sigma=2.0),
        ParetoCount(),
        ParetoCount(shape=0.9, scale=3.0),
    ]
    for law in laws:
        assert count_law_from_dict(law.to_dict()) == law
    with pytest.raises(ValueError, match="unknown count law"):
        count_law_from_dict({"law": "zipf"})


def test_expected_label():
    assert expected_label(ParetoCount()) is DistributionLabel.POWER_LAW
    assert expected_label(GaussianCount()) is DistributionLabel.NON_POWER_LAW
    assert expected_label(ConstantCount(3)) is DistributionLabel.NON_POWER_LAW


# ------------------------------------------------------------------ config


def test_config_round_trip(tmp_path):
    config = GeneratorConfig(
        row_length=32,
        num_rows=20,
        template_mu=1.0,
        increment_sigma=0.5,
        count_law=ParetoCount(shape=1.2),
        seed=9,
    )
    again = GeneratorConfig.from_dict(config.to_dict())
    assert again == config
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config.to_dict()))
    assert GeneratorConfig.from_json(path) == config


def test_config_validation():
    with pytest.raises(ValueError, match="at least 1"):
        GeneratorConfig(row_length=0)
    with pytest.raises(ValueError, match="positive"):
        GeneratorConfig(template_sigma=0.0)
    with pytest.raises(ValueError, match="unknown generator config keys"):
        GeneratorConfig.from_dict({"rows": 5})
    with pytest.raises(UnreadableFileError):
        GeneratorConfig.from_json("/nonexistent/config.json")


# ----------------------------------------------------------- determinism


def test_matrices_are_reproducible():
    config = GeneratorConfig(seed=5)
    first = generate_matrix(config, matrix_id=0)
    again = generate_matrix(config, matrix_id=0)
    np.testing.assert_array_equal(first, again)
    other_stream = generate_matrix(config, matrix_id=1)
    assert not np.array_equal(first, other_stream)
    other_seed = generate_matrix(GeneratorConfig(seed=6), matrix_id=0)
    assert not np.array_equal(first, other_seed)


def test_pair_shares_one_template():
    config = GeneratorConfig(seed=8, count_law=ConstantCount(count=0))
    result = generate_pair_and_validate(config)
    template = generate_template(config)
    # count 0 leaves every row equal to the shared template
    np.testing.assert_array_equal(result.first, np.tile(template, (64, 1)))
    np.testing.assert_array_equal(result.first, result.second)


def test_row_draw_order_is_pinned():
    # count, then increment values, then positions — replayed by hand
    config = GeneratorConfig(seed=3, count_law=ConstantCount(count=4))
    template = np.zeros(16)
    rng = stream(99, "row")
    row = generate_row(template, config, rng)

    replay = stream(99, "row")
    count = config.count_law.draw(replay, 16)
    deltas = replay.normal(0.0, 1.0, size=count)
    positions = replay.choice(16, size=count, replace=False)
    expected = np.zeros(16)
    expected[positions] += deltas
    np.testing.assert_array_equal(row, expected)


def test_zero_count_burns_no_draws():
    config = GeneratorConfig(seed=3, count_law=ConstantCount(count=0))
    rng_a = stream(5, "r")
    generate_row(np.zeros(8), config, rng_a)
    rng_b = stream(5, "r")
    ConstantCount(count=0).draw(rng_b, 8)
    # both streams must now be in the same state
    assert rng_a.integers(1 << 30) == rng_b.integers(1 << 30)


# -------------------------------------------------------------- templates


def test_template_reproducible_and_seed_sensitive():
    config = GeneratorConfig(seed=11)
    np.testing.assert_array_equal(generate_template(config), generate_template(config))
    assert not np.array_equal(
        generate_template(config), generate_template(GeneratorConfig(seed=12))
    )


def test_correlated_template_smooths():
    config_iid = GeneratorConfig(row_length=512, seed=13)
    config_corr = GeneratorConfig(row_length=512, seed=13, template_correlation=8.0)
    iid = draw_template(stream(13, "t"), 512, config_iid)
    corr = draw_template(stream(13, "t"), 512, config_corr)
    # neighbor increments shrink when the template is correlated
    assert np.std(np.diff(corr)) < 0.5 * np.std(np.diff(iid))
    assert abs(np.std(corr) - 1.0) < 0.3  # marginal spread preserved
    with pytest.raises(ValueError, match="limited"):
        draw_template(stream(0), 4096, GeneratorConfig(template_correlation=2.0))


# ------------------------------------------------------------- pair check


def test_pareto_pair_classifies_power_law():
    result = generate_pair_and_validate(GeneratorConfig(seed=1))
    assert not result.degenerate
    assert result.classification.label is DistributionLabel.POWER_LAW
    assert result.samples.candidates == 64 * 64
    assert result.samples.zeros_removed


def test_gaussian_pair_classifies_non_power_law():
    config = GeneratorConfig(seed=1, count_law=GaussianCount())
    result = generate_pair_and_validate(config)
    assert not result.degenerate
    assert result.classification.label is DistributionLabel.NON_POWER_LAW


def test_degenerate_pair_is_flagged():
    config = GeneratorConfig(seed=2, count_law=ConstantCount(count=0))
    result = generate_pair_and_validate(config)
    assert result.degenerate
    assert result.classification is None
    assert result.failure is not None
    assert result.samples.size == 0
    assert result.samples.candidates == 64 * 64
