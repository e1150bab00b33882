"""Stochastic generator for spectrum matrices with a controlled shape.

Rows are built as "shared Gaussian template + sparse increments": each row
copies the template and perturbs it at k random positions, where k comes
from a pluggable count law.  A heavy-tailed count law (ParetoCount) makes
most rows nearly identical and a few rows very different, which is exactly
what produces a power-law pool of pairwise cosine distances; light-tailed
count laws (constant, Gaussian) do not.  Generating a pair of matrices from
one template and classifying their cross pool is therefore a self-test of
the whole pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diststats import (
    DistancePool,
    DistributionClass,
    DistributionLabel,
    classify_pool,
    cosine_distance,
    remove_zeros,
)
from .errors import DegenerateSamplesError, TooFewSamplesError, UnreadableFileError
from .rng import stream

#: Default Pareto shape for the count law (tail index of the reference
#: model's pooled distances).
DEFAULT_TAIL_INDEX = 1.78

#: With a derived scale, the median perturbation count is this fraction of
#: the row length.  Small enough that typical rows stay near the template.
DEFAULT_MEDIAN_FRACTION = 1.0 / 64.0

#: Correlated templates need an O(n^3) Cholesky; refuse absurd lengths.
_MAX_CORRELATED_LENGTH = 2048


def scale_for_median(median: float, shape: float) -> float:
    """Pareto scale that puts the distribution's median at ``median``."""
    if median <= 0 or shape <= 0:
        raise ValueError("median and shape must be positive")
    return median * shape / (2.0**shape - 1.0)


@dataclass(frozen=True)
class ConstantCount:
    """Every row perturbs exactly ``count`` positions (clamped to the row)."""

    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")

    def draw(self, rng: np.random.Generator, n: int) -> int:
        return min(self.count, n)

    def to_dict(self) -> dict:
        return {"law": "constant", "count": self.count}


@dataclass(frozen=True)
class GaussianCount:
    """Gaussian-many perturbed positions, rounded and clamped to [0, n].

    With ``mean``/``sigma`` left as None they default per draw to n/2 and
    n/10: almost every row differs from the template in about half its
    positions, so no row is "special" and the distance pool stays
    light-tailed.
    """

    mean: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> int:
        mean = 0.5 * n if self.mean is None else self.mean
        sigma = 0.1 * n if self.sigma is None else self.sigma
        return int(np.clip(round(rng.normal(mean, sigma)), 0, n))

    def to_dict(self) -> dict:
        return {"law": "gaussian", "mean": self.mean, "sigma": self.sigma}


@dataclass(frozen=True)
class ParetoCount:
    """Heavy-tailed count of perturbed positions.

    Draws the generalized Pareto quantile
    ``scale/shape * ((1-u)^(-shape) - 1)``, rounds, and clamps to [0, n].
    With ``scale=None`` the scale is derived per draw so the median count is
    ``n * DEFAULT_MEDIAN_FRACTION``: most rows get a handful of perturbed
    positions while occasional rows get many, which is what makes the
    resulting distance pools heavy-tailed.
    """

    shape: float = DEFAULT_TAIL_INDEX
    scale: float | None = None

    def __post_init__(self):
        if self.shape <= 0:
            raise ValueError("shape must be positive")
        if self.scale is not None and self.scale <= 0:
            raise ValueError("scale must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> int:
        scale = self.scale
        if scale is None:
            scale = scale_for_median(n * DEFAULT_MEDIAN_FRACTION, self.shape)
        u = rng.uniform()
        x = scale / self.shape * ((1.0 - u) ** (-self.shape) - 1.0)
        return int(np.clip(round(x), 0, n))

    def to_dict(self) -> dict:
        return {"law": "pareto", "shape": self.shape, "scale": self.scale}


def count_law_from_dict(data: dict):
    """Inverse of each count law's ``to_dict``."""
    data = dict(data)
    law = data.pop("law", None)
    if law == "constant":
        return ConstantCount(count=int(data["count"]))
    if law == "gaussian":
        mean = data.get("mean")
        sigma = data.get("sigma")
        return GaussianCount(
            mean=None if mean is None else float(mean),
            sigma=None if sigma is None else float(sigma),
        )
    if law == "pareto":
        scale = data.get("scale")
        return ParetoCount(
            shape=float(data.get("shape", DEFAULT_TAIL_INDEX)),
            scale=None if scale is None else float(scale),
        )
    raise ValueError(f"unknown count law {law!r}")


def expected_label(count_law) -> DistributionLabel:
    """The pool label a correctly functioning generator should produce."""
    if isinstance(count_law, ParetoCount):
        return DistributionLabel.POWER_LAW
    return DistributionLabel.NON_POWER_LAW


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything that determines a generated spectrum matrix.

    A matrix is ``num_rows`` rows of length ``row_length``.  One template
    row is drawn from N(template_mu, template_sigma²) — optionally with a
    squared-exponential correlation along the row — and each output row
    perturbs the template with N(increment_mu, increment_sigma²) increments
    at count-law-many distinct random positions.
    """

    row_length: int = 64
    num_rows: int = 64
    template_mu: float = 0.0
    template_sigma: float = 1.0
    increment_mu: float = 0.0
    increment_sigma: float = 1.0
    count_law: object = field(default_factory=ParetoCount)
    template_correlation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.row_length < 1 or self.num_rows < 1:
            raise ValueError("row_length and num_rows must be at least 1")
        if self.template_sigma <= 0 or self.increment_sigma <= 0:
            raise ValueError("template_sigma and increment_sigma must be positive")
        if self.template_correlation < 0:
            raise ValueError("template_correlation must be non-negative")

    def to_dict(self) -> dict:
        return {
            "row_length": self.row_length,
            "num_rows": self.num_rows,
            "template_mu": self.template_mu,
            "template_sigma": self.template_sigma,
            "increment_mu": self.increment_mu,
            "increment_sigma": self.increment_sigma,
            "count_law": self.count_law.to_dict(),
            "template_correlation": self.template_correlation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        data = dict(data)
        law = data.pop("count_law", None)
        known = {
            "row_length": int,
            "num_rows": int,
            "template_mu": float,
            "template_sigma": float,
            "increment_mu": float,
            "increment_sigma": float,
            "template_correlation": float,
            "seed": int,
        }
        kwargs = {}
        for key, cast in known.items():
            if key in data:
                kwargs[key] = cast(data.pop(key))
        if data:
            raise ValueError(f"unknown generator config keys {sorted(data)}")
        if law is not None:
            kwargs["count_law"] = count_law_from_dict(law)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UnreadableFileError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UnreadableFileError(f"malformed config {path}: {exc}") from exc
        return cls.from_dict(data)


def draw_template(
    rng: np.random.Generator, length: int, config: GeneratorConfig
) -> np.ndarray:
    """Draw one template row of the given length from ``rng``.

    Uses the config's template mean/spread; a positive
    ``template_correlation`` applies a squared-exponential correlation of
    that length scale (in index units) along the row.
    """
    if config.template_correlation <= 0:
        return rng.normal(config.template_mu, config.template_sigma, size=length)
    if length > _MAX_CORRELATED_LENGTH:
        raise ValueError(
            f"correlated templates are limited to length {_MAX_CORRELATED_LENGTH}"
        )
    index = np.arange(length, dtype=np.float64)
    gap = index[:, None] - index[None, :]
    cov = config.template_sigma**2 * np.exp(
        -0.5 * (gap / config.template_correlation) ** 2
    )
    cov[np.diag_indices(length)] += 1e-10 * config.template_sigma**2
    chol = np.linalg.cholesky(cov)
    return config.template_mu + chol @ rng.standard_normal(length)


def generate_template(config: GeneratorConfig) -> np.ndarray:
    """Draw the template row for a config (stream key: seed, "template")."""
    return draw_template(stream(config.seed, "template"), config.row_length, config)


def generate_row(
    template: np.ndarray, config: GeneratorConfig, rng: np.random.Generator
) -> np.ndarray:
    """One row: the template perturbed at count-law-many random positions.

    The draw order from ``rng`` is fixed — count, then increment values,
    then positions — so rows are reproducible from their stream alone.
    """
    n = template.size
    count = config.count_law.draw(rng, n)
    row = template.copy()
    if count:
        deltas = rng.normal(config.increment_mu, config.increment_sigma, size=count)
        positions = rng.choice(n, size=count, replace=False)
        row[positions] += deltas
    return row


def generate_matrix(
    config: GeneratorConfig, matrix_id: int = 0, template: np.ndarray | None = None
) -> np.ndarray:
    """Generate one (num_rows, row_length) matrix of perturbed template rows.

    All matrices of a config share the template; ``matrix_id`` selects the
    per-matrix stream for the row perturbations.
    """
    if template is None:
        template = generate_template(config)
    rng = stream(config.seed, "matrix", matrix_id)
    return np.stack(
        [generate_row(template, config, rng) for _ in range(config.num_rows)]
    )


def matrix_pair_pool(a: np.ndarray, b: np.ndarray) -> DistancePool:
    """Distances between every row of ``a`` and every row of ``b``.

    Exact-zero distances (rows that stayed identical to the template on
    both sides) are removed, mirroring how duplicate spectra are handled.
    """
    values = [cosine_distance(row_a, row_b) for row_a in a for row_b in b]
    pool = DistancePool(
        np.asarray(values, dtype=np.float64),
        source="matrix-pair",
        candidates=len(values),
    )
    return remove_zeros(pool)


@dataclass(frozen=True)
class PairValidation:
    """A generated matrix pair plus the classification of its cross pool."""

    first: np.ndarray
    second: np.ndarray
    samples: DistancePool
    classification: DistributionClass | None
    failure: str | None = None

    @property
    def degenerate(self) -> bool:
        return self.classification is None


def generate_pair_and_validate(config: GeneratorConfig) -> PairValidation:
    """Generate two matrices from one template and classify their cross pool.

    Pools too small or too uniform to classify (for example a constant count
    of zero, which leaves both matrices equal to the template) come back
    with ``classification=None`` and the reason in ``failure``.
    """
    template = generate_template(config)
    first = generate_matrix(config, matrix_id=0, template=template)
    second = generate_matrix(config, matrix_id=1, template=template)
    pool = matrix_pair_pool(first, second)
    try:
        verdict: DistributionClass | None = classify_pool(pool)
        failure = None
    except (TooFewSamplesError, DegenerateSamplesError) as exc:
        verdict, failure = None, str(exc)
    return PairValidation(first, second, pool, verdict, failure)
