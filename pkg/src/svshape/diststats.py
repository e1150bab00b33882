"""Distance pools over spectra, tail fits, and the shape classifier.

Spectra are compared by cosine distance (1 − cosine similarity).  Distances
from a family of spectrum pairs form a :class:`DistancePool`; pools are fit
against a generalized Pareto and a Gaussian, and a pool is classified as
power-law when the Pareto fit wins the KS comparison and the sample skewness
is above 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import (
    DegenerateSamplesError,
    LengthMismatchError,
    NonFiniteError,
    RankMismatchError,
    TooFewSamplesError,
    ZeroNormError,
)
from .spectral import SpectrumStack

#: Fits and classification refuse pools smaller than this.
MIN_FIT_SAMPLES = 50

#: Sample skewness a pool must exceed to count as heavy-tailed.
SKEWNESS_THRESHOLD = 1.0


def cosine_distance(x, y) -> float:
    """Return 1 − cosine similarity of two vectors.

    Identical vectors give exactly ``0.0`` (the numerator and denominator
    reduce to the same float), which is what downstream duplicate removal
    keys on.  Values that round slightly outside [0, 2] are clamped to the
    boundary, so a clamped near-parallel pair also counts as a duplicate.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("cosine distance is defined for 1-D vectors")
    if x.size != y.size:
        raise LengthMismatchError(f"vector lengths differ: {x.size} != {y.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise NonFiniteError("vectors contain non-finite values")
    peak_x = float(np.abs(x).max())
    peak_y = float(np.abs(y).max())
    if peak_x == 0.0 or peak_y == 0.0:
        raise ZeroNormError("cosine distance is undefined for zero vectors")
    xx = float(np.dot(x, x))
    yy = float(np.dot(y, y))
    # Extreme magnitudes can over- or underflow the squared norms; cosine is
    # scale-invariant, so renormalize by the peak entry and recompute.
    if not 0.0 < xx < math.inf:
        x = x / peak_x
        xx = float(np.dot(x, x))
    if not 0.0 < yy < math.inf:
        y = y / peak_y
        yy = float(np.dot(y, y))
    denom_sq = xx * yy
    if math.isfinite(denom_sq) and denom_sq > 0.0:
        distance = 1.0 - float(np.dot(x, y)) / math.sqrt(denom_sq)
    else:
        distance = 1.0 - float(np.dot(x / math.sqrt(xx), y / math.sqrt(yy)))
    return min(max(distance, 0.0), 2.0)


@dataclass(frozen=True)
class DistancePool:
    """A pool of spectrum distances plus the bookkeeping behind it.

    ``candidates`` counts the pairs examined; ``values`` holds one distance
    per retained pair; ``zeros_removed`` records whether exact-zero
    distances (duplicate spectra) were dropped.
    """

    values: np.ndarray
    source: str
    candidates: int
    zeros_removed: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("pool values must be 1-D")
        if values.size and (
            not np.isfinite(values).all()
            or float(values.min()) < 0.0
            or float(values.max()) > 2.0
        ):
            raise ValueError("distances must be finite and within [0, 2]")
        if self.candidates < values.size:
            raise ValueError(
                f"candidate count {self.candidates} below retained count {values.size}"
            )
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.values.size)


def pairwise_distances(a: SpectrumStack, b: SpectrumStack) -> DistancePool:
    """Distances between the rows of two stacks.

    For different kinds, every ordered (row of ``a``, row of ``b``)
    combination is compared.  For the same kind only the strict upper
    triangle is used, so self-distances and mirrored duplicates never enter
    the pool.
    """
    if a.rank != b.rank:
        raise RankMismatchError(
            f"ranks differ: {a.kind} has r={a.rank}, {b.kind} has r={b.rank}"
        )
    rows_a = a.matrix()
    rows_b = b.matrix()
    if a.kind == b.kind:
        values = [
            cosine_distance(rows_a[i], rows_b[j])
            for i in range(a.num_layers)
            for j in range(i + 1, b.num_layers)
        ]
    else:
        values = [cosine_distance(ra, rb) for ra in rows_a for rb in rows_b]
    return DistancePool(
        np.asarray(values, dtype=np.float64),
        source=f"{a.kind}-{b.kind}",
        candidates=len(values),
    )


def all_pairs_distances(stacks) -> DistancePool:
    """One pooled distance set over every spectrum of every stack.

    All C(N, 2) unordered pairs are examined, where N is the total number of
    spectra across stacks; exact-zero distances are then dropped.
    """
    stacks = list(stacks.values()) if isinstance(stacks, dict) else list(stacks)
    if not stacks:
        raise ValueError("no stacks given")
    ranks = {s.rank for s in stacks}
    if len(ranks) > 1:
        raise RankMismatchError(f"stacks have mixed ranks {sorted(ranks)}")
    rows = np.concatenate([s.matrix() for s in stacks], axis=0)
    total = rows.shape[0]
    values = [
        cosine_distance(rows[i], rows[j])
        for i in range(total)
        for j in range(i + 1, total)
    ]
    pool = DistancePool(
        np.asarray(values, dtype=np.float64),
        source="all-pairs",
        candidates=len(values),
    )
    return remove_zeros(pool)


def remove_zeros(pool: DistancePool, tolerance: float = 0.0) -> DistancePool:
    """Drop zero distances (duplicate vectors) from a pool.

    With the default tolerance only exact zeros are dropped: identical
    float64 vectors give a distance of exactly 0.0.  A positive tolerance
    also drops rounding-level residues, for vectors that were identical
    before a lossy step (for example a float32 cast after a rescale)
    re-introduced noise at the machine-epsilon scale.
    """
    if tolerance < 0.0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    kept = pool.values[pool.values > tolerance]
    return DistancePool(kept, pool.source, pool.candidates, zeros_removed=True)


def _require_samples(pool: DistancePool, what: str) -> np.ndarray:
    if pool.size < MIN_FIT_SAMPLES:
        raise TooFewSamplesError(
            f"{what} needs at least {MIN_FIT_SAMPLES} samples, got {pool.size} "
            f"(source: {pool.source})"
        )
    values = pool.values
    if float(values.min()) == float(values.max()):
        raise DegenerateSamplesError(
            f"all {pool.size} distances are identical; {what} is undefined"
        )
    return values


@dataclass(frozen=True)
class ParetoFit:
    """Generalized Pareto fit with location pinned at the sample minimum."""

    shape: float
    loc: float
    scale: float
    ks_statistic: float

    @property
    def tail_index(self) -> float:
        return self.shape

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "loc": self.loc,
            "scale": self.scale,
            "ks_statistic": self.ks_statistic,
        }


class NormalFit(NamedTuple):
    """Gaussian fit (mean, ddof=1 stddev) with its KS statistic."""

    mean: float
    stddev: float
    ks_statistic: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stddev": self.stddev,
            "ks_statistic": self.ks_statistic,
        }


def _profile_pareto_mle(excess: np.ndarray) -> tuple:
    """Pure-numpy GPD fit used when the scipy fit fails to converge.

    Profiles the likelihood over the tilt theta = shape/scale: for fixed
    theta the optimal shape is mean(log1p(theta * x)) and the log-likelihood
    is -n * (log(shape/theta) + shape + 1).  The grid is walked in ascending
    shape order and only strict improvements are kept, so likelihood ties
    resolve toward the smaller shape.
    """
    n = excess.size
    positive = excess[excess > 0]
    lo = 1e-8 / float(positive.mean())
    hi = 1e8 / float(positive.max())
    best_ll, best = -np.inf, None
    for theta in np.geomspace(lo, hi, 2001):
        shape = float(np.mean(np.log1p(theta * excess)))
        if shape <= 0:
            continue
        loglik = -n * (math.log(shape / theta) + shape + 1.0)
        if loglik > best_ll + 1e-12:
            best_ll, best = loglik, (shape, shape / theta)
    return best


def fit_pareto(pool: DistancePool) -> ParetoFit:
    """Fit a generalized Pareto to a pool, location pinned at the minimum.

    The shape parameter is the pool's tail index.  Uses the scipy MLE and
    falls back to a profile-likelihood grid if that returns non-finite
    parameters.
    """
    values = _require_samples(pool, "a Pareto fit")
    loc = float(values.min())
    shape = scale = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            c, _, s = stats.genpareto.fit(values, floc=loc)
            if np.isfinite(c) and np.isfinite(s) and s > 0:
                shape, scale = float(c), float(s)
        except Exception:
            pass
    if shape is None:
        shape, scale = _profile_pareto_mle(values - loc)
    ks = float(
        stats.kstest(values, stats.genpareto(shape, loc=loc, scale=scale).cdf).statistic
    )
    return ParetoFit(shape=shape, loc=loc, scale=scale, ks_statistic=ks)


def fit_normal(pool: DistancePool) -> NormalFit:
    """Fit a Gaussian to a pool and report its KS statistic."""
    values = _require_samples(pool, "a normal fit")
    mean = float(values.mean())
    stddev = float(values.std(ddof=1))
    ks = float(stats.kstest(values, stats.norm(loc=mean, scale=stddev).cdf).statistic)
    return NormalFit(mean, stddev, ks)


class DistributionLabel(Enum):
    POWER_LAW = "power-law"
    NON_POWER_LAW = "non-power-law"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Diagnostics:
    """The three numbers the classifier decides on."""

    pareto_ks: float
    normal_ks: float
    skewness: float

    def to_dict(self) -> dict:
        return {
            "pareto_ks": self.pareto_ks,
            "normal_ks": self.normal_ks,
            "skewness": self.skewness,
        }


@dataclass(frozen=True)
class DistributionClass:
    """A pool's label plus the evidence behind it.

    ``score`` is the smaller of the two decision margins
    (``normal_ks - pareto_ks`` and ``skewness - 1``); it is positive exactly
    when the label is power-law, and its magnitude says how clear the call
    was.
    """

    label: DistributionLabel
    score: float
    diagnostics: Diagnostics

    @property
    def is_power_law(self) -> bool:
        return self.label is DistributionLabel.POWER_LAW

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "score": self.score,
            "diagnostics": self.diagnostics.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionClass":
        diag = data["diagnostics"]
        return cls(
            label=DistributionLabel(data["label"]),
            score=float(data["score"]),
            diagnostics=Diagnostics(
                pareto_ks=float(diag["pareto_ks"]),
                normal_ks=float(diag["normal_ks"]),
                skewness=float(diag["skewness"]),
            ),
        )


def classify_pool(pool: DistancePool) -> DistributionClass:
    """Label a pool power-law or not.

    Power-law requires both: the Pareto fit beats the Gaussian fit in KS
    distance, and the sample skewness exceeds :data:`SKEWNESS_THRESHOLD`.
    """
    pareto = fit_pareto(pool)
    normal = fit_normal(pool)
    skewness = float(stats.skew(pool.values))
    ks_margin = normal.ks_statistic - pareto.ks_statistic
    skew_margin = skewness - SKEWNESS_THRESHOLD
    score = min(ks_margin, skew_margin)
    label = (
        DistributionLabel.POWER_LAW if score > 0 else DistributionLabel.NON_POWER_LAW
    )
    return DistributionClass(
        label=label,
        score=float(score),
        diagnostics=Diagnostics(
            pareto_ks=pareto.ks_statistic,
            normal_ks=normal.ks_statistic,
            skewness=skewness,
        ),
    )


def histogram(pool: DistancePool, bins: int = 60):
    """Density histogram of a pool; returns (bin_edges, densities)."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if pool.size < 2:
        raise TooFewSamplesError("a histogram needs at least 2 values")
    densities, edges = np.histogram(pool.values, bins=bins, density=True)
    return edges, densities


def polar_histogram(pool: DistancePool, sectors: int = 36):
    """Sector counts for a polar rendering of a pool.

    Distances are mapped affinely from [min, max] onto [0, 360) degrees and
    counted per sector; returns (sector_edges_deg, counts).
    """
    if sectors < 4:
        raise ValueError("need at least 4 sectors")
    if pool.size < 2:
        raise TooFewSamplesError("a polar histogram needs at least 2 values")
    lo = float(pool.values.min())
    hi = float(pool.values.max())
    if lo == hi:
        raise DegenerateSamplesError(
            "cannot spread identical distances around a circle"
        )
    angles = (pool.values - lo) / (hi - lo) * 360.0
    edges = np.linspace(0.0, 360.0, sectors + 1)
    counts, _ = np.histogram(angles, bins=edges)
    return edges, counts
