"""Top-r singular-value extraction and per-kind spectrum stacks.

The shape signature of a projection matrix is its vector of leading singular
values.  This module extracts those vectors (exactly, or via a randomized
range finder for very large matrices) and stacks them per projection kind,
layer 0 first, for the distance statistics downstream.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .checkpoint import KINDS, ModelWeights, ProjectionKind, ProjectionMatrix
from .errors import IoFailureError, NonFiniteError, RankMismatchError, RankTooLargeError

#: Default number of leading singular values to keep.
DEFAULT_RANK = 16

#: Under method="auto", matrices with min(shape) at most this use exact SVD.
_AUTO_FULL_LIMIT = 1024


def singular_values(matrix: np.ndarray, rank: int, method: str = "full") -> np.ndarray:
    """Return the ``rank`` largest singular values of ``matrix``, descending.

    ``method`` is ``"full"`` (exact LAPACK SVD), ``"randomized"`` (Gaussian
    range finder with power iterations, refined until the leading values
    stabilize and falling back to the exact path if they do not), or
    ``"auto"`` (exact for small matrices, randomized for large ones).
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or min(a.shape) < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteError("matrix contains NaN or infinite values")
    if not 1 <= rank <= min(a.shape):
        raise RankTooLargeError(
            f"rank {rank} outside [1, {min(a.shape)}] for shape {a.shape}"
        )
    if method == "auto":
        method = "full" if min(a.shape) <= _AUTO_FULL_LIMIT else "randomized"
    if method == "full":
        return np.linalg.svd(a, compute_uv=False)[:rank]
    if method == "randomized":
        return _randomized_singular_values(a, rank)
    raise ValueError(f"unknown method {method!r}")


def _randomized_singular_values(
    a: np.ndarray, rank: int, oversample: int = 10, max_rounds: int = 60, rtol: float = 1e-10
) -> np.ndarray:
    """Range-finder estimate of the top singular values.

    Power iterations are repeated until consecutive estimates of the leading
    ``rank`` values agree to ``rtol`` relative; if the spectrum is too flat
    to converge, the exact SVD is used instead.
    """
    if a.shape[1] > a.shape[0]:
        a = a.T  # same singular values, cheaper tall orientation
    m, n = a.shape
    k = min(n, rank + oversample)
    # Fixed draw: the result is a function of the matrix alone.
    rng = np.random.default_rng(0x53565348)
    basis, _ = np.linalg.qr(a @ rng.standard_normal((n, k)))
    previous = None
    for _ in range(max_rounds):
        values = np.linalg.svd(basis.T @ a, compute_uv=False)[:rank]
        if previous is not None and np.all(
            np.abs(values - previous)
            <= rtol * np.maximum(values, np.finfo(np.float64).tiny)
        ):
            return values
        previous = values
        basis, _ = np.linalg.qr(a @ (a.T @ basis))
    warnings.warn(
        "randomized SVD did not stabilize; falling back to exact SVD",
        RuntimeWarning,
    )
    return np.linalg.svd(a, compute_uv=False)[:rank]


@dataclass(frozen=True)
class Spectrum:
    """Top-r singular values of one projection matrix, descending."""

    values: np.ndarray
    layer_index: int
    kind: ProjectionKind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError(
                f"spectrum must be a non-empty 1-D vector, got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise NonFiniteError("spectrum contains non-finite values")
        if (values < 0).any() or (np.diff(values) > 0).any():
            raise ValueError("singular values must be non-negative and non-increasing")
        object.__setattr__(self, "values", values)

    @property
    def rank(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SpectrumStack:
    """Spectra of one projection kind stacked across layers, layer 0 first."""

    kind: ProjectionKind
    spectra: tuple

    def __post_init__(self):
        spectra = tuple(self.spectra)
        if not spectra:
            raise ValueError("a spectrum stack needs at least one layer")
        ranks = {s.rank for s in spectra}
        if len(ranks) > 1:
            raise RankMismatchError(
                f"{self.kind}: mixed ranks {sorted(ranks)} in one stack"
            )
        for row, spectrum in enumerate(spectra):
            if spectrum.kind != self.kind:
                raise ValueError(
                    f"row {row} is a {spectrum.kind} spectrum in a {self.kind} stack"
                )
            if spectrum.layer_index != row:
                raise ValueError(
                    f"rows must be layers 0..L-1 in order; row {row} has "
                    f"layer index {spectrum.layer_index}"
                )
        object.__setattr__(self, "spectra", spectra)

    @classmethod
    def from_matrix(cls, kind, values) -> "SpectrumStack":
        """Build a stack from a (num_layers, rank) array."""
        kind = ProjectionKind.coerce(kind)
        array = np.asarray(values, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {array.shape}")
        return cls(
            kind, tuple(Spectrum(row, layer, kind) for layer, row in enumerate(array))
        )

    @property
    def rank(self) -> int:
        return self.spectra[0].rank

    @property
    def num_layers(self) -> int:
        return len(self.spectra)

    def matrix(self) -> np.ndarray:
        """Return the stack as a (num_layers, rank) array."""
        return np.stack([s.values for s in self.spectra])


def top_r_spectrum(
    matrix: ProjectionMatrix,
    rank: int = DEFAULT_RANK,
    method: str = "auto",
    clamp_rank: bool = False,
) -> Spectrum:
    """Extract the leading singular values of one projection matrix.

    With ``clamp_rank``, a rank above ``min(matrix.shape)`` is reduced to it
    (with a warning) instead of raising.
    """
    limit = min(matrix.shape)
    if clamp_rank and rank > limit:
        warnings.warn(
            f"rank {rank} clamped to {limit} for {matrix.kind} layer "
            f"{matrix.layer_index}",
            RuntimeWarning,
        )
        rank = limit
    values = singular_values(matrix.values, rank, method=method)
    return Spectrum(values, matrix.layer_index, matrix.kind)


def build_stack(
    model: ModelWeights,
    kind,
    rank: int = DEFAULT_RANK,
    method: str = "auto",
    clamp_rank: bool = False,
) -> SpectrumStack:
    """Stack the spectra of one projection kind across all layers."""
    kind = ProjectionKind.coerce(kind)
    return SpectrumStack(
        kind,
        tuple(
            top_r_spectrum(model.matrix(layer, kind), rank, method, clamp_rank)
            for layer in range(model.num_layers)
        ),
    )


def build_all_stacks(
    model: ModelWeights,
    rank: int = DEFAULT_RANK,
    method: str = "auto",
    clamp_rank: bool = False,
) -> dict:
    """Build one stack per projection kind, in canonical kind order."""
    return {
        kind: build_stack(model, kind, rank, method, clamp_rank) for kind in KINDS
    }


def write_stack_csv(stack: SpectrumStack, path) -> None:
    """Write a stack as CSV (columns: layer, sv_1 .. sv_r; full precision)."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer"] + [f"sv_{i + 1}" for i in range(stack.rank)])
            for spectrum in stack.spectra:
                writer.writerow(
                    [spectrum.layer_index] + [repr(float(x)) for x in spectrum.values]
                )
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
