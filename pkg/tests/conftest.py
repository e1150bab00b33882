"""Shared fixture builders.

The structured-spectra builders synthesize per-kind spectrum stacks with a
known group layout: kinds in the same group share a block-staircase template
(pairwise cosine between different groups' templates is far from 1), and
each layer's spectrum deviates from its template by a heavy-tailed relative
amount drawn from stratified generalized-Pareto quantiles.  Within-group
distance pools are then heavy-tailed by construction while cross-group pools
are not, so the expected grouping is known in advance.
"""

from __future__ import annotations

import numpy as np
import pytest

from svshape.checkpoint import KINDS, ModelWeights, ProjectionKind, ProjectionMatrix
from svshape.rng import stream
from svshape.spectral import SpectrumStack
from svshape import tensorio

#: Deviation-scale quantile law: tail index and median of the relative
#: perturbation applied to a group template.
_DEVIATION_SHAPE = 1.78
_DEVIATION_MEDIAN = 0.003
_DEVIATION_CAP = 0.3

#: Group layouts used across tests: list of (reference, members) pairs in
#: the order a canonical greedy walk would discover them.
LAYOUTS = {
    "one-group": [("q", ["k", "v", "o", "gate", "up", "down"])],
    "two-group": [("q", ["k", "gate"]), ("v", ["o", "up", "down"])],
    "three-group": [("q", ["gate"]), ("k", ["o"]), ("v", ["up", "down"])],
    "singletons": [(kind.value, []) for kind in KINDS],
}


def layout_assignment(layout) -> dict:
    """Map each kind to its group index for a layout."""
    assignment = {}
    for index, (reference, members) in enumerate(layout):
        for kind in [reference] + list(members):
            assignment[ProjectionKind.coerce(kind)] = index
    return assignment


def layout_partition(layout) -> set:
    """The layout as a set of frozensets of kind values."""
    return {
        frozenset([reference] + list(members)) for reference, members in layout
    }


def table_partition(table) -> set:
    return {
        frozenset(kind.value for kind in group.kinds()) for group in table.groups
    }


def _gpd_quantile(u: np.ndarray, shape: float, median: float) -> np.ndarray:
    scale = median * shape / (2.0**shape - 1.0)
    return scale / shape * ((1.0 - u) ** (-shape) - 1.0)


def block_template(group_index: int, n_groups: int, rank: int) -> np.ndarray:
    """Staircase template for one group: a wide plateau over a tiny floor.

    Plateau widths are powers of two per group, so templates of different
    groups have cosine at most sqrt(1/2) — far from parallel.  That needs
    rank >= 2**(n_groups - 1) to keep the widths distinct.
    """
    if rank < (1 << (n_groups - 1)):
        raise ValueError(
            f"rank {rank} cannot give {n_groups} groups distinct plateau widths"
        )
    width = max(1, rank >> (n_groups - 1 - group_index))
    template = np.full(rank, 0.01)
    template[:width] = 5.0 * (1.0 - 0.001 * np.arange(width))
    return template


def structured_stack(seed: int, kind, group_index: int, n_groups: int,
                     num_layers: int = 16, rank: int = 16) -> SpectrumStack:
    """One kind's stack: template rows with stratified heavy-tailed deviations.

    The deviation scales take one value per stratified layer quantile, so
    every stack is guaranteed a mix of near-duplicate and far-tail rows.
    """
    kind = ProjectionKind.coerce(kind)
    template = block_template(group_index, n_groups, rank)
    rng = stream(seed, "fixture", kind.value)
    quantiles = rng.permutation((np.arange(num_layers) + 0.5) / num_layers)
    scales = np.minimum(
        _gpd_quantile(quantiles, _DEVIATION_SHAPE, _DEVIATION_MEDIAN),
        _DEVIATION_CAP,
    )
    rows = []
    for layer in range(num_layers):
        direction = rng.normal(0.0, 1.0, rank)
        direction *= np.linalg.norm(template) / np.linalg.norm(direction)
        rows.append(np.sort(np.abs(template + scales[layer] * direction))[::-1])
    return SpectrumStack.from_matrix(kind, np.stack(rows))


def structured_stacks(seed: int, layout, num_layers: int = 16, rank: int = 16) -> dict:
    """Stacks for all kinds in a layout, keyed by kind."""
    assignment = layout_assignment(layout)
    n_groups = len(layout)
    return {
        kind: structured_stack(seed, kind, assignment[kind], n_groups,
                               num_layers, rank)
        for kind in KINDS
        if kind in assignment
    }


#: Small per-kind (out_features, in_features) used for synthetic checkpoints.
CHECKPOINT_DIMS = {
    ProjectionKind.Q: (48, 64),
    ProjectionKind.K: (24, 64),
    ProjectionKind.V: (24, 64),
    ProjectionKind.O: (64, 48),
    ProjectionKind.GATE: (96, 64),
    ProjectionKind.UP: (96, 64),
    ProjectionKind.DOWN: (64, 96),
}


def matrix_with_spectrum(spectrum: np.ndarray, out_dim: int, in_dim: int,
                         rng: np.random.Generator) -> np.ndarray:
    """A matrix whose leading singular values equal ``spectrum`` exactly.

    Builds U diag(s) V^T from Haar-ish orthonormal factors, padding the
    spectrum with a strictly smaller decaying tail.
    """
    k = min(out_dim, in_dim)
    rank = spectrum.size
    floor = float(spectrum.min())
    tail = floor * np.geomspace(0.5, 0.01, k - rank) if k > rank else np.empty(0)
    values = np.concatenate([spectrum, tail])
    u, _ = np.linalg.qr(rng.standard_normal((out_dim, k)))
    v, _ = np.linalg.qr(rng.standard_normal((in_dim, k)))
    return (u * values) @ v.T


def build_model(seed: int, layout, num_layers: int = 16, rank: int = 16,
                dims: dict | None = None) -> ModelWeights:
    """A ModelWeights whose extracted spectra follow a structured layout."""
    dims = dims or CHECKPOINT_DIMS
    stacks = structured_stacks(seed, layout, num_layers, rank)
    rng = stream(seed, "fixture", "embed")
    matrices = []
    for kind, stack in stacks.items():
        out_dim, in_dim = dims[kind]
        for layer in range(num_layers):
            weights = matrix_with_spectrum(
                stack.spectra[layer].values, out_dim, in_dim, rng
            )
            matrices.append(ProjectionMatrix(weights, layer, kind))
    return ModelWeights.from_matrices(f"fixture-{seed}", matrices)


def write_checkpoint(model: ModelWeights, path, shards: int = 1) -> None:
    """Write a model under the default tensor naming, optionally sharded."""
    named = {
        f"model.layers.{layer}.{kind.block}.{kind.value}_proj.weight":
            model.matrix(layer, kind).values.astype(np.float32)
        for layer in range(model.num_layers)
        for kind in KINDS
    }
    if shards == 1:
        tensorio.emit_tensors(named, path)
        return
    path.mkdir(parents=True, exist_ok=True)
    names = sorted(named)
    per = -(-len(names) // shards)
    for index in range(shards):
        chunk = names[index * per : (index + 1) * per]
        if chunk:
            tensorio.emit_tensors(
                {name: named[name] for name in chunk},
                path / f"shard-{index:02d}.safetensors",
            )


@pytest.fixture(scope="session")
def two_group_model() -> ModelWeights:
    """Session-wide structured model with the two-group layout."""
    return build_model(seed=7, layout=LAYOUTS["two-group"])


@pytest.fixture(scope="session")
def checkpoint_file(two_group_model, tmp_path_factory):
    """The two-group model written as a single checkpoint file."""
    path = tmp_path_factory.mktemp("ckpt") / "fixture-7.safetensors"
    write_checkpoint(two_group_model, path)
    return path
