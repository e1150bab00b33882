"""Shape-matched LoRA initialization driven by a group table.

Standard LoRA inits draw every adapter row independently, so the rows of
different tensors share no structure.  Here, each group in a
:class:`~svshape.grouping.GroupTable` gets one template row per LoRA role,
and every member tensor's rows perturb that shared template.  Tensors in a
group therefore start with matching row statistics — the pool of pairwise
cosine distances inside a group is heavy-tailed by construction — while the
usual LoRA magnitudes are preserved by a per-tensor rescale that cannot
change any cosine distance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import tensorio
from .checkpoint import KINDS, ProjectionKind
from .diststats import (
    DistancePool,
    cosine_distance,
    classify_pool,
    remove_zeros,
)
from .errors import (
    DegenerateSamplesError,
    IncompleteTableError,
    IoFailureError,
    TooFewSamplesError,
    UnreadableFileError,
)
from .generator import GeneratorConfig, draw_template, generate_row
from .grouping import GroupTable
from .rng import stream


class InitMode(Enum):
    """How the two LoRA factors are initialized."""

    #: Both factors carry shaped rows; the adapter perturbs the model
    #: immediately.
    FULL = "full"
    #: lora_B starts at zero, so B @ A = 0 and the adapter is a no-op until
    #: training moves B.
    ZERO_B = "zero-b"

    @classmethod
    def coerce(cls, value) -> "InitMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise ValueError(f"unknown init mode {value!r}") from None


def adapter_tensor_name(layer: int, kind, role: str) -> str:
    """PEFT-style adapter tensor name for one (layer, kind, role)."""
    kind = ProjectionKind.coerce(kind)
    if role not in ("A", "B"):
        raise ValueError(f"role must be 'A' or 'B', got {role!r}")
    return (
        f"base_model.model.model.layers.{layer}.{kind.block}."
        f"{kind.value}_proj.lora_{role}.weight"
    )


@dataclass(frozen=True)
class LoraTargetSpec:
    """Where an adapter attaches: layers, kinds, dimensions, and rank.

    ``dims`` maps each adapted kind to its (out_features, in_features);
    ``rank`` and ``alpha`` are the usual LoRA hyper-parameters
    (the effective update is ``alpha / rank * B @ A``).
    """

    model_id: str
    num_layers: int
    dims: dict
    rank: int
    alpha: float

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be at least 1")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        dims = {}
        for kind, pair in dict(self.dims).items():
            kind = ProjectionKind.coerce(kind)
            out_dim, in_dim = (int(pair[0]), int(pair[1]))
            if out_dim < 1 or in_dim < 1:
                raise ValueError(f"{kind}: dimensions must be positive, got {pair}")
            dims[kind] = (out_dim, in_dim)
        if not dims:
            raise ValueError("dims must name at least one projection kind")
        object.__setattr__(self, "dims", dims)

    def kinds(self) -> tuple:
        """Adapted kinds in canonical order."""
        return tuple(kind for kind in KINDS if kind in self.dims)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "num_layers": self.num_layers,
            "rank": self.rank,
            "alpha": self.alpha,
            "dims": {kind.value: list(pair) for kind, pair in self.dims.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LoraTargetSpec":
        return cls(
            model_id=str(data.get("model_id", "")),
            num_layers=int(data["num_layers"]),
            dims=dict(data["dims"]),
            rank=int(data["rank"]),
            alpha=float(data["alpha"]),
        )

    @classmethod
    def from_json(cls, path) -> "LoraTargetSpec":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UnreadableFileError(f"cannot read target spec {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UnreadableFileError(f"malformed target spec {path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class LoraInitBundle:
    """Generated LoRA init tensors plus the manifest that describes them."""

    tensors: dict
    manifest: dict
    templates: dict

    def tensor(self, layer: int, kind, role: str) -> np.ndarray:
        return self.tensors[adapter_tensor_name(layer, kind, role)]


def _rescaled(rows: np.ndarray, target_std: float) -> np.ndarray:
    spread = float(rows.std())
    if spread > 0.0:
        rows = rows * (target_std / spread)
    return rows.astype(np.float32)


def reshape_lora_init(
    target: LoraTargetSpec,
    table: GroupTable,
    config: GeneratorConfig | None = None,
    seed: int = 0,
    mode=InitMode.FULL,
) -> LoraInitBundle:
    """Build LoRA init tensors whose row statistics follow the group table.

    Every group in the table gets one template row per role: the A template
    at the group's largest in_features (members use a prefix of it), the B
    template at the rank.  Each tensor's rows are independent
    template-plus-sparse-increment draws from its own keyed stream, then the
    tensor is rescaled to the usual LoRA init magnitude (row std
    1/sqrt(in_features) for lora_A, 1/sqrt(rank) for lora_B) — a per-tensor
    positive scalar, so every cosine distance is untouched.  In zero-B mode
    lora_B is all zeros instead.

    The generator config contributes the template/increment statistics and
    the count law; its matrix geometry and seed are ignored in favor of the
    target dims and the explicit ``seed``.
    """
    config = config or GeneratorConfig()
    mode = InitMode.coerce(mode)
    kinds = target.kinds()

    covered = set(table.kinds_covered())
    missing = [kind.value for kind in kinds if kind not in covered]
    if missing:
        raise IncompleteTableError(
            f"table for {table.model_id!r} does not cover kind(s): "
            + ", ".join(missing)
        )

    group_kinds: dict = {}
    for kind in kinds:
        group_kinds.setdefault(table.group_index_of(kind), []).append(kind)

    templates: dict = {}
    for group_index, members in sorted(group_kinds.items()):
        max_in = max(target.dims[kind][1] for kind in members)
        templates[(group_index, "A")] = draw_template(
            stream(seed, "template", group_index, "a"), max_in, config
        )
        templates[(group_index, "B")] = draw_template(
            stream(seed, "template", group_index, "b"), target.rank, config
        )

    tensors: dict = {}
    for layer in range(target.num_layers):
        for kind in kinds:
            out_dim, in_dim = target.dims[kind]
            group_index = table.group_index_of(kind)

            template_a = templates[(group_index, "A")][:in_dim]
            rng_a = stream(seed, "lora", layer, kind.value, "a")
            rows_a = np.stack(
                [generate_row(template_a, config, rng_a) for _ in range(target.rank)]
            )
            tensors[adapter_tensor_name(layer, kind, "A")] = _rescaled(
                rows_a, 1.0 / math.sqrt(in_dim)
            )

            if mode is InitMode.ZERO_B:
                rows_b = np.zeros((out_dim, target.rank), dtype=np.float32)
            else:
                template_b = templates[(group_index, "B")]
                rng_b = stream(seed, "lora", layer, kind.value, "b")
                rows_b = _rescaled(
                    np.stack(
                        [generate_row(template_b, config, rng_b) for _ in range(out_dim)]
                    ),
                    1.0 / math.sqrt(target.rank),
                )
            tensors[adapter_tensor_name(layer, kind, "B")] = rows_b

    manifest = {
        "format": "lora-init-manifest",
        "version": 1,
        "target_model_id": target.model_id,
        "table_model_id": table.model_id,
        "table_digest": table.digest(),
        "num_layers": target.num_layers,
        "rank": target.rank,
        "alpha": target.alpha,
        "mode": mode.value,
        "seed": seed,
        "dims": {kind.value: list(target.dims[kind]) for kind in kinds},
        "groups": [
            {
                "index": group_index,
                "reference": table.groups[group_index].reference.value,
                "kinds": [kind.value for kind in members],
            }
            for group_index, members in sorted(group_kinds.items())
        ],
        "generator": {
            "template_mu": config.template_mu,
            "template_sigma": config.template_sigma,
            "increment_mu": config.increment_mu,
            "increment_sigma": config.increment_sigma,
            "template_correlation": config.template_correlation,
            "count_law": config.count_law.to_dict(),
        },
    }
    return LoraInitBundle(tensors=tensors, manifest=manifest, templates=templates)


def bundle_digest(tensors: dict) -> str:
    """Order-independent digest of a tensor map (names, shapes, raw bytes)."""
    digest = hashlib.sha256()
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name])
        digest.update(name.encode("utf-8"))
        digest.update(str(array.dtype).encode("utf-8"))
        digest.update(str(array.shape).encode("utf-8"))
        digest.update(array.tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class BundleReport:
    """Outcome of validating a bundle against its own manifest."""

    shapes_ok: bool
    problems: tuple
    group_classes: dict
    determinism_digest: str

    @property
    def ok(self) -> bool:
        return self.shapes_ok and not self.problems

    def to_dict(self) -> dict:
        return {
            "shapes_ok": self.shapes_ok,
            "problems": list(self.problems),
            "group_classes": {
                name: (verdict.to_dict() if verdict is not None else None)
                for name, verdict in self.group_classes.items()
            },
            "determinism_digest": self.determinism_digest,
        }


#: Rows that are the group template with no increments are identical up to
#: the per-tensor float32 rescale, which leaves cosine distances at the
#: 1e-15 scale; genuine increment-bearing pairs sit many orders higher.
_ROUNDING_ZERO = 1e-12


def _group_pool(rows_by_kind: dict) -> DistancePool:
    """Pool of within-kind distances, concatenated across a group's kinds.

    Rows of different kinds have different lengths, so each kind contributes
    its own upper-triangle distances; the group's pool is their union with
    zero distances removed.  Adapter rows have been through a float32 cast,
    so the zero cut uses a rounding tolerance instead of exact equality.
    """
    values = []
    candidates = 0
    for rows in rows_by_kind.values():
        count = rows.shape[0]
        candidates += count * (count - 1) // 2
        for i in range(count):
            for j in range(i + 1, count):
                values.append(cosine_distance(rows[i], rows[j]))
    pool = DistancePool(
        np.asarray(values, dtype=np.float64),
        source="lora-group",
        candidates=candidates,
    )
    return remove_zeros(pool, tolerance=_ROUNDING_ZERO)


def validate_bundle(bundle: LoraInitBundle, max_rows_per_kind: int = 128) -> BundleReport:
    """Check a bundle against its manifest and classify its group pools.

    Verifies the tensor map matches the manifest exactly (names, shapes,
    dtypes, zero-B contract), then pools each group's lora_A rows across
    layers and classifies the pool; groups whose pools are too small to
    classify report ``None``.  Also returns the bundle's content digest so
    two runs can be compared byte-for-byte.
    """
    manifest = bundle.manifest
    num_layers = int(manifest["num_layers"])
    rank = int(manifest["rank"])
    mode = InitMode(manifest["mode"])
    dims = {
        ProjectionKind.coerce(kind): (int(pair[0]), int(pair[1]))
        for kind, pair in manifest["dims"].items()
    }

    problems = []
    expected_names = set()
    for layer in range(num_layers):
        for kind, (out_dim, in_dim) in dims.items():
            for role, shape in (("A", (rank, in_dim)), ("B", (out_dim, rank))):
                name = adapter_tensor_name(layer, kind, role)
                expected_names.add(name)
                array = bundle.tensors.get(name)
                if array is None:
                    problems.append(f"missing tensor {name}")
                    continue
                if tuple(array.shape) != shape:
                    problems.append(
                        f"{name}: shape {tuple(array.shape)}, expected {shape}"
                    )
                if array.dtype != np.float32:
                    problems.append(f"{name}: dtype {array.dtype}, expected float32")
                if not np.isfinite(array).all():
                    problems.append(f"{name}: non-finite values")
                if role == "B":
                    if mode is InitMode.ZERO_B and np.any(array != 0.0):
                        problems.append(f"{name}: must be all zeros in zero-B mode")
                    if mode is InitMode.FULL and not np.any(array != 0.0):
                        problems.append(f"{name}: all zeros outside zero-B mode")
    for name in sorted(set(bundle.tensors) - expected_names):
        problems.append(f"unexpected tensor {name}")
    shapes_ok = not problems

    group_classes: dict = {}
    for entry in manifest["groups"]:
        rows_by_kind = {}
        for kind_name in entry["kinds"]:
            kind = ProjectionKind.coerce(kind_name)
            stacked = np.concatenate(
                [
                    bundle.tensors[adapter_tensor_name(layer, kind, "A")]
                    for layer in range(num_layers)
                ],
                axis=0,
            ).astype(np.float64)
            if stacked.shape[0] > max_rows_per_kind:
                step = -(-stacked.shape[0] // max_rows_per_kind)
                stacked = stacked[::step]
            rows_by_kind[kind_name] = stacked
        try:
            verdict = classify_pool(_group_pool(rows_by_kind))
        except (TooFewSamplesError, DegenerateSamplesError):
            verdict = None
        group_classes[entry["reference"]] = verdict

    return BundleReport(
        shapes_ok=shapes_ok,
        problems=tuple(problems),
        group_classes=group_classes,
        determinism_digest=bundle_digest(bundle.tensors),
    )


def export_adapter(bundle: LoraInitBundle, path) -> tuple:
    """Write a bundle as an adapter file plus its sidecar JSON manifest.

    Returns ``(tensor_path, manifest_path)``; the manifest gains the
    bundle's content digest under ``tensor_digest``.
    """
    tensor_path = Path(path)
    manifest_path = tensor_path.with_name(tensor_path.name + ".manifest.json")
    tensorio.emit_tensors(bundle.tensors, tensor_path)
    manifest = dict(bundle.manifest)
    manifest["tensor_digest"] = bundle_digest(bundle.tensors)
    try:
        manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
    except OSError as exc:
        raise IoFailureError(f"cannot write {manifest_path}: {exc}") from exc
    return tensor_path, manifest_path
