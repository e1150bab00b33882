"""Locate and load per-layer projection matrices from checkpoint files.

A decoder layer carries seven projection matrices: the attention projections
(Q, K, V, O) and the gated-MLP projections (Gate, Up, Down).  This module
maps checkpoint tensor names onto ``(layer, kind)`` pairs and assembles a
complete :class:`ModelWeights`, widening everything to float64.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import (
    MissingProjectionError,
    NonFiniteError,
    ShapeMismatchError,
    UnreadableFileError,
)

logger = logging.getLogger(__name__)


class ProjectionKind(Enum):
    """The seven per-layer projection matrices of a decoder block."""

    Q = "q"
    K = "k"
    V = "v"
    O = "o"
    GATE = "gate"
    UP = "up"
    DOWN = "down"

    def __str__(self) -> str:
        return self.value

    @property
    def block(self) -> str:
        """Sub-module owning this projection: ``self_attn`` or ``mlp``."""
        return "self_attn" if self in _ATTENTION_KINDS else "mlp"

    @classmethod
    def coerce(cls, value) -> "ProjectionKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown projection kind {value!r}") from None


_ATTENTION_KINDS = {ProjectionKind.Q, ProjectionKind.K, ProjectionKind.V, ProjectionKind.O}

#: Canonical report order for the seven kinds.
KINDS = tuple(ProjectionKind)


@dataclass(frozen=True)
class NameSchema:
    """Maps checkpoint tensor names onto ``(layer, kind)`` pairs.

    Patterns are dotted-name templates with a ``{layer}`` placeholder, e.g.
    ``layers.{layer}.self_attn.q_proj.weight``.  A template matches any
    tensor name that ends with it on a dot boundary, so checkpoint-specific
    prefixes such as ``model.`` need not be spelled out.
    """

    patterns: tuple

    @classmethod
    def from_templates(cls, templates) -> "NameSchema":
        """Build a schema from a ``{kind: template}`` mapping."""
        compiled = []
        for kind, template in templates.items():
            kind = ProjectionKind.coerce(kind)
            if "{layer}" not in template:
                raise ValueError(f"template for {kind} lacks a {{layer}} placeholder")
            body = re.escape(template).replace(
                re.escape("{layer}"), r"(?P<layer>\d+)"
            )
            compiled.append((re.compile(r"(?:^|\.)" + body + r"$"), kind))
        return cls(patterns=tuple(compiled))

    @classmethod
    def default(cls) -> "NameSchema":
        """Schema for the usual ``<kind>_proj.weight`` naming convention."""
        return cls.from_templates(
            {
                kind: f"layers.{{layer}}.{kind.block}.{kind.value}_proj.weight"
                for kind in KINDS
            }
        )

    @classmethod
    def from_json(cls, path) -> "NameSchema":
        """Load a ``{kind: template}`` mapping from a JSON file."""
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UnreadableFileError(f"cannot read schema {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UnreadableFileError(f"malformed schema {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UnreadableFileError(f"schema {path} must be a JSON object")
        return cls.from_templates(data)

    def resolve(self, tensor_name: str):
        """Return ``(layer_index, kind)`` for a tensor name, or None."""
        for regex, kind in self.patterns:
            match = regex.search(tensor_name)
            if match:
                return int(match.group("layer")), kind
        return None


@dataclass(frozen=True)
class ProjectionMatrix:
    """One projection weight matrix, float64, laid out (out_features, in_features)."""

    values: np.ndarray
    layer_index: int
    kind: ProjectionKind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or min(values.shape) < 1:
            raise ShapeMismatchError(
                f"{self.kind} projection, layer {self.layer_index}: "
                f"expected a non-empty 2-D matrix, got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise NonFiniteError(
                f"{self.kind} projection, layer {self.layer_index}: "
                "non-finite entries"
            )
        if self.layer_index < 0:
            raise ValueError(f"negative layer index {self.layer_index}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class ModelWeights:
    """All seven projection matrices for every decoder layer of one model."""

    model_id: str
    num_layers: int
    matrices: dict

    @classmethod
    def from_matrices(cls, model_id: str, matrices) -> "ModelWeights":
        by_key = {}
        for matrix in matrices:
            key = (matrix.layer_index, matrix.kind)
            if key in by_key:
                raise ValueError(f"duplicate matrix for layer {key[0]} {key[1]}")
            by_key[key] = matrix
        if not by_key:
            raise MissingProjectionError("no projection matrices given")
        num_layers = max(layer for layer, _ in by_key) + 1
        missing = [
            (layer, kind)
            for layer in range(num_layers)
            for kind in KINDS
            if (layer, kind) not in by_key
        ]
        if missing:
            head = ", ".join(f"layer {layer} {kind}" for layer, kind in missing[:5])
            raise MissingProjectionError(
                f"{model_id}: {len(missing)} projection(s) missing (first: {head})"
            )
        for kind in KINDS:
            shapes = {by_key[(layer, kind)].shape for layer in range(num_layers)}
            if len(shapes) > 1:
                raise ShapeMismatchError(
                    f"{model_id}: {kind} projections vary in shape across "
                    f"layers: {sorted(shapes)}"
                )
        return cls(model_id=model_id, num_layers=num_layers, matrices=by_key)

    def matrix(self, layer_index: int, kind) -> ProjectionMatrix:
        kind = ProjectionKind.coerce(kind)
        try:
            return self.matrices[(layer_index, kind)]
        except KeyError:
            raise MissingProjectionError(
                f"{self.model_id}: no {kind} projection for layer {layer_index}"
            ) from None

    def kind_shape(self, kind) -> tuple:
        return self.matrix(0, kind).shape

    def kind_shapes(self) -> dict:
        return {kind: self.kind_shape(kind) for kind in KINDS}


def load_model_weights(path, schema: NameSchema | None = None, model_id: str | None = None) -> ModelWeights:
    """Load every per-layer projection matrix below ``path``.

    ``path`` is a single container file or a directory of ``*.safetensors``
    shards.  Tensors whose names do not match the schema (embeddings, norms,
    biases) are ignored.  Raises :class:`MissingProjectionError` unless all
    seven kinds are present for layers ``0 .. L-1``.
    """
    schema = schema or NameSchema.default()
    root = Path(path)
    if root.is_dir():
        files = sorted(root.glob("*.safetensors"))
        if not files:
            raise UnreadableFileError(f"{root}: no *.safetensors files found")
    else:
        files = [root]

    found: dict = {}
    for file in files:
        for name, array in tensorio.read_tensors(file).items():
            hit = schema.resolve(name)
            if hit is None:
                continue
            layer, kind = hit
            if (layer, kind) in found:
                raise UnreadableFileError(
                    f"duplicate tensor for layer {layer} {kind} "
                    f"(second copy in {file.name})"
                )
            found[(layer, kind)] = ProjectionMatrix(array, layer, kind)
    if not found:
        raise MissingProjectionError(f"{root}: no tensor names matched the schema")

    model = ModelWeights.from_matrices(model_id or root.stem, found.values())
    logger.info(
        "loaded %s: %d layers, shapes %s",
        model.model_id,
        model.num_layers,
        {str(kind): shape for kind, shape in model.kind_shapes().items()},
    )
    return model
