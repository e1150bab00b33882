"""Greedy grouping of projection kinds by spectral-shape similarity.

Two projection kinds belong together when the pool of cosine distances
between their layer spectra is heavy-tailed (power-law): most layer pairs
sit near zero distance with a sparse far tail.  The greedy pass walks kinds
in a configurable reference order, opens a group at the first unassigned
kind, and pulls in every later kind whose cross pool classifies power-law
against that reference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoint import KINDS, ProjectionKind
from .diststats import DistributionClass, classify_pool, pairwise_distances
from .errors import (
    DegenerateSamplesError,
    RankMismatchError,
    TooFewSamplesError,
    UnreadableFileError,
)

#: Walk kinds in their canonical order.
CANONICAL_ORDER = KINDS

#: Walk Up before V/O/Gate/Down; groups led by Up instead of V on models
#: whose MLP spectra cluster around the up projection.
PREFER_UP_ORDER = (
    ProjectionKind.Q,
    ProjectionKind.K,
    ProjectionKind.UP,
    ProjectionKind.V,
    ProjectionKind.O,
    ProjectionKind.GATE,
    ProjectionKind.DOWN,
)

REFERENCE_ORDER_PRESETS = {
    "canonical": CANONICAL_ORDER,
    "prefer-up": PREFER_UP_ORDER,
}


def resolve_reference_order(preset: str) -> tuple:
    try:
        return REFERENCE_ORDER_PRESETS[preset]
    except KeyError:
        raise ValueError(
            f"unknown reference-order preset {preset!r}; "
            f"choose from {sorted(REFERENCE_ORDER_PRESETS)}"
        ) from None


@dataclass(frozen=True)
class Group:
    """One group: a reference kind plus the kinds that match its shape."""

    reference: ProjectionKind
    members: tuple

    def kinds(self) -> tuple:
        return (self.reference,) + self.members


@dataclass(frozen=True)
class GroupTable:
    """Partition of projection kinds into reference-led groups."""

    model_id: str
    rank: int
    groups: tuple
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("a group table needs at least one group")
        seen = []
        for group in groups:
            for kind in group.kinds():
                if kind in seen:
                    raise ValueError(f"{kind} appears in more than one group")
                seen.append(kind)
        object.__setattr__(self, "groups", groups)

    def kinds_covered(self) -> tuple:
        return tuple(kind for group in self.groups for kind in group.kinds())

    def group_index_of(self, kind) -> int:
        kind = ProjectionKind.coerce(kind)
        for index, group in enumerate(self.groups):
            if kind in group.kinds():
                return index
        raise KeyError(f"{kind} is not covered by this table")

    def reference_of(self, kind) -> ProjectionKind:
        return self.groups[self.group_index_of(kind)].reference

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "rank": self.rank,
            "groups": [
                {
                    "reference": group.reference.value,
                    "members": [kind.value for kind in group.members],
                }
                for group in self.groups
            ],
            "diagnostics": {
                pair: (cls.to_dict() if cls is not None else None)
                for pair, cls in sorted(self.diagnostics.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupTable":
        groups = tuple(
            Group(
                reference=ProjectionKind.coerce(entry["reference"]),
                members=tuple(
                    ProjectionKind.coerce(member) for member in entry["members"]
                ),
            )
            for entry in data["groups"]
        )
        diagnostics = {
            pair: (DistributionClass.from_dict(entry) if entry is not None else None)
            for pair, entry in data.get("diagnostics", {}).items()
        }
        return cls(
            model_id=str(data.get("model_id", "")),
            rank=int(data["rank"]),
            groups=groups,
            diagnostics=diagnostics,
        )

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "GroupTable":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UnreadableFileError(f"cannot read table {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UnreadableFileError(f"malformed table {path}: {exc}") from exc
        return cls.from_dict(data)

    def digest(self) -> str:
        """Stable identity of the grouping (hash of the canonical JSON)."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _as_stack_map(stacks) -> dict:
    if isinstance(stacks, dict):
        return dict(stacks)
    return {stack.kind: stack for stack in stacks}


def group_projections(stacks, model_id: str = "", reference_order=None) -> GroupTable:
    """Partition projection kinds into groups of matching spectral shape.

    ``stacks`` maps each kind to its spectrum stack.  Kinds are walked in
    ``reference_order`` (default canonical): the first unassigned kind opens
    a group as its reference, and each later unassigned kind joins when the
    cross pool against that reference classifies power-law.  A reference
    nothing joins stays a singleton group.  Every cross classification that
    was computed is kept in the table's diagnostics.

    A cross pool too small or too degenerate to classify is no evidence of
    kinship, so the kind does not join; the diagnostic for that pair is
    ``None``.  The result is always a partition of the kinds given.
    """
    stack_map = _as_stack_map(stacks)
    order = tuple(
        ProjectionKind.coerce(kind) for kind in (reference_order or CANONICAL_ORDER)
    )
    if len(set(order)) != len(order):
        raise ValueError("reference order contains duplicates")
    if set(order) != set(stack_map):
        raise ValueError("reference order must cover exactly the kinds given")
    ranks = {stack.rank for stack in stack_map.values()}
    if len(ranks) > 1:
        raise RankMismatchError(f"stacks have mixed ranks {sorted(ranks)}")

    groups = []
    diagnostics: dict = {}
    remaining = list(order)
    while remaining:
        reference = remaining.pop(0)
        members, still_unassigned = [], []
        for kind in remaining:
            try:
                verdict = classify_pool(
                    pairwise_distances(stack_map[reference], stack_map[kind])
                )
            except (TooFewSamplesError, DegenerateSamplesError):
                verdict = None
            diagnostics[f"{reference}-{kind}"] = verdict
            if verdict is not None and verdict.is_power_law:
                members.append(kind)
            else:
                still_unassigned.append(kind)
        remaining = still_unassigned
        groups.append(Group(reference, tuple(members)))

    return GroupTable(
        model_id=model_id,
        rank=ranks.pop(),
        groups=tuple(groups),
        diagnostics=diagnostics,
    )


def pair_class_matrix(stacks) -> dict:
    """Classify the pool of every unordered pair of kinds, self included.

    Returns a symmetric mapping: both ``(a, b)`` and ``(b, a)`` point at the
    same classification; ``(a, a)`` classifies the kind's own upper-triangle
    pool across layers.
    """
    stack_map = _as_stack_map(stacks)
    kinds = [kind for kind in KINDS if kind in stack_map]
    kinds += [kind for kind in stack_map if kind not in kinds]
    matrix: dict = {}
    for i, a in enumerate(kinds):
        for b in kinds[i:]:
            verdict = classify_pool(pairwise_distances(stack_map[a], stack_map[b]))
            matrix[(a, b)] = verdict
            matrix[(b, a)] = verdict
    return matrix
