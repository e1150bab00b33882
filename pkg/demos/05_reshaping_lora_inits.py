"""
Reshaping LoRA initializations around a group table
===================================================

Standard LoRA inits draw every adapter tensor independently.  Here, the
group table decides which projection kinds share a row template, so the
adapter starts with the same within-group spectral kinship that the table
describes — while per-tensor rescaling keeps the usual init magnitudes.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from svshape import (
    Group,
    GroupTable,
    InitMode,
    LoraTargetSpec,
    ProjectionKind,
    export_adapter,
    read_tensors,
    reshape_lora_init,
    validate_bundle,
)

# A two-group table (normally produced by the `characterize` command).
table = GroupTable(
    model_id="demo-source",
    rank=16,
    groups=(
        Group(ProjectionKind.Q, (ProjectionKind.K, ProjectionKind.GATE)),
        Group(
            ProjectionKind.V,
            (ProjectionKind.O, ProjectionKind.UP, ProjectionKind.DOWN),
        ),
    ),
)

# Where the adapter attaches: per-kind (out_features, in_features), the
# LoRA rank, and the alpha scaling used at attach time.
target = LoraTargetSpec(
    model_id="demo-target",
    num_layers=4,
    dims={
        "q": (48, 64), "k": (24, 64), "v": (24, 64), "o": (64, 48),
        "gate": (96, 64), "up": (96, 64), "down": (64, 96),
    },
    rank=8,
    alpha=16.0,
)

bundle = reshape_lora_init(target, table, seed=0, mode=InitMode.FULL)
print(f"built {len(bundle.tensors)} adapter tensors")
a = bundle.tensor(0, "q", "A")
b = bundle.tensor(0, "q", "B")
print(f"  layer 0 q: lora_A {a.shape}, lora_B {b.shape}")
print(
    f"  lora_A row std {a.std():.4f} (target 1/sqrt(64) = {1 / math.sqrt(64):.4f}); "
    f"lora_B row std {b.std():.4f} (target 1/sqrt(8) = {1 / math.sqrt(8):.4f})"
)

# ---------------------------------------------------------------------
# Validation re-derives everything from the manifest: names, shapes,
# dtypes, and a classification of each group's pooled lora_A rows.
# ---------------------------------------------------------------------
report = validate_bundle(bundle)
print(f"\nvalidation ok: {report.ok}")
for reference, verdict in report.group_classes.items():
    print(
        f"  group '{reference}' pool: {verdict.label} "
        f"(score {verdict.score:+.3f})"
    )
print(f"content digest: {report.determinism_digest[:16]}...")

# ---------------------------------------------------------------------
# zero-B mode keeps the shaped lora_A but zeroes lora_B, so the adapter
# is provably a no-op until training moves B.
# ---------------------------------------------------------------------
silent = reshape_lora_init(target, table, seed=0, mode=InitMode.ZERO_B)
update = silent.tensor(2, "gate", "B") @ silent.tensor(2, "gate", "A")
print(f"\nzero-B update norm (layer 2 gate): {np.abs(update).max()}")

# ---------------------------------------------------------------------
# Export writes the adapter tensors plus a sidecar JSON manifest that
# records the grouping, the generator settings, and a content digest.
# ---------------------------------------------------------------------
out = Path(tempfile.mkdtemp(prefix="svshape-demo-")) / "adapter.safetensors"
tensor_path, manifest_path = export_adapter(bundle, out)
loaded = read_tensors(tensor_path)
print(f"\nexported {tensor_path.name} + {manifest_path.name}")
print(f"round-trip identical: {all(np.array_equal(loaded[k], v) for k, v in bundle.tensors.items())}")
