"""
Loading a checkpoint and extracting singular-value spectra
==========================================================

A transformer decoder layer carries seven projection matrices: Q, K, V, O
in attention and gate, up, down in the MLP.  This script builds a tiny
synthetic checkpoint on disk, loads it back, and reduces every projection
matrix to its leading singular values — the "spectrum" that the rest of
the toolkit treats as that matrix's feature vector.
"""

import tempfile
from pathlib import Path

import numpy as np

from svshape import (
    KINDS,
    ProjectionKind,
    build_all_stacks,
    emit_tensors,
    load_model_weights,
    read_metadata,
)

# ---------------------------------------------------------------------
# Write a 4-layer checkpoint with the usual tensor naming.  Shapes follow
# a miniature decoder: attention projections are square-ish, the MLP
# widens by 1.5x and projects back down.
# ---------------------------------------------------------------------
DIMS = {
    ProjectionKind.Q: (48, 64),
    ProjectionKind.K: (24, 64),
    ProjectionKind.V: (24, 64),
    ProjectionKind.O: (64, 48),
    ProjectionKind.GATE: (96, 64),
    ProjectionKind.UP: (96, 64),
    ProjectionKind.DOWN: (64, 96),
}
NUM_LAYERS = 4

rng = np.random.default_rng(0)
tensors = {}
for layer in range(NUM_LAYERS):
    for kind, (out_dim, in_dim) in DIMS.items():
        name = f"model.layers.{layer}.{kind.block}.{kind.value}_proj.weight"
        tensors[name] = rng.standard_normal((out_dim, in_dim)).astype(np.float32)

workdir = Path(tempfile.mkdtemp(prefix="svshape-demo-"))
checkpoint = workdir / "tiny-model.safetensors"
emit_tensors(tensors, checkpoint, metadata={"demo": "tiny-model"})
print(f"wrote {len(tensors)} tensors to {checkpoint}")
print(f"file metadata: {read_metadata(checkpoint)}")

# ---------------------------------------------------------------------
# Load it back.  The loader groups tensors by (layer, kind), validates
# completeness, and widens everything to float64 for the numerics.
# ---------------------------------------------------------------------
model = load_model_weights(checkpoint)
print(f"\nloaded '{model.model_id}': {model.num_layers} layers")
for kind, shape in model.kind_shapes().items():
    print(f"  {kind}: {shape[0]} x {shape[1]}")

# ---------------------------------------------------------------------
# Extract the top-8 singular values of every projection and stack them
# per kind: one (num_layers x rank) array per projection kind.
# ---------------------------------------------------------------------
stacks = build_all_stacks(model, rank=8)
print("\nleading singular values (layer 0):")
for kind in KINDS:
    row = stacks[kind].matrix()[0]
    formatted = " ".join(f"{value:7.2f}" for value in row)
    print(f"  {kind:>4}: {formatted}")

# Random Gaussian matrices concentrate near the Marchenko–Pastur bulk, so
# the spectra are flat-ish and very similar across layers — exactly why
# real checkpoints, whose spectra differ, are the interesting input.
q_stack = stacks[ProjectionKind.Q].matrix()
print(
    f"\nQ spectra across layers: mean leading value {q_stack[:, 0].mean():.2f}, "
    f"spread {q_stack[:, 0].std():.3f}"
)
