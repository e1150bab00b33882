"""
The command-line pipeline end to end
====================================

Every capability is also reachable through the `svshape` console script:

    svshape analyze      CKPT --out DIR   # spectra, pools, fits, class
    svshape characterize CKPT --out DIR   # group table
    svshape generate     --law pareto ... # synthetic pair + self-check
    svshape reshape      --table ... --target ...  # adapter init

Each run drops its artifacts plus a run_manifest.json (arguments, input
digests, output digests) into --out.  This script drives the same entry
point in-process on a synthetic checkpoint.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from svshape import ProjectionKind, emit_tensors
from svshape.cli import main

work = Path(tempfile.mkdtemp(prefix="svshape-demo-"))

# ---------------------------------------------------------------------
# An 8-layer checkpoint of random projections under the default naming.
# (With fewer layers the cross-kind pools fall under the 50-sample fit
# floor and characterize reports singleton groups with null diagnostics.)
# ---------------------------------------------------------------------
DIMS = {
    ProjectionKind.Q: (48, 64), ProjectionKind.K: (24, 64),
    ProjectionKind.V: (24, 64), ProjectionKind.O: (64, 48),
    ProjectionKind.GATE: (96, 64), ProjectionKind.UP: (96, 64),
    ProjectionKind.DOWN: (64, 96),
}
rng = np.random.default_rng(3)
checkpoint = work / "demo-model.safetensors"
emit_tensors(
    {
        f"model.layers.{layer}.{kind.block}.{kind.value}_proj.weight":
            rng.standard_normal(shape).astype(np.float32)
        for layer in range(8)
        for kind, shape in DIMS.items()
    },
    checkpoint,
)

def run(argv):
    print(f"\n$ svshape {' '.join(argv)}")
    code = main(argv)
    print(f"(exit {code})")
    return code

# ---------------------------------------------------------------------
# analyze: spectra CSVs, 28 per-pair pools, the pooled fit, a histogram.
# ---------------------------------------------------------------------
run(["analyze", str(checkpoint), "--rank", "8", "--out", str(work / "analysis")])
summary = json.loads((work / "analysis" / "summary.json").read_text())
print(f"pooled label: {summary['classification']['label']}")

# ---------------------------------------------------------------------
# characterize: the greedy grouping as table.json.
# ---------------------------------------------------------------------
run(["characterize", str(checkpoint), "--rank", "8", "--out", str(work / "char")])

# ---------------------------------------------------------------------
# generate: a synthetic pair plus its self-check report.
# ---------------------------------------------------------------------
run(["generate", "--law", "pareto", "--seed", "1", "--out", str(work / "gen")])

# ---------------------------------------------------------------------
# reshape: adapter init from the characterized table.
# ---------------------------------------------------------------------
target = {
    "model_id": "demo-target",
    "num_layers": 3,
    "rank": 8,
    "alpha": 16.0,
    "dims": {str(kind): list(shape) for kind, shape in DIMS.items()},
}
(work / "target.json").write_text(json.dumps(target))
run([
    "reshape",
    "--table", str(work / "char" / "table.json"),
    "--target", str(work / "target.json"),
    "--mode", "zero-b",
    "--out", str(work / "adapter"),
])

# ---------------------------------------------------------------------
# Every run leaves a manifest: inputs and outputs with SHA-256 digests,
# so results can be traced and compared byte for byte.
# ---------------------------------------------------------------------
manifest = json.loads((work / "adapter" / "run_manifest.json").read_text())
print(f"\nreshape manifest: command={manifest['command']}, seed={manifest['seed']}")
for rel, entry in manifest["outputs"].items():
    print(f"  {rel}: {entry['bytes']} bytes, sha256 {entry['sha256'][:12]}...")

print("\nartifact tree:")
for path in sorted(work.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(work)}")
