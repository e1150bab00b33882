#!/usr/bin/env python3
"""Build the file fixtures the bridge tests consume.

The bridge is a pure consumer of files: a base checkpoint, an adapter
tensor file, and the adapter's sidecar manifest.  This script fabricates a
tiny base checkpoint, then drives the `svshape` command-line tool to
produce a characteristic table and two adapter initializations from it —
the same artifacts a real pipeline would hand over.

Layout under the output directory:

    base/             config.json + model.safetensors (2-layer decoder)
    base-wrong/       same family at different widths, for mismatch tests
    source/           8-layer sibling checkpoint, used only to build the table
    characterized/    table.json from `svshape characterize` on source/
    target.json       adapter target spec matching base/
    adapter-zero-b/   `svshape reshape --mode zero-b` output
    adapter-full/     `svshape reshape --mode full` output
    dataset.txt       deterministic ASCII training text
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
from safetensors.numpy import save_file


def projection_dims(hidden: int, kv_dim: int, inter: int) -> dict:
    """(out_features, in_features) of each projection kind."""
    return {
        "q": (hidden, hidden),
        "k": (kv_dim, hidden),
        "v": (kv_dim, hidden),
        "o": (hidden, hidden),
        "gate": (inter, hidden),
        "up": (inter, hidden),
        "down": (hidden, inter),
    }


def write_checkpoint(
    out_dir: Path,
    *,
    hidden: int,
    kv_dim: int,
    inter: int,
    vocab: int,
    layers: int,
    heads: int,
    kv_heads: int,
    seed: int,
) -> None:
    rng = np.random.default_rng(seed)
    dims = projection_dims(hidden, kv_dim, inter)

    def matrix(out_features: int, in_features: int) -> np.ndarray:
        scale = 1.0 / np.sqrt(in_features)
        return rng.normal(0.0, scale, size=(out_features, in_features)).astype(np.float32)

    tensors = {"model.embed_tokens.weight": rng.normal(0.0, 0.1, size=(vocab, hidden)).astype(np.float32)}
    for layer in range(layers):
        prefix = f"model.layers.{layer}"
        for kind, (out_features, in_features) in dims.items():
            block = "self_attn" if kind in ("q", "k", "v", "o") else "mlp"
            tensors[f"{prefix}.{block}.{kind}_proj.weight"] = matrix(out_features, in_features)
        tensors[f"{prefix}.input_layernorm.weight"] = np.ones(hidden, dtype=np.float32)
        tensors[f"{prefix}.post_attention_layernorm.weight"] = np.ones(hidden, dtype=np.float32)
    tensors["model.norm.weight"] = np.ones(hidden, dtype=np.float32)
    tensors["lm_head.weight"] = rng.normal(0.0, 0.1, size=(vocab, hidden)).astype(np.float32)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_file(tensors, str(out_dir / "model.safetensors"))
    config = {
        "model_type": "llama",
        "hidden_size": hidden,
        "intermediate_size": inter,
        "num_hidden_layers": layers,
        "num_attention_heads": heads,
        "num_key_value_heads": kv_heads,
        "vocab_size": vocab,
        "rms_norm_eps": 1e-5,
        "rope_theta": 10000.0,
        "tie_word_embeddings": False,
    }
    (out_dir / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


def write_dataset(path: Path, lines: int = 1500, seed: int = 11) -> None:
    """Repetitive templated ASCII text a byte-level model can learn fast."""
    rng = np.random.default_rng(seed)
    subjects = ["the fox", "a raven", "the otter", "our robot", "the diver", "a sparrow"]
    verbs = ["jumps over", "slides past", "circles", "watches", "follows", "ignores"]
    objects = ["the lazy dog", "the quiet stream", "the old gate", "a stack of maps", "the open door"]
    text = []
    for _ in range(lines):
        text.append(
            f"{subjects[rng.integers(len(subjects))]} "
            f"{verbs[rng.integers(len(verbs))]} "
            f"{objects[rng.integers(len(objects))]}.\n"
        )
    path.write_text("".join(text), encoding="ascii")


def run_svshape(*args: str) -> None:
    subprocess.run([sys.executable, "-m", "svshape.cli", *args], check=True, stdout=subprocess.DEVNULL)


def main() -> int:
    if len(sys.argv) != 2:
        print(f"usage: {sys.argv[0]} OUTPUT_DIR", file=sys.stderr)
        return 2
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)

    base = dict(hidden=32, kv_dim=16, inter=48, vocab=128, heads=4, kv_heads=2)
    write_checkpoint(out / "base", layers=2, seed=101, **base)
    write_checkpoint(
        out / "base-wrong", layers=2, seed=103, hidden=48, kv_dim=24, inter=64, vocab=128, heads=4, kv_heads=2
    )
    # The table comes from a deeper sibling: enough layers for the cross
    # pools to be classifiable, same projection dims as the tiny base.
    write_checkpoint(out / "source", layers=8, seed=107, **base)

    target = {
        "model_id": "tiny-decoder-fixture",
        "num_layers": 2,
        "rank": 4,
        "alpha": 8.0,
        "dims": {kind: list(pair) for kind, pair in projection_dims(32, 16, 48).items()},
    }
    (out / "target.json").write_text(json.dumps(target, indent=2, sort_keys=True) + "\n")

    run_svshape(
        "characterize", str(out / "source" / "model.safetensors"), "--rank", "8",
        "--out", str(out / "characterized"),
    )
    table = str(out / "characterized" / "table.json")
    for mode in ("zero-b", "full"):
        run_svshape(
            "reshape", "--table", table, "--target", str(out / "target.json"),
            "--mode", mode, "--seed", "3", "--out", str(out / f"adapter-{mode}"),
        )

    write_dataset(out / "dataset.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
