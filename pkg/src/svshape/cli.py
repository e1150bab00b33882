"""Command-line interface.

Four subcommands cover the pipeline end to end:

* ``analyze``       — spectra, distance pools, fits, and a classification
                      for a checkpoint.
* ``characterize``  — greedy grouping of the projection kinds into a table.
* ``generate``      — synthesize a matrix pair with a chosen count law and
                      check the pool classification against expectation.
* ``reshape``       — build a LoRA init adapter from a table and validate it.

Every command writes its artifacts into ``--out DIR`` together with a
``run_manifest.json`` recording inputs, outputs, and their digests.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .checkpoint import KINDS, NameSchema, load_model_weights
from .diststats import (
    all_pairs_distances,
    classify_pool,
    fit_normal,
    fit_pareto,
    histogram,
    pairwise_distances,
    polar_histogram,
)
from .errors import (
    DegenerateSamplesError,
    SvshapeError,
    TooFewSamplesError,
    UnreadableFileError,
)
from .generator import (
    ConstantCount,
    GaussianCount,
    GeneratorConfig,
    ParetoCount,
    expected_label,
    generate_pair_and_validate,
    generate_template,
)
from .grouping import GroupTable, REFERENCE_ORDER_PRESETS, group_projections, resolve_reference_order
from .reshape import LoraTargetSpec, export_adapter, reshape_lora_init, validate_bundle
from .spectral import build_all_stacks, write_stack_csv
from . import tensorio

try:
    from importlib.metadata import version as _pkg_version

    _VERSION = _pkg_version("svshape")
except Exception:  # pragma: no cover - not installed
    _VERSION = "0.0.0"

#: Checkpoints given by bare name are looked up under this directory.
CHECKPOINT_CACHE_ENV = "SVSHAPE_CHECKPOINT_CACHE"


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _input_entry(path) -> dict:
    path = Path(path)
    return {
        "path": str(path),
        "sha256": _file_sha256(path) if path.is_file() else None,
    }


def _write_json(data: dict, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_csv_rows(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _pool_csv(pool, path: Path) -> None:
    _write_csv_rows(path, ["distance"], ([repr(float(v))] for v in pool.values))


def _pool_dict(pool) -> dict:
    return {
        "source": pool.source,
        "candidates": pool.candidates,
        "retained": pool.size,
        "zeros_removed": pool.zeros_removed,
    }


def _finish_run(command: str, args, out_dir: Path, inputs: dict, seed, started: str, t0: float) -> None:
    outputs = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "run_manifest.json":
            rel = path.relative_to(out_dir).as_posix()
            outputs[rel] = {"sha256": _file_sha256(path), "bytes": path.stat().st_size}
    manifest = {
        "command": command,
        "argv": list(args._argv),
        "package_version": _VERSION,
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "started_utc": started,
        "elapsed_seconds": round(time.time() - t0, 3),
    }
    _write_json(manifest, out_dir / "run_manifest.json")


def _resolve_model_path(raw: str) -> Path:
    path = Path(raw)
    if path.exists():
        return path
    cache = os.environ.get(CHECKPOINT_CACHE_ENV)
    if cache:
        cached = Path(cache) / raw
        if cached.exists():
            return cached
    raise UnreadableFileError(
        f"checkpoint {raw!r} not found (also tried ${CHECKPOINT_CACHE_ENV})"
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_stacks(args):
    schema = NameSchema.from_json(args.schema) if args.schema else None
    model_path = _resolve_model_path(args.model)
    model = load_model_weights(model_path, schema=schema, model_id=args.model_id)
    stacks = build_all_stacks(model, rank=args.rank, method=args.method)
    return model_path, model, stacks


def _cmd_analyze(args) -> int:
    t0, started = time.time(), _utc_now()
    model_path, model, stacks = _load_stacks(args)
    out = _out_dir(args)
    (out / "stacks").mkdir(exist_ok=True)
    (out / "pools").mkdir(exist_ok=True)

    stacks_csv = {}
    for kind, stack in stacks.items():
        rel = f"stacks/stack_{kind}.csv"
        write_stack_csv(stack, out / rel)
        stacks_csv[kind.value] = rel
    tensorio.emit_tensors(
        {f"stack_{kind}": stack.matrix() for kind, stack in stacks.items()},
        out / "stacks.safetensors",
    )

    pair_classes = {}
    pair_pools_csv = {}
    kinds = list(KINDS)
    for i, a in enumerate(kinds):
        for b in kinds[i:]:
            pool = pairwise_distances(stacks[a], stacks[b])
            rel = f"pools/pool_{a}-{b}.csv"
            _pool_csv(pool, out / rel)
            pair_pools_csv[f"{a}-{b}"] = rel
            try:
                pair_classes[f"{a}-{b}"] = classify_pool(pool).to_dict()
            except (TooFewSamplesError, DegenerateSamplesError):
                pair_classes[f"{a}-{b}"] = None

    pooled = all_pairs_distances(stacks)
    _pool_csv(pooled, out / "pool_all_pairs.csv")
    pareto = fit_pareto(pooled)
    normal = fit_normal(pooled)
    verdict = classify_pool(pooled)

    edges, densities = histogram(pooled, bins=args.bins)
    _write_csv_rows(
        out / "histogram.csv",
        ["bin_lo", "bin_hi", "density"],
        (
            [repr(float(edges[i])), repr(float(edges[i + 1])), repr(float(d))]
            for i, d in enumerate(densities)
        ),
    )
    sector_edges, counts = polar_histogram(pooled, sectors=args.sectors)
    _write_csv_rows(
        out / "polar.csv",
        ["sector_lo_deg", "sector_hi_deg", "count"],
        (
            [repr(float(sector_edges[i])), repr(float(sector_edges[i + 1])), int(c)]
            for i, c in enumerate(counts)
        ),
    )

    summary = {
        "model_id": model.model_id,
        "rank": args.rank,
        "num_layers": model.num_layers,
        "method": args.method,
        "kind_shapes": {
            kind.value: list(shape) for kind, shape in model.kind_shapes().items()
        },
        "spectra_count": model.num_layers * len(KINDS),
        "pool": _pool_dict(pooled),
        "pareto": pareto.to_dict(),
        "normal": normal.to_dict(),
        "classification": verdict.to_dict(),
        "pair_classes": pair_classes,
        "artifacts": {
            "stacks_csv": stacks_csv,
            "stacks_tensors": "stacks.safetensors",
            "pool_csv": "pool_all_pairs.csv",
            "pair_pools_csv": pair_pools_csv,
            "histogram_csv": "histogram.csv",
            "polar_csv": "polar.csv",
        },
    }
    _write_json(summary, out / "summary.json")

    inputs = {"model": _input_entry(model_path)}
    if args.schema:
        inputs["schema"] = _input_entry(args.schema)
    _finish_run("analyze", args, out, inputs, None, started, t0)

    print(f"{model.model_id}: {model.num_layers} layers, rank {args.rank}")
    print(
        f"pooled distances: {pooled.size}/{pooled.candidates} kept, "
        f"label {verdict.label}, score {verdict.score:.4f}"
    )
    print(
        f"pareto shape {pareto.shape:.3f} (ks {pareto.ks_statistic:.4f}); "
        f"normal ks {normal.ks_statistic:.4f}; "
        f"skewness {verdict.diagnostics.skewness:.3f}"
    )
    return 0


def _cmd_characterize(args) -> int:
    t0, started = time.time(), _utc_now()
    model_path, model, stacks = _load_stacks(args)
    order = resolve_reference_order(args.preset)
    table = group_projections(stacks, model_id=model.model_id, reference_order=order)
    out = _out_dir(args)
    table.to_json(out / "table.json")

    inputs = {"model": _input_entry(model_path)}
    if args.schema:
        inputs["schema"] = _input_entry(args.schema)
    _finish_run("characterize", args, out, inputs, None, started, t0)

    for index, group in enumerate(table.groups):
        members = " ".join(str(kind) for kind in group.members) or "(none)"
        print(f"group {index}: reference {group.reference}, members {members}")
    return 0


def _cmd_generate(args) -> int:
    t0, started = time.time(), _utc_now()
    config = (
        GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    )
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.law == "pareto":
        overrides["count_law"] = ParetoCount()
    elif args.law == "gaussian":
        overrides["count_law"] = GaussianCount()
    elif args.law == "constant":
        overrides["count_law"] = ConstantCount(count=args.count)
    if overrides:
        config = dataclasses.replace(config, **overrides)

    result = generate_pair_and_validate(config)
    out = _out_dir(args)
    tensorio.emit_tensors(
        {
            "first": result.first,
            "second": result.second,
            "template": generate_template(config),
        },
        out / "pair.safetensors",
    )

    histogram_rel = None
    if result.samples.size >= 2:
        edges, densities = histogram(result.samples, bins=args.bins)
        histogram_rel = "histogram.csv"
        _write_csv_rows(
            out / histogram_rel,
            ["bin_lo", "bin_hi", "density"],
            (
                [repr(float(edges[i])), repr(float(edges[i + 1])), repr(float(d))]
                for i, d in enumerate(densities)
            ),
        )

    expected = expected_label(config.count_law)
    matches = (
        None
        if result.degenerate
        else result.classification.label is expected
    )
    report = {
        "config": config.to_dict(),
        "expected_label": expected.value,
        "pool": _pool_dict(result.samples),
        "classification": (
            None if result.degenerate else result.classification.to_dict()
        ),
        "failure": result.failure,
        "matches_expected": matches,
        "artifacts": {"matrices": "pair.safetensors", "histogram_csv": histogram_rel},
    }
    _write_json(report, out / "report.json")

    inputs = {}
    if args.config:
        inputs["config"] = _input_entry(args.config)
    _finish_run("generate", args, out, inputs, config.seed, started, t0)

    if result.degenerate:
        print(f"pool degenerate: {result.failure}")
    else:
        print(
            f"expected {expected}, observed {result.classification.label} "
            f"(score {result.classification.score:.4f}) -> "
            f"{'ok' if matches else 'MISMATCH'}"
        )
    return 0 if matches is not False else 1


def _cmd_reshape(args) -> int:
    t0, started = time.time(), _utc_now()
    table = GroupTable.from_json(args.table)
    target = LoraTargetSpec.from_json(args.target)
    config = (
        GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    )
    bundle = reshape_lora_init(
        target, table, config=config, seed=args.seed, mode=args.mode
    )
    out = _out_dir(args)
    export_adapter(bundle, out / "adapter.safetensors")
    report = validate_bundle(bundle)
    _write_json(report.to_dict(), out / "reshape_report.json")

    inputs = {"table": _input_entry(args.table), "target": _input_entry(args.target)}
    if args.config:
        inputs["config"] = _input_entry(args.config)
    _finish_run("reshape", args, out, inputs, args.seed, started, t0)

    print(
        f"adapter: {len(bundle.tensors)} tensors, mode {bundle.manifest['mode']}, "
        f"digest {report.determinism_digest[:16]}..."
    )
    for reference, verdict in report.group_classes.items():
        label = "unclassifiable" if verdict is None else str(verdict.label)
        print(f"group {reference}: {label}")
    if not report.ok:
        for problem in report.problems:
            print(f"problem: {problem}", file=sys.stderr)
    return 0 if report.ok else 1


def _add_model_args(sub) -> None:
    sub.add_argument("model", help="checkpoint file or directory of shards")
    sub.add_argument("--rank", type=int, default=16, help="leading singular values per matrix")
    sub.add_argument(
        "--method",
        choices=["auto", "full", "randomized"],
        default="auto",
        help="SVD path",
    )
    sub.add_argument("--schema", help="JSON file mapping kinds to name templates")
    sub.add_argument("--model-id", help="label for reports (default: path stem)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svshape",
        description="Singular-value spectrum statistics and LoRA init shaping",
    )
    parser.add_argument("--version", action="version", version=f"svshape {_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser(
        "analyze", help="spectra, distance pools, fits, classification"
    )
    _add_model_args(analyze)
    analyze.add_argument("--bins", type=int, default=60, help="histogram bins")
    analyze.add_argument("--sectors", type=int, default=36, help="polar sectors")
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.set_defaults(func=_cmd_analyze)

    characterize = commands.add_parser(
        "characterize", help="group projection kinds by spectral shape"
    )
    _add_model_args(characterize)
    characterize.add_argument(
        "--preset",
        choices=sorted(REFERENCE_ORDER_PRESETS),
        default="canonical",
        help="reference walk order",
    )
    characterize.add_argument("--out", required=True, help="output directory")
    characterize.set_defaults(func=_cmd_characterize)

    generate = commands.add_parser(
        "generate", help="synthesize a matrix pair and validate its pool"
    )
    generate.add_argument("--config", help="generator config JSON")
    generate.add_argument("--seed", type=int, default=None, help="override config seed")
    generate.add_argument(
        "--law",
        choices=["pareto", "gaussian", "constant"],
        help="override the count law with its default parameters",
    )
    generate.add_argument(
        "--count", type=int, default=8, help="count for --law constant"
    )
    generate.add_argument("--bins", type=int, default=60, help="histogram bins")
    generate.add_argument("--out", required=True, help="output directory")
    generate.set_defaults(func=_cmd_generate)

    reshape = commands.add_parser(
        "reshape", help="build and validate a LoRA init adapter"
    )
    reshape.add_argument("--table", required=True, help="group table JSON")
    reshape.add_argument("--target", required=True, help="target spec JSON")
    reshape.add_argument("--config", help="generator config JSON")
    reshape.add_argument("--seed", type=int, default=0)
    reshape.add_argument("--mode", choices=["full", "zero-b"], default="full")
    reshape.add_argument("--out", required=True, help="output directory")
    reshape.set_defaults(func=_cmd_reshape)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    args._argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return args.func(args)
    except SvshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
