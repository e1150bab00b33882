"""Acceptance gate: one test per release criterion, one verdict line each.

Each test prints ``ACCEPTANCE <id> PASS|FAIL - <detail>`` and then asserts,
so the suite output carries an explicit pass/fail line per criterion.
"""

import json
import os
import time

import jsonschema
import numpy as np
import pytest
from scipy import stats

from conftest import (
    LAYOUTS,
    layout_partition,
    structured_stacks,
    table_partition,
)
from svshape import tensorio
from svshape.checkpoint import KINDS, ProjectionKind
from svshape.cli import main
from svshape.diststats import (
    DistancePool,
    DistributionLabel,
    all_pairs_distances,
    cosine_distance,
    fit_pareto,
    pairwise_distances,
)
from svshape.generator import (
    ConstantCount,
    GaussianCount,
    GeneratorConfig,
    ParetoCount,
    generate_pair_and_validate,
)
from svshape.grouping import Group, GroupTable, group_projections
from svshape.reshape import (
    InitMode,
    LoraTargetSpec,
    bundle_digest,
    export_adapter,
    reshape_lora_init,
    validate_bundle,
)
from svshape.schemas import (
    ADAPTER_MANIFEST_SCHEMA,
    ANALYZE_SUMMARY_SCHEMA,
    GENERATE_REPORT_SCHEMA,
    GROUP_TABLE_SCHEMA,
    RESHAPE_REPORT_SCHEMA,
    RUN_MANIFEST_SCHEMA,
)
from svshape.spectral import SpectrumStack, singular_values


def _verdict(criterion: str, failures: list, detail: str) -> None:
    status = "FAIL" if failures else "PASS"
    print(f"ACCEPTANCE {criterion} {status} - {detail}")
    assert not failures, f"{criterion}: " + "; ".join(failures)


def _gram_oracle(matrix: np.ndarray, rank: int) -> np.ndarray:
    """Independent top singular values via eigenvalues of the Gram matrix."""
    a = np.asarray(matrix, dtype=np.float64)
    gram = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    eigenvalues = np.linalg.eigvalsh(gram)[::-1]
    return np.sqrt(np.clip(eigenvalues[:rank], 0.0, None))


# --------------------------------------------------------------------- A1


def test_A1_singular_values_match_independent_oracle():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(101)
    shapes = [
        (
            int(rng.integers(8, 257)),
            int(rng.integers(8, 257)),
        )
        for _ in range(50)
    ]
    shapes += [(512, 2048), (2048, 512), (64, 1536), (1200, 96)]
    worst = 0.0
    for index, (rows, cols) in enumerate(shapes):
        matrix = rng.standard_normal((rows, cols))
        rank = int(rng.integers(1, min(rows, cols, 32) + 1))
        got = singular_values(matrix, rank, method="auto")
        expected = _gram_oracle(matrix, rank)
        scale = expected[0] if expected[0] > 0 else 1.0
        error = float(np.max(np.abs(got - expected)) / scale)
        worst = max(worst, error)
        if error > 1e-8:
            failures.append(f"matrix {index} shape {(rows, cols)}: error {error:.3e}")
    elapsed = time.perf_counter() - started
    if elapsed >= 60.0:
        failures.append(f"suite took {elapsed:.1f}s (limit 60s)")
    _verdict(
        "A1",
        failures,
        f"{len(shapes)} matrices, worst relative error {worst:.2e}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------- A2


def test_A2_distance_properties_and_pool_counts():
    failures = []
    rng = np.random.default_rng(202)
    checked = 0
    for _ in range(10_000):
        size = int(rng.integers(2, 24))
        x = rng.standard_normal(size) * 10.0 ** rng.integers(-3, 4)
        y = rng.standard_normal(size) * 10.0 ** rng.integers(-3, 4)
        if not (np.abs(x).max() and np.abs(y).max()):
            continue
        checked += 1
        d_xy = cosine_distance(x, y)
        if cosine_distance(x, x) != 0.0:
            failures.append("identity violated")
        if abs(d_xy - cosine_distance(y, x)) > 1e-12:
            failures.append("symmetry violated")
        scaled = cosine_distance(3.7 * x, 0.21 * y)
        if abs(scaled - d_xy) > 1e-9:
            failures.append(f"scale invariance violated by {abs(scaled - d_xy):.2e}")
        if not 0.0 <= d_xy <= 2.0:
            failures.append(f"distance {d_xy} outside [0, 2]")
        d_pos = cosine_distance(np.abs(x), np.abs(y))
        if not 0.0 <= d_pos <= 1.0:
            failures.append(f"non-negative pair distance {d_pos} outside [0, 1]")
        if failures:
            break

    stacks = {
        kind: SpectrumStack.from_matrix(
            kind, np.sort(rng.gamma(2.0, 1.0, size=(16, 16)), axis=1)[:, ::-1]
        )
        for kind in KINDS
    }
    pooled = all_pairs_distances(stacks)
    if pooled.candidates != 6216:
        failures.append(f"pooled candidates {pooled.candidates}, expected C(112,2)=6216")
    union = np.sort(
        np.concatenate(
            [
                pairwise_distances(stacks[a], stacks[b]).values
                for i, a in enumerate(KINDS)
                for b in KINDS[i:]
            ]
        )
    )
    if not np.array_equal(np.sort(pooled.values), union):
        failures.append("28 per-pair pools do not recompose the pooled distances")
    _verdict(
        "A2",
        failures,
        f"{checked} random pairs, pooled candidates {pooled.candidates}",
    )


# --------------------------------------------------------------------- A3


def test_A3_pareto_shape_recovery():
    failures = []
    worst = 0.0
    for shape in (0.3, 0.8, 1.5):
        for seed in range(10):
            raw = stats.genpareto.rvs(
                shape, loc=0.0, scale=1.0, size=20_000,
                random_state=np.random.default_rng((int(shape * 10), seed)),
            )
            # distances live in [0, 2]; the MLE shape is scale-equivariant,
            # so squeezing the draw into range does not bias the estimate
            values = raw * (2.0 / raw.max())
            pool = DistancePool(values, source="synthetic", candidates=values.size)
            fitted = fit_pareto(pool)
            error = abs(fitted.shape - shape) / shape
            worst = max(worst, error)
            if error > 0.10:
                failures.append(
                    f"shape {shape} seed {seed}: fitted {fitted.shape:.4f} "
                    f"({error:.1%} off)"
                )
    _verdict("A3", failures, f"30 fits, worst relative shape error {worst:.1%}")


# --------------------------------------------------------------------- A4


def test_A4_generator_classes_match_count_laws():
    failures = []
    tallies = {}
    entries = []
    cases = {
        "pareto": (ParetoCount(), DistributionLabel.POWER_LAW),
        "gaussian": (GaussianCount(), DistributionLabel.NON_POWER_LAW),
        "constant": (ConstantCount(count=8), DistributionLabel.NON_POWER_LAW),
    }
    for name, (law, expected) in cases.items():
        hits = 0
        for seed in range(20):
            result = generate_pair_and_validate(
                GeneratorConfig(seed=seed, count_law=law)
            )
            if (
                not result.degenerate
                and result.classification.label is expected
            ):
                hits += 1
            if name == "pareto":
                entries.append(result.first.ravel())
                entries.append(result.second.ravel())
        tallies[name] = hits
        if hits < 18:
            failures.append(f"{name}: only {hits}/20 runs matched {expected}")

    pooled = np.concatenate(entries)[:100_000]
    skew = float(stats.skew(pooled))
    if abs(skew) >= 0.2:
        failures.append(f"pooled entry skewness {skew:.3f} (limit 0.2)")
    _verdict(
        "A4",
        failures,
        "matches/20: "
        + ", ".join(f"{name} {hits}" for name, hits in tallies.items())
        + f"; entry skewness {skew:.3f} on {pooled.size} samples",
    )


# --------------------------------------------------------------------- A5


def test_A5_grouping_partitions_and_recovers_layouts():
    failures = []
    rng = np.random.default_rng(505)
    for seed in range(20):
        stacks = {
            kind: SpectrumStack.from_matrix(
                kind, np.sort(rng.gamma(2.0, 1.0, size=(16, 16)), axis=1)[:, ::-1]
            )
            for kind in KINDS
        }
        table = group_projections(stacks, model_id=f"random-{seed}")
        covered = sorted(kind.value for kind in table.kinds_covered())
        if covered != sorted(kind.value for kind in KINDS):
            failures.append(f"random stacks seed {seed}: not a partition")

    recovered = {}
    for name in ("two-group", "three-group"):
        layout = LAYOUTS[name]
        expected = layout_partition(layout)
        hits = 0
        for seed in range(20):
            stacks = structured_stacks(seed, layout)
            table = group_projections(stacks, model_id=f"fixture-{seed}")
            if table_partition(table) == expected:
                hits += 1
        recovered[name] = hits
        if hits < 18:
            failures.append(f"{name}: recovered {hits}/20 layouts")
    _verdict(
        "A5",
        failures,
        "random stacks always partition; recovery/20: "
        + ", ".join(f"{name} {hits}" for name, hits in recovered.items()),
    )


# --------------------------------------------------------------------- A6


_A6_TABLE = GroupTable(
    model_id="fixture",
    rank=16,
    groups=(
        Group(
            reference=ProjectionKind.Q,
            members=(ProjectionKind.K, ProjectionKind.GATE),
        ),
        Group(
            reference=ProjectionKind.V,
            members=(ProjectionKind.O, ProjectionKind.UP, ProjectionKind.DOWN),
        ),
    ),
)

_A6_TARGET = LoraTargetSpec(
    model_id="target",
    num_layers=6,
    dims={
        "q": (16, 64),
        "k": (8, 48),
        "gate": (24, 64),
        "v": (8, 48),
        "o": (16, 64),
        "up": (24, 64),
        "down": (16, 56),
    },
    rank=8,
    alpha=16.0,
)


def test_A6_reshape_determinism_shapes_and_group_pools():
    failures = []

    first = reshape_lora_init(_A6_TARGET, _A6_TABLE, seed=0, mode=InitMode.FULL)
    again = reshape_lora_init(_A6_TARGET, _A6_TABLE, seed=0, mode=InitMode.FULL)
    if bundle_digest(first.tensors) != bundle_digest(again.tensors):
        failures.append("same seed produced different bytes")
    if bundle_digest(
        reshape_lora_init(_A6_TARGET, _A6_TABLE, seed=1).tensors
    ) == bundle_digest(first.tensors):
        failures.append("different seeds produced identical bytes")

    zero_b = reshape_lora_init(_A6_TARGET, _A6_TABLE, seed=0, mode=InitMode.ZERO_B)
    for layer in range(_A6_TARGET.num_layers):
        for kind in _A6_TARGET.kinds():
            update = zero_b.tensor(layer, kind, "B") @ zero_b.tensor(layer, kind, "A")
            if update.any():
                failures.append(f"zero-B update is non-zero for layer {layer} {kind}")

    hits = 0
    for seed in range(20):
        bundle = reshape_lora_init(
            _A6_TARGET, _A6_TABLE, seed=seed, mode=InitMode.ZERO_B
        )
        report = validate_bundle(bundle)
        if not report.shapes_ok:
            failures.append(f"seed {seed}: shape laws violated: {report.problems[:2]}")
            continue
        verdicts = report.group_classes.values()
        if all(
            verdict is not None and verdict.label is DistributionLabel.POWER_LAW
            for verdict in verdicts
        ):
            hits += 1
    if hits < 18:
        failures.append(f"within-group pools power-law in only {hits}/20 seeds")
    _verdict(
        "A6",
        failures,
        f"byte-deterministic; zero-B update identically zero; "
        f"group pools power-law in {hits}/20 seeds",
    )


# --------------------------------------------------------------------- A7


def test_A7_round_trips_and_artifact_schemas(checkpoint_file, tmp_path):
    failures = []

    rng = np.random.default_rng(707)
    tensors = {
        "alpha": rng.standard_normal((5, 7)).astype(np.float32),
        "beta": rng.integers(-9, 9, size=(3,)).astype(np.int32),
        "gamma": rng.standard_normal((2, 2, 2)),
    }
    path = tmp_path / "roundtrip.safetensors"
    tensorio.emit_tensors(tensors, path)
    loaded = tensorio.read_tensors(path)
    for name, array in tensors.items():
        if loaded[name].dtype != array.dtype or not np.array_equal(loaded[name], array):
            failures.append(f"tensor round-trip changed {name}")

    bundle = reshape_lora_init(_A6_TARGET, _A6_TABLE, seed=3)
    tensor_path, manifest_path = export_adapter(bundle, tmp_path / "adapter.safetensors")
    reloaded = tensorio.read_tensors(tensor_path)
    for name, array in bundle.tensors.items():
        if not np.array_equal(reloaded[name], array):
            failures.append(f"adapter round-trip changed {name}")
    manifest = json.loads(manifest_path.read_text())
    try:
        jsonschema.validate(manifest, ADAPTER_MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        failures.append(f"adapter manifest schema: {exc.message}")

    runs = {
        "analyze": ["analyze", str(checkpoint_file), "--out", str(tmp_path / "analyze")],
        "characterize": [
            "characterize", str(checkpoint_file), "--out", str(tmp_path / "char"),
        ],
        "generate": [
            "generate", "--law", "pareto", "--seed", "1", "--out", str(tmp_path / "gen"),
        ],
    }
    for command, argv in runs.items():
        if main(argv) != 0:
            failures.append(f"{command} exited non-zero")

    target_path = tmp_path / "target.json"
    target_path.write_text(json.dumps(_A6_TARGET.to_dict()))
    reshape_argv = [
        "reshape",
        "--table", str(tmp_path / "char" / "table.json"),
        "--target", str(target_path),
        "--out", str(tmp_path / "reshape"),
    ]
    if main(reshape_argv) != 0:
        failures.append("reshape exited non-zero")

    documents = {
        "analyze summary": (tmp_path / "analyze" / "summary.json", ANALYZE_SUMMARY_SCHEMA),
        "group table": (tmp_path / "char" / "table.json", GROUP_TABLE_SCHEMA),
        "generate report": (tmp_path / "gen" / "report.json", GENERATE_REPORT_SCHEMA),
        "reshape report": (
            tmp_path / "reshape" / "reshape_report.json", RESHAPE_REPORT_SCHEMA,
        ),
        "exported manifest": (
            tmp_path / "reshape" / "adapter.safetensors.manifest.json",
            ADAPTER_MANIFEST_SCHEMA,
        ),
    }
    for name in ("analyze", "char", "gen", "reshape"):
        documents[f"{name} run manifest"] = (
            tmp_path / name / "run_manifest.json", RUN_MANIFEST_SCHEMA,
        )
    for label, (doc_path, schema) in documents.items():
        try:
            jsonschema.validate(json.loads(doc_path.read_text()), schema)
        except jsonschema.ValidationError as exc:
            failures.append(f"{label} schema: {exc.message}")
        except OSError as exc:
            failures.append(f"{label}: {exc}")
    _verdict(
        "A7",
        failures,
        f"tensor and adapter round-trips bit-exact; "
        f"{len(documents)} artifacts schema-valid",
    )


# --------------------------------------------------------------------- A8


_SMALL_MODEL_ENV = "SVSHAPE_CHECKPOINT_SMALL"
_LARGE_MODEL_ENV = "SVSHAPE_CHECKPOINT_1B"


@pytest.mark.skipif(
    not (os.environ.get(_SMALL_MODEL_ENV) or os.environ.get(_LARGE_MODEL_ENV)),
    reason=f"set {_SMALL_MODEL_ENV} and/or {_LARGE_MODEL_ENV} to run on real checkpoints",
)
def test_A8_real_checkpoint_integration(tmp_path):
    failures = []
    details = []

    large = os.environ.get(_LARGE_MODEL_ENV)
    if large:
        out = tmp_path / "analyze-1b"
        if main(["analyze", large, "--rank", "16", "--out", str(out)]) != 0:
            failures.append("analyze exited non-zero on the 1B checkpoint")
        else:
            summary = json.loads((out / "summary.json").read_text())
            shape = summary["pareto"]["shape"]
            details.append(f"1B fitted tail shape {shape:.3f}")
            if not 1.4 <= shape <= 2.2:
                failures.append(f"1B tail shape {shape:.3f} outside [1.4, 2.2]")
        char_out = tmp_path / "char-1b"
        if main(["characterize", large, "--out", str(char_out)]) != 0:
            failures.append("characterize exited non-zero on the 1B checkpoint")
        else:
            table = GroupTable.from_json(char_out / "table.json")
            expected = {
                frozenset({"q", "k", "gate"}),
                frozenset({"v", "o", "up", "down"}),
            }
            if table_partition(table) != expected:
                failures.append(f"1B partition {table_partition(table)}")

    small = os.environ.get(_SMALL_MODEL_ENV)
    if small:
        out = tmp_path / "char-small"
        if main(["characterize", small, "--out", str(out)]) != 0:
            failures.append("characterize exited non-zero on the small checkpoint")
        else:
            table = GroupTable.from_json(out / "table.json")
            details.append(f"small model groups: {len(table.groups)}")
            if len(table.groups) != 1:
                failures.append(
                    f"small model grouped into {len(table.groups)} groups, expected 1"
                )
    _verdict("A8", failures, "; ".join(details) or "no checkpoints supplied")
