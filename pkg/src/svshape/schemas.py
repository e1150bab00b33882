"""JSON Schemas for the files the toolkit reads and writes.

Plain dict constants (draft 2020-12 style keywords) so callers can validate
artifacts with any JSON Schema implementation; the package itself does not
depend on one.
"""

KIND_PATTERN = "^(q|k|v|o|gate|up|down)$"
PAIR_PATTERN = "^(q|k|v|o|gate|up|down)-(q|k|v|o|gate|up|down)$"
_SHA256 = {"type": "string", "pattern": "^[0-9a-f]{64}$"}

_KIND = {"type": "string", "pattern": KIND_PATTERN}

_DIM_PAIR = {
    "type": "array",
    "items": {"type": "integer", "minimum": 1},
    "minItems": 2,
    "maxItems": 2,
}

_POOL = {
    "type": "object",
    "required": ["source", "candidates", "retained", "zeros_removed"],
    "properties": {
        "source": {"type": "string"},
        "candidates": {"type": "integer", "minimum": 0},
        "retained": {"type": "integer", "minimum": 0},
        "zeros_removed": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_DIAGNOSTICS = {
    "type": "object",
    "required": ["pareto_ks", "normal_ks", "skewness"],
    "properties": {
        "pareto_ks": {"type": "number", "minimum": 0, "maximum": 1},
        "normal_ks": {"type": "number", "minimum": 0, "maximum": 1},
        "skewness": {"type": "number"},
    },
    "additionalProperties": False,
}

CLASSIFICATION_SCHEMA = {
    "type": "object",
    "required": ["label", "score", "diagnostics"],
    "properties": {
        "label": {"enum": ["power-law", "non-power-law"]},
        "score": {"type": "number"},
        "diagnostics": _DIAGNOSTICS,
    },
    "additionalProperties": False,
}

_NULLABLE_CLASSIFICATION = {"oneOf": [CLASSIFICATION_SCHEMA, {"type": "null"}]}

_PARETO_FIT = {
    "type": "object",
    "required": ["shape", "loc", "scale", "ks_statistic"],
    "properties": {
        "shape": {"type": "number"},
        "loc": {"type": "number"},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "ks_statistic": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

_NORMAL_FIT = {
    "type": "object",
    "required": ["mean", "stddev", "ks_statistic"],
    "properties": {
        "mean": {"type": "number"},
        "stddev": {"type": "number", "exclusiveMinimum": 0},
        "ks_statistic": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

COUNT_LAW_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["law", "count"],
            "properties": {
                "law": {"const": "constant"},
                "count": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["law"],
            "properties": {
                "law": {"const": "gaussian"},
                "mean": {"type": ["number", "null"]},
                "sigma": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["law"],
            "properties": {
                "law": {"const": "pareto"},
                "shape": {"type": "number", "exclusiveMinimum": 0},
                "scale": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}

GENERATOR_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "row_length": {"type": "integer", "minimum": 1},
        "num_rows": {"type": "integer", "minimum": 1},
        "template_mu": {"type": "number"},
        "template_sigma": {"type": "number", "exclusiveMinimum": 0},
        "increment_mu": {"type": "number"},
        "increment_sigma": {"type": "number", "exclusiveMinimum": 0},
        "count_law": COUNT_LAW_SCHEMA,
        "template_correlation": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

GROUP_TABLE_SCHEMA = {
    "type": "object",
    "required": ["model_id", "rank", "groups"],
    "properties": {
        "model_id": {"type": "string"},
        "rank": {"type": "integer", "minimum": 1},
        "groups": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["reference", "members"],
                "properties": {
                    "reference": _KIND,
                    "members": {"type": "array", "items": _KIND},
                },
                "additionalProperties": False,
            },
        },
        "diagnostics": {
            "type": "object",
            "patternProperties": {
                PAIR_PATTERN: {"oneOf": [CLASSIFICATION_SCHEMA, {"type": "null"}]}
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

TARGET_SPEC_SCHEMA = {
    "type": "object",
    "required": ["num_layers", "rank", "alpha", "dims"],
    "properties": {
        "model_id": {"type": "string"},
        "num_layers": {"type": "integer", "minimum": 1},
        "rank": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "dims": {
            "type": "object",
            "minProperties": 1,
            "patternProperties": {KIND_PATTERN: _DIM_PAIR},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

ANALYZE_SUMMARY_SCHEMA = {
    "type": "object",
    "required": [
        "model_id",
        "rank",
        "num_layers",
        "method",
        "kind_shapes",
        "spectra_count",
        "pool",
        "pareto",
        "normal",
        "classification",
        "pair_classes",
        "artifacts",
    ],
    "properties": {
        "model_id": {"type": "string"},
        "rank": {"type": "integer", "minimum": 1},
        "num_layers": {"type": "integer", "minimum": 1},
        "method": {"enum": ["auto", "full", "randomized"]},
        "kind_shapes": {
            "type": "object",
            "patternProperties": {KIND_PATTERN: _DIM_PAIR},
            "additionalProperties": False,
        },
        "spectra_count": {"type": "integer", "minimum": 1},
        "pool": _POOL,
        "pareto": _PARETO_FIT,
        "normal": _NORMAL_FIT,
        "classification": CLASSIFICATION_SCHEMA,
        "pair_classes": {
            "type": "object",
            "patternProperties": {PAIR_PATTERN: _NULLABLE_CLASSIFICATION},
            "additionalProperties": False,
        },
        "artifacts": {
            "type": "object",
            "required": [
                "stacks_csv",
                "stacks_tensors",
                "pool_csv",
                "pair_pools_csv",
                "histogram_csv",
                "polar_csv",
            ],
            "properties": {
                "stacks_csv": {
                    "type": "object",
                    "patternProperties": {KIND_PATTERN: {"type": "string"}},
                    "additionalProperties": False,
                },
                "stacks_tensors": {"type": "string"},
                "pool_csv": {"type": "string"},
                "pair_pools_csv": {
                    "type": "object",
                    "patternProperties": {PAIR_PATTERN: {"type": "string"}},
                    "additionalProperties": False,
                },
                "histogram_csv": {"type": "string"},
                "polar_csv": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

GENERATE_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "config",
        "expected_label",
        "pool",
        "classification",
        "failure",
        "matches_expected",
        "artifacts",
    ],
    "properties": {
        "config": GENERATOR_CONFIG_SCHEMA,
        "expected_label": {"enum": ["power-law", "non-power-law"]},
        "pool": _POOL,
        "classification": _NULLABLE_CLASSIFICATION,
        "failure": {"type": ["string", "null"]},
        "matches_expected": {"type": ["boolean", "null"]},
        "artifacts": {
            "type": "object",
            "required": ["matrices"],
            "properties": {
                "matrices": {"type": "string"},
                "histogram_csv": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

ADAPTER_MANIFEST_SCHEMA = {
    "type": "object",
    "required": [
        "format",
        "version",
        "target_model_id",
        "table_model_id",
        "table_digest",
        "num_layers",
        "rank",
        "alpha",
        "mode",
        "seed",
        "dims",
        "groups",
        "generator",
        "tensor_digest",
    ],
    "properties": {
        "format": {"const": "lora-init-manifest"},
        "version": {"const": 1},
        "target_model_id": {"type": "string"},
        "table_model_id": {"type": "string"},
        "table_digest": _SHA256,
        "num_layers": {"type": "integer", "minimum": 1},
        "rank": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["full", "zero-b"]},
        "seed": {"type": "integer"},
        "dims": {
            "type": "object",
            "minProperties": 1,
            "patternProperties": {KIND_PATTERN: _DIM_PAIR},
            "additionalProperties": False,
        },
        "groups": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["index", "reference", "kinds"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "reference": _KIND,
                    "kinds": {"type": "array", "minItems": 1, "items": _KIND},
                },
                "additionalProperties": False,
            },
        },
        "generator": {
            "type": "object",
            "required": [
                "template_mu",
                "template_sigma",
                "increment_mu",
                "increment_sigma",
                "template_correlation",
                "count_law",
            ],
            "properties": {
                "template_mu": {"type": "number"},
                "template_sigma": {"type": "number", "exclusiveMinimum": 0},
                "increment_mu": {"type": "number"},
                "increment_sigma": {"type": "number", "exclusiveMinimum": 0},
                "template_correlation": {"type": "number", "minimum": 0},
                "count_law": COUNT_LAW_SCHEMA,
            },
            "additionalProperties": False,
        },
        "tensor_digest": _SHA256,
    },
    "additionalProperties": False,
}

RESHAPE_REPORT_SCHEMA = {
    "type": "object",
    "required": ["shapes_ok", "problems", "group_classes", "determinism_digest"],
    "properties": {
        "shapes_ok": {"type": "boolean"},
        "problems": {"type": "array", "items": {"type": "string"}},
        "group_classes": {
            "type": "object",
            "patternProperties": {KIND_PATTERN: _NULLABLE_CLASSIFICATION},
            "additionalProperties": False,
        },
        "determinism_digest": _SHA256,
    },
    "additionalProperties": False,
}

RUN_MANIFEST_SCHEMA = {
    "type": "object",
    "required": [
        "command",
        "argv",
        "package_version",
        "seed",
        "inputs",
        "outputs",
        "started_utc",
        "elapsed_seconds",
    ],
    "properties": {
        "command": {"enum": ["analyze", "characterize", "generate", "reshape"]},
        "argv": {"type": "array", "items": {"type": "string"}},
        "package_version": {"type": "string"},
        "seed": {"type": ["integer", "null"]},
        "inputs": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["path", "sha256"],
                "properties": {
                    "path": {"type": "string"},
                    "sha256": {"oneOf": [_SHA256, {"type": "null"}]},
                },
                "additionalProperties": False,
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["sha256", "bytes"],
                "properties": {
                    "sha256": _SHA256,
                    "bytes": {"type": "integer", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "started_utc": {"type": "string"},
        "elapsed_seconds": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}
