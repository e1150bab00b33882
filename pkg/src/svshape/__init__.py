"""Singular-value spectrum statistics for transformer projection matrices.

The pipeline: load a checkpoint's per-layer projection matrices, extract
each one's leading singular values, pool the pairwise cosine distances
between those spectra, classify the pools (power-law or not), group the
projection kinds whose spectra match, and reuse those groups to build LoRA
initializations with matching row statistics.
"""

from .checkpoint import (
    KINDS,
    ModelWeights,
    NameSchema,
    ProjectionKind,
    ProjectionMatrix,
    load_model_weights,
)
from .diststats import (
    DistancePool,
    Diagnostics,
    DistributionClass,
    DistributionLabel,
    NormalFit,
    ParetoFit,
    all_pairs_distances,
    classify_pool,
    cosine_distance,
    fit_normal,
    fit_pareto,
    histogram,
    pairwise_distances,
    polar_histogram,
    remove_zeros,
)
from .errors import SvshapeError
from .generator import (
    ConstantCount,
    GaussianCount,
    GeneratorConfig,
    ParetoCount,
    PairValidation,
    expected_label,
    generate_matrix,
    generate_pair_and_validate,
    generate_template,
)
from .grouping import (
    Group,
    GroupTable,
    REFERENCE_ORDER_PRESETS,
    group_projections,
    pair_class_matrix,
)
from .reshape import (
    BundleReport,
    InitMode,
    LoraInitBundle,
    LoraTargetSpec,
    adapter_tensor_name,
    export_adapter,
    reshape_lora_init,
    validate_bundle,
)
from .spectral import (
    Spectrum,
    SpectrumStack,
    build_all_stacks,
    build_stack,
    singular_values,
    top_r_spectrum,
)
from .tensorio import emit_tensors, read_metadata, read_tensors

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "ModelWeights",
    "NameSchema",
    "ProjectionKind",
    "ProjectionMatrix",
    "load_model_weights",
    "DistancePool",
    "Diagnostics",
    "DistributionClass",
    "DistributionLabel",
    "NormalFit",
    "ParetoFit",
    "all_pairs_distances",
    "classify_pool",
    "cosine_distance",
    "fit_normal",
    "fit_pareto",
    "histogram",
    "pairwise_distances",
    "polar_histogram",
    "remove_zeros",
    "SvshapeError",
    "ConstantCount",
    "GaussianCount",
    "GeneratorConfig",
    "ParetoCount",
    "PairValidation",
    "expected_label",
    "generate_matrix",
    "generate_pair_and_validate",
    "generate_template",
    "Group",
    "GroupTable",
    "REFERENCE_ORDER_PRESETS",
    "group_projections",
    "pair_class_matrix",
    "BundleReport",
    "InitMode",
    "LoraInitBundle",
    "LoraTargetSpec",
    "adapter_tensor_name",
    "export_adapter",
    "reshape_lora_init",
    "validate_bundle",
    "Spectrum",
    "SpectrumStack",
    "build_all_stacks",
    "build_stack",
    "singular_values",
    "top_r_spectrum",
    "emit_tensors",
    "read_metadata",
    "read_tensors",
]
