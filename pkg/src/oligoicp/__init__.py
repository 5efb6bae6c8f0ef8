"""siRNA efficacy prediction: exact sequence features, quantile-capable
regression backends, and uncertainty-guided post-hoc ensemble selection."""

from .backends import (
    BuiltinBackend,
    KnnQuantileRegressor,
    QuantilePrediction,
    QuantileRequest,
    TrainingContext,
    knn_quantile_predict,
    make_backend,
    predict,
)
from .data import (
    LoadedDataset,
    NoiseProfile,
    build_pool,
    generate_synthetic,
    load_dataset,
    planted_efficacy,
    save_dataset,
)
from .ensemble import (
    ExperimentReport,
    ModelResult,
    ModelSpec,
    Subset,
    SubsetPool,
    aggregate,
    progressive_prefix_specs,
    run_ensemble,
    run_experiment,
    sample_model_specs,
    select_top_fraction,
)
from .evaluation import (
    coverage_curve,
    iqr_error_analysis,
    kfold_split,
    mae,
    model_iqr_correlation_scatter,
    pearson,
)
from .features import SirnaFeaturizer, featurize, featurize_records, feature_names
from .protocol import ExternalBackend, external_backend
from .sequences import (
    MrnaContext,
    SirnaRecord,
    SirnaSeq,
    build_mrna_context,
    normalize_sirna,
    reverse_complement,
)
from .thermo import ThermoTables, default_tables, duplex_energy_summary

__version__ = "0.1.0"

__all__ = [
    "BuiltinBackend",
    "ExperimentReport",
    "ExternalBackend",
    "KnnQuantileRegressor",
    "LoadedDataset",
    "ModelResult",
    "ModelSpec",
    "MrnaContext",
    "NoiseProfile",
    "QuantilePrediction",
    "QuantileRequest",
    "SirnaFeaturizer",
    "SirnaRecord",
    "SirnaSeq",
    "Subset",
    "SubsetPool",
    "ThermoTables",
    "TrainingContext",
    "aggregate",
    "build_mrna_context",
    "build_pool",
    "coverage_curve",
    "default_tables",
    "duplex_energy_summary",
    "external_backend",
    "feature_names",
    "featurize",
    "featurize_records",
    "generate_synthetic",
    "iqr_error_analysis",
    "kfold_split",
    "knn_quantile_predict",
    "load_dataset",
    "mae",
    "make_backend",
    "model_iqr_correlation_scatter",
    "normalize_sirna",
    "pearson",
    "planted_efficacy",
    "predict",
    "progressive_prefix_specs",
    "reverse_complement",
    "run_ensemble",
    "run_experiment",
    "sample_model_specs",
    "save_dataset",
    "select_top_fraction",
]
