"""Multi-battery factor analysis and zero-shot classification toolkit."""

from .data import (
    ClassPrototypeTable,
    SyntheticSpec,
    ViewSpec,
    ZslDataset,
    expand_side_info,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_validation,
)
from .embedding import (
    CrossCovariance,
    EmbeddingModel,
    SingularityError,
    build_cross_covariance,
    fit_ibfa,
    fit_mbfa,
    fit_mcca,
    load_model,
    objective_value,
    orthonormality_diagnostics,
    project,
    save_model,
)
from .evaluation import (
    EvaluationReport,
    TimingRecord,
    aggregate_repeats,
    benchmark,
    evaluate,
)
from .matrix import (
    ConvergenceError,
    EigenResult,
    center,
    frobenius_norm,
    load_matrix_csv,
    matmul,
    save_matrix_csv,
    symmetric_eig,
    transpose,
)
from .pipeline import (
    FusionWeights,
    Prediction,
    PrototypeEmbeddings,
    cosine_similarity,
    embed_prototypes,
    grid_search_weights,
    infer,
    predict,
    simplex_grid,
    sweep_dimension,
    train,
    weight_grid_scores,
)

__version__ = "0.1.0"

__all__ = [
    "ClassPrototypeTable",
    "ConvergenceError",
    "CrossCovariance",
    "EigenResult",
    "EmbeddingModel",
    "EvaluationReport",
    "FusionWeights",
    "Prediction",
    "PrototypeEmbeddings",
    "SingularityError",
    "SyntheticSpec",
    "TimingRecord",
    "ViewSpec",
    "ZslDataset",
    "aggregate_repeats",
    "benchmark",
    "build_cross_covariance",
    "center",
    "cosine_similarity",
    "embed_prototypes",
    "evaluate",
    "expand_side_info",
    "fit_ibfa",
    "fit_mbfa",
    "fit_mcca",
    "frobenius_norm",
    "generate_synthetic",
    "grid_search_weights",
    "infer",
    "load_dataset",
    "load_matrix_csv",
    "load_model",
    "matmul",
    "objective_value",
    "orthonormality_diagnostics",
    "predict",
    "project",
    "save_dataset",
    "save_matrix_csv",
    "save_model",
    "simplex_grid",
    "split_validation",
    "sweep_dimension",
    "symmetric_eig",
    "train",
    "transpose",
    "weight_grid_scores",
]
