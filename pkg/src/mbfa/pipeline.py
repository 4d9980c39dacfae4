"""Zero-shot classification over the shared embedding space.

Training fits the multi-view embedding on seen-class instances with the
visual features as view 0 and one replicated side-information matrix per
selected type, then embeds the unseen-class prototypes.  Inference scores a
test instance against every candidate class by a weighted sum of cosine
similarities, one term per side-information type, and predicts the argmax.
Fusion weights live on the probability simplex and come from a grid search
over class-level validation splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ZslDataset, split_validation
from .embedding import (
    DEFAULT_MCCA_REG,
    EmbeddingModel,
    fit_mbfa,
    fit_mcca,
    project,
)

ZERO_NORM_EPS = 1e-15
METHODS = ("MBFA", "MCCA")


def cosine_similarity(a, b) -> float:
    """a.b / (|a||b|); zero vectors (norm < 1e-15) score 0 by convention."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        return 0.0
    return float(a @ b) / (na * nb)


@dataclass(frozen=True)
class FusionWeights:
    """Per-side-information-type weights on the probability simplex."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("need at least one weight")
        if any(a < 0.0 or a > 1.0 for a in alphas):
            raise ValueError(f"weights must lie in [0, 1]: {alphas}")
        if abs(sum(alphas) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1: {alphas}")

    @classmethod
    def uniform(cls, k: int) -> "FusionWeights":
        return cls(tuple(1.0 / k for _ in range(k)))


@dataclass(frozen=True)
class Prediction:
    index: int
    class_id: int
    scores: np.ndarray  # fused score per candidate class, in class-id order


@dataclass(frozen=True)
class PrototypeEmbeddings:
    """Embedded class prototypes for the candidate (unseen) classes.

    tables[k][i] is the embedding of class class_ids[i] under side-info
    type k; class_ids are ascending, so argmax ties resolve to the lowest
    class id.
    """

    class_ids: tuple[int, ...]
    tables: tuple[np.ndarray, ...]


def _resolve_selection(dataset: ZslDataset, selection) -> tuple[str, ...]:
    if selection is None:
        selection = dataset.side_info_names
    names = tuple(selection)
    if not names:
        raise ValueError("side-information selection must not be empty")
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate side-information types selected: {names}")
    for name in names:
        dataset.table(name)
    return names


def train(
    dataset: ZslDataset,
    selection=None,
    d: int = 2,
    method: str = "MBFA",
    reg: float = DEFAULT_MCCA_REG,
    train_classes=None,
    target_classes=None,
) -> tuple[EmbeddingModel, PrototypeEmbeddings]:
    """Fit the embedding on seen data and embed the target-class prototypes.

    selection picks the side-information types (None = all, in dataset
    order); views are [visual] + one per selected type, so c = K + 1.
    train_classes/target_classes default to the dataset's seen and unseen
    splits; the grid search overrides them with validation sub-splits.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    names = _resolve_selection(dataset, selection)
    if train_classes is None:
        train_classes = dataset.seen_classes
    if target_classes is None:
        target_classes = dataset.unseen_classes
    train_classes = tuple(sorted(train_classes))
    target_classes = tuple(sorted(target_classes))

    idx = np.flatnonzero(np.isin(dataset.labels, train_classes))
    if idx.size == 0:
        raise ValueError("no training instances for the given classes")
    labels = dataset.labels[idx]
    views = [dataset.features[:, idx]]
    for name in names:
        views.append(np.ascontiguousarray(dataset.table(name).vectors[labels].T))

    if method == "MBFA":
        model = fit_mbfa(views, d)
    else:
        model = fit_mcca(views, d, reg)
    return model, embed_prototypes(model, dataset, names, target_classes)


def embed_prototypes(
    model: EmbeddingModel,
    dataset: ZslDataset,
    selection=None,
    target_classes=None,
) -> PrototypeEmbeddings:
    """Project class prototypes of the target classes with a fitted model.

    Side-information type k uses projection view k + 1, mirroring the view
    order the model was fitted with.
    """
    names = _resolve_selection(dataset, selection)
    if model.num_views != len(names) + 1:
        raise ValueError(
            f"model has {model.num_views} views but {len(names)} "
            "side-information types are selected"
        )
    if target_classes is None:
        target_classes = dataset.unseen_classes
    target_classes = tuple(sorted(target_classes))
    tables = []
    for k, name in enumerate(names):
        prototypes = dataset.table(name).vectors
        if prototypes.shape[1] != model.view_dims[k + 1]:
            raise ValueError(
                f"side-info type {name!r} has dimension {prototypes.shape[1]}, "
                f"model view {k + 1} expects {model.view_dims[k + 1]}"
            )
        embedded = np.stack(
            [project(model, k + 1, prototypes[c]) for c in target_classes]
        )
        tables.append(embedded)
    return PrototypeEmbeddings(class_ids=target_classes, tables=tuple(tables))


def _similarity_matrix(embedded: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Cosine similarities between embedded rows and prototype rows."""
    x_norm = np.linalg.norm(embedded, axis=1)
    p_norm = np.linalg.norm(prototypes, axis=1)
    sims = embedded @ prototypes.T
    safe_x = np.where(x_norm < ZERO_NORM_EPS, 1.0, x_norm)
    safe_p = np.where(p_norm < ZERO_NORM_EPS, 1.0, p_norm)
    sims /= safe_x[:, None]
    sims /= safe_p[None, :]
    sims[x_norm < ZERO_NORM_EPS, :] = 0.0
    sims[:, p_norm < ZERO_NORM_EPS] = 0.0
    return sims


def fused_scores(
    model: EmbeddingModel,
    x_test: np.ndarray,
    prototypes: PrototypeEmbeddings,
    weights: FusionWeights,
) -> np.ndarray:
    """Weighted cosine scores of test columns against every candidate class.

    x_test has one instance per column; returns an (instances, classes)
    score matrix accumulated in side-information order.
    """
    if len(weights.alphas) != len(prototypes.tables):
        raise ValueError(
            f"{len(weights.alphas)} weights for {len(prototypes.tables)} "
            "side-information types"
        )
    x_test = np.asarray(x_test, dtype=np.float64)
    if x_test.ndim == 1:
        x_test = x_test[:, None]
    if x_test.shape[0] != model.view_dims[0]:
        raise ValueError(
            f"test vectors have dimension {x_test.shape[0]}, "
            f"model expects {model.view_dims[0]}"
        )
    embedded = (model.projections[0].T @ (x_test - model.means[0][:, None])).T
    scores = np.zeros((embedded.shape[0], len(prototypes.class_ids)))
    for alpha, table in zip(weights.alphas, prototypes.tables):
        scores += alpha * _similarity_matrix(embedded, table)
    return scores


def infer(
    model: EmbeddingModel,
    x_test,
    prototypes: PrototypeEmbeddings,
    weights: FusionWeights,
    index: int = 0,
) -> Prediction:
    """Predict one instance's class by maximal fused similarity.

    Ties break toward the lowest class id.
    """
    scores = fused_scores(model, np.asarray(x_test, dtype=np.float64), prototypes, weights)[0]
    best = int(np.argmax(scores))
    return Prediction(index=index, class_id=prototypes.class_ids[best], scores=scores)


def predict(
    model: EmbeddingModel,
    x_test,
    prototypes: PrototypeEmbeddings,
    weights: FusionWeights,
) -> list[Prediction]:
    """Batch inference over the columns of x_test."""
    scores = fused_scores(model, x_test, prototypes, weights)
    return [
        Prediction(index=i, class_id=prototypes.class_ids[int(np.argmax(row))], scores=row)
        for i, row in enumerate(scores)
    ]


def predict_split(
    dataset: ZslDataset,
    model: EmbeddingModel,
    prototypes: PrototypeEmbeddings,
    weights: FusionWeights,
    classes,
) -> tuple[list[Prediction], np.ndarray]:
    """Predict every instance of the given classes; returns (predictions, truth)."""
    idx = np.flatnonzero(np.isin(dataset.labels, tuple(classes)))
    preds = predict(model, dataset.features[:, idx], prototypes, weights)
    return preds, dataset.labels[idx]


def simplex_grid(k: int, step: float) -> list[tuple[float, ...]]:
    """All weight vectors with entries on a step grid summing to 1.

    Lexicographically ascending; step must divide 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < step <= 1:
        raise ValueError(f"grid step must be in (0, 1], got {step}")
    m = round(1.0 / step)
    if abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} does not divide 1")

    def build(prefix: list[int], remaining: int, slots: int):
        if slots == 1:
            yield prefix + [remaining]
            return
        for first in range(remaining + 1):
            yield from build(prefix + [first], remaining - first, slots - 1)

    return [tuple(i / m for i in combo) for combo in build([], m, k)]


def _mean_per_class_accuracy(preds: list[Prediction], truth: np.ndarray) -> float:
    correct: dict[int, int] = {}
    total: dict[int, int] = {}
    for pred, true in zip(preds, truth):
        true = int(true)
        total[true] = total.get(true, 0) + 1
        if pred.class_id == true:
            correct[true] = correct.get(true, 0) + 1
    accs = [correct.get(c, 0) / total[c] for c in sorted(total)]
    return float(np.mean(accs))


def weight_grid_scores(
    dataset: ZslDataset,
    selection=None,
    d: int = 2,
    grid_step: float = 0.1,
    val_fraction: float = 0.2,
    seed: int = 0,
    repeats: int = 1,
    method: str = "MBFA",
    reg: float = DEFAULT_MCCA_REG,
) -> list[tuple[tuple[float, ...], float]]:
    """Mean validation accuracy of every simplex grid point.

    Each repeat draws a fresh class-level train/validation split of the seen
    classes (seed + r), fits once, and scores all candidates on it; results
    are averaged over repeats.  Candidate order is lexicographic.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    names = _resolve_selection(dataset, selection)
    candidates = simplex_grid(len(names), grid_step)
    sums = np.zeros(len(candidates))
    for r in range(repeats):
        train_cls, val_cls = split_validation(dataset.seen_classes, val_fraction, seed + r)
        model, prototypes = train(
            dataset, names, d, method=method, reg=reg,
            train_classes=train_cls, target_classes=val_cls,
        )
        idx = np.flatnonzero(np.isin(dataset.labels, val_cls))
        truth = dataset.labels[idx]
        per_type = []
        x_val = dataset.features[:, idx]
        embedded = (model.projections[0].T @ (x_val - model.means[0][:, None])).T
        for table in prototypes.tables:
            per_type.append(_similarity_matrix(embedded, table))
        for ci, alphas in enumerate(candidates):
            fused = np.zeros_like(per_type[0])
            for alpha, sims in zip(alphas, per_type):
                fused += alpha * sims
            pred_ids = np.asarray(prototypes.class_ids)[np.argmax(fused, axis=1)]
            accs = []
            for c in val_cls:
                mask = truth == c
                accs.append(float(np.mean(pred_ids[mask] == c)))
            sums[ci] += float(np.mean(accs))
    return [(alphas, float(s / repeats)) for alphas, s in zip(candidates, sums)]


def grid_search_weights(
    dataset: ZslDataset,
    selection=None,
    d: int = 2,
    grid_step: float = 0.1,
    val_fraction: float = 0.2,
    seed: int = 0,
    repeats: int = 1,
    method: str = "MBFA",
    reg: float = DEFAULT_MCCA_REG,
) -> FusionWeights:
    """Pick fusion weights by validation grid search.

    With a single side-information type the weight is (1.0) and no training
    happens.  Ties go to the first candidate in lexicographic grid order.
    The caller is expected to retrain on all seen classes afterwards.
    """
    names = _resolve_selection(dataset, selection)
    if len(names) == 1:
        return FusionWeights((1.0,))
    scored = weight_grid_scores(
        dataset, names, d, grid_step, val_fraction, seed, repeats, method, reg
    )
    best = max(range(len(scored)), key=lambda i: scored[i][1])
    # max() keeps the first of equal scores, i.e. lexicographic tie-break
    return FusionWeights(scored[best][0])


def sweep_dimension(
    dataset: ZslDataset,
    selection=None,
    weights: FusionWeights | None = None,
    d_list=(),
    method: str = "MBFA",
    reg: float = DEFAULT_MCCA_REG,
) -> list[tuple[int, float]]:
    """Mean per-class unseen accuracy for each embedding dimension.

    One full train + evaluate per d with identical splits and weights; the
    curve is reported as-is, no shape is assumed.
    """
    names = _resolve_selection(dataset, selection)
    if weights is None:
        weights = FusionWeights.uniform(len(names))
    if not d_list:
        raise ValueError("d_list must not be empty")
    results = []
    for d in d_list:
        model, prototypes = train(dataset, names, int(d), method=method, reg=reg)
        preds, truth = predict_split(
            dataset, model, prototypes, weights, dataset.unseen_classes
        )
        results.append((int(d), _mean_per_class_accuracy(preds, truth)))
    return results
