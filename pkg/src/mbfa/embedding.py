"""Multi-view embedding fitters.

MBFA projects c centered views into a shared d-dimensional space by taking
the top eigenvectors of the block cross-covariance matrix whose (i, j) block
is X_i X_j^T for i != j and zero on the diagonal.  The stacked projection
matrix has orthonormal columns, which maximizes the total cross-view
covariance.  IBFA is the two-view case.  The MCCA baseline maximizes total
correlation instead: it whitens each view with its own (ridge-regularized)
covariance before the same eigenproblem, so its stacked projections satisfy
W^T D W = I with D the block-diagonal within-view covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .matrix import as_matrix, center, symmetric_eig

DEFAULT_MCCA_REG = 1e-6


class SingularityError(ValueError):
    """A regularized within-view covariance block is not positive definite."""


@dataclass(frozen=True)
class CrossCovariance:
    """Block cross-covariance matrix with zero diagonal blocks.

    offsets[i] is the first row/column of view i inside the stacked matrix.
    """

    offsets: tuple[int, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class EmbeddingModel:
    """Fitted multi-view projection into a shared d-dimensional space.

    projections[i] maps centered view-i vectors (dimension view_dims[i]) to
    the shared space; means[i] is the per-view training mean subtracted
    before projection.  eigenvalues holds the d retained eigenvalues in
    descending order.  For MBFA the stacked projection matrix has
    orthonormal columns; for MCCA it is orthonormal under the whitening
    metric instead.
    """

    method: str
    d: int
    view_dims: tuple[int, ...]
    means: tuple[np.ndarray, ...]
    projections: tuple[np.ndarray, ...]
    eigenvalues: np.ndarray

    @property
    def num_views(self) -> int:
        return len(self.view_dims)

    def stacked(self) -> np.ndarray:
        """The (sum of view_dims) x d stacked projection matrix."""
        return np.vstack(self.projections)


def _check_views(views: list[np.ndarray]) -> int:
    if len(views) < 2:
        raise ValueError(f"need at least 2 views, got {len(views)}")
    n = views[0].shape[1]
    for i, v in enumerate(views[1:], start=1):
        if v.shape[1] != n:
            raise ValueError(
                f"views misaligned: view 0 has {n} columns, view {i} has {v.shape[1]}"
            )
    return n


def _offsets(dims: list[int]) -> tuple[int, ...]:
    out = [0]
    for p in dims[:-1]:
        out.append(out[-1] + p)
    return tuple(out)


def build_cross_covariance(views) -> CrossCovariance:
    """Assemble the zero-diagonal block matrix of pairwise X_i X_j^T.

    Views must already be centered and share the same column count.  Each
    block pair is computed once and mirrored, so the result is symmetric to
    the bit.
    """
    views = [as_matrix(v, f"view {i}") for i, v in enumerate(views)]
    _check_views(views)
    dims = [v.shape[0] for v in views]
    offs = _offsets(dims)
    total = sum(dims)
    m = np.zeros((total, total))
    for i in range(len(views)):
        for j in range(i + 1, len(views)):
            block = views[i] @ views[j].T
            m[offs[i]:offs[i] + dims[i], offs[j]:offs[j] + dims[j]] = block
            m[offs[j]:offs[j] + dims[j], offs[i]:offs[i] + dims[i]] = block.T
    return CrossCovariance(offsets=offs, matrix=m)


def fit_mbfa(views, d: int) -> EmbeddingModel:
    """Fit MBFA on raw (uncentered) views.

    Centers each view, eigendecomposes the cross-covariance matrix, and
    slices the top-d stacked eigenvectors into per-view projection blocks.
    """
    views = [as_matrix(v, f"view {i}") for i, v in enumerate(views)]
    _check_views(views)
    dims = [v.shape[0] for v in views]
    total = sum(dims)
    if not 1 <= d <= total:
        raise ValueError(f"d must be in [1, {total}], got {d}")

    centered, means = zip(*(center(v) for v in views))
    cov = build_cross_covariance(list(centered))
    eig = symmetric_eig(cov.matrix, d)
    projections = _slice_stacked(eig.eigenvectors, dims)
    return EmbeddingModel(
        method="MBFA",
        d=d,
        view_dims=tuple(dims),
        means=tuple(means),
        projections=projections,
        eigenvalues=eig.eigenvalues,
    )


def fit_ibfa(x1, x2, d: int) -> EmbeddingModel:
    """Two-view special case of fit_mbfa."""
    return fit_mbfa([x1, x2], d)


def fit_mcca(views, d: int, reg: float = DEFAULT_MCCA_REG) -> EmbeddingModel:
    """Fit the MCCA baseline: generalized eigenproblem M w = lambda D w.

    D is the block-diagonal within-view covariance, each block ridged by
    reg * (trace / dim) * I so the symmetric reduction D^{-1/2} M D^{-1/2}
    stays well posed.  Raises SingularityError when a block is still not
    positive definite.
    """
    if reg < 0:
        raise ValueError(f"reg must be nonnegative, got {reg}")
    views = [as_matrix(v, f"view {i}") for i, v in enumerate(views)]
    _check_views(views)
    dims = [v.shape[0] for v in views]
    total = sum(dims)
    if not 1 <= d <= total:
        raise ValueError(f"d must be in [1, {total}], got {d}")

    centered, means = zip(*(center(v) for v in views))
    cov = build_cross_covariance(list(centered))

    whiteners = []
    for i, xc in enumerate(centered):
        block = xc @ xc.T
        ridge = reg * float(np.trace(block)) / dims[i]
        block = block + ridge * np.eye(dims[i])
        eig = symmetric_eig(block, dims[i])
        w_max = float(eig.eigenvalues[0])
        w_min = float(eig.eigenvalues[-1])
        if w_min <= 1e-13 * max(w_max, 1e-300):
            raise SingularityError(
                f"view {i} covariance is singular after regularization "
                f"(smallest eigenvalue {w_min:.3e}); increase reg"
            )
        inv_root = (eig.eigenvectors / np.sqrt(eig.eigenvalues)) @ eig.eigenvectors.T
        whiteners.append(0.5 * (inv_root + inv_root.T))

    offs = cov.offsets
    k = np.zeros_like(cov.matrix)
    for i in range(len(views)):
        for j in range(i + 1, len(views)):
            block = whiteners[i] @ cov.matrix[
                offs[i]:offs[i] + dims[i], offs[j]:offs[j] + dims[j]
            ] @ whiteners[j]
            k[offs[i]:offs[i] + dims[i], offs[j]:offs[j] + dims[j]] = block
            k[offs[j]:offs[j] + dims[j], offs[i]:offs[i] + dims[i]] = block.T

    eig = symmetric_eig(k, d)
    blocks = _slice_stacked(eig.eigenvectors, dims)
    projections = tuple(whiteners[i] @ blocks[i] for i in range(len(views)))
    return EmbeddingModel(
        method="MCCA",
        d=d,
        view_dims=tuple(dims),
        means=tuple(means),
        projections=projections,
        eigenvalues=eig.eigenvalues,
    )


def _slice_stacked(stacked: np.ndarray, dims: list[int]) -> tuple[np.ndarray, ...]:
    out = []
    start = 0
    for p in dims:
        out.append(stacked[start:start + p].copy())
        start += p
    return tuple(out)


def project(model: EmbeddingModel, view_index: int, x) -> np.ndarray:
    """Embed one view-i vector: W_i^T (x - mean_i)."""
    if not 0 <= view_index < model.num_views:
        raise ValueError(
            f"view index {view_index} out of range for {model.num_views} views"
        )
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.view_dims[view_index]:
        raise ValueError(
            f"expected vector of length {model.view_dims[view_index]}, "
            f"got shape {x.shape}"
        )
    return model.projections[view_index].T @ (x - model.means[view_index])


def objective_value(model: EmbeddingModel, views) -> float:
    """Total cross-view covariance sum(i != j) tr(W_i^T X_i X_j^T W_j).

    Views are centered here before evaluation.  For a freshly fitted MBFA
    model on its training views this equals the sum of the retained
    eigenvalues.
    """
    views = [as_matrix(v, f"view {i}") for i, v in enumerate(views)]
    if len(views) != model.num_views:
        raise ValueError(
            f"model has {model.num_views} views, got {len(views)} matrices"
        )
    _check_views(views)
    for i, v in enumerate(views):
        if v.shape[0] != model.view_dims[i]:
            raise ValueError(
                f"view {i} has {v.shape[0]} rows, model expects {model.view_dims[i]}"
            )
    embedded = [model.projections[i].T @ center(v)[0] for i, v in enumerate(views)]
    total = 0.0
    for i in range(len(views)):
        for j in range(len(views)):
            if i != j:
                total += float(np.sum(embedded[i] * embedded[j]))
    return total


def orthonormality_diagnostics(model: EmbeddingModel) -> dict:
    """Max deviation of the projection Gram matrices from identity.

    'stacked' measures W^T W - I over the full stacked matrix; 'per_view'
    measures each W_i^T W_i - I.  MBFA constrains only the stacked form, so
    the per-view numbers are diagnostic and can be large.
    """
    stacked = model.stacked()
    eye = np.eye(model.d)
    return {
        "stacked": float(np.abs(stacked.T @ stacked - eye).max()),
        "per_view": [
            float(np.abs(w.T @ w - eye).max()) for w in model.projections
        ],
    }


def model_to_dict(model: EmbeddingModel) -> dict:
    return {
        "method": model.method,
        "d": model.d,
        "view_dims": list(model.view_dims),
        "means": [m.tolist() for m in model.means],
        "projections": [w.tolist() for w in model.projections],
        "eigenvalues": model.eigenvalues.tolist(),
    }


def model_from_dict(doc: dict) -> EmbeddingModel:
    method = doc["method"]
    if method not in ("MBFA", "MCCA"):
        raise ValueError(f"unknown method tag {method!r}")
    view_dims = tuple(int(p) for p in doc["view_dims"])
    means = tuple(np.asarray(m, dtype=np.float64) for m in doc["means"])
    projections = tuple(np.asarray(w, dtype=np.float64) for w in doc["projections"])
    if not len(view_dims) == len(means) == len(projections):
        raise ValueError("inconsistent view counts in model document")
    for i, (p, m, w) in enumerate(zip(view_dims, means, projections)):
        if m.shape != (p,) or w.shape != (p, int(doc["d"])):
            raise ValueError(f"inconsistent shapes for view {i} in model document")
    return EmbeddingModel(
        method=method,
        d=int(doc["d"]),
        view_dims=view_dims,
        means=means,
        projections=projections,
        eigenvalues=np.asarray(doc["eigenvalues"], dtype=np.float64),
    )


def save_model(path, model: EmbeddingModel) -> None:
    """Write the model as JSON; floats keep their exact round-trip repr."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> EmbeddingModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
