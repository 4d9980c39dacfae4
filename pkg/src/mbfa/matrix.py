"""Dense matrix utilities and a deterministic symmetric eigensolver.

Matrices follow the dimensions-by-instances convention: an array of shape
(p, N) holds N column vectors of dimension p.  All public functions are pure;
they never mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

EIG_CONVERGENCE_TOL = 1e-12
EIG_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Eigensolver exceeded its sweep budget."""

    def __init__(self, off_norm: float, sweeps: int):
        super().__init__(
            f"Jacobi sweep budget ({sweeps}) exhausted; "
            f"final off-diagonal norm {off_norm:.3e}"
        )
        self.off_norm = off_norm


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a float64 row-major 2-D array.

    Rejects empty shapes and non-finite entries.
    """
    arr = np.array(values, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def center(x) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the per-row mean from every column.

    Returns (centered matrix, row means).
    """
    x = as_matrix(x)
    mean = x.mean(axis=1)
    return x - mean[:, None], mean


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: {a.shape[0]}x{a.shape[1]} @ {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a), "fro"))


@dataclass(frozen=True)
class EigenResult:
    """Leading eigenpairs of a symmetric matrix.

    eigenvalues are descending; eigenvectors are the matching unit-norm
    columns.  Each column is sign-fixed so that its entry of largest
    magnitude is non-negative (first such entry on ties), which makes the
    output deterministic.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@njit(cache=True)
def _jacobi_sweeps(a, v, stop, skip, max_sweeps):  # pragma: no cover - compiled
    """Cyclic-by-row Jacobi rotations, in place.  Returns sweeps used or -1."""
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off2 += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off2) <= stop:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            vectors[:, j] = -col
    return vectors


def symmetric_eig(s, d: int) -> EigenResult:
    """Top-d eigenpairs of a symmetric matrix, deterministically ordered.

    Uses cyclic Jacobi rotations; converges when the off-diagonal Frobenius
    norm drops below EIG_CONVERGENCE_TOL times the input norm.

    Raises ValueError for non-square/asymmetric input or d out of range,
    and ConvergenceError if the sweep budget is exhausted.
    """
    s = as_matrix(s)
    n = s.shape[0]
    if s.shape[1] != n:
        raise ValueError(f"matrix must be square, got {s.shape[0]}x{s.shape[1]}")
    norm = float(np.linalg.norm(s, "fro"))
    asym = float(np.linalg.norm(s - s.T, "fro"))
    if asym > SYMMETRY_TOL * max(norm, 1e-300):
        raise ValueError(
            f"matrix is not symmetric: ||S - S^T|| = {asym:.3e} vs ||S|| = {norm:.3e}"
        )
    if not 1 <= d <= n:
        raise ValueError(f"d must be in [1, {n}], got {d}")

    a = 0.5 * (s + s.T)
    v = np.eye(n)
    if norm > 0.0:
        stop = EIG_CONVERGENCE_TOL * norm
        sweeps = _jacobi_sweeps(a, v, stop, stop / n, EIG_MAX_SWEEPS)
        if sweeps < 0:
            off = np.linalg.norm(a - np.diag(np.diagonal(a)), "fro")
            raise ConvergenceError(float(off), EIG_MAX_SWEEPS)

    eigenvalues = np.diagonal(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")[:d]
    return EigenResult(
        eigenvalues=eigenvalues[order],
        eigenvectors=_fix_signs(v[:, order].copy()),
    )


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix from CSV: one row per feature dimension, no header."""
    rows: list[list[float]] = []
    width = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width < 0:
                width = len(fields)
            elif len(fields) != width:
                raise ValueError(
                    f"{path}: ragged CSV at line {lineno}: "
                    f"expected {width} fields, got {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise ValueError(f"{path}: non-numeric value at line {lineno}") from None
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return as_matrix(rows, name=str(path))


def save_matrix_csv(path, x) -> None:
    """Write a matrix as CSV at full precision (17 significant digits)."""
    x = as_matrix(x)
    with open(path, "w", encoding="utf-8") as fh:
        for row in x:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")
