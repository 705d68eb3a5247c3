"""User-based K-nearest-neighbour collaborative filtering.

Similarity between two users is the adjusted cosine: the cosine of their
rows after each column (item) has had its mean subtracted.  Predictions
are the similarity-weighted average of the K most similar users' rows,
normalized by the total absolute similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import as_matrix

__all__ = [
    "KnnConfig",
    "adjusted_cosine_similarity",
    "similarity_to_row",
    "knn_predict",
    "knn_predict_all",
]


@dataclass(frozen=True)
class KnnConfig:
    k: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be at least 1")


def _centered(matrix: np.ndarray) -> np.ndarray:
    return matrix - matrix.mean(axis=0)


def adjusted_cosine_similarity(matrix, i: int, j: int) -> float:
    """Cosine of rows i and j after subtracting column means.

    A row whose centered version is all-zero carries no directional
    information; its similarity to anything is defined as 0.
    """
    b = as_matrix(matrix)
    m = b.shape[0]
    for idx in (i, j):
        if not 0 <= idx < m:
            raise IndexError(f"row index {idx} out of range for {m} rows")
    c = _centered(b)
    ni, nj = np.linalg.norm(c[i]), np.linalg.norm(c[j])
    if ni == 0.0 or nj == 0.0:
        return 0.0
    return float(c[i] @ c[j] / (ni * nj))


def similarity_to_row(matrix, i: int) -> np.ndarray:
    """Adjusted cosine similarity of every row to row i (entry i is 1 when
    defined, 0 for degenerate rows)."""
    b = as_matrix(matrix)
    if not 0 <= i < b.shape[0]:
        raise IndexError(f"row index {i} out of range")
    c = _centered(b)
    norms = np.linalg.norm(c, axis=1)
    ni = norms[i]
    if ni == 0.0:
        return np.zeros(b.shape[0])
    sims = c @ c[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, sims / (norms * ni), 0.0)
    return sims


def knn_predict(matrix, i: int, cfg: KnnConfig = KnnConfig()) -> np.ndarray:
    """Predicted row for user i from its K nearest neighbours.

    Neighbours are the k rows j != i with the highest similarity, ties at
    the cut broken toward the lower row index.  The prediction is
    ``sum_j sim(i,j) * row_j / sum_j |sim(i,j)|``; when every selected
    similarity is 0 it falls back to the column means.
    """
    b = as_matrix(matrix)
    m = b.shape[0]
    if cfg.k >= m:
        raise ValidationError(f"k={cfg.k} must be smaller than the number of rows {m}")
    sims = similarity_to_row(b, i)
    order = np.argsort(-sims, kind="stable")
    order = order[order != i]
    chosen = order[: cfg.k]
    weights = sims[chosen]
    denom = np.abs(weights).sum()
    if denom == 0.0:
        return b.mean(axis=0)
    return weights @ b[chosen] / denom


def knn_predict_all(matrix, cfg: KnnConfig = KnnConfig(), chunk: int = 512) -> np.ndarray:
    """Predicted rows for every user, computed in row chunks.

    Equivalent to stacking ``knn_predict`` over all rows but avoids
    re-centering per query and bounds the similarity matrix memory.
    """
    b = as_matrix(matrix)
    m = b.shape[0]
    if cfg.k >= m:
        raise ValidationError(f"k={cfg.k} must be smaller than the number of rows {m}")
    c = _centered(b)
    norms = np.linalg.norm(c, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    col_means = b.mean(axis=0)
    out = np.empty_like(b)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        sims = (c[start:stop] @ c.T) / (safe[start:stop, None] * safe[None, :])
        sims[norms[start:stop] == 0, :] = 0.0
        sims[:, norms == 0] = 0.0
        for local, i in enumerate(range(start, stop)):
            row_sims = sims[local]
            order = np.argsort(-row_sims, kind="stable")
            order = order[order != i]
            chosen = order[: cfg.k]
            weights = row_sims[chosen]
            denom = np.abs(weights).sum()
            out[i] = col_means if denom == 0.0 else weights @ b[chosen] / denom
    return out
