"""Dense matrix primitives: norms, row distances, and the SVD.

Everything operates on plain float64 ``numpy`` arrays.  Matrices are
row-major with shape ``(m, n)`` where rows index individuals and columns
index features.  Partially observed data is carried by
:class:`ObservationMatrix`, which stores the zero-imputed dense values
together with a boolean observation mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "ObservationMatrix",
    "SpectralDecomposition",
    "as_matrix",
    "svd",
    "entrywise_max_abs",
    "column_l1_max",
    "lq_row_distance",
    "nuclear_norm",
]


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising ValidationError otherwise."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise ValidationError(f"{name} must be nonempty")
    if not np.isfinite(a).all():
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return a


@dataclass(frozen=True)
class ObservationMatrix:
    """Partially observed data: zero-imputed values plus an observation mask.

    ``values[i, j]`` is the observed entry for observed cells and exactly 0.0
    elsewhere, so ``values`` is already the zero-imputed matrix.  Observed
    entries must lie in [-1, 1].
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = as_matrix(self.values, "values")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValidationError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        observed = values[mask]
        if observed.size and (np.abs(observed) > 1.0).any():
            raise ValidationError("observed entries must lie in [-1, 1]")
        if values[~mask].any():
            raise ValidationError("unobserved cells must be stored as 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_observed(cls, values, mask) -> "ObservationMatrix":
        """Build from raw values, zeroing whatever the mask marks as missing."""
        a = as_matrix(values, "values")
        m = np.asarray(mask, dtype=bool)
        if m.shape != a.shape:
            raise ValidationError(
                f"mask shape {m.shape} does not match values shape {a.shape}"
            )
        return cls(np.where(m, a, 0.0), m)

    @classmethod
    def fully_observed(cls, values) -> "ObservationMatrix":
        a = as_matrix(values, "values")
        return cls(a, np.ones(a.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def p_hat(self) -> float:
        """Realized observation fraction |Omega| / (m * n)."""
        return self.n_observed / self.mask.size


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD: descending singular values with column-orthonormal factors.

    ``left_vectors`` is m x k, ``right_vectors`` is n x k, and the input is
    ``left_vectors @ diag(singular_values) @ right_vectors.T`` with
    k = min(m, n).
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.singular_values.size

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def svd(matrix, tol: float = 1e-10) -> SpectralDecomposition:
    """Full singular value decomposition with deterministic vector signs.

    Uses LAPACK's divide-and-conquer driver.  Each left singular vector is
    flipped so its largest-magnitude component is non-negative (the paired
    right vector is flipped with it), making outputs reproducible across
    runs.  Column orthonormality of both factors is verified against ``tol``.
    """
    a = as_matrix(matrix)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed to converge on a {a.shape[0]}x{a.shape[1]} matrix "
            f"(LAPACK gesdd iteration limit): {exc}"
        ) from exc

    # sign convention: largest-|entry| component of each left vector >= 0
    anchor = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[anchor, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    vt = vt * signs[:, None]

    for factor, label in ((u, "left"), (vt.T, "right")):
        gram_err = np.abs(factor.T @ factor - np.eye(factor.shape[1])).max()
        if gram_err > max(tol, 1e-8):
            raise NumericalError(
                f"{label} singular vectors lost orthonormality (error {gram_err:.3e})"
            )

    return SpectralDecomposition(
        singular_values=s, left_vectors=u, right_vectors=vt.T
    )


def entrywise_max_abs(matrix) -> float:
    """max_ij |M_ij| (the entrywise infinity norm)."""
    a = as_matrix(matrix)
    return float(np.abs(a).max())


def column_l1_max(matrix) -> float:
    """max_k sum_i |M_ik|: the largest column l1 norm."""
    a = as_matrix(matrix)
    return float(np.abs(a).sum(axis=0).max())


def lq_row_distance(matrix, i: int, j: int, q: int) -> float:
    """||row_i - row_j||_q for q in {1, 2}."""
    a = as_matrix(matrix)
    if q not in (1, 2):
        raise ValidationError(f"q must be 1 or 2, got {q}")
    m = a.shape[0]
    for idx in (i, j):
        if not 0 <= idx < m:
            raise IndexError(f"row index {idx} out of range for {m} rows")
    diff = a[i] - a[j]
    return float(np.abs(diff).sum() if q == 1 else np.sqrt(diff @ diff))


def nuclear_norm(matrix) -> float:
    """Sum of singular values."""
    a = as_matrix(matrix)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed while computing nuclear norm: {exc}") from exc
    return float(s.sum())
