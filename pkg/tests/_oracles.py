"""Independent brute-force reference implementations used only by tests.

These deliberately avoid the library's code paths (and fast numpy
reductions where a scan is the point) so that agreement is meaningful.
"""

import numpy as np


def jacobi_eigenvalues(sym, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Plain textbook sweep over all (p, q) pairs; returns eigenvalues sorted
    descending.  Independent of any LAPACK eigen/SVD driver.
    """
    a = np.array(sym, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    for _ in range(max_sweeps):
        off = np.sqrt((a**2).sum() - (np.diag(a) ** 2).sum())
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
    return np.sort(np.diag(a))[::-1]


def singular_values_via_gram(matrix, tol=1e-14):
    """Singular values from a Jacobi eigendecomposition of M^T M."""
    m = np.asarray(matrix, dtype=np.float64)
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    eigs = jacobi_eigenvalues(gram, tol=tol)
    return np.sqrt(np.clip(eigs, 0.0, None))


def max_abs_scan(matrix):
    """Exhaustive scan for the largest absolute entry."""
    best = 0.0
    for row in np.asarray(matrix):
        for v in row:
            if abs(v) > best:
                best = abs(v)
    return best


def column_l1_scan(matrix):
    """Exhaustive scan for the largest column l1 norm."""
    a = np.asarray(matrix)
    best = 0.0
    for k in range(a.shape[1]):
        total = 0.0
        for i in range(a.shape[0]):
            total += abs(a[i, k])
        best = max(best, total)
    return best


def incoherence_scan(left, right, rank):
    """Direct evaluation of the smallest incoherence parameter."""
    outer = np.zeros((left.shape[0], right.shape[0]))
    for ell in range(rank):
        for i in range(left.shape[0]):
            for j in range(right.shape[0]):
                outer[i, j] += left[i, ell] * right[j, ell]
    peak = max_abs_scan(outer)
    m, n = outer.shape
    return peak**2 * m * n / rank


def random_svt_instance(rng, max_m=30, max_n=60):
    """Small random observation matrix plus an unclipped linear-shrinkage
    SVT estimate at a random threshold below the top singular value."""
    from svtfair import ObservationMatrix, ShrinkageFn, svt

    m = int(rng.integers(5, max_m + 1))
    n = int(rng.integers(5, max_n + 1))
    truth = rng.uniform(-1, 1, (m, n))
    mask = rng.random((m, n)) < rng.uniform(0.3, 1.0)
    if not mask.any():
        mask[0, 0] = True
    obs = ObservationMatrix.from_observed(truth, mask)
    top = float(np.linalg.svd(obs.values, compute_uv=False)[0])
    tau = float(rng.uniform(0.0, top)) if top > 0 else 0.0
    beta = float(rng.uniform(0.5, 3.0))
    est = svt(obs, tau, ShrinkageFn.linear(beta), clip=False)
    return obs, est
