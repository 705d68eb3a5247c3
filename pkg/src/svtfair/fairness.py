"""Individual-fairness certificates and metrics for SVT pre-processing.

The central quantity (``k2`` in audit reports) is the Lipschitz constant
the pre-processing step contributes: row differences of the reconstruction
are bounded in l2 by ``k2`` times the l1 row differences of the
zero-imputed observations.  A downstream algorithm that is 1-Lipschitz on
its input therefore inherits fairness constant ``k2`` with respect to the
raw data.  Empirical fairness is measured by the mean pairwise ratio of
output distance to input distance; smaller means fairer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError
from .estimation import SvtEstimate
from .linalg import ObservationMatrix, as_matrix, column_l1_max, entrywise_max_abs

__all__ = [
    "svt_lipschitz_constant",
    "svt_lipschitz_bound",
    "incoherence_parameter",
    "FairnessCertificate",
    "certify",
    "IfRatio",
    "if_ratio",
    "pairwise_ratio_sample",
    "BoundCheckReport",
    "check_observed_fairness_bound",
    "check_latent_fairness_bound",
    "random_unit_functional",
    "build_audit_report",
]

BOUND_TOL = 1e-8


def svt_lipschitz_constant(obs: ObservationMatrix, estimate: SvtEstimate) -> float:
    """Lipschitz constant of the SVT map from l1 row distances on the
    observations to l2 row distances on the reconstruction.

    Computed as the entrywise max of
    ``sum_{kept} psi(sigma) / sigma^2 * u v^T`` times ``sqrt(n)`` times the
    largest column l1 norm of the zero-imputed observations.  An empty kept
    set gives 0.
    """
    dec = estimate.decomposition
    if dec.left_vectors.shape[0] != obs.shape[0] or dec.right_vectors.shape[0] != obs.shape[1]:
        raise ValidationError("estimate does not match the observation matrix shape")
    kept = estimate.kept_set
    if kept.size == 0:
        return 0.0
    sigma = dec.singular_values[kept]
    coeff = estimate.psi(sigma) / sigma**2
    weighted = (dec.left_vectors[:, kept] * coeff) @ dec.right_vectors[:, kept].T
    n = obs.shape[1]
    return entrywise_max_abs(weighted) * np.sqrt(n) * column_l1_max(obs.values)


def svt_lipschitz_bound(
    beta: float, rank_kept: int, n_individuals: int, tau: float
) -> float:
    """Incoherence-based bound beta * sqrt(rank * m) / tau on the constant
    above, valid when shrinkage is linear with slope beta."""
    if tau <= 0:
        raise ValidationError("bound undefined at zero threshold")
    if beta <= 0 or rank_kept <= 0 or n_individuals <= 0:
        raise ValidationError("beta, rank_kept and n_individuals must be positive")
    return float(beta * np.sqrt(rank_kept * n_individuals) / tau)


def incoherence_parameter(estimate: SvtEstimate) -> float:
    """Smallest mu_1 such that the kept singular vectors satisfy the strong
    incoherence condition ||sum u v^T||_max <= sqrt(mu_1 r / (m n))."""
    kept = estimate.kept_set
    if kept.size == 0:
        raise ValidationError("no kept components")
    dec = estimate.decomposition
    outer_sum = dec.left_vectors[:, kept] @ dec.right_vectors[:, kept].T
    m, n = outer_sum.shape
    return float(entrywise_max_abs(outer_sum) ** 2 * m * n / kept.size)


@dataclass(frozen=True)
class FairnessCertificate:
    """Audit summary for one SVT estimate.

    ``bound_satisfied`` records whether k2 <= k2_bound held; a violation is
    reported, never silently dropped (the bound's incoherence premise need
    not hold on real data).
    """

    k2: float
    rank_kept: int
    tau: float
    k2_bound: float | None = None
    mu1: float | None = None
    beta: float | None = None
    bound_satisfied: bool | None = None

    def to_json_dict(self) -> dict:
        return {
            "k2": self.k2,
            "k2_bound": self.k2_bound,
            "mu1": self.mu1,
            "rank_kept": self.rank_kept,
            "tau": self.tau,
            "beta": self.beta,
            "bound_satisfied": self.bound_satisfied,
        }


def certify(obs: ObservationMatrix, estimate: SvtEstimate) -> FairnessCertificate:
    """Compute the certificate: k2 always, the incoherence parameter when
    components were kept, and the rank bound when shrinkage is linear."""
    k2 = svt_lipschitz_constant(obs, estimate)
    mu1 = incoherence_parameter(estimate) if estimate.rank_kept else None
    k2_bound = None
    beta = None
    if estimate.psi.kind == "linear":
        beta = estimate.psi.beta
        if estimate.tau > 0 and estimate.rank_kept > 0:
            k2_bound = svt_lipschitz_bound(
                beta, estimate.rank_kept, obs.shape[0], estimate.tau
            )
    satisfied = None if k2_bound is None else bool(k2 <= k2_bound + BOUND_TOL)
    return FairnessCertificate(
        k2=k2,
        rank_kept=estimate.rank_kept,
        tau=estimate.tau,
        k2_bound=k2_bound,
        mu1=mu1,
        beta=beta,
        bound_satisfied=satisfied,
    )


@dataclass(frozen=True)
class IfRatio:
    """Mean pairwise output/input distance ratio over the usable pairs."""

    value: float
    pairs_used: int
    pairs_skipped_zero_denominator: int


def _pair_distances(predictions, reference, q: int):
    pred = as_matrix(predictions, "predictions")
    ref = as_matrix(reference, "reference")
    if pred.shape[0] != ref.shape[0]:
        raise ValidationError("predictions and reference must have the same row count")
    if q not in (1, 2):
        raise ValidationError(f"q must be 1 or 2, got {q}")
    d_pred = cdist(pred, pred, "euclidean")
    d_ref = cdist(ref, ref, "cityblock" if q == 1 else "euclidean")
    return d_pred, d_ref


def if_ratio(predictions, reference, q: int) -> IfRatio:
    """Mean over ordered pairs (i, j), i != j, of
    ``||pred_i - pred_j||_2 / ||ref_i - ref_j||_q``.

    Pairs with identical reference rows contribute 0/0 and are skipped and
    counted rather than averaged.
    """
    d_pred, d_ref = _pair_distances(predictions, reference, q)
    m = d_pred.shape[0]
    off_diag = ~np.eye(m, dtype=bool)
    usable = off_diag & (d_ref > 0)
    used = int(usable.sum())
    skipped = int(off_diag.sum()) - used
    if used == 0:
        raise ValidationError("degenerate reference matrix: all pair distances are 0")
    value = float((d_pred[usable] / d_ref[usable]).mean())
    return IfRatio(value, used, skipped)


def pairwise_ratio_sample(
    predictions,
    reference,
    q: int,
    num_pairs: int,
    seed: int,
    max_redraws: int | None = None,
) -> np.ndarray:
    """Ratios for ``num_pairs`` distinct unordered pairs drawn uniformly.

    Zero-denominator pairs are redrawn; the retry budget defaults to
    ``50 * num_pairs + 1000`` draws, and exhausting it raises.
    """
    pred = as_matrix(predictions, "predictions")
    ref = as_matrix(reference, "reference")
    if pred.shape[0] != ref.shape[0]:
        raise ValidationError("predictions and reference must have the same row count")
    if num_pairs < 1:
        raise ValidationError("num_pairs must be at least 1")
    m = pred.shape[0]
    total = m * (m - 1) // 2
    if num_pairs > total:
        raise ValidationError(f"cannot draw {num_pairs} distinct pairs from {total}")
    if max_redraws is None:
        max_redraws = 50 * num_pairs + 1000

    rng = np.random.default_rng(seed)
    seen: set[tuple[int, int]] = set()
    ratios = np.empty(num_pairs)
    draws = 0
    count = 0
    while count < num_pairs:
        if draws >= max_redraws:
            raise ValidationError(
                f"exhausted {max_redraws} draws finding pairs with nonzero distance"
            )
        i, j = rng.integers(0, m, size=2)
        draws += 1
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        if q == 1:
            den = float(np.abs(ref[i] - ref[j]).sum())
        else:
            diff = ref[i] - ref[j]
            den = float(np.sqrt(diff @ diff))
        if den == 0.0:
            seen.add(key)  # unusable pair, never redraw it
            continue
        seen.add(key)
        num = float(np.linalg.norm(pred[i] - pred[j]))
        ratios[count] = num / den
        count += 1
    return ratios


@dataclass(frozen=True)
class BoundCheckReport:
    """Outcome of checking a fairness inequality over all ordered pairs."""

    pairs_checked: int
    max_slack: float
    tol: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def random_unit_functional(n: int, seed: int) -> np.ndarray:
    """Seeded random vector with unit l2 norm, used as the 1-Lipschitz probe."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n)
    return w / np.linalg.norm(w)


def check_observed_fairness_bound(
    obs: ObservationMatrix,
    estimate: SvtEstimate,
    h_weights,
    tol: float = BOUND_TOL,
) -> BoundCheckReport:
    """Verify, for every ordered pair, that the linear probe applied to the
    unclipped reconstruction moves by at most k2 times the l1 distance of
    the corresponding observation rows.
    """
    w = np.asarray(h_weights, dtype=np.float64)
    if w.ndim != 1 or w.size != obs.shape[1]:
        raise ValidationError("h_weights must be a vector of length n")
    if np.linalg.norm(w) > 1.0 + 1e-12:
        raise ValidationError("h_weights must have l2 norm at most 1")
    k2 = svt_lipschitz_constant(obs, estimate)
    h = estimate.a_hat_unclipped @ w
    lhs = np.abs(h[:, None] - h[None, :])
    rhs = k2 * cdist(obs.values, obs.values, "cityblock")
    return _pairwise_report(lhs, rhs, tol)


def check_latent_fairness_bound(
    truth,
    a_hat,
    predictions,
    k1: float,
    q: int,
    tol: float = BOUND_TOL,
) -> BoundCheckReport:
    """Verify the approximate-fairness bound against the ground truth: for
    every pair, prediction distance is at most
    ``k1 * ||A_i - A_j||_q + 2 * k1 * max_i ||A_hat_i - A_i||_q``.
    """
    a = as_matrix(truth, "truth")
    ahat = as_matrix(a_hat, "a_hat")
    if a.shape != ahat.shape:
        raise ValidationError("truth and a_hat must have the same shape")
    if k1 <= 0:
        raise ValidationError("k1 must be positive")
    if q not in (1, 2):
        raise ValidationError(f"q must be 1 or 2, got {q}")
    pred = np.asarray(predictions, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if pred.shape[0] != a.shape[0]:
        raise ValidationError("predictions must have one row per individual")

    ord_ = 1 if q == 1 else 2
    row_err = np.linalg.norm(ahat - a, ord=ord_, axis=1).max()
    lhs = cdist(pred, pred, "euclidean")
    rhs = k1 * cdist(a, a, "cityblock" if q == 1 else "euclidean") + 2.0 * k1 * row_err
    return _pairwise_report(lhs, rhs, tol)


def _pairwise_report(lhs, rhs, tol: float) -> BoundCheckReport:
    m = lhs.shape[0]
    off = ~np.eye(m, dtype=bool)
    slack = lhs - rhs
    max_slack = float(slack[off].max()) if m > 1 else 0.0
    bad = np.argwhere(off & (slack > tol))
    return BoundCheckReport(
        pairs_checked=int(off.sum()),
        max_slack=max_slack,
        tol=tol,
        violations=[tuple(map(int, ij)) for ij in bad],
    )


def build_audit_report(
    certificate: FairnessCertificate,
    if_on_z: IfRatio | None = None,
    if_on_a: IfRatio | None = None,
    mse_h: float | None = None,
    mse_f: float | None = None,
    checks: dict[str, BoundCheckReport] | None = None,
    extra: dict | None = None,
) -> dict:
    """Assemble the JSON audit report."""
    violations = []
    for name, report in (checks or {}).items():
        for i, j in report.violations:
            violations.append({"check": name, "pair": [i, j]})
    out = certificate.to_json_dict()
    out.update(
        {
            "if_on_z": None if if_on_z is None else if_on_z.value,
            "if_on_a": None if if_on_a is None else if_on_a.value,
            "mse_h": mse_h,
            "mse_f": mse_f,
            "violations": violations,
        }
    )
    if if_on_z is not None:
        out["if_on_z_pairs"] = {
            "used": if_on_z.pairs_used,
            "skipped_zero_denominator": if_on_z.pairs_skipped_zero_denominator,
        }
    if if_on_a is not None:
        out["if_on_a_pairs"] = {
            "used": if_on_a.pairs_used,
            "skipped_zero_denominator": if_on_a.pairs_skipped_zero_denominator,
        }
    if checks:
        out["check_max_slack"] = {k: v.max_slack for k, v in checks.items()}
    if extra:
        out.update(extra)
    return out
