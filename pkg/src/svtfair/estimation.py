"""Singular value thresholding (SVT) and the adaptive USVT threshold.

The estimator runs in four steps: zero-impute missing cells, take the SVD,
keep the components whose singular values strictly exceed the threshold
``tau``, then rebuild the matrix with a shrinkage function applied to the
kept singular values and (optionally) clip entries to [-1, 1].  The USVT
threshold removes manual tuning of ``tau``: with observed fraction
``p_hat`` it is ``sqrt(w * max(m, n) * p_hat)``, or with a known noise
variance bound the sharper ``sqrt(w * max(m, n) * q_hat)`` where
``q_hat = p_hat * var + p_hat * (1 - p_hat) * (1 - var)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import ObservationMatrix, SpectralDecomposition, as_matrix, svd

__all__ = [
    "ShrinkageFn",
    "SvtEstimate",
    "impute_zeros",
    "usvt_threshold",
    "svt",
    "mse_vs_truth",
    "estimate_metadata",
]


@dataclass(frozen=True)
class ShrinkageFn:
    """Shrinkage applied to kept singular values: identity or x -> beta * x.

    Both kinds are increasing on the non-negative reals.
    """

    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "linear"):
            raise ValidationError(f"unknown shrinkage kind {self.kind!r}")
        if self.kind == "linear":
            if self.beta is None or not self.beta > 0:
                raise ValidationError("linear shrinkage requires beta > 0")
        elif self.beta is not None:
            raise ValidationError("identity shrinkage takes no beta")

    @classmethod
    def identity(cls) -> "ShrinkageFn":
        return cls("identity")

    @classmethod
    def linear(cls, beta: float) -> "ShrinkageFn":
        return cls("linear", float(beta))

    def __call__(self, x):
        return x if self.kind == "identity" else self.beta * np.asarray(x)

    @property
    def slope(self) -> float:
        """The linear coefficient (1.0 for identity)."""
        return 1.0 if self.kind == "identity" else self.beta

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.beta is not None:
            out["beta"] = self.beta
        return out


@dataclass(frozen=True)
class SvtEstimate:
    """SVT output plus the artifacts fairness auditing needs.

    ``a_hat`` is always the clipped reconstruction and ``a_hat_unclipped``
    the raw thresholded sum; ``result`` returns whichever the ``clip`` flag
    selected.  ``kept_set`` holds the component indices with sigma > tau,
    and ``decomposition`` is the full SVD of the zero-imputed input.
    """

    a_hat: np.ndarray
    a_hat_unclipped: np.ndarray
    kept_set: np.ndarray
    tau: float
    psi: ShrinkageFn
    decomposition: SpectralDecomposition
    p_hat: float
    clip: bool

    @property
    def rank_kept(self) -> int:
        return int(self.kept_set.size)

    @property
    def result(self) -> np.ndarray:
        return self.a_hat if self.clip else self.a_hat_unclipped


def impute_zeros(obs: ObservationMatrix) -> np.ndarray:
    """Step 1: observed values where observed, 0 elsewhere."""
    return obs.values.copy()


def usvt_threshold(
    obs: ObservationMatrix, w: float = 2.01, noise_var: float | None = None
) -> float:
    """Adaptive threshold sqrt(w * max(m, n) * p_hat), or with q_hat if
    a per-entry noise variance bound is supplied."""
    if w <= 0:
        raise ValidationError("w must be positive")
    if obs.n_observed == 0:
        raise ValidationError("no observations")
    p_hat = obs.p_hat
    if noise_var is None:
        rate = p_hat
    else:
        if not 0 <= noise_var <= 1:
            raise ValidationError("noise_var must lie in [0, 1]")
        rate = p_hat * noise_var + p_hat * (1.0 - p_hat) * (1.0 - noise_var)
    return float(np.sqrt(w * max(obs.shape) * rate))


def svt(
    obs: ObservationMatrix,
    tau: float,
    psi: ShrinkageFn | None = None,
    clip: bool = True,
) -> SvtEstimate:
    """Run the four-step SVT procedure at threshold ``tau``.

    Components are kept on the strict inequality sigma > tau, so a
    zero singular value is never kept.  Both the clipped and unclipped
    reconstructions are retained; ``clip`` records which one is the
    caller's intended result.
    """
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    if psi is None:
        psi = ShrinkageFn.identity()
    z = impute_zeros(obs)
    dec = svd(z)
    kept = np.flatnonzero(dec.singular_values > tau)
    if kept.size:
        scaled = psi(dec.singular_values[kept])
        unclipped = (dec.left_vectors[:, kept] * scaled) @ dec.right_vectors[:, kept].T
    else:
        unclipped = np.zeros_like(z)
    return SvtEstimate(
        a_hat=np.clip(unclipped, -1.0, 1.0),
        a_hat_unclipped=unclipped,
        kept_set=kept,
        tau=float(tau),
        psi=psi,
        decomposition=dec,
        p_hat=obs.p_hat,
        clip=clip,
    )


def mse_vs_truth(predictions, truth, observed_mask=None) -> float:
    """Mean squared entrywise error against the ground truth.

    With ``observed_mask`` given, averages only over the unobserved cells
    (the held-out test set); otherwise over all entries.
    """
    pred = as_matrix(predictions, "predictions")
    a = as_matrix(truth, "truth")
    if pred.shape != a.shape:
        raise ValidationError(
            f"shape mismatch: predictions {pred.shape} vs truth {a.shape}"
        )
    sq = (pred - a) ** 2
    if observed_mask is None:
        return float(sq.mean())
    mask = np.asarray(observed_mask, dtype=bool)
    if mask.shape != a.shape:
        raise ValidationError("observed_mask shape does not match")
    test = ~mask
    if not test.any():
        raise ValidationError("empty test set: every entry is observed")
    return float(sq[test].mean())


def estimate_metadata(est: SvtEstimate, w: float | None = None) -> dict:
    """JSON-ready summary emitted alongside a saved estimate."""
    meta = {
        "tau": est.tau,
        "rank_kept": est.rank_kept,
        "p_hat": est.p_hat,
        "psi": est.psi.to_json_dict(),
        "clip": est.clip,
    }
    if w is not None:
        meta["w"] = w
    return meta
