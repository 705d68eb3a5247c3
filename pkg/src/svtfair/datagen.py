"""Synthetic ground-truth matrices and observation masking.

Rows are drawn from a mixture of axis-aligned Gaussian clusters and clipped
to [-1, 1].  Observation masks are either uniform (every cell observed
independently with probability p) or cluster-dependent (each cluster has
its own per-column probability vector summing to p * n).  Observed values
receive additive Gaussian noise and are clipped back to [-1, 1].

All randomness flows through seeded, spawned substreams: the truth matrix,
the mask, and the noise use independent streams, so regenerating with a
different p never changes the truth for the same master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import ObservationMatrix

__all__ = [
    "NoiseConfig",
    "SynthConfig",
    "gen_ground_truth",
    "mask_uniform",
    "mask_cluster",
    "cluster_observation_probs",
]


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian observation noise written as N(0, sd_param).

    The second parameter of that notation is ambiguous, so the
    interpretation is explicit: "variance" reads it as the variance
    (sd = sqrt(sd_param)), "sd" as the standard deviation.
    """

    sd_param: float = 0.1
    interpretation: str = "variance"

    def __post_init__(self):
        if self.sd_param < 0:
            raise ValidationError("noise parameter must be non-negative")
        if self.interpretation not in ("variance", "sd"):
            raise ValidationError("interpretation must be 'variance' or 'sd'")

    @property
    def sd(self) -> float:
        if self.interpretation == "variance":
            return float(np.sqrt(self.sd_param))
        return float(self.sd_param)

    def to_json_dict(self) -> dict:
        return {"sd_param": self.sd_param, "interpretation": self.interpretation}


@dataclass(frozen=True)
class SynthConfig:
    """Cluster-mixture generator settings.

    Cluster means have coordinates uniform in ``mean_range`` and diagonal
    covariances uniform in ``cov_diag_range``; rows are assigned to
    clusters uniformly at random ("uniform") or round-robin ("balanced").
    """

    m: int = 200
    n: int = 800
    c: int = 10
    mean_range: tuple[float, float] = (-1.0, 1.0)
    cov_diag_range: tuple[float, float] = (0.0, 0.1)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    cluster_assignment: str = "uniform"

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.c < 1:
            raise ValidationError("m, n and c must be positive")
        if self.c > self.m:
            raise ValidationError("cannot have more clusters than rows")
        if self.cluster_assignment not in ("uniform", "balanced"):
            raise ValidationError("cluster_assignment must be 'uniform' or 'balanced'")

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "c": self.c,
            "mean_range": list(self.mean_range),
            "cov_diag_range": list(self.cov_diag_range),
            "noise": self.noise.to_json_dict(),
            "seed": self.seed,
            "cluster_assignment": self.cluster_assignment,
        }


def gen_ground_truth(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sample the ground-truth matrix and per-row cluster labels."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.mean_range
    means = rng.uniform(lo, hi, size=(cfg.c, cfg.n))
    cov_lo, cov_hi = cfg.cov_diag_range
    cov_diag = rng.uniform(cov_lo, cov_hi, size=(cfg.c, cfg.n))
    if cfg.cluster_assignment == "uniform":
        labels = rng.integers(0, cfg.c, size=cfg.m)
    else:
        labels = np.resize(np.arange(cfg.c), cfg.m)
        rng.shuffle(labels)
    rows = rng.normal(means[labels], np.sqrt(cov_diag[labels]))
    return np.clip(rows, -1.0, 1.0), labels


def _noisy_clip(a: np.ndarray, noise: NoiseConfig, rng: np.random.Generator):
    sd = noise.sd
    noisy = a if sd == 0 else a + rng.normal(0.0, sd, size=a.shape)
    return np.clip(noisy, -1.0, 1.0)


def mask_uniform(truth, p: float, noise: NoiseConfig, seed: int) -> ObservationMatrix:
    """Observe each cell independently with probability p, add noise, clip."""
    a = np.asarray(truth, dtype=np.float64)
    if not 0.0 < p <= 1.0:
        raise ValidationError("p must lie in (0, 1]")
    mask_rng, noise_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)
    ]
    mask = mask_rng.random(a.shape) < p
    return ObservationMatrix.from_observed(_noisy_clip(a, noise, noise_rng), mask)


def cluster_observation_probs(
    c: int, n: int, p: float, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Per-cluster probability vectors with entries summing to p * n.

    Each vector starts as iid uniforms scaled to the target sum; entries
    above 1 are capped and the excess is spread uniformly over the
    uncapped entries.  Returns the vectors and how many entries were capped.
    """
    probs = np.empty((c, n))
    n_capped = 0
    for k in range(c):
        q = rng.random(n)
        q *= p * n / q.sum()
        while (q > 1.0).any():
            over = q > 1.0
            n_capped += int(over.sum())
            excess = (q[over] - 1.0).sum()
            q[over] = 1.0
            free = ~over
            if not free.any():
                break
            q[free] += excess / free.sum()
        probs[k] = q
    return probs, n_capped


def mask_cluster(
    truth, labels, p: float, noise: NoiseConfig, seed: int
) -> tuple[ObservationMatrix, dict]:
    """Cluster-dependent masking: cell (i, j) is observed with the
    probability assigned to column j by row i's cluster.

    Returns the observations plus provenance (capped-entry count and the
    expected observed fraction).
    """
    a = np.asarray(truth, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape != (a.shape[0],):
        raise ValidationError("labels must have one entry per row")
    if not 0.0 < p <= 1.0:
        raise ValidationError("p must lie in (0, 1]")
    prob_rng, mask_rng, noise_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    ]
    c = int(labels.max()) + 1
    probs, n_capped = cluster_observation_probs(c, a.shape[1], p, prob_rng)
    cell_probs = probs[labels]
    mask = mask_rng.random(a.shape) < cell_probs
    obs = ObservationMatrix.from_observed(_noisy_clip(a, noise, noise_rng), mask)
    info = {"n_capped": n_capped, "expected_fraction": float(cell_probs.mean())}
    return obs, info
