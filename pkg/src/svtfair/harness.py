"""Experiment orchestration: grid runs, aggregation, and report emission.

Synthetic experiments sweep a grid (observation probability p, or feature
count n) with several seeds per cell.  Each cell generates a ground truth,
masks it, runs USVT-thresholded SVT, and trains the downstream network
twice: once on the raw zero-imputed observations (the ``h`` pipeline) and
once on the SVT reconstruction (the ``f`` pipeline).  Both pipelines share
the exact same truth, mask, train/validation split, and initialization, so
pre-processing is the only difference.

Cell seeds derive from (master_seed, seed_index) only, never from the grid
value, so the truth matrix does not change when p does.  Aggregation
reports mean and two sample standard deviations over seeds; per-cell
failures are recorded and leave gaps rather than aborting the run.
"""

from __future__ import annotations

import dataclasses
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import NoiseConfig, SynthConfig, gen_ground_truth, mask_cluster, mask_uniform
from .errors import ValidationError
from .estimation import ShrinkageFn, mse_vs_truth, svt, usvt_threshold
from .fairness import (
    certify,
    check_latent_fairness_bound,
    check_observed_fairness_bound,
    build_audit_report,
    if_ratio,
    pairwise_ratio_sample,
    random_unit_functional,
    svt_lipschitz_constant,
)
from .ingest import load_movielens
from .knn import KnnConfig, knn_predict_all
from .linalg import ObservationMatrix
from .matrix_io import load_dense, load_observations
from .mlp import TrainConfig, mlp_predict_matrix, mlp_train, split_observed_cells

__all__ = [
    "SvtPipelineConfig",
    "ExperimentConfig",
    "CellAggregate",
    "ResultTable",
    "MLP_METRICS",
    "ALL_METRICS",
    "experiment1_config",
    "experiment2_config",
    "experiment3_config",
    "experiment4_config",
    "run_synthetic_cell",
    "run_experiment1",
    "run_experiment2",
    "run_experiment3",
    "run_experiment4",
    "run_experiment",
    "emit_report",
    "audit_files",
]

MLP_METRICS = ("MSE(h)", "MSE(f)", "IF1_h(Z)", "IF1_f(Z)", "IF2_h(A)", "IF2_f(A)")
ALL_METRICS = ("MSE(h)", "MSE(f)", "IF1_h(Z)", "IF1_f(Z)", "K2", "IF2_h(A)", "IF2_f(A)")
# MSE(SVT) is the clipped reconstruction's error against the truth over all
# cells; cheap to compute and useful for consistency trends.
EXTRA_METRICS = ("MSE(SVT)",)


@dataclass(frozen=True)
class SvtPipelineConfig:
    """USVT settings for the pre-processing stage."""

    w: float = 2.01
    noise_var: float | None = None
    clip: bool = True

    def to_json_dict(self) -> dict:
        return {"w": self.w, "noise_var": self.noise_var, "clip": self.clip}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: tuple = ()
    num_seeds: int = 10
    synth: SynthConfig = field(default_factory=SynthConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    svt: SvtPipelineConfig = field(default_factory=SvtPipelineConfig)
    metrics: tuple[str, ...] = ALL_METRICS + EXTRA_METRICS
    p: float | None = None  # fixed observation probability when the grid is over n
    master_seed: int = 0
    workers: int = 1
    output_dir: str | None = None
    movielens_path: str | None = None
    movielens_shape: tuple[int, int] | None = None
    subsample: tuple[int, int, int] | None = None
    num_pairs: int = 10_000

    def __post_init__(self):
        if self.experiment not in ("exp1", "exp2", "exp3", "exp4", "audit"):
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        if self.num_seeds < 1:
            raise ValidationError("num_seeds must be at least 1")
        if self.experiment in ("exp1", "exp3", "exp4") and not self.grid:
            raise ValidationError("grid must be nonempty")
        if self.experiment == "exp2" and self.num_pairs < 1:
            raise ValidationError("num_pairs must be at least 1")
        unknown = set(self.metrics) - set(ALL_METRICS + EXTRA_METRICS)
        if unknown:
            raise ValidationError(f"unknown metrics: {sorted(unknown)}")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "grid": list(self.grid),
            "num_seeds": self.num_seeds,
            "synth": self.synth.to_json_dict(),
            "knn": {"k": self.knn.k},
            "train": self.train.to_json_dict(),
            "svt": self.svt.to_json_dict(),
            "metrics": list(self.metrics),
            "p": self.p,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "movielens_path": self.movielens_path,
            "movielens_shape": list(self.movielens_shape) if self.movielens_shape else None,
            "subsample": list(self.subsample) if self.subsample else None,
            "num_pairs": self.num_pairs,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "synth" in data:
            synth = dict(data["synth"])
            if "noise" in synth:
                synth["noise"] = NoiseConfig(**synth["noise"])
            if "mean_range" in synth:
                synth["mean_range"] = tuple(synth["mean_range"])
            if "cov_diag_range" in synth:
                synth["cov_diag_range"] = tuple(synth["cov_diag_range"])
            data["synth"] = SynthConfig(**synth)
        if "knn" in data:
            data["knn"] = KnnConfig(**data["knn"])
        if "train" in data:
            data["train"] = TrainConfig(**data["train"])
        if "svt" in data:
            data["svt"] = SvtPipelineConfig(**data["svt"])
        for key in ("grid", "metrics"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        if data.get("subsample") is not None:
            data["subsample"] = tuple(data["subsample"])
        if data.get("movielens_shape") is not None:
            data["movielens_shape"] = tuple(data["movielens_shape"])
        return cls(**data)


def experiment1_config(**overrides) -> ExperimentConfig:
    """Uniform masking at m=200, n=800, c=10 over p in {0.05, 0.1, 0.2, 0.4}.

    The USVT threshold uses the variance bound 0.01^2 in the q-hat formula
    and w = 2.01.  The training learning rate is raised to 0.5 so plain SGD
    makes visible progress within the fixed 2000 steps.
    """
    defaults = dict(
        experiment="exp1",
        grid=(0.05, 0.1, 0.2, 0.4),
        synth=SynthConfig(m=200, n=800, c=10),
        svt=SvtPipelineConfig(w=2.01, noise_var=0.01**2, clip=True),
        train=TrainConfig(learning_rate=0.5),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def experiment3_config(**overrides) -> ExperimentConfig:
    """Experiment 1 with cluster-dependent masking."""
    cfg = experiment1_config(**{**overrides, "experiment": "exp3"})
    return cfg


def experiment4_config(**overrides) -> ExperimentConfig:
    """Grid over n at m=500, c=20, fixed p=0.2."""
    defaults = dict(
        experiment="exp4",
        grid=(25, 100, 400, 800),
        p=0.2,
        synth=SynthConfig(m=500, n=800, c=20),
        svt=SvtPipelineConfig(w=2.01, noise_var=0.01**2, clip=True),
        train=TrainConfig(learning_rate=0.5),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def experiment2_config(movielens_path, **overrides) -> ExperimentConfig:
    defaults = dict(
        experiment="exp2",
        grid=(),
        movielens_path=str(movielens_path),
        subsample=(2000, 2000, 0),
        num_pairs=10_000,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


@dataclass
class CellAggregate:
    mean: float
    two_sd: float
    n_runs: int
    values: list[float]

    def formatted(self) -> str:
        return f"{self.mean:.2f}±{self.two_sd:.3f}"


@dataclass
class ResultTable:
    grid_label: str
    grid_values: list
    metric_names: list[str]
    cells: dict[str, list[CellAggregate | None]]
    config: dict
    details: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def cell(self, metric: str, grid_value) -> CellAggregate | None:
        return self.cells[metric][self.grid_values.index(grid_value)]

    def row(self, metric: str) -> list[float]:
        return [agg.mean if agg else float("nan") for agg in self.cells[metric]]

    def to_json_dict(self) -> dict:
        return {
            "grid_label": self.grid_label,
            "grid_values": self.grid_values,
            "metric_names": self.metric_names,
            "cells": {
                name: [
                    None
                    if agg is None
                    else {
                        "mean": agg.mean,
                        "two_sd": agg.two_sd,
                        "n_runs": agg.n_runs,
                        "values": agg.values,
                    }
                    for agg in aggs
                ]
                for name, aggs in self.cells.items()
            },
            "config": self.config,
            "details": self.details,
            "errors": self.errors,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ResultTable":
        cells = {
            name: [None if c is None else CellAggregate(**c) for c in aggs]
            for name, aggs in data["cells"].items()
        }
        return cls(
            grid_label=data["grid_label"],
            grid_values=data["grid_values"],
            metric_names=data["metric_names"],
            cells=cells,
            config=data["config"],
            details=data.get("details", []),
            errors=data.get("errors", []),
        )

    def to_csv(self) -> str:
        header = ["metric"] + [f"{self.grid_label}={v}" for v in self.grid_values]
        lines = [",".join(header)]
        for name in self.metric_names:
            row = [name]
            for agg in self.cells[name]:
                row.append("" if agg is None else agg.formatted())
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _aggregate(values: list[float]) -> CellAggregate:
    arr = np.asarray(values, dtype=np.float64)
    two_sd = 0.0 if arr.size < 2 else 2.0 * float(arr.std(ddof=1))
    return CellAggregate(float(arr.mean()), two_sd, int(arr.size), [float(v) for v in arr])


def _cell_seeds(master_seed: int, seed_index: int) -> dict[str, int]:
    state = np.random.SeedSequence([master_seed, seed_index]).generate_state(4)
    return {
        "truth": int(state[0]),
        "mask": int(state[1]),
        "split": int(state[2]),
        "train": int(state[3]),
    }


def run_synthetic_cell(
    experiment: str,
    synth: SynthConfig,
    p: float,
    svt_cfg: SvtPipelineConfig,
    train_cfg: TrainConfig,
    metrics: tuple[str, ...],
    master_seed: int,
    seed_index: int,
) -> dict:
    """One (grid value, seed) cell of a synthetic experiment."""
    seeds = _cell_seeds(master_seed, seed_index)
    truth_cfg = dataclasses.replace(synth, seed=seeds["truth"])
    truth, labels = gen_ground_truth(truth_cfg)
    if experiment == "exp3":
        obs, mask_info = mask_cluster(truth, labels, p, synth.noise, seeds["mask"])
    else:
        obs = mask_uniform(truth, p, synth.noise, seeds["mask"])
        mask_info = {}

    tau = usvt_threshold(obs, w=svt_cfg.w, noise_var=svt_cfg.noise_var)
    psi = ShrinkageFn.linear(1.0 / obs.p_hat)
    estimate = svt(obs, tau, psi, clip=svt_cfg.clip)

    out: dict = {
        "seed_index": seed_index,
        "p": p,
        "p_hat": obs.p_hat,
        "tau": tau,
        "rank_kept": estimate.rank_kept,
    }
    out.update(mask_info)

    if "K2" in metrics:
        out["K2"] = svt_lipschitz_constant(obs, estimate)
    if "MSE(SVT)" in metrics:
        out["MSE(SVT)"] = mse_vs_truth(estimate.a_hat, truth)

    if any(name in metrics for name in MLP_METRICS):
        cfg = dataclasses.replace(train_cfg, seed=seeds["train"])
        cells = split_observed_cells(obs.mask, cfg.train_fraction, seeds["split"])
        b_h = obs.values
        b_f = estimate.result
        pred_h = mlp_predict_matrix(mlp_train(b_h, obs.mask, cfg, cells), b_h)
        pred_f = mlp_predict_matrix(mlp_train(b_f, obs.mask, cfg, cells), b_f)
        if "MSE(h)" in metrics:
            out["MSE(h)"] = mse_vs_truth(pred_h, truth, observed_mask=obs.mask)
        if "MSE(f)" in metrics:
            out["MSE(f)"] = mse_vs_truth(pred_f, truth, observed_mask=obs.mask)
        if "IF1_h(Z)" in metrics:
            out["IF1_h(Z)"] = if_ratio(pred_h, obs.values, q=1).value
        if "IF1_f(Z)" in metrics:
            out["IF1_f(Z)"] = if_ratio(pred_f, obs.values, q=1).value
        if "IF2_h(A)" in metrics:
            out["IF2_h(A)"] = if_ratio(pred_h, truth, q=2).value
        if "IF2_f(A)" in metrics:
            out["IF2_f(A)"] = if_ratio(pred_f, truth, q=2).value
    return out


def _cell_spec(cfg: ExperimentConfig, grid_value, seed_index: int) -> tuple:
    if cfg.experiment == "exp4":
        synth = dataclasses.replace(cfg.synth, n=int(grid_value))
        p = cfg.p if cfg.p is not None else 0.2
    else:
        synth = cfg.synth
        p = float(grid_value)
    return (
        cfg.experiment,
        synth,
        p,
        cfg.svt,
        cfg.train,
        cfg.metrics,
        cfg.master_seed,
        seed_index,
    )


def _run_cell_spec(spec: tuple) -> dict:
    return run_synthetic_cell(*spec)


def _run_synthetic_experiment(cfg: ExperimentConfig) -> ResultTable:
    grid_label = "n" if cfg.experiment == "exp4" else "p"
    tasks = [
        (gi, si, _cell_spec(cfg, gv, si))
        for gi, gv in enumerate(cfg.grid)
        for si in range(cfg.num_seeds)
    ]
    results: dict[tuple[int, int], dict] = {}
    errors: list[dict] = []

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = pool.map(_run_cell_spec, [spec for _, _, spec in tasks])
            for (gi, si, _), outcome in zip(tasks, outcomes):
                results[(gi, si)] = outcome
    else:
        for gi, si, spec in tasks:
            try:
                results[(gi, si)] = _run_cell_spec(spec)
            except Exception as exc:  # per-cell failures leave gaps, not aborts
                errors.append(
                    {
                        "grid_value": cfg.grid[gi],
                        "seed_index": si,
                        "error": f"{type(exc).__name__}: {exc}",
                        "traceback": traceback.format_exc(),
                    }
                )

    metric_names = [m for m in ALL_METRICS + EXTRA_METRICS if m in cfg.metrics]
    cells: dict[str, list[CellAggregate | None]] = {m: [] for m in metric_names}
    details = []
    for gi, gv in enumerate(cfg.grid):
        ok = [results[(gi, si)] for si in range(cfg.num_seeds) if (gi, si) in results]
        for m in metric_names:
            vals = [r[m] for r in ok if m in r]
            cells[m].append(_aggregate(vals) if vals else None)
        details.extend(
            {k: v for k, v in r.items() if not isinstance(v, np.ndarray)} for r in ok
        )
    return ResultTable(
        grid_label=grid_label,
        grid_values=list(cfg.grid),
        metric_names=metric_names,
        cells=cells,
        config=cfg.to_json_dict(),
        details=details,
        errors=errors,
    )


def run_experiment1(cfg: ExperimentConfig) -> ResultTable:
    if cfg.experiment != "exp1":
        raise ValidationError("config is not for exp1")
    return _run_synthetic_experiment(cfg)


def run_experiment3(cfg: ExperimentConfig) -> ResultTable:
    if cfg.experiment != "exp3":
        raise ValidationError("config is not for exp3")
    return _run_synthetic_experiment(cfg)


def run_experiment4(cfg: ExperimentConfig) -> ResultTable:
    if cfg.experiment != "exp4":
        raise ValidationError("config is not for exp4")
    return _run_synthetic_experiment(cfg)


def run_experiment2(cfg: ExperimentConfig) -> dict:
    """K-NN on MovieLens with and without SVT pre-processing.

    Returns sampled pairwise fairness ratios for both pipelines plus shared
    histogram bins; the with-SVT sample mean being lower indicates the
    pre-processing strengthened individual fairness.
    """
    if cfg.experiment != "exp2":
        raise ValidationError("config is not for exp2")
    if not cfg.movielens_path:
        raise ValidationError("movielens_path is required for exp2")
    kwargs = {}
    if cfg.movielens_shape is not None:
        kwargs["shape"] = cfg.movielens_shape
    obs, info = load_movielens(cfg.movielens_path, subsample=cfg.subsample, **kwargs)

    tau = usvt_threshold(obs, w=cfg.svt.w, noise_var=cfg.svt.noise_var)
    psi = ShrinkageFn.linear(1.0 / obs.p_hat)
    estimate = svt(obs, tau, psi, clip=cfg.svt.clip)

    pred_raw = knn_predict_all(obs.values, cfg.knn)
    pred_svt = knn_predict_all(estimate.result, cfg.knn)

    pair_seed = int(np.random.SeedSequence([cfg.master_seed, 2]).generate_state(1)[0])
    samples_raw = pairwise_ratio_sample(
        pred_raw, obs.values, q=1, num_pairs=cfg.num_pairs, seed=pair_seed
    )
    samples_svt = pairwise_ratio_sample(
        pred_svt, obs.values, q=1, num_pairs=cfg.num_pairs, seed=pair_seed
    )

    hi = max(samples_raw.max(), samples_svt.max())
    bins = np.linspace(0.0, hi if hi > 0 else 1.0, 51)
    hist_raw, _ = np.histogram(samples_raw, bins=bins)
    hist_svt, _ = np.histogram(samples_svt, bins=bins)

    return {
        "config": cfg.to_json_dict(),
        "data": info,
        "tau": tau,
        "rank_kept": estimate.rank_kept,
        "p_hat": obs.p_hat,
        "mean_ratio_without_svt": float(samples_raw.mean()),
        "mean_ratio_with_svt": float(samples_svt.mean()),
        "num_pairs": cfg.num_pairs,
        "histogram": {
            "bin_edges": bins.tolist(),
            "without_svt": hist_raw.tolist(),
            "with_svt": hist_svt.tolist(),
        },
        "ratios_without_svt": samples_raw.tolist(),
        "ratios_with_svt": samples_svt.tolist(),
    }


def run_experiment(cfg: ExperimentConfig):
    runner = {
        "exp1": run_experiment1,
        "exp2": run_experiment2,
        "exp3": run_experiment3,
        "exp4": run_experiment4,
    }.get(cfg.experiment)
    if runner is None:
        raise ValidationError(f"no runner for experiment {cfg.experiment!r}")
    return runner(cfg)


def emit_report(table: ResultTable, path, fmt: str = "csv") -> Path:
    """Write a ResultTable as CSV (metric rows, ``mean±2sd`` cells) or JSON."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(table.to_csv())
    elif fmt == "json":
        path.write_text(json.dumps(table.to_json_dict(), indent=2) + "\n")
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    return path


def audit_files(
    z_path,
    a_hat_path=None,
    truth_path=None,
    predictions_path=None,
    baseline_predictions_path=None,
    w: float = 2.01,
    noise_var: float | None = None,
    probe_seed: int = 0,
) -> dict:
    """Compute the fairness certificate and metrics from matrix files.

    The SVT estimate is recomputed from the observations with the given
    USVT settings; a supplied reconstruction file is cross-checked against
    it.  Predictions (the audited pipeline) drive the empirical fairness
    ratios and MSE(f); baseline predictions drive MSE(h).
    """
    obs = load_observations(z_path)
    tau = usvt_threshold(obs, w=w, noise_var=noise_var)
    psi = ShrinkageFn.linear(1.0 / obs.p_hat)
    estimate = svt(obs, tau, psi, clip=True)
    certificate = certify(obs, estimate)

    extra: dict = {"w": w, "noise_var": noise_var, "p_hat": obs.p_hat}
    if a_hat_path is not None:
        provided = load_dense(a_hat_path)
        if provided.shape != obs.shape:
            raise ValidationError("provided reconstruction has the wrong shape")
        extra["a_hat_max_abs_diff"] = float(np.abs(provided - estimate.a_hat).max())

    truth = load_dense(truth_path) if truth_path is not None else None
    predictions = (
        load_dense(predictions_path) if predictions_path is not None else None
    )
    baseline = (
        load_dense(baseline_predictions_path)
        if baseline_predictions_path is not None
        else None
    )

    ratio_z = ratio_a = None
    mse_f = mse_h = None
    if predictions is not None:
        ratio_z = if_ratio(predictions, obs.values, q=1)
        if truth is not None:
            ratio_a = if_ratio(predictions, truth, q=2)
            mse_f = mse_vs_truth(predictions, truth)
    if baseline is not None and truth is not None:
        mse_h = mse_vs_truth(baseline, truth)

    probe = random_unit_functional(obs.shape[1], probe_seed)
    checks = {
        "observed_bound": check_observed_fairness_bound(obs, estimate, probe)
    }
    if truth is not None:
        checks["latent_bound"] = check_latent_fairness_bound(
            truth, estimate.a_hat, estimate.a_hat @ probe, k1=1.0, q=2
        )
    return build_audit_report(
        certificate,
        if_on_z=ratio_z,
        if_on_a=ratio_a,
        mse_h=mse_h,
        mse_f=mse_f,
        checks=checks,
        extra=extra,
    )
