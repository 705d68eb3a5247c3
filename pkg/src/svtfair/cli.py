"""Command-line interface.

Subcommands: ``synth`` (generate data), ``svt`` (pre-process a matrix
file), ``audit`` (fairness certificate + metrics from files),
``experiment`` (run a full experiment), and ``movielens`` (parse the
ratings file).  Exit codes: 0 success, 1 validation error, 2 numerical
failure, 3 I/O error.  The ``SVTFAIR_OUTPUT_DIR`` environment variable
overrides any output directory argument.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datagen import NoiseConfig, SynthConfig, gen_ground_truth, mask_cluster, mask_uniform
from .errors import NumericalError, ValidationError
from .estimation import ShrinkageFn, estimate_metadata, svt, usvt_threshold
from .ingest import load_movielens
from .matrix_io import load_observations, write_matrix, write_observations

ENV_OUTPUT_DIR = "SVTFAIR_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors (exit 1)
        raise ValidationError(message)


def _resolve_out_dir(value) -> Path:
    override = os.environ.get(ENV_OUTPUT_DIR)
    out = Path(override) if override else Path(value)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _cmd_synth(args) -> int:
    out = _resolve_out_dir(args.out)
    noise = NoiseConfig(args.noise_param, args.noise_interpretation)
    cfg = SynthConfig(m=args.m, n=args.n, c=args.c, noise=noise, seed=args.seed)
    truth, labels = gen_ground_truth(cfg)
    seeds = np.random.SeedSequence([args.seed, 1]).generate_state(1)
    mask_seed = int(seeds[0])
    info = {}
    if args.mask == "uniform":
        obs = mask_uniform(truth, args.p, noise, mask_seed)
    else:
        obs, info = mask_cluster(truth, labels, args.p, noise, mask_seed)
    write_matrix(out / "truth.csv", truth)
    write_observations(out / "observations.csv", obs)
    (out / "labels.csv").write_text("\n".join(str(int(l)) for l in labels) + "\n")
    _write_json(
        out / "provenance.json",
        {
            "synth": cfg.to_json_dict(),
            "mask": {"kind": args.mask, "p": args.p, "seed": mask_seed, **info},
            "p_hat": obs.p_hat,
        },
    )
    print(f"wrote truth/observations/labels to {out} (p_hat={obs.p_hat:.4f})")
    return 0


def _cmd_svt(args) -> int:
    out = _resolve_out_dir(args.out)
    obs = load_observations(args.input)
    if args.tau is not None:
        tau = args.tau
    else:
        tau = usvt_threshold(obs, w=args.w, noise_var=args.noise_var)
    if args.identity:
        psi = ShrinkageFn.identity()
    else:
        beta = args.beta if args.beta is not None else 1.0 / obs.p_hat
        psi = ShrinkageFn.linear(beta)
    estimate = svt(obs, tau, psi, clip=not args.no_clip)
    write_matrix(out / "a_hat.csv", estimate.a_hat)
    write_matrix(out / "a_hat_unclipped.csv", estimate.a_hat_unclipped)
    _write_json(out / "metadata.json", estimate_metadata(estimate, w=args.w))
    print(
        f"SVT kept {estimate.rank_kept} components at tau={tau:.4f} "
        f"(p_hat={obs.p_hat:.4f}); wrote {out}/a_hat.csv"
    )
    return 0


def _cmd_audit(args) -> int:
    report = harness.audit_files(
        args.z,
        a_hat_path=args.a_hat,
        truth_path=args.truth,
        predictions_path=args.predictions,
        baseline_predictions_path=args.baseline_predictions,
        w=args.w,
        noise_var=args.noise_var,
        probe_seed=args.probe_seed,
    )
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote audit report to {args.out}")
    else:
        print(text)
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        data.setdefault("experiment", args.name)
        if data["experiment"] != args.name:
            raise ValidationError(
                f"config is for {data['experiment']}, but --name is {args.name}"
            )
        cfg = harness.ExperimentConfig.from_json_dict(data)
    else:
        preset = {
            "exp1": harness.experiment1_config,
            "exp3": harness.experiment3_config,
            "exp4": harness.experiment4_config,
        }
        if args.name == "exp2":
            if not args.movielens_path:
                raise ValidationError("exp2 needs --movielens-path or a config file")
            cfg = harness.experiment2_config(args.movielens_path)
        else:
            cfg = preset[args.name]()
    if args.num_seeds:
        import dataclasses

        cfg = dataclasses.replace(cfg, num_seeds=args.num_seeds)
    out = _resolve_out_dir(args.output_dir or cfg.output_dir or ".")

    result = harness.run_experiment(cfg)
    if args.name == "exp2":
        _write_json(out / "exp2_report.json", result)
        print(
            f"mean ratio without SVT: {result['mean_ratio_without_svt']:.5f}, "
            f"with SVT: {result['mean_ratio_with_svt']:.5f}"
        )
    else:
        harness.emit_report(result, out / f"{args.name}_table.csv", "csv")
        harness.emit_report(result, out / f"{args.name}_table.json", "json")
        print((out / f"{args.name}_table.csv").read_text(), end="")
        if result.errors:
            print(f"{len(result.errors)} cell(s) failed; see {args.name}_table.json")
    return 0


def _cmd_movielens(args) -> int:
    out = _resolve_out_dir(args.out)
    subsample = None
    if args.max_users or args.max_movies:
        if not (args.max_users and args.max_movies):
            raise ValidationError("--max-users and --max-movies go together")
        subsample = (args.max_users, args.max_movies, args.seed)
    obs, info = load_movielens(args.path, subsample=subsample)
    write_observations(out / "observations.csv", obs)
    _write_json(out / "provenance.json", info)
    print(
        f"parsed {info['lines_parsed']} ratings "
        f"({info['duplicates']} duplicates), p_hat={obs.p_hat:.5f}"
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="svtfair", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic truth and observations")
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=800)
    p.add_argument("--c", type=int, default=10)
    p.add_argument("--p", type=float, required=True, help="observation probability")
    p.add_argument("--mask", choices=("uniform", "cluster"), default="uniform")
    p.add_argument("--noise-param", type=float, default=0.1)
    p.add_argument(
        "--noise-interpretation", choices=("variance", "sd"), default="variance"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("svt", help="pre-process an observation matrix file")
    p.add_argument("--input", required=True)
    p.add_argument("--tau", type=float, default=None, help="explicit threshold")
    p.add_argument("--w", type=float, default=2.01)
    p.add_argument("--noise-var", type=float, default=None)
    p.add_argument("--beta", type=float, default=None, help="linear shrinkage slope")
    p.add_argument("--identity", action="store_true", help="identity shrinkage")
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_svt)

    p = sub.add_parser("audit", help="fairness certificate and metrics from files")
    p.add_argument("--z", required=True, help="observation matrix (CSV with NA)")
    p.add_argument("--a-hat", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--baseline-predictions", default=None)
    p.add_argument("--w", type=float, default=2.01)
    p.add_argument("--noise-var", type=float, default=None)
    p.add_argument("--probe-seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("experiment", help="run a full experiment")
    p.add_argument("--name", choices=("exp1", "exp2", "exp3", "exp4"), required=True)
    p.add_argument("--config", default=None, help="JSON ExperimentConfig")
    p.add_argument("--num-seeds", type=int, default=None)
    p.add_argument("--movielens-path", default=None)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("movielens", help="parse a MovieLens 1M ratings file")
    p.add_argument("--path", required=True)
    p.add_argument("--max-users", type=int, default=None)
    p.add_argument("--max-movies", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_movielens)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
