"""Command-line interface.

Subcommands: ``synth`` (write ladder dataset CSVs), ``train`` (train
models and save checkpoints), ``eval`` (metric report from prediction
files), ``threshold`` (Youden thresholds, selective prediction, transfer
matrices from prediction files), ``report`` (all report artifacts from
prediction files), ``run`` (full pipeline). Exit codes: 0 success, 1
usage error, 2 data or parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .data import make_ladder, save_dataset
from .errors import NumericalError, UqlabError
from .experiment import ExperimentConfig, load_config, run_experiment
from .mlp import init_mlp, save_checkpoint, train
from .report import emit_report, format_metrics_table, format_transfer_table
from .rng import derive_seed
from .uq import train_sngp

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if getattr(args, "methods", None):
        cfg = dataclasses.replace(cfg, methods=tuple(args.methods.split(",")))
    return cfg


def _cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        ladder = make_ladder(cfg.ladder, seed)
        for tag, ds in ladder.items():
            path = out / f"{tag}_seed{seed}.csv"
            save_dataset(ds, path)
            print(f"wrote {path} ({len(ds)} samples)")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out) / "checkpoints"
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        ladder = make_ladder(cfg.ladder, seed)
        data = ladder["id-train"]
        d = data.features.shape[1]
        for method in cfg.methods:
            if method == "msp":
                run_seed = derive_seed(seed, "msp")
                model = init_mlp([d, *cfg.hidden_sizes, 2], 0.0, None, derive_seed(run_seed, "init"))
                model = train(model, data, cfg.train_config(derive_seed(run_seed, "train")))
                _save(model, out / f"msp_seed{seed}.json")
            elif method == "dropout":
                run_seed = derive_seed(seed, "dropout")
                model = init_mlp(
                    [d, *cfg.hidden_sizes, 2], cfg.dropout_rate, None, derive_seed(run_seed, "init")
                )
                model = train(model, data, cfg.train_config(derive_seed(run_seed, "train")))
                _save(model, out / f"dropout_seed{seed}.json")
            elif method == "sngp":
                run_seed = derive_seed(seed, "sngp")
                model, _head = train_sngp(
                    data,
                    cfg.train_config(run_seed),
                    hidden_sizes=cfg.hidden_sizes,
                    spectral_bound=cfg.spectral_bound,
                    rff_dim=cfg.sngp_rff_dim,
                    length_scale=cfg.sngp_length_scale,
                    ridge=cfg.sngp_ridge,
                )
                # The GP posterior is refit deterministically from config and
                # data; only the feature extractor is checkpointed.
                _save(model, out / f"sngp_seed{seed}.json")
            elif method == "ensemble":
                for r in range(cfg.ensemble_replicates):
                    rep_seed = cfg.seeds[r % len(cfg.seeds)]
                    if rep_seed != seed:
                        continue
                    for m in range(cfg.ensemble_members):
                        seed_m = derive_seed(rep_seed, "ensemble", r, "member", m)
                        member = init_mlp(
                            [d, *cfg.hidden_sizes, 2], 0.0, None, derive_seed(seed_m, "init")
                        )
                        member = train(
                            member, data, cfg.train_config(derive_seed(seed_m, "train"))
                        )
                        _save(member, out / f"ensemble_rep{r}_member{m}.json")
    return EXIT_OK


def _save(model, path) -> None:
    save_checkpoint(model, path)
    print(f"wrote {path}")


def _external_cfg(paths) -> ExperimentConfig:
    return ExperimentConfig(external_predictions=tuple(str(p) for p in paths))


def _cmd_eval(args) -> int:
    cfg = dataclasses.replace(_external_cfg(args.predictions), id_val_tag=args.id_val)
    result = run_experiment(cfg)
    if args.format == "table":
        print(format_metrics_table(result.report, cfg.id_val_tag), end="")
    else:
        import csv as _csv

        keys = ["accuracy", "ap", "ece", "mce", "max_gap", "auroc_ood"]
        writer = _csv.writer(sys.stdout, lineterminator="\n")
        header = ["method", "dataset", "n_runs"]
        for k in keys:
            header.extend([f"{k}_mean", f"{k}_std"])
        writer.writerow(header)
        for row in result.report.rows:
            out = [row.method, row.dataset, row.n_runs]
            for k in keys:
                v = row.values.get(k)
                out.extend(["", ""] if v is None else [repr(v[0]), repr(v[1])])
            writer.writerow(out)
    return EXIT_OK


def _cmd_threshold(args) -> int:
    cfg = dataclasses.replace(_external_cfg(args.predictions), id_val_tag=args.id_val)
    result = run_experiment(cfg)
    for matrix in result.transfers.values():
        print(format_transfer_table(matrix, "accuracy"))
        print(format_transfer_table(matrix, "ap"))
    if args.out:
        emit_report(result.report, result.transfers, args.out, id_val_tag=cfg.id_val_tag)
        print(f"wrote report files to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg = dataclasses.replace(_external_cfg(args.predictions), id_val_tag=args.id_val)
    result = run_experiment(cfg)
    written = emit_report(result.report, result.transfers, args.out, id_val_tag=cfg.id_val_tag)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    result = run_experiment(cfg, outdir=args.out)
    print(format_metrics_table(result.report, cfg.id_val_tag), end="")
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uqlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate ladder dataset CSVs")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="use a single seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train models, save checkpoints")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="use a single seed")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="metrics from prediction files")
    p.add_argument("predictions", nargs="+", help="prediction CSV files")
    p.add_argument("--format", choices=("csv", "table"), default="table")
    p.add_argument("--id-val", default="id-val", help="tag of the ID validation dataset")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "threshold", help="Youden thresholds and transfer matrices"
    )
    p.add_argument("predictions", nargs="+", help="prediction CSV files")
    p.add_argument("--id-val", default="id-val")
    p.add_argument("--out", help="also write report files here")
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("report", help="all report artifacts from predictions")
    p.add_argument("predictions", nargs="+", help="prediction CSV files")
    p.add_argument("--id-val", default="id-val")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="override: use this single seed")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"uqlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UqlabError as exc:
        print(f"uqlab: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"uqlab: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
