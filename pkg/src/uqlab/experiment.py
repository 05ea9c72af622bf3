"""Experiment orchestration: configs, seed protocol, and the full pipeline.

One experiment runs every configured method over a synthetic shift
ladder (or over externally supplied prediction files), repeats it across
seeds, and aggregates metrics to mean +/- std with the population
standard deviation. Single-model methods run once per seed; the ensemble
method runs as a fixed number of independent replicate ensembles, each
with freshly derived member seeds, so its aggregate covers
replicates x members distinct initializations.

Every random stream is derived by name from (seed, method, purpose), so
adding or removing a method never changes any other method's results and
the whole pipeline is a pure function of the config.
"""

from __future__ import annotations

import dataclasses
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .data import Dataset, JitterConfig, LadderSpec, ShiftConfig, make_ladder
from .errors import ConfigError, DataError
from .mlp import TrainConfig, init_mlp, train
from .predfile import load_predictions, save_predictions
from .rng import derive_seed, make_rng
from .selective import TransferMatrix, aggregate_transfer, transfer_matrix
from .uq import (
    EnsembleSpec,
    PredictionSet,
    ensemble_predict,
    mc_dropout_predict,
    msp_predict,
    train_sngp,
)

__all__ = [
    "ExperimentConfig",
    "MethodRun",
    "MetricsReport",
    "ReportRow",
    "ExperimentResult",
    "run_experiment",
    "build_report",
    "build_transfers",
    "load_config",
    "save_config",
    "KNOWN_METHODS",
]

CONFIG_SCHEMA_VERSION = 1
KNOWN_METHODS = ("msp", "dropout", "ensemble", "sngp")

# Report metrics; auroc_ood is computed against the ID validation set and
# omitted on the validation row itself.
METRIC_KEYS = ("accuracy", "ap", "ece", "mce", "max_gap", "auroc_ood")


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3)
    methods: tuple[str, ...] = KNOWN_METHODS
    hidden_sizes: tuple[int, ...] = (64, 64)
    dropout_rate: float = 0.5
    mc_passes: int = 32
    ensemble_members: int = 4
    ensemble_replicates: int = 3
    sngp_rff_dim: int = 1024
    sngp_length_scale: float = 2.0
    sngp_ridge: float = 1.0
    spectral_bound: float = 4.0
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 100
    batch_size: int = 128
    ladder: LadderSpec = field(default_factory=LadderSpec)
    jitter: JitterConfig = field(default_factory=JitterConfig)
    id_val_tag: str = "id-val"
    external_predictions: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        unknown = set(self.methods) - set(KNOWN_METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; known: {KNOWN_METHODS}")
        if self.ensemble_replicates < 1:
            raise ConfigError("ensemble_replicates must be >= 1")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
        )


def _config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "seeds": list(cfg.seeds),
        "methods": list(cfg.methods),
        "model": {
            "hidden_sizes": list(cfg.hidden_sizes),
            "spectral_bound": cfg.spectral_bound,
        },
        "train": {
            "learning_rate": cfg.learning_rate,
            "weight_decay": cfg.weight_decay,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
        },
        "dropout": {"rate": cfg.dropout_rate, "passes": cfg.mc_passes},
        "ensemble": {"members": cfg.ensemble_members, "replicates": cfg.ensemble_replicates},
        "sngp": {
            "rff_dim": cfg.sngp_rff_dim,
            "length_scale": cfg.sngp_length_scale,
            "ridge": cfg.sngp_ridge,
        },
        "ladder": {
            "n_train": cfg.ladder.n_train,
            "n_val": cfg.ladder.n_val,
            "n_ood": cfg.ladder.n_ood,
            "n_novel": cfg.ladder.n_novel,
            "noise": cfg.ladder.noise,
            "near": dataclasses.asdict(cfg.ladder.near),
            "far": dataclasses.asdict(cfg.ladder.far),
        },
        "jitter": dataclasses.asdict(cfg.jitter),
        "id_val_tag": cfg.id_val_tag,
        "external_predictions": (
            list(cfg.external_predictions) if cfg.external_predictions else None
        ),
    }


def _shift_from_dict(d: dict) -> ShiftConfig:
    return ShiftConfig(
        translation=tuple(d.get("translation", (0.0, 0.0))),
        rotation=d.get("rotation", 0.0),
        scale=d.get("scale", 1.0),
        noise_inflation=d.get("noise_inflation", 1.0),
    )


def _config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = doc.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported config schema_version {version!r}, expected {CONFIG_SCHEMA_VERSION}"
        )
    defaults = ExperimentConfig()
    model = doc.get("model", {})
    train_doc = doc.get("train", {})
    dropout = doc.get("dropout", {})
    ensemble = doc.get("ensemble", {})
    sngp = doc.get("sngp", {})
    ladder_doc = doc.get("ladder", {})
    ladder_defaults = LadderSpec()
    try:
        ladder = LadderSpec(
            n_train=ladder_doc.get("n_train", ladder_defaults.n_train),
            n_val=ladder_doc.get("n_val", ladder_defaults.n_val),
            n_ood=ladder_doc.get("n_ood", ladder_defaults.n_ood),
            n_novel=ladder_doc.get("n_novel", ladder_defaults.n_novel),
            noise=ladder_doc.get("noise", ladder_defaults.noise),
            near=_shift_from_dict(ladder_doc["near"]) if "near" in ladder_doc else ladder_defaults.near,
            far=_shift_from_dict(ladder_doc["far"]) if "far" in ladder_doc else ladder_defaults.far,
        )
        jitter = JitterConfig(**doc.get("jitter", {}))
        external = doc.get("external_predictions")
        return ExperimentConfig(
            seeds=tuple(doc.get("seeds", defaults.seeds)),
            methods=tuple(doc.get("methods", defaults.methods)),
            hidden_sizes=tuple(model.get("hidden_sizes", defaults.hidden_sizes)),
            spectral_bound=model.get("spectral_bound", defaults.spectral_bound),
            learning_rate=train_doc.get("learning_rate", defaults.learning_rate),
            weight_decay=train_doc.get("weight_decay", defaults.weight_decay),
            epochs=train_doc.get("epochs", defaults.epochs),
            batch_size=train_doc.get("batch_size", defaults.batch_size),
            dropout_rate=dropout.get("rate", defaults.dropout_rate),
            mc_passes=dropout.get("passes", defaults.mc_passes),
            ensemble_members=ensemble.get("members", defaults.ensemble_members),
            ensemble_replicates=ensemble.get("replicates", defaults.ensemble_replicates),
            sngp_rff_dim=sngp.get("rff_dim", defaults.sngp_rff_dim),
            sngp_length_scale=sngp.get("length_scale", defaults.sngp_length_scale),
            sngp_ridge=sngp.get("ridge", defaults.sngp_ridge),
            ladder=ladder,
            jitter=jitter,
            id_val_tag=doc.get("id_val_tag", defaults.id_val_tag),
            external_predictions=tuple(external) if external else None,
        )
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    return _config_from_dict(doc)


@dataclass
class MethodRun:
    """One trained instance of one method, evaluated on every dataset."""

    method: str
    run_index: int
    predictions: dict[str, PredictionSet]  # dataset tag -> predictions


@dataclass(frozen=True)
class ReportRow:
    method: str
    dataset: str
    n_runs: int
    values: dict  # metric key -> (mean, std) or None


@dataclass
class MetricsReport:
    rows: list[ReportRow]
    bins: dict  # (method, dataset, run_index) -> metrics.BinStats
    footer: str = (
        "mean +/- std over runs; std is the population standard deviation (divisor n)"
    )

    def row(self, method: str, dataset: str) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.dataset == dataset:
                return r
        raise KeyError((method, dataset))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: MetricsReport
    transfers: dict[str, TransferMatrix]
    runs: list[MethodRun]


@contextmanager
def _stage(seed, method: str, stage: str):
    """Tag any package error with the failing (seed, method, stage)."""
    try:
        yield
    except Exception as exc:
        exc.args = (f"seed={seed} method={method} stage={stage}: {exc}",)
        raise


def _eval_tags(ladder: dict[str, Dataset]) -> list[str]:
    return [tag for tag in ladder if tag != "id-train"]


def _run_msp(cfg: ExperimentConfig, ladder, base_seed: int) -> dict[str, PredictionSet]:
    run_seed = derive_seed(base_seed, "msp")
    d = ladder["id-train"].features.shape[1]
    with _stage(base_seed, "msp", "train"):
        model = init_mlp([d, *cfg.hidden_sizes, 2], 0.0, None, seed=derive_seed(run_seed, "init"))
        model = train(model, ladder["id-train"], cfg.train_config(derive_seed(run_seed, "train")))
    with _stage(base_seed, "msp", "predict"):
        return {t: msp_predict(model, ladder[t], seed=base_seed) for t in _eval_tags(ladder)}


def _run_dropout(cfg: ExperimentConfig, ladder, base_seed: int) -> dict[str, PredictionSet]:
    run_seed = derive_seed(base_seed, "dropout")
    d = ladder["id-train"].features.shape[1]
    with _stage(base_seed, "dropout", "train"):
        model = init_mlp(
            [d, *cfg.hidden_sizes, 2], cfg.dropout_rate, None, seed=derive_seed(run_seed, "init")
        )
        model = train(model, ladder["id-train"], cfg.train_config(derive_seed(run_seed, "train")))
    with _stage(base_seed, "dropout", "predict"):
        return {
            t: mc_dropout_predict(
                model,
                ladder[t],
                cfg.mc_passes,
                rng=make_rng(derive_seed(run_seed, "predict", t)),
                seed=base_seed,
            )
            for t in _eval_tags(ladder)
        }


def _run_sngp(cfg: ExperimentConfig, ladder, base_seed: int) -> dict[str, PredictionSet]:
    from .uq import sngp_predict

    run_seed = derive_seed(base_seed, "sngp")
    with _stage(base_seed, "sngp", "train"):
        model, head = train_sngp(
            ladder["id-train"],
            cfg.train_config(run_seed),
            hidden_sizes=cfg.hidden_sizes,
            spectral_bound=cfg.spectral_bound,
            rff_dim=cfg.sngp_rff_dim,
            length_scale=cfg.sngp_length_scale,
            ridge=cfg.sngp_ridge,
        )
    with _stage(base_seed, "sngp", "predict"):
        return {t: sngp_predict(model, head, ladder[t], seed=base_seed) for t in _eval_tags(ladder)}


def _run_ensemble(
    cfg: ExperimentConfig, ladder, base_seed: int, replicate: int
) -> dict[str, PredictionSet]:
    d = ladder["id-train"].features.shape[1]
    prov_seed = derive_seed(base_seed, "ensemble", replicate)
    with _stage(base_seed, "ensemble", f"train-replicate-{replicate}"):
        members = []
        member_seeds = []
        for m in range(cfg.ensemble_members):
            seed_m = derive_seed(base_seed, "ensemble", replicate, "member", m)
            member = init_mlp([d, *cfg.hidden_sizes, 2], 0.0, None, seed=derive_seed(seed_m, "init"))
            members.append(
                train(member, ladder["id-train"], cfg.train_config(derive_seed(seed_m, "train")))
            )
            member_seeds.append(seed_m)
        spec = EnsembleSpec(members, member_seeds)
    with _stage(base_seed, "ensemble", f"predict-replicate-{replicate}"):
        return {t: ensemble_predict(spec, ladder[t], seed=prov_seed) for t in _eval_tags(ladder)}


def _synthetic_runs(cfg: ExperimentConfig, outdir: Path | None) -> list[MethodRun]:
    ladders = {seed: make_ladder(cfg.ladder, seed) for seed in cfg.seeds}
    runs: list[MethodRun] = []
    single = {"msp": _run_msp, "dropout": _run_dropout, "sngp": _run_sngp}
    for method in cfg.methods:
        if method == "ensemble":
            continue
        for i, seed in enumerate(cfg.seeds):
            preds = single[method](cfg, ladders[seed], seed)
            runs.append(MethodRun(method, i, preds))
            _persist(outdir, method, i, preds)
    if "ensemble" in cfg.methods:
        for r in range(cfg.ensemble_replicates):
            seed = cfg.seeds[r % len(cfg.seeds)]
            preds = _run_ensemble(cfg, ladders[seed], seed, r)
            runs.append(MethodRun("ensemble", r, preds))
            _persist(outdir, "ensemble", r, preds)
    return runs


def _persist(outdir: Path | None, method: str, run_index: int, preds) -> None:
    if outdir is None:
        return
    pred_dir = Path(outdir) / "predictions"
    pred_dir.mkdir(parents=True, exist_ok=True)
    save_predictions(list(preds.values()), pred_dir / f"{method}_run{run_index}.csv")


def _external_runs(cfg: ExperimentConfig) -> list[MethodRun]:
    sets = []
    for path in cfg.external_predictions:
        sets.extend(load_predictions(path))
    groups: dict[tuple[str, int], dict[str, PredictionSet]] = {}
    for pred in sets:
        key = (pred.method, pred.seed)
        groups.setdefault(key, {})
        if pred.tag in groups[key]:
            raise DataError(
                f"duplicate predictions for method={pred.method} seed={pred.seed} tag={pred.tag}"
            )
        groups[key][pred.tag] = pred
    runs = []
    counters: dict[str, int] = {}
    for (method, _seed), preds in groups.items():
        idx = counters.get(method, 0)
        counters[method] = idx + 1
        runs.append(MethodRun(method, idx, preds))
    if not runs:
        raise DataError("external prediction files contain no prediction sets")
    return runs


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def build_report(runs: list[MethodRun], id_val_tag: str = "id-val") -> MetricsReport:
    """Aggregate per-run metrics to mean +/- std rows plus reliability bins."""
    methods = list(dict.fromkeys(r.method for r in runs))
    rows = []
    bins = {}
    for method in methods:
        method_runs = [r for r in runs if r.method == method]
        tags = list(dict.fromkeys(t for r in method_runs for t in r.predictions))
        per_tag: dict[str, dict[str, list[float]]] = {
            t: {k: [] for k in METRIC_KEYS} for t in tags
        }
        for r in method_runs:
            if id_val_tag not in r.predictions:
                raise DataError(
                    f"method={method} run={r.run_index} has no {id_val_tag!r} predictions"
                )
            id_unc = r.predictions[id_val_tag].uncertainty
            for tag, pred in r.predictions.items():
                per_tag[tag]["accuracy"].append(metrics.accuracy(pred))
                per_tag[tag]["ap"].append(metrics.average_precision(pred.probs[:, 1], pred.labels))
                per_tag[tag]["ece"].append(metrics.ece(pred))
                per_tag[tag]["mce"].append(metrics.mce(pred))
                per_tag[tag]["max_gap"].append(metrics.max_gap_unweighted(pred))
                if tag != id_val_tag:
                    per_tag[tag]["auroc_ood"].append(metrics.auroc_ood(id_unc, pred.uncertainty))
                bins[(method, tag, r.run_index)] = metrics.bin_stats(pred)
        for tag in tags:
            values = {
                key: (_mean_std(vals) if vals else None) for key, vals in per_tag[tag].items()
            }
            rows.append(ReportRow(method, tag, len(method_runs), values))
    return MetricsReport(rows=rows, bins=bins)


def build_transfers(runs: list[MethodRun], id_val_tag: str = "id-val") -> dict[str, TransferMatrix]:
    """Per-method aggregated threshold-transfer matrices."""
    methods = list(dict.fromkeys(r.method for r in runs))
    out = {}
    for method in methods:
        per_seed = [
            transfer_matrix(r.predictions, id_val_tag) for r in runs if r.method == method
        ]
        out[method] = aggregate_transfer(method, per_seed)
    return out


def run_experiment(cfg: ExperimentConfig, outdir=None) -> ExperimentResult:
    """Run the full pipeline: data, training, prediction, aggregation.

    When ``outdir`` is given, every PredictionSet is persisted under
    ``outdir/predictions/`` as it is produced (so partial results survive
    a failing stage), the config echo is written, and the report files
    are emitted. The result is a pure function of the config.
    """
    from .report import emit_report

    out = Path(outdir) if outdir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.json")
    if cfg.external_predictions:
        runs = _external_runs(cfg)
    else:
        runs = _synthetic_runs(cfg, out)
    report = build_report(runs, cfg.id_val_tag)
    transfers = build_transfers(runs, cfg.id_val_tag)
    if out is not None:
        emit_report(report, transfers, out, id_val_tag=cfg.id_val_tag)
    return ExperimentResult(cfg, report, transfers, runs)
