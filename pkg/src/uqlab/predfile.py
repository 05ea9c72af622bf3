"""Prediction CSV files.

One long-format row per (sample, component): header
``sample_id,dataset,method,seed,component_index,label,logit0,logit1``,
UTF-8, LF line endings, ``.`` decimal separator, floats written with
shortest round-trip precision. ``component_index`` is the stochastic-pass
or ensemble-member index; single-pass methods use -1. A file may hold any
number of (dataset, method, seed) groups; externally produced logits that
follow the schema plug straight into the metric and threshold machinery.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError, ParseError, SchemaVersionError
from .uq import PredictionSet, scores_from_logits

__all__ = ["HEADER", "save_predictions", "load_predictions"]

HEADER = ["sample_id", "dataset", "method", "seed", "component_index", "label", "logit0", "logit1"]


def save_predictions(sets: list[PredictionSet] | PredictionSet, path) -> None:
    """Write prediction sets, sample-major within each set."""
    if isinstance(sets, PredictionSet):
        sets = [sets]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for pred in sets:
            for i in range(len(pred)):
                for c, comp_idx in enumerate(pred.component_indices):
                    z = pred.component_logits[c, i]
                    writer.writerow(
                        [
                            int(pred.sample_ids[i]),
                            pred.tag,
                            pred.method,
                            int(pred.seed),
                            int(comp_idx),
                            int(pred.labels[i]),
                            repr(float(z[0])),
                            repr(float(z[1])),
                        ]
                    )


def _parse_row(row: list[str], lineno: int):
    if len(row) != len(HEADER):
        raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", line=lineno)
    try:
        return (
            int(row[0]),
            row[1],
            row[2],
            int(row[3]),
            int(row[4]),
            int(row[5]),
            float(row[6]),
            float(row[7]),
        )
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None


def load_predictions(path) -> list[PredictionSet]:
    """Read every prediction set from a file written by save_predictions.

    Groups rows by (dataset, method, seed), rebuilds the per-component
    logit array, and re-derives probabilities and uncertainties, so the
    round trip is lossless. Raises ParseError with the offending line
    number on malformed rows and SchemaVersionError when the header does
    not match this schema.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        if header != HEADER:
            raise SchemaVersionError(
                f"unknown prediction schema; expected header {','.join(HEADER)}"
            )
        groups: dict[tuple[str, str, int], list] = {}
        for lineno, row in enumerate(reader, start=2):
            sample_id, dataset, method, seed, comp_idx, label, z0, z1 = _parse_row(row, lineno)
            groups.setdefault((dataset, method, seed), []).append(
                (sample_id, comp_idx, label, z0, z1)
            )
    return [
        _assemble(dataset, method, seed, rows)
        for (dataset, method, seed), rows in groups.items()
    ]


def _assemble(dataset, method, seed, rows) -> PredictionSet:
    by_sample: dict[int, dict] = {}
    for sample_id, comp_idx, label, z0, z1 in rows:
        entry = by_sample.setdefault(sample_id, {"label": label, "components": {}})
        if entry["label"] != label:
            raise DataError(
                f"{dataset}/{method}/seed {seed}: sample {sample_id} has conflicting labels"
            )
        if comp_idx in entry["components"]:
            raise DataError(
                f"{dataset}/{method}/seed {seed}: sample {sample_id} repeats component {comp_idx}"
            )
        entry["components"][comp_idx] = (z0, z1)
    sample_ids = sorted(by_sample)
    comp_indices = sorted(by_sample[sample_ids[0]]["components"])
    for sid in sample_ids:
        if sorted(by_sample[sid]["components"]) != comp_indices:
            raise DataError(
                f"{dataset}/{method}/seed {seed}: sample {sid} has inconsistent components"
            )
    n, k = len(sample_ids), len(comp_indices)
    logits = np.empty((k, n, 2))
    labels = np.empty(n, dtype=np.int64)
    for i, sid in enumerate(sample_ids):
        labels[i] = by_sample[sid]["label"]
        for c, comp_idx in enumerate(comp_indices):
            logits[c, i] = by_sample[sid]["components"][comp_idx]
    probs, uncertainty = scores_from_logits(method, logits)
    return PredictionSet(
        method=method,
        seed=seed,
        tag=dataset,
        labels=labels,
        component_logits=logits,
        component_indices=np.asarray(comp_indices, dtype=np.int64),
        sample_ids=np.asarray(sample_ids, dtype=np.int64),
        probs=probs,
        uncertainty=uncertainty,
    )
