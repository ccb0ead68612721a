"""Micro-averaged P/R/F, kind-stratified reports and prediction files."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import NORMAL, OVERLAPPING, TaskSpec

KIND_ROWS = (OVERLAPPING, NORMAL, "all")


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    f = _safe_div(2 * p * r, p + r)
    return p, r, f


def _counts(predictions: Sequence, golds: Sequence, positive_labels) -> tuple[int, int, int]:
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions but {len(golds)} gold labels")
    positive = set(positive_labels)
    tp = fp = fn = 0
    for pred, gold in zip(predictions, golds):
        if pred in positive:
            if pred == gold:
                tp += 1
            else:
                fp += 1
        if gold in positive and pred != gold:
            fn += 1
    return tp, fp, fn


def micro_prf(predictions: Sequence, golds: Sequence, positive_labels) -> tuple[float, float, float]:
    """Precision, recall and F pooled over the positive labels only."""
    return prf_from_counts(*_counts(predictions, golds, positive_labels))


@dataclass
class EvalReport:
    labels: tuple[str, ...]
    per_type_f: dict[str, float]
    micro: tuple[float, float, float]
    by_kind: dict[str, tuple[float, float, float]]
    kind_sizes: dict[str, int]
    kind_counts: dict[str, tuple[int, int, int]]
    # confusion[gold][pred]
    counts: np.ndarray = field(repr=False)

    def render(self) -> str:
        lines = ["Instances     Precision(%)  Recall(%)  F-score(%)  n"]
        for kind in KIND_ROWS:
            p, r, f = self.by_kind[kind]
            lines.append(
                f"{kind:<13} {100 * p:>12.2f} {100 * r:>10.2f} {100 * f:>11.2f}  {self.kind_sizes[kind]}"
            )
        lines.append("")
        lines.append("F-score per type (%): " + "  ".join(
            f"{lab}={100 * f:.2f}" for lab, f in self.per_type_f.items()
        ))
        lines.append("")
        lines.append("Confusion (rows gold, columns predicted)")
        width = max(len(lab) for lab in self.labels) + 1
        lines.append(" " * width + "".join(f"{lab:>{width}}" for lab in self.labels))
        for i, lab in enumerate(self.labels):
            lines.append(f"{lab:<{width}}" + "".join(f"{int(c):>{width}}" for c in self.counts[i]))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "key", "precision", "recall", "f_score", "tp", "fp", "fn", "n"])
        for kind in KIND_ROWS:
            p, r, f = self.by_kind[kind]
            tp, fp, fn = self.kind_counts[kind]
            w.writerow(["kind", kind, repr(p), repr(r), repr(f), tp, fp, fn, self.kind_sizes[kind]])
        for lab, f in self.per_type_f.items():
            w.writerow(["type", lab, "", "", repr(f), "", "", "", ""])
        for i, gold in enumerate(self.labels):
            for j, pred in enumerate(self.labels):
                w.writerow(["confusion", f"{gold}->{pred}", "", "", "", "", "", "", int(self.counts[i, j])])
        return buf.getvalue()


def per_type_f(predictions, golds, positive_labels) -> dict[str, float]:
    return {lab: micro_prf(predictions, golds, [lab])[2] for lab in positive_labels}


def confusion(predictions, golds, labels) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(labels)}
    out = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for pred, gold in zip(predictions, golds):
        out[index[gold], index[pred]] += 1
    return out


def stratified_eval(predictions: Sequence[str], golds: Sequence[str], kinds: Sequence[str], task: TaskSpec) -> EvalReport:
    if not len(predictions) == len(golds) == len(kinds):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(golds)} golds, {len(kinds)} kinds"
        )
    positive = task.positive_labels
    by_kind, sizes, counts = {}, {}, {}
    for kind in KIND_ROWS:
        keep = [i for i, k in enumerate(kinds) if kind == "all" or k == kind]
        c = _counts([predictions[i] for i in keep], [golds[i] for i in keep], positive)
        counts[kind] = c
        by_kind[kind] = prf_from_counts(*c)
        sizes[kind] = len(keep)
    return EvalReport(
        labels=task.labels,
        per_type_f=per_type_f(predictions, golds, positive),
        micro=by_kind["all"],
        by_kind=by_kind,
        kind_sizes=sizes,
        kind_counts=counts,
        counts=confusion(predictions, golds, task.labels),
    )


@dataclass
class Prediction:
    instance_id: str
    gold: str
    predicted: str
    kind: str


def write_predictions(preds: list[Prediction], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            fh.write(f"{p.instance_id}\t{p.gold}\t{p.predicted}\t{p.kind}\n")


def read_predictions(path) -> list[Prediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
            out.append(Prediction(*cols))
    return out


def report_from_predictions(preds: list[Prediction], task: TaskSpec) -> EvalReport:
    for p in preds:
        for lab in (p.gold, p.predicted):
            if lab not in task.labels:
                raise ValueError(f"instance {p.instance_id}: label {lab!r} not in the {task.name} label set")
    return stratified_eval(
        [p.predicted for p in preds], [p.gold for p in preds], [p.kind for p in preds], task
    )
