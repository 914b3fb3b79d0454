"""Classification metrics and the side-by-side model comparison table."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .engine.loss import per_example_ce
from .errors import EmptyDataset
from .labels import LABEL_NAMES, N_CLASSES
from .model import EVAL_BATCH, Model, Workspace
from .synth import Dataset


@dataclass(frozen=True)
class ConfusionMatrix:
    """8x8 counts; rows are true classes, columns are predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (N_CLASSES, N_CLASSES) or (arr < 0).any():
            raise ValueError(f"confusion matrix must be non-negative {N_CLASSES}x{N_CLASSES}")
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary for one model on one dataset.

    ``per_class_precision`` / ``per_class_recall`` hold None where the metric
    is undefined (no predictions for / no examples of that class); such
    entries are excluded from macro averages rather than counted as zero.
    """

    accuracy: float
    mean_loss: float
    per_class_precision: tuple[float | None, ...]
    per_class_recall: tuple[float | None, ...]
    confusion: ConfusionMatrix

    def macro_recall(self) -> float:
        defined = [r for r in self.per_class_recall if r is not None]
        return float(np.mean(defined)) if defined else float("nan")

    def macro_precision(self) -> float:
        defined = [p for p in self.per_class_precision if p is not None]
        return float(np.mean(defined)) if defined else float("nan")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mean_loss": self.mean_loss,
            "per_class_precision": list(self.per_class_precision),
            "per_class_recall": list(self.per_class_recall),
            "confusion": self.confusion.counts.tolist(),
            "label_names": list(LABEL_NAMES),
        }


def evaluate(model: Model, dataset: Dataset) -> MetricsReport:
    """Eval-mode metrics: accuracy, mean cross-entropy, per-class P/R, confusion."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot evaluate an empty dataset")
    features = dataset.features_matrix()
    labels = dataset.labels_array()
    losses = []
    preds = []
    ws = Workspace()
    for start in range(0, features.shape[0], EVAL_BATCH):
        logits = model.eval_logits(features[start : start + EVAL_BATCH], ws)
        losses.append(per_example_ce(logits, labels[start : start + EVAL_BATCH]))
        preds.append(logits.argmax(axis=1))
    losses = np.concatenate(losses)
    preds = np.concatenate(preds)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    confusion = ConfusionMatrix(counts)
    diag = np.diag(counts)
    recall = tuple(
        float(diag[c] / rs) if rs else None for c, rs in enumerate(confusion.row_sums())
    )
    precision = tuple(
        float(diag[c] / cs) if cs else None for c, cs in enumerate(confusion.col_sums())
    )
    return MetricsReport(
        accuracy=float(diag.sum() / counts.sum()),
        mean_loss=float(losses.mean()),
        per_class_precision=precision,
        per_class_recall=recall,
        confusion=confusion,
    )


@dataclass(frozen=True)
class ComparisonTable:
    """Rows of (name, accuracy, mean_loss) plus per-class recall deltas.

    Deltas are measured against the first report; the table imposes no
    ordering or winner."""

    rows: tuple[tuple[str, float, float], ...]
    recall_deltas: tuple[tuple[str, tuple[float | None, ...]], ...]

    def render(self) -> str:
        width = max(len("model"), *(len(name) for name, _, _ in self.rows))
        lines = [f"{'model':<{width}}  {'accuracy':>9}  {'mean_loss':>10}"]
        for name, acc, loss in self.rows:
            lines.append(f"{name:<{width}}  {acc:>9.4f}  {loss:>10.4f}")
        if self.recall_deltas:
            base = self.rows[0][0]
            lines.append("")
            lines.append(f"per-class recall delta vs {base}:")
            for name, deltas in self.recall_deltas:
                cells = ", ".join(
                    f"{LABEL_NAMES[c]}={'n/a' if d is None else format(d, '+.3f')}"
                    for c, d in enumerate(deltas)
                )
                lines.append(f"  {name}: {cells}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "rows": [{"name": n, "accuracy": a, "mean_loss": l} for n, a, l in self.rows],
            "recall_deltas": {name: list(d) for name, d in self.recall_deltas},
        }


def compare(reports: dict[str, MetricsReport]) -> ComparisonTable:
    """Build a comparison table from named reports (insertion order kept)."""
    if not reports:
        raise ValueError("need at least one report")
    rows = tuple((name, rep.accuracy, rep.mean_loss) for name, rep in reports.items())
    names = list(reports)
    base = reports[names[0]]
    deltas = []
    for name in names[1:]:
        rep = reports[name]
        row = tuple(
            None if (a is None or b is None) else float(a - b)
            for a, b in zip(rep.per_class_recall, base.per_class_recall)
        )
        deltas.append((name, row))
    return ComparisonTable(rows=rows, recall_deltas=tuple(deltas))


def write_report_json(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_class_csv(report: MetricsReport, path) -> None:
    """Flat per-class CSV: class,precision,recall,support (empty when undefined)."""
    support = report.confusion.row_sums()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("class,precision,recall,support\n")
        for c, name in enumerate(LABEL_NAMES):
            p = "" if report.per_class_precision[c] is None else repr(report.per_class_precision[c])
            r = "" if report.per_class_recall[c] is None else repr(report.per_class_recall[c])
            fh.write(f"{name},{p},{r},{int(support[c])}\n")
