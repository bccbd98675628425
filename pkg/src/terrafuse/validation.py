"""Error-matrix construction, accuracy metrics, and the optical-vs-fused
comparison report.

Matrix orientation is fixed: rows are the reference (true) class,
columns the predicted class. Kappa is reported alongside the standard
accuracies as an extra agreement measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cart import CartClassifier
from .errors import EmptyMatrix, EmptyValidationSet, LegendMismatch
from .samples import LabeledVectors


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (k, k) int64, rows=reference, cols=predicted
    legend: dict[int, str]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.legend)
        if counts.shape != (k, k):
            raise EmptyMatrix(
                f"matrix shape {counts.shape} does not match {k} legend classes"
            )
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "legend", dict(self.legend))

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.legend))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.counts.sum(axis=1))

    def col_sums(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.counts.sum(axis=0))


@dataclass(frozen=True)
class AccuracyReport:
    overall_accuracy: float
    kappa: float
    producers_accuracy: dict[int, float | None]
    users_accuracy: dict[int, float | None]
    sample_counts: dict[int, int]
    legend: dict[int, str]
    matrix: ConfusionMatrix = field(repr=False)


def confusion_matrix(model: CartClassifier, v: LabeledVectors) -> ConfusionMatrix:
    """Count (true, predicted) pairs over a labeled validation set.

    Classes come from the union of the validation labels and the model's
    trained classes, so a class the model never predicts still gets a row.
    """
    if len(v) == 0:
        raise EmptyValidationSet("cannot validate on an empty vector set")
    predicted = model.predict(v.x)
    ids = sorted(
        {int(c) for c in v.y} | {int(c) for c in model.classes_}
    )
    index = {cid: i for i, cid in enumerate(ids)}
    k = len(ids)
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(v.y, predicted):
        counts[index[int(t)], index[int(p)]] += 1
    legend = {cid: v.legend.get(cid, f"class_{cid}") for cid in ids}
    return ConfusionMatrix(counts, legend)


def accuracy_metrics(m: ConfusionMatrix) -> AccuracyReport:
    """Overall, producer's and user's accuracy plus kappa from a matrix.

    Producer's (or user's) accuracy of a class with an empty row (or
    column) is undefined and reported as absent, not zero. Kappa of a
    matrix where chance agreement p_e is exactly 1 degenerates; the
    convention here is 1.0 for perfect agreement and 0.0 otherwise.
    """
    total = m.total
    if total == 0:
        raise EmptyMatrix("metrics of an all-zero matrix are undefined")
    ids = m.class_ids
    counts = m.counts
    trace = int(np.trace(counts))
    overall = trace / total
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    producers = {
        cid: (int(counts[i, i]) / int(rows[i]) if rows[i] else None)
        for i, cid in enumerate(ids)
    }
    users = {
        cid: (int(counts[i, i]) / int(cols[i]) if cols[i] else None)
        for i, cid in enumerate(ids)
    }
    p_o = overall
    p_e = float((rows.astype(np.float64) * cols.astype(np.float64)).sum()) / (
        total * total
    )
    if p_e == 1.0:
        kappa = 1.0 if p_o == 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    sample_counts = {cid: int(rows[i]) for i, cid in enumerate(ids)}
    return AccuracyReport(
        overall_accuracy=overall,
        kappa=kappa,
        producers_accuracy=producers,
        users_accuracy=users,
        sample_counts=sample_counts,
        legend=dict(m.legend),
        matrix=m,
    )


REPORT_FORMAT = "terrafuse-report"
COMPARISON_FORMAT = "terrafuse-comparison"


def report_to_obj(r: AccuracyReport) -> dict:
    ids = r.matrix.class_ids
    return {
        "format": REPORT_FORMAT,
        "version": 1,
        "legend": {str(cid): r.legend[cid] for cid in ids},
        "class_ids": list(ids),
        "matrix": [[int(v) for v in row] for row in r.matrix.counts],
        "overall_accuracy": r.overall_accuracy,
        "kappa": r.kappa,
        "producers_accuracy": {str(c): r.producers_accuracy[c] for c in ids},
        "users_accuracy": {str(c): r.users_accuracy[c] for c in ids},
        "sample_counts": {str(c): r.sample_counts[c] for c in ids},
    }


def report_to_json(r: AccuracyReport) -> str:
    return json.dumps(report_to_obj(r), indent=2) + "\n"


def report_from_json(text: str) -> AccuracyReport:
    from .errors import ParseError

    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    if not isinstance(obj, dict) or obj.get("format") != REPORT_FORMAT:
        raise ParseError(f"bad magic, expected {REPORT_FORMAT!r}")
    try:
        legend = {int(k): str(v) for k, v in obj["legend"].items()}
        matrix = ConfusionMatrix(np.array(obj["matrix"], dtype=np.int64), legend)
    except (KeyError, TypeError, ValueError, EmptyMatrix) as e:
        raise ParseError(f"malformed report: {e}") from e
    return accuracy_metrics(matrix)


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.3f}"


def report_to_text(r: AccuracyReport, title: str = "accuracy report") -> str:
    """Aligned-column plain text; accuracies shown to 3 decimals."""
    ids = r.matrix.class_ids
    names = [r.legend[c] for c in ids]
    name_w = max([len(n) for n in names] + [len("reference \\ predicted")])
    cell_w = max([len(n) for n in names] + [5])
    lines = [title, "=" * len(title), ""]
    header = "reference \\ predicted".ljust(name_w)
    for n in names:
        header += "  " + n.rjust(cell_w)
    lines.append(header)
    for i, cid in enumerate(ids):
        row = r.legend[cid].ljust(name_w)
        for j in range(len(ids)):
            row += "  " + str(int(r.matrix.counts[i, j])).rjust(cell_w)
        lines.append(row)
    lines.append("")
    lines.append(f"overall accuracy  {_fmt(r.overall_accuracy)}")
    lines.append(f"kappa             {_fmt(r.kappa)}")
    lines.append("")
    lines.append(
        "class".ljust(name_w) + "  " + "prod.".rjust(7) + "  " + "user".rjust(7)
    )
    for cid in ids:
        lines.append(
            r.legend[cid].ljust(name_w)
            + "  "
            + _fmt(r.producers_accuracy[cid]).rjust(7)
            + "  "
            + _fmt(r.users_accuracy[cid]).rjust(7)
        )
    return "\n".join(lines) + "\n"


def compare_report(optical: AccuracyReport, fused: AccuracyReport) -> dict:
    """Side-by-side comparison document; delta = fused minus optical.

    A negative delta (fusion not helping) is representable, not an error.
    """
    if optical.legend != fused.legend:
        raise LegendMismatch(
            f"reports cover different legends: {optical.legend} vs {fused.legend}"
        )
    ids = sorted(optical.legend)
    per_class = {}
    for cid in ids:
        per_class[str(cid)] = {
            "name": optical.legend[cid],
            "producers": {
                "optical": optical.producers_accuracy[cid],
                "fused": fused.producers_accuracy[cid],
            },
            "users": {
                "optical": optical.users_accuracy[cid],
                "fused": fused.users_accuracy[cid],
            },
        }
    return {
        "format": COMPARISON_FORMAT,
        "version": 1,
        "legend": {str(c): optical.legend[c] for c in ids},
        "overall_accuracy": {
            "optical": optical.overall_accuracy,
            "fused": fused.overall_accuracy,
            "delta": fused.overall_accuracy - optical.overall_accuracy,
        },
        "kappa": {
            "optical": optical.kappa,
            "fused": fused.kappa,
            "delta": fused.kappa - optical.kappa,
        },
        "per_class": per_class,
    }


def comparison_to_text(doc: dict) -> str:
    oa = doc["overall_accuracy"]
    ka = doc["kappa"]
    lines = [
        "optical vs fused comparison",
        "===========================",
        "",
        "metric            optical    fused    delta",
        f"overall accuracy    {oa['optical']:.3f}    {oa['fused']:.3f}   "
        f"{oa['delta']:+.3f}",
        f"kappa               {ka['optical']:.3f}    {ka['fused']:.3f}   "
        f"{ka['delta']:+.3f}",
        "",
        "per-class producer's accuracy (optical / fused)",
    ]
    for cid in sorted(doc["per_class"], key=int):
        entry = doc["per_class"][cid]
        p = entry["producers"]
        lines.append(
            f"  {entry['name']:<12} {_fmt(p['optical'])} / {_fmt(p['fused'])}"
        )
    return "\n".join(lines) + "\n"
