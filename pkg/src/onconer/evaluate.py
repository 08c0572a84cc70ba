"""Entity-level strict matching and metric tables.

A prediction counts only when start, end and label all equal a gold span,
and every span is matched at most once. Zero denominators yield 0, never
NaN, so tables are reproducible. The comparison report mirrors the
hit/miss view: per label, the number of real entities, of correctly and
of incorrectly predicted ones, with predictions on documents that carry
no gold annotation bucketed under the pseudo-label NO_LABEL as
``extra_detected`` (strict matching has no gold to judge them against).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import FIGURE_LABEL_ORDER, TABLE_LABEL_ORDER, Label
from .errors import DataError

NO_LABEL = "NO_LABEL"


class SpanLike(Protocol):
    start: int
    end: int
    label: Label


def f1(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when both terms are 0."""
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise DataError(f"precision/recall outside [0, 1]: ({precision}, {recall})")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[SpanLike, SpanLike], ...]


def match_strict(gold: Sequence[SpanLike], predicted: Sequence[SpanLike]) -> MatchResult:
    """Match on exact (start, end, label); each span used at most once."""
    remaining: dict[tuple[int, int, Label], list[SpanLike]] = {}
    for span in gold:
        remaining.setdefault((span.start, span.end, span.label), []).append(span)
    pairs = []
    fp = 0
    for span in predicted:
        key = (span.start, span.end, span.label)
        bucket = remaining.get(key)
        if bucket:
            pairs.append((bucket.pop(0), span))
        else:
            fp += 1
    tp = len(pairs)
    return MatchResult(tp, fp, len(gold) - tp, tuple(pairs))


@dataclass(frozen=True)
class LabelMetrics:
    label: Label
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @property
    def support(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class GlobalMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float | None = None
    loss: float | None = None


DocSpans = Mapping[str, Sequence[SpanLike]]


def _doc_ids(gold: DocSpans, predicted: DocSpans) -> list[str]:
    return sorted(set(gold) | set(predicted))


def _label_counts(gold: DocSpans, predicted: DocSpans) -> dict[Label, tuple[int, int, int]]:
    counts = {label: [0, 0, 0] for label in Label}
    for doc_id in _doc_ids(gold, predicted):
        gold_spans = list(gold.get(doc_id, ()))
        pred_spans = list(predicted.get(doc_id, ()))
        for label in Label:
            result = match_strict(
                [s for s in gold_spans if s.label == label],
                [s for s in pred_spans if s.label == label],
            )
            counts[label][0] += result.tp
            counts[label][1] += result.fp
            counts[label][2] += result.fn
    return {label: tuple(c) for label, c in counts.items()}


def per_label_metrics(gold: DocSpans, predicted: DocSpans) -> list[LabelMetrics]:
    """Strict precision, recall and F1 per label, in table order."""
    counts = _label_counts(gold, predicted)
    table = []
    for label in TABLE_LABEL_ORDER:
        tp, fp, fn = counts[label]
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        table.append(LabelMetrics(label, tp, fp, fn, precision, recall, f1(precision, recall)))
    return table


def global_metrics(
    gold: DocSpans,
    predicted: DocSpans,
    accuracy: float | None = None,
    loss: float | None = None,
) -> GlobalMetrics:
    """Micro-averaged metrics over summed counts, plus pass-through
    token accuracy and loss when available."""
    counts = _label_counts(gold, predicted)
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return GlobalMetrics(tp, fp, fn, precision, recall, f1(precision, recall), accuracy, loss)


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    real: int
    correct_predicted: int
    incorrect_predicted: int
    extra_detected: int = 0

    def __post_init__(self) -> None:
        if min(self.real, self.correct_predicted, self.incorrect_predicted, self.extra_detected) < 0:
            raise DataError(f"negative count in comparison row {self.label}")


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]

    @classmethod
    def from_counts(
        cls,
        counts: Iterable[tuple[str, int, int, int]] | Iterable[tuple[str, int, int, int, int]],
    ) -> "ComparisonReport":
        """Build a report from externally supplied count series.

        External series may show more correct detections than real
        entities; counts are taken as given.
        """
        rows = [ComparisonRow(*entry) for entry in counts]
        return cls(tuple(rows))

    def hit_fraction(self) -> Fraction | None:
        """Correct over correct plus incorrect, exact; None when undefined."""
        correct = sum(row.correct_predicted for row in self.rows)
        incorrect = sum(row.incorrect_predicted for row in self.rows)
        if correct + incorrect == 0:
            return None
        return Fraction(correct, correct + incorrect)

    def row(self, label: str) -> ComparisonRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def compare_report(gold: DocSpans, predicted: DocSpans) -> ComparisonReport:
    """Per-label real / correct / incorrect counts under strict matching.

    Predictions on documents without any gold span are not judged; they
    accumulate on the NO_LABEL row as ``extra_detected``.
    """
    annotated_gold: dict[str, Sequence[SpanLike]] = {}
    annotated_pred: dict[str, Sequence[SpanLike]] = {}
    extra = 0
    for doc_id in _doc_ids(gold, predicted):
        gold_spans = list(gold.get(doc_id, ()))
        pred_spans = list(predicted.get(doc_id, ()))
        if gold_spans:
            annotated_gold[doc_id] = gold_spans
            annotated_pred[doc_id] = pred_spans
        else:
            extra += len(pred_spans)
    counts = _label_counts(annotated_gold, annotated_pred)
    rows = []
    for label in FIGURE_LABEL_ORDER:
        tp, fp, fn = counts[label]
        rows.append(ComparisonRow(label.value, tp + fn, tp, fp, 0))
    rows.append(ComparisonRow(NO_LABEL, 0, 0, 0, extra))
    return ComparisonReport(tuple(rows))


@dataclass(frozen=True)
class EvaluationReport:
    per_label: tuple[LabelMetrics, ...]
    overall: GlobalMetrics

    def to_json_obj(self) -> dict:
        return {
            "per_label": [
                {
                    "label": m.label.value,
                    "tp": m.tp,
                    "fp": m.fp,
                    "fn": m.fn,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for m in self.per_label
            ],
            "global": {
                "tp": self.overall.tp,
                "fp": self.overall.fp,
                "fn": self.overall.fn,
                "precision": self.overall.precision,
                "recall": self.overall.recall,
                "f1": self.overall.f1,
                "accuracy": self.overall.accuracy,
                "loss": self.overall.loss,
            },
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvaluationReport":
        per_label = tuple(
            LabelMetrics(
                Label(entry["label"]),
                entry["tp"],
                entry["fp"],
                entry["fn"],
                entry["precision"],
                entry["recall"],
                entry["f1"],
            )
            for entry in obj["per_label"]
        )
        g = obj["global"]
        overall = GlobalMetrics(
            g["tp"], g["fp"], g["fn"], g["precision"], g["recall"], g["f1"],
            g.get("accuracy"), g.get("loss"),
        )
        return cls(per_label, overall)


def evaluate(
    gold: DocSpans,
    predicted: DocSpans,
    accuracy: float | None = None,
    loss: float | None = None,
) -> EvaluationReport:
    return EvaluationReport(
        tuple(per_label_metrics(gold, predicted)),
        global_metrics(gold, predicted, accuracy, loss),
    )


def comparison_to_json_obj(report: ComparisonReport) -> dict:
    fraction = report.hit_fraction()
    return {
        "rows": [
            {
                "label": row.label,
                "real": row.real,
                "correct_predicted": row.correct_predicted,
                "incorrect_predicted": row.incorrect_predicted,
                "extra_detected": row.extra_detected,
            }
            for row in report.rows
        ],
        "hit_fraction": None if fraction is None else [fraction.numerator, fraction.denominator],
    }


def comparison_from_json_obj(obj: dict) -> ComparisonReport:
    return ComparisonReport(
        tuple(
            ComparisonRow(
                entry["label"],
                entry["real"],
                entry["correct_predicted"],
                entry["incorrect_predicted"],
                entry.get("extra_detected", 0),
            )
            for entry in obj["rows"]
        )
    )
