"""Render metric tables and chart-ready data series.

The per-label table has one column
per label with F1, Precision and Recall rows; the global table has
Accuracy, F1, Precision, Recall and Loss columns. All numeric cells use
four decimals and output is byte-identical for identical input. Charts
are emitted as data (CSV and JSON), not images.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .corpus import TABLE_LABEL_ORDER, LabelDistribution
from .errors import DataError
from .evaluate import ComparisonReport, EvaluationReport, GlobalMetrics, LabelMetrics, NO_LABEL

logger = logging.getLogger(__name__)

FORMATS = ("csv", "txt", "md")

PIE_SERIES = ("Hits", "Misses")
BAR_SERIES = ("Real entity", "Correct predicted entity", "Incorrect predicted entity")
EXTRA_SERIES = "Extra detected"


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        raise DataError("boolean cell")
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"


def _render_grid(header: list[str], rows: list[list[str]], fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(header)] + [",".join(row) for row in rows]
        return "".join(line + "\n" for line in lines)
    if fmt == "md":
        lines = [
            "| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ] + ["| " + " | ".join(row) + " |" for row in rows]
        return "".join(line + "\n" for line in lines)
    if fmt == "txt":
        widths = [
            max(len(header[col]), *(len(row[col]) for row in rows)) if rows else len(header[col])
            for col in range(len(header))
        ]
        def line(cells: list[str]) -> str:
            return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()
        return "".join(line(cells) + "\n" for cells in [header] + rows)
    raise DataError(f"unknown table format {fmt!r}; choose from {FORMATS}")


def render_label_table(metrics: Sequence[LabelMetrics], fmt: str = "txt") -> str:
    header = ["Metric"] + [m.label.value for m in metrics]
    rows = [
        ["F1"] + [_fmt(m.f1) for m in metrics],
        ["Precision"] + [_fmt(m.precision) for m in metrics],
        ["Recall"] + [_fmt(m.recall) for m in metrics],
    ]
    return _render_grid(header, rows, fmt)


def render_global_table(overall: GlobalMetrics, fmt: str = "txt") -> str:
    header = ["Accuracy", "F1", "Precision", "Recall", "Loss"]
    rows = [[
        _fmt(overall.accuracy),
        _fmt(overall.f1),
        _fmt(overall.precision),
        _fmt(overall.recall),
        _fmt(overall.loss),
    ]]
    return _render_grid(header, rows, fmt)


def render_comparison_table(report: ComparisonReport, fmt: str = "txt") -> str:
    header = ["Label", "Real", "Correct predicted", "Incorrect predicted", "Extra detected"]
    rows = [
        [row.label, str(row.real), str(row.correct_predicted),
         str(row.incorrect_predicted), str(row.extra_detected)]
        for row in report.rows
    ]
    return _render_grid(header, rows, fmt)


def render_distribution(distribution: LabelDistribution, fmt: str = "txt") -> str:
    header = ["Set"] + [label.value for label in TABLE_LABEL_ORDER]
    rows = []
    for name, counts in distribution.splits.items():
        rows.append([name] + [str(counts.get(label, 0)) for label in TABLE_LABEL_ORDER])
    rows.append(["Complete"] + [str(distribution.complete.get(label, 0)) for label in TABLE_LABEL_ORDER])
    return _render_grid(header, rows, fmt)


def render_tables(report: EvaluationReport, fmt: str = "txt") -> str:
    """Per-label table followed by the global table."""
    return render_label_table(report.per_label, fmt) + "\n" + render_global_table(report.overall, fmt)


@dataclass(frozen=True)
class ChartSeries:
    kind: str  # "pie" or "grouped_bar"
    categories: tuple[str, ...]
    series: dict[str, tuple[float, ...]]

    def __post_init__(self) -> None:
        for name, values in self.series.items():
            if len(values) != len(self.categories):
                raise DataError(f"series {name!r} length differs from categories")
        if self.kind == "pie":
            total = sum(next(iter(self.series.values())))
            if abs(total - 100.0) > 0.1:
                raise DataError(f"pie values sum to {total}, expected 100")


def round_half_up(value: Fraction, decimals: int = 1) -> Fraction:
    scale = Fraction(10) ** decimals
    return Fraction((value * scale + Fraction(1, 2)).__floor__(), 1) / scale


def _insert_alphabetical(labels: list[str], name: str) -> list[str]:
    for index, label in enumerate(labels):
        if name < label:
            return labels[:index] + [name] + labels[index:]
    return labels + [name]


def emit_chart_data(report: ComparisonReport) -> list[ChartSeries]:
    """Pie (hits/misses percentages) plus the grouped bar series.

    Bar categories keep the label enumeration order with all-zero labels
    dropped; a nonzero NO_LABEL row is inserted at its alphabetical
    position. The pie is omitted with a notice when the hit fraction is
    undefined.
    """
    charts: list[ChartSeries] = []
    fraction = report.hit_fraction()
    if fraction is None:
        logger.warning("hit fraction undefined (no judged predictions); pie chart omitted")
    else:
        hits = float(round_half_up(100 * fraction))
        charts.append(
            ChartSeries("pie", PIE_SERIES, {"percent": (hits, round(100.0 - hits, 1))})
        )

    by_label = {row.label: row for row in report.rows}
    shown = [
        row.label
        for row in report.rows
        if row.label != NO_LABEL
        and (row.real or row.correct_predicted or row.incorrect_predicted or row.extra_detected)
    ]
    if not shown:
        shown = [row.label for row in report.rows if row.label != NO_LABEL]
    no_label = by_label.get(NO_LABEL)
    if no_label and (
        no_label.real or no_label.correct_predicted
        or no_label.incorrect_predicted or no_label.extra_detected
    ):
        shown = _insert_alphabetical(shown, NO_LABEL)

    def values(getter) -> tuple[float, ...]:
        return tuple(float(getter(by_label[label])) for label in shown)

    series: dict[str, tuple[float, ...]] = {
        BAR_SERIES[0]: values(lambda r: r.real),
        BAR_SERIES[1]: values(lambda r: r.correct_predicted),
        BAR_SERIES[2]: values(lambda r: r.incorrect_predicted),
    }
    if any(row.extra_detected for row in report.rows):
        series[EXTRA_SERIES] = values(lambda r: r.extra_detected)
    charts.append(ChartSeries("grouped_bar", tuple(shown), series))
    return charts


def chart_series_to_json_obj(chart: ChartSeries) -> dict:
    return {
        "kind": chart.kind,
        "categories": list(chart.categories),
        "series": {name: list(values) for name, values in chart.series.items()},
    }


def render_pie_csv(chart: ChartSeries) -> str:
    lines = ["category,percent"]
    values = chart.series["percent"]
    for category, value in zip(chart.categories, values):
        lines.append(f"{category},{value:.1f}")
    return "".join(line + "\n" for line in lines)


def render_bars_csv(chart: ChartSeries) -> str:
    names = list(chart.series)
    lines = [",".join(["label"] + names)]
    for index, category in enumerate(chart.categories):
        cells = [category] + [f"{chart.series[name][index]:g}" for name in names]
        lines.append(",".join(cells))
    return "".join(line + "\n" for line in lines)


def render_charts_json(charts: Sequence[ChartSeries]) -> str:
    payload = {"charts": [chart_series_to_json_obj(chart) for chart in charts]}
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
