"""Scoring predictions against labels, and run-to-run agreement.

Metrics are computed per publication group and averaged without
weighting, so small groups count as much as large ones. Undefined values
(zero denominators) stay None instead of masquerading as 0.0. Reported
numbers round half up at the stated precision; a mean of 0.9195 prints
as 0.920, which plain binary-float rounding would miss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from citecast.backends import FailedPrediction, Prediction, UsageLedger, Verdict
from citecast.corpus import ALL_GROUPS, PaperRecord, PublicationGroup, group_of
from citecast.labeling import CitationLabel


class EvaluationError(ValueError):
    """Raised when inputs cannot be scored as requested."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        """Labeled positives."""
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        """Labeled negatives."""
        return self.fp + self.tn

    @property
    def predicted_positives(self) -> int:
        return self.tp + self.fp

    def add(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricValues:
    """acc, tpr, fpr for one matrix; None where the denominator is 0."""

    acc: float | None
    tpr: float | None
    fpr: float | None


def metrics(matrix: ConfusionMatrix) -> MetricValues:
    total = matrix.total
    positives = matrix.positives
    negatives = matrix.negatives
    return MetricValues(
        acc=(matrix.tp + matrix.tn) / total if total else None,
        tpr=matrix.tp / positives if positives else None,
        fpr=matrix.fp / negatives if negatives else None,
    )


@dataclass(frozen=True)
class ConfusionResult:
    """Per-group matrices plus what fell outside them."""

    by_group: dict[PublicationGroup, ConfusionMatrix]
    failed_count: int
    ungrouped_count: int

    @property
    def evaluated(self) -> int:
        return sum(m.total for m in self.by_group.values())


def confusion(
    labels: Iterable[CitationLabel],
    predictions: Sequence[Prediction | FailedPrediction],
) -> ConfusionResult:
    """Pair predictions with labels and tally per publication group.

    Failed prediction slots are excluded from every matrix and counted
    separately; a prediction whose id has no label is an error.
    """
    by_id: dict[str, CitationLabel] = {}
    for label in labels:
        by_id[label.record_id] = label

    cells: dict[PublicationGroup, dict[str, int]] = {}
    failed = 0
    ungrouped = 0
    for result in predictions:
        if isinstance(result, FailedPrediction):
            failed += 1
            continue
        label = by_id.get(result.record_id)
        if label is None:
            raise EvaluationError(
                f"prediction {result.record_id!r} has no matching label"
            )
        group = group_of(label.year)
        if group is None:
            ungrouped += 1
            continue
        counter = cells.setdefault(group, {"tp": 0, "fp": 0, "tn": 0, "fn": 0})
        predicted = result.verdict is Verdict.POSITIVE
        if predicted and label.positive:
            counter["tp"] += 1
        elif predicted and not label.positive:
            counter["fp"] += 1
        elif not predicted and label.positive:
            counter["fn"] += 1
        else:
            counter["tn"] += 1

    by_group = {
        group: ConfusionMatrix(**cells[group]) for group in ALL_GROUPS if group in cells
    }
    return ConfusionResult(by_group=by_group, failed_count=failed, ungrouped_count=ungrouped)


def average_row(values: Iterable[float | None]) -> float | None:
    """Unweighted mean of the defined values, None if there are none.

    Summation happens in decimal so short decimal inputs average without
    binary drift; reporting precision is applied later, not here.
    """
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    total = sum((Decimal(str(v)) for v in defined), Decimal(0))
    return float(total / Decimal(len(defined)))


def report_round(value: float | None, places: int = 3) -> float | None:
    """Half-up rounding for reported numbers; passes None through."""
    if value is None:
        return None
    exponent = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(exponent, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class PositiveRate:
    predicted_positive_count: int
    proportion: float


def positive_rate(predictions: Sequence[Prediction | FailedPrediction]) -> PositiveRate:
    """Share of successful predictions that came back positive.

    The proportion is rounded half up to four decimals, matching how
    percentage tables with two decimals are usually quoted.
    """
    successes = [p for p in predictions if isinstance(p, Prediction)]
    if not successes:
        raise EvaluationError("positive rate needs at least one successful prediction")
    count = sum(1 for p in successes if p.verdict is Verdict.POSITIVE)
    proportion = report_round(count / len(successes), places=4)
    assert proportion is not None
    return PositiveRate(predicted_positive_count=count, proportion=proportion)


@dataclass(frozen=True)
class GroupRow:
    """One group's metrics inside an evaluation report."""

    group: PublicationGroup
    matrix: ConfusionMatrix
    acc: float | None
    tpr: float | None
    fpr: float | None
    predicted_positive_count: int
    predicted_positive_rate: float | None


@dataclass(frozen=True)
class EvaluationReport:
    k_percent: float
    backend_name: str
    rows: tuple[GroupRow, ...]
    average_acc: float | None
    average_tpr: float | None
    average_fpr: float | None
    overall_positive: PositiveRate
    evaluated: int
    failed_count: int
    ungrouped_count: int
    ledger: UsageLedger | None = None


def build_report(
    labels: Sequence[CitationLabel],
    predictions: Sequence[Prediction | FailedPrediction],
    backend_name: str,
    ledger: UsageLedger | None = None,
) -> EvaluationReport:
    """Full scoring pass: per-group rows, unweighted averages, coverage."""
    if not labels:
        raise EvaluationError("no labels to evaluate against")
    k_values = {label.k_percent for label in labels}
    if len(k_values) > 1:
        raise EvaluationError(f"labels mix k values: {sorted(k_values)}")
    result = confusion(labels, predictions)
    rows = []
    for group, matrix in result.by_group.items():
        values = metrics(matrix)
        rows.append(
            GroupRow(
                group=group,
                matrix=matrix,
                acc=values.acc,
                tpr=values.tpr,
                fpr=values.fpr,
                predicted_positive_count=matrix.predicted_positives,
                predicted_positive_rate=(
                    matrix.predicted_positives / matrix.total if matrix.total else None
                ),
            )
        )
    return EvaluationReport(
        k_percent=k_values.pop(),
        backend_name=backend_name,
        rows=tuple(rows),
        average_acc=average_row(r.acc for r in rows),
        average_tpr=average_row(r.tpr for r in rows),
        average_fpr=average_row(r.fpr for r in rows),
        overall_positive=positive_rate(predictions),
        evaluated=result.evaluated,
        failed_count=result.failed_count,
        ungrouped_count=result.ungrouped_count,
        ledger=ledger,
    )


@dataclass(frozen=True)
class AgreementReport:
    """How often two runs issued the same verdict, per group."""

    by_group: dict[PublicationGroup, float]
    compared_by_group: dict[PublicationGroup, int]
    average: float | None
    compared: int
    excluded: int


def agreement(
    run_a: Sequence[Prediction | FailedPrediction],
    run_b: Sequence[Prediction | FailedPrediction],
    years: Mapping[str, int],
) -> AgreementReport:
    """Verdict agreement between two runs over the same records.

    Both runs must cover exactly the same record ids. Records that
    failed in either run are excluded from comparison but counted. Group
    membership comes from the years mapping.
    """
    ids_a = {p.record_id for p in run_a}
    ids_b = {p.record_id for p in run_b}
    if ids_a != ids_b:
        diff = sorted(ids_a.symmetric_difference(ids_b))
        shown = ", ".join(repr(i) for i in diff[:5])
        more = f" (+{len(diff) - 5} more)" if len(diff) > 5 else ""
        raise EvaluationError(f"runs cover different records: {shown}{more}")
    missing_years = sorted(i for i in ids_a if i not in years)
    if missing_years:
        shown = ", ".join(repr(i) for i in missing_years[:5])
        raise EvaluationError(f"no year known for: {shown}")

    verdicts_b = {
        p.record_id: p.verdict for p in run_b if isinstance(p, Prediction)
    }
    matches: dict[PublicationGroup, int] = {}
    counts: dict[PublicationGroup, int] = {}
    excluded = 0
    for result in run_a:
        if not isinstance(result, Prediction) or result.record_id not in verdicts_b:
            excluded += 1
            continue
        group = group_of(years[result.record_id])
        if group is None:
            excluded += 1
            continue
        counts[group] = counts.get(group, 0) + 1
        if result.verdict is verdicts_b[result.record_id]:
            matches[group] = matches.get(group, 0) + 1

    by_group = {
        group: matches.get(group, 0) / counts[group]
        for group in ALL_GROUPS
        if group in counts
    }
    compared_by_group = {group: counts[group] for group in ALL_GROUPS if group in counts}
    return AgreementReport(
        by_group=by_group,
        compared_by_group=compared_by_group,
        average=average_row(by_group.values()),
        compared=sum(counts.values()),
        excluded=excluded,
    )


@dataclass(frozen=True)
class JournalRow:
    journal: str
    total: int
    by_year: dict[int, int] = field(hash=False, default_factory=dict)


def journal_breakdown(
    predictions: Sequence[Prediction | FailedPrediction],
    records: Iterable[PaperRecord],
) -> list[JournalRow]:
    """Predicted positives per journal, with per-year counts.

    Rows are sorted by total descending, then journal name, so the table
    reads from the most predicted-positive venue down.
    """
    by_id = {record.record_id: record for record in records}
    tallies: dict[str, dict[int, int]] = {}
    for result in predictions:
        if isinstance(result, FailedPrediction):
            continue
        record = by_id.get(result.record_id)
        if record is None:
            raise EvaluationError(
                f"prediction {result.record_id!r} has no matching record"
            )
        if result.verdict is Verdict.POSITIVE:
            per_year = tallies.setdefault(record.journal, {})
            per_year[record.year] = per_year.get(record.year, 0) + 1
    rows = [
        JournalRow(
            journal=journal,
            total=sum(per_year.values()),
            by_year=dict(sorted(per_year.items())),
        )
        for journal, per_year in tallies.items()
    ]
    rows.sort(key=lambda row: (-row.total, row.journal))
    return rows


def _format_value(value: float | None, places: int = 3) -> str:
    rounded = report_round(value, places)
    return "n/a" if rounded is None else f"{rounded:.{places}f}"


def render_report(report: EvaluationReport) -> str:
    """Plain-text report with reporting precision applied."""
    lines = [
        f"Evaluation: top {report.k_percent:g}% labels, backend {report.backend_name}",
        "",
        f"{'group':<12}{'n':>6}{'acc':>8}{'tpr':>8}{'fpr':>8}{'pos':>6}{'pos%':>8}",
    ]
    for row in report.rows:
        rate = report_round(row.predicted_positive_rate, 4)
        rate_text = "n/a" if rate is None else f"{rate * 100:.2f}"
        lines.append(
            f"{row.group.key:<12}{row.matrix.total:>6}"
            f"{_format_value(row.acc):>8}{_format_value(row.tpr):>8}"
            f"{_format_value(row.fpr):>8}{row.predicted_positive_count:>6}"
            f"{rate_text:>8}"
        )
    lines.append(
        f"{'average':<12}{report.evaluated:>6}"
        f"{_format_value(report.average_acc):>8}{_format_value(report.average_tpr):>8}"
        f"{_format_value(report.average_fpr):>8}"
    )
    lines.append("")
    lines.append(
        f"predicted positive: {report.overall_positive.predicted_positive_count} "
        f"({report.overall_positive.proportion * 100:.2f}% of successful predictions)"
    )
    lines.append(
        f"coverage: {report.evaluated} evaluated, {report.failed_count} failed, "
        f"{report.ungrouped_count} outside groups"
    )
    if report.ledger is not None:
        ledger = report.ledger
        lines.append(
            f"usage: {ledger.total_requests} requests, {ledger.total_retries} retries, "
            f"{ledger.total_input_tokens} in / {ledger.total_output_tokens} out tokens, "
            f"${ledger.total_cost_usd:.6f}"
        )
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready view of a report; values carry reporting precision."""
    body: dict = {
        "k_percent": report.k_percent,
        "backend": report.backend_name,
        "groups": [
            {
                "group": row.group.key,
                "tp": row.matrix.tp,
                "fp": row.matrix.fp,
                "tn": row.matrix.tn,
                "fn": row.matrix.fn,
                "acc": report_round(row.acc),
                "tpr": report_round(row.tpr),
                "fpr": report_round(row.fpr),
                "predicted_positive_count": row.predicted_positive_count,
                "predicted_positive_rate": report_round(row.predicted_positive_rate, 4),
            }
            for row in report.rows
        ],
        "average": {
            "acc": report_round(report.average_acc),
            "tpr": report_round(report.average_tpr),
            "fpr": report_round(report.average_fpr),
        },
        "predicted_positive": {
            "count": report.overall_positive.predicted_positive_count,
            "proportion": report.overall_positive.proportion,
        },
        "coverage": {
            "evaluated": report.evaluated,
            "failed": report.failed_count,
            "ungrouped": report.ungrouped_count,
        },
    }
    if report.ledger is not None:
        body["usage"] = {
            "total_requests": report.ledger.total_requests,
            "total_retries": report.ledger.total_retries,
            "total_input_tokens": report.ledger.total_input_tokens,
            "total_output_tokens": report.ledger.total_output_tokens,
            "total_cost_usd": report.ledger.total_cost_usd,
        }
    return body


def agreement_to_dict(report: AgreementReport) -> dict:
    """JSON-ready view of an agreement report."""
    return {
        "groups": [
            {
                "group": group.key,
                "agreement": report_round(value),
                "compared": report.compared_by_group[group],
            }
            for group, value in report.by_group.items()
        ],
        "average": report_round(report.average),
        "compared": report.compared,
        "excluded": report.excluded,
    }
