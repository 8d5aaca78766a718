from __future__ import annotations

import random

import pytest

from citecast.backends import (
    FailedPrediction,
    Prediction,
    UsageLedger,
    Verdict,
)
from citecast.corpus import group_of
from citecast.evaluation import (
    AgreementReport,
    ConfusionMatrix,
    EvaluationError,
    agreement,
    agreement_to_dict,
    average_row,
    build_report,
    confusion,
    journal_breakdown,
    metrics,
    positive_rate,
    render_report,
    report_round,
    report_to_dict,
)
from citecast.labeling import CitationLabel
from tests.conftest import make_record


def make_label(
    record_id: str, year: int = 1993, positive: bool = False, k: float = 5.0
) -> CitationLabel:
    return CitationLabel(
        record_id=record_id,
        year=year,
        k_percent=k,
        positive=positive,
        rank_in_year=1,
        cutoff_count=0,
    )


def make_prediction(record_id: str, positive: bool) -> Prediction:
    verdict = Verdict.POSITIVE if positive else Verdict.NEGATIVE
    return Prediction(
        record_id=record_id,
        verdict=verdict,
        raw_text="YES" if positive else "NO",
        input_tokens=10,
        output_tokens=1,
        cost_usd=0.0,
        attempts=1,
    )


def oracle_confusion(labels, predictions):
    """Reference tally, written as one flat pass with tuple cells."""
    by_id = {label.record_id: label for label in labels}
    cells: dict[str, tuple[int, int, int, int]] = {}
    failed = ungrouped = 0
    for result in predictions:
        if isinstance(result, FailedPrediction):
            failed += 1
            continue
        label = by_id[result.record_id]
        group = group_of(label.year)
        if group is None:
            ungrouped += 1
            continue
        tp, fp, tn, fn = cells.get(group.key, (0, 0, 0, 0))
        predicted = result.verdict is Verdict.POSITIVE
        if predicted and label.positive:
            tp += 1
        elif predicted:
            fp += 1
        elif label.positive:
            fn += 1
        else:
            tn += 1
        cells[group.key] = (tp, fp, tn, fn)
    return cells, failed, ungrouped


def random_fixture(rng: random.Random):
    labels = []
    predictions = []
    years = [1985, 1993, 1997, 2003, 2008, 2013, 2018, 2022, 2030]
    for i in range(rng.randint(1, 80)):
        record_id = f"r{i:03d}"
        labels.append(
            make_label(record_id, year=rng.choice(years), positive=rng.random() < 0.3)
        )
        if rng.random() < 0.1:
            predictions.append(FailedPrediction(record_id, "outage", attempts=3))
        else:
            predictions.append(make_prediction(record_id, rng.random() < 0.4))
    return labels, predictions


class TestConfusion:
    def test_hand_tally(self):
        labels = [
            make_label("a", positive=True),
            make_label("b", positive=True),
            make_label("c", positive=False),
            make_label("d", positive=False),
            make_label("e", positive=False),
        ]
        predictions = [
            make_prediction("a", True),  # tp
            make_prediction("b", False),  # fn
            make_prediction("c", True),  # fp
            make_prediction("d", False),  # tn
            make_prediction("e", False),  # tn
        ]
        result = confusion(labels, predictions)
        matrix = result.by_group[group_of(1993)]
        assert (matrix.tp, matrix.fp, matrix.tn, matrix.fn) == (1, 1, 2, 1)
        assert result.evaluated == 5
        assert result.failed_count == 0
        assert result.ungrouped_count == 0

    def test_failed_predictions_excluded_but_counted(self):
        labels = [make_label("a", positive=True), make_label("b")]
        predictions = [
            FailedPrediction("a", "err", attempts=3),
            make_prediction("b", False),
        ]
        result = confusion(labels, predictions)
        assert result.failed_count == 1
        assert result.evaluated == 1

    def test_prediction_without_label_rejected(self):
        with pytest.raises(EvaluationError, match="'ghost' has no matching label"):
            confusion([make_label("a")], [make_prediction("ghost", True)])

    def test_ungrouped_years_counted(self):
        labels = [make_label("a", year=1985), make_label("b", year=1993)]
        predictions = [make_prediction("a", True), make_prediction("b", True)]
        result = confusion(labels, predictions)
        assert result.ungrouped_count == 1
        assert result.evaluated == 1

    def test_groups_in_canonical_order(self):
        labels = [
            make_label("a", year=2018),
            make_label("b", year=1993),
            make_label("c", year=2003),
        ]
        predictions = [make_prediction(i, False) for i in ("a", "b", "c")]
        result = confusion(labels, predictions)
        assert [g.key for g in result.by_group] == ["1991-1995", "2001-2005", "2016-2020"]

    def test_matches_oracle_on_random_fixtures(self):
        rng = random.Random(77)
        for trial in range(50):
            labels, predictions = random_fixture(rng)
            result = confusion(labels, predictions)
            cells, failed, ungrouped = oracle_confusion(labels, predictions)
            got = {
                g.key: (m.tp, m.fp, m.tn, m.fn) for g, m in result.by_group.items()
            }
            assert got == cells, f"trial {trial}"
            assert result.failed_count == failed
            assert result.ungrouped_count == ungrouped


class TestMetrics:
    def test_hand_values(self):
        values = metrics(ConfusionMatrix(tp=3, fp=1, tn=5, fn=1))
        assert values.acc == pytest.approx(8 / 10)
        assert values.tpr == pytest.approx(3 / 4)
        assert values.fpr == pytest.approx(1 / 6)

    def test_empty_matrix_is_all_none(self):
        values = metrics(ConfusionMatrix(0, 0, 0, 0))
        assert (values.acc, values.tpr, values.fpr) == (None, None, None)

    def test_no_actual_positives(self):
        values = metrics(ConfusionMatrix(tp=0, fp=2, tn=8, fn=0))
        assert values.tpr is None
        assert values.fpr == pytest.approx(0.2)

    def test_no_actual_negatives(self):
        values = metrics(ConfusionMatrix(tp=2, fp=0, tn=0, fn=3))
        assert values.fpr is None
        assert values.tpr == pytest.approx(0.4)

    def test_identity_on_random_matrices(self):
        # acc equals (tpr*P + (1-fpr)*N) / (P+N) whenever all are defined
        rng = random.Random(11)
        for _ in range(200):
            matrix = ConfusionMatrix(
                tp=rng.randint(0, 50),
                fp=rng.randint(0, 50),
                tn=rng.randint(0, 50),
                fn=rng.randint(0, 50),
            )
            values = metrics(matrix)
            p, n = matrix.positives, matrix.negatives
            if values.acc is None or values.tpr is None or values.fpr is None:
                continue
            reconstructed = (values.tpr * p + (1 - values.fpr) * n) / (p + n)
            assert abs(values.acc - reconstructed) <= 1e-12

    def test_matrix_add(self):
        combined = ConfusionMatrix(1, 2, 3, 4).add(ConfusionMatrix(10, 20, 30, 40))
        assert combined == ConfusionMatrix(11, 22, 33, 44)


class TestAverageAndRounding:
    def test_decimal_sum_avoids_binary_drift(self):
        assert average_row([0.1, 0.2]) == 0.15

    def test_short_decimal_mean_is_exact(self):
        values = [0.918, 0.905, 0.943, 0.920, 0.925, 0.906]
        assert average_row(values) == 0.9195

    def test_none_values_skipped(self):
        assert average_row([0.5, None, 1.0]) == 0.75

    def test_all_none_is_none(self):
        assert average_row([None, None]) is None
        assert average_row([]) is None

    def test_half_up_rounding(self):
        assert report_round(0.9195, 3) == 0.920
        assert report_round(0.0005, 3) == 0.001
        assert report_round(0.1235, 3) == 0.124
        assert report_round(0.1234, 3) == 0.123

    def test_rounding_places(self):
        assert report_round(0.140471, 4) == 0.1405
        assert report_round(0.5, 0) == 1.0

    def test_rounding_none_passthrough(self):
        assert report_round(None) is None


class TestPositiveRate:
    def test_counts_and_proportion(self):
        predictions = [make_prediction(f"r{i}", i < 3) for i in range(8)]
        rate = positive_rate(predictions)
        assert rate.predicted_positive_count == 3
        assert rate.proportion == 0.375

    def test_failures_not_in_denominator(self):
        predictions = [
            make_prediction("a", True),
            FailedPrediction("b", "err", attempts=1),
        ]
        rate = positive_rate(predictions)
        assert rate.predicted_positive_count == 1
        assert rate.proportion == 1.0

    def test_no_successes_rejected(self):
        with pytest.raises(EvaluationError, match="at least one successful"):
            positive_rate([FailedPrediction("a", "err", attempts=1)])

    def test_four_decimal_rounding(self):
        predictions = [make_prediction(f"r{i}", i < 1682) for i in range(11974)]
        assert positive_rate(predictions).proportion == 0.1405


class TestBuildReport:
    def fixture(self):
        labels = [
            make_label("a", year=1993, positive=True),
            make_label("b", year=1993),
            make_label("c", year=2003, positive=True),
            make_label("d", year=2003),
        ]
        predictions = [
            make_prediction("a", True),
            make_prediction("b", False),
            make_prediction("c", False),
            make_prediction("d", False),
        ]
        return labels, predictions

    def test_rows_and_averages(self):
        labels, predictions = self.fixture()
        report = build_report(labels, predictions, backend_name="mock")
        assert [r.group.key for r in report.rows] == ["1991-1995", "2001-2005"]
        accs = [r.acc for r in report.rows]
        assert accs == [1.0, 0.5]
        assert report.average_acc == 0.75
        assert report.average_tpr == 0.5
        assert report.average_fpr == 0.0
        assert report.evaluated == 4
        assert report.k_percent == 5.0
        assert report.backend_name == "mock"

    def test_mixed_k_rejected(self):
        labels = [make_label("a", k=5.0), make_label("b", k=10.0)]
        predictions = [make_prediction("a", True), make_prediction("b", True)]
        with pytest.raises(EvaluationError, match="labels mix k values"):
            build_report(labels, predictions, backend_name="mock")

    def test_empty_labels_rejected(self):
        with pytest.raises(EvaluationError, match="no labels"):
            build_report([], [], backend_name="mock")

    def test_ledger_embedded(self):
        labels, predictions = self.fixture()
        ledger = UsageLedger(total_requests=4)
        report = build_report(labels, predictions, "mock", ledger=ledger)
        assert report.ledger == ledger


class TestAgreement:
    def years_for(self, ids, year=1993):
        return {record_id: year for record_id in ids}

    def test_identical_runs_agree_fully(self):
        run = [make_prediction(f"r{i}", i % 2 == 0) for i in range(10)]
        report = agreement(run, list(run), self.years_for([p.record_id for p in run]))
        assert report.average == 1.0
        assert report.compared == 10
        assert report.excluded == 0
        assert set(report.by_group.values()) == {1.0}

    def test_partial_disagreement_by_group(self):
        ids_93 = [f"a{i}" for i in range(4)]
        ids_03 = [f"b{i}" for i in range(2)]
        years = {**self.years_for(ids_93, 1993), **self.years_for(ids_03, 2003)}
        run_a = [make_prediction(i, True) for i in ids_93 + ids_03]
        # flip one verdict in 1993 (3/4 agree) and one in 2003 (1/2 agree)
        run_b = [
            make_prediction("a0", False),
            *[make_prediction(i, True) for i in ids_93[1:]],
            make_prediction("b0", False),
            make_prediction("b1", True),
        ]
        report = agreement(run_a, run_b, years)
        values = {g.key: v for g, v in report.by_group.items()}
        assert values == {"1991-1995": 0.75, "2001-2005": 0.5}
        # unweighted average over groups, not records
        assert report.average == 0.625
        assert report.compared_by_group[group_of(1993)] == 4

    def test_failures_excluded_from_comparison(self):
        run_a = [make_prediction("a", True), FailedPrediction("b", "err", attempts=1)]
        run_b = [make_prediction("a", True), make_prediction("b", True)]
        report = agreement(run_a, run_b, self.years_for(["a", "b"]))
        assert report.compared == 1
        assert report.excluded == 1
        assert report.average == 1.0

    def test_mismatched_ids_rejected(self):
        run_a = [make_prediction("a", True)]
        run_b = [make_prediction("b", True)]
        with pytest.raises(EvaluationError, match="runs cover different records"):
            agreement(run_a, run_b, {"a": 1993, "b": 1993})

    def test_large_mismatch_is_truncated(self):
        run_a = [make_prediction(f"x{i}", True) for i in range(9)]
        run_b = [make_prediction(f"y{i}", True) for i in range(9)]
        with pytest.raises(EvaluationError, match=r"\(\+13 more\)"):
            agreement(run_a, run_b, {})

    def test_unknown_year_rejected(self):
        run = [make_prediction("a", True)]
        with pytest.raises(EvaluationError, match="no year known for: 'a'"):
            agreement(run, list(run), {})

    def test_ungrouped_years_excluded(self):
        run = [make_prediction("a", True), make_prediction("b", True)]
        years = {"a": 1985, "b": 1993}
        report = agreement(run, list(run), years)
        assert report.compared == 1
        assert report.excluded == 1


class TestJournalBreakdown:
    def test_tally_and_ordering(self):
        records = []
        predictions = []
        plan = {
            "Journal B": {2021: 3, 2022: 1},
            "Journal A": {2021: 2, 2023: 2},
            "Journal C": {2022: 1},
        }
        i = 0
        for journal, per_year in plan.items():
            for year, count in per_year.items():
                for _ in range(count):
                    record_id = f"r{i:03d}"
                    records.append(
                        make_record(
                            record_id=record_id,
                            journal=journal,
                            year=year,
                            citations=None,
                        )
                    )
                    predictions.append(make_prediction(record_id, True))
                    i += 1
        # one negative per journal, which must not be tallied
        for j, journal in enumerate(plan):
            record_id = f"neg{j}"
            records.append(
                make_record(record_id=record_id, journal=journal, year=2021, citations=None)
            )
            predictions.append(make_prediction(record_id, False))

        rows = journal_breakdown(predictions, records)
        assert [(r.journal, r.total) for r in rows] == [
            ("Journal A", 4),
            ("Journal B", 4),
            ("Journal C", 1),
        ]
        assert rows[0].by_year == {2021: 2, 2023: 2}
        assert list(rows[0].by_year) == [2021, 2023]

    def test_ties_sorted_by_name(self):
        records = [
            make_record(record_id="a", journal="Zeta Journal", year=2021, citations=None),
            make_record(record_id="b", journal="Alpha Journal", year=2021, citations=None),
        ]
        predictions = [make_prediction("a", True), make_prediction("b", True)]
        rows = journal_breakdown(predictions, records)
        assert [r.journal for r in rows] == ["Alpha Journal", "Zeta Journal"]

    def test_failed_predictions_skipped(self):
        records = [make_record(record_id="a", journal="J", year=2021, citations=None)]
        rows = journal_breakdown([FailedPrediction("a", "err", attempts=1)], records)
        assert rows == []

    def test_unknown_record_rejected(self):
        with pytest.raises(EvaluationError, match="'a' has no matching record"):
            journal_breakdown([make_prediction("a", True)], [])


class TestRendering:
    def sample_report(self, with_ledger=False):
        labels = [
            make_label("a", year=1993, positive=True),
            make_label("b", year=1993),
        ]
        predictions = [make_prediction("a", True), make_prediction("b", False)]
        ledger = UsageLedger(2, 0, 20, 2, 0.000123, 0.5) if with_ledger else None
        return build_report(labels, predictions, "mock", ledger=ledger)

    def test_text_report_lines(self):
        text = render_report(self.sample_report())
        assert "Evaluation: top 5% labels, backend mock" in text
        assert "1991-1995" in text
        assert "average" in text
        assert "coverage: 2 evaluated, 0 failed, 0 outside groups" in text
        assert "usage:" not in text

    def test_text_report_usage_line(self):
        text = render_report(self.sample_report(with_ledger=True))
        assert "usage: 2 requests, 0 retries, 20 in / 2 out tokens, $0.000123" in text

    def test_render_deterministic(self):
        report = self.sample_report(with_ledger=True)
        assert render_report(report) == render_report(report)

    def test_none_metrics_render_as_na(self):
        labels = [make_label("a", year=1993, positive=True)]
        predictions = [make_prediction("a", True)]
        text = render_report(build_report(labels, predictions, "mock"))
        assert "n/a" in text  # fpr has no negatives to draw on

    def test_report_to_dict_shape(self):
        body = report_to_dict(self.sample_report(with_ledger=True))
        assert body["k_percent"] == 5.0
        assert body["backend"] == "mock"
        assert body["groups"][0]["group"] == "1991-1995"
        assert body["groups"][0]["acc"] == 1.0
        assert body["average"]["acc"] == 1.0
        assert body["predicted_positive"]["count"] == 1
        assert body["coverage"] == {"evaluated": 2, "failed": 0, "ungrouped": 0}
        assert body["usage"]["total_requests"] == 2

    def test_agreement_to_dict_shape(self):
        run = [make_prediction("a", True), make_prediction("b", False)]
        report = agreement(run, list(run), {"a": 1993, "b": 2003})
        body = agreement_to_dict(report)
        assert body["average"] == 1.0
        assert body["compared"] == 2
        assert {g["group"] for g in body["groups"]} == {"1991-1995", "2001-2005"}
        assert all(g["compared"] == 1 for g in body["groups"])

    def test_report_dict_is_json_stable(self):
        import json

        body = report_to_dict(self.sample_report(with_ledger=True))
        assert json.dumps(body, sort_keys=True) == json.dumps(body, sort_keys=True)


class TestAgreementReportType:
    def test_dataclass_fields(self):
        report = AgreementReport(
            by_group={}, compared_by_group={}, average=None, compared=0, excluded=0
        )
        assert report.average is None
