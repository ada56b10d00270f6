import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimstage.errors import EvalError, ValidationError
from claimstage.evaluation import (
    EvaluationReport,
    PredictionSet,
    ReportRow,
    fmt2,
    improvement,
    macro_average,
    read_submission,
    render_report,
    report_from_json_dict,
    report_to_json_dict,
    round_half_up,
    success_at_k,
    success_curve,
    write_submission,
)
from claimstage.records import PairSet

GOLDEN = Path(__file__).parent / "data" / "golden_report.txt"


class TestRounding:
    def test_half_up_at_boundary(self):
        assert round_half_up(93.645) == 93.65
        assert round_half_up(95.13875) == 95.14
        assert fmt2(82.1775) == "82.18"

    def test_format_keeps_trailing_zeros(self):
        assert fmt2(100.0) == "100.00"
        assert fmt2(7.5) == "7.50"


class TestSuccessAtK:
    def test_gold_at_rank_ten_counts(self):
        gold = PairSet([(1, 50), (1, 51)])
        predictions = PredictionSet({1: list(range(9)) + [51]})
        assert success_at_k(predictions, gold, 10) == 1.0

    def test_no_gold_hit_scores_zero(self):
        gold = PairSet([(1, 50)])
        predictions = PredictionSet({1: list(range(10))})
        assert success_at_k(predictions, gold, 10) == 0.0

    def test_two_of_three_posts(self):
        gold = PairSet([(1, 10), (2, 20), (3, 30)])
        predictions = PredictionSet({1: [10], 2: [20], 3: [99]})
        assert success_at_k(predictions, gold, 10) == pytest.approx(2 / 3)

    def test_post_without_gold_is_an_error(self):
        gold = PairSet([(1, 10)])
        predictions = PredictionSet({1: [10], 2: [10]})
        with pytest.raises(EvalError, match="post 2"):
            success_at_k(predictions, gold, 10)

    def test_duplicate_prediction_ids_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            PredictionSet({1: [5, 5]})

    def test_k_truncates_before_matching(self):
        gold = PairSet([(1, 9)])
        predictions = PredictionSet({1: [0, 1, 9]})
        assert success_at_k(predictions, gold, 2) == 0.0
        assert success_at_k(predictions, gold, 3) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_monotone_in_k(self, data):
        rng = random.Random(data.draw(st.integers(0, 10**6)))
        posts = list(range(rng.randint(1, 20)))
        gold = PairSet([(p, rng.randint(0, 30)) for p in posts])
        predictions = PredictionSet({p: rng.sample(range(40), 10) for p in posts})
        curve = success_curve(predictions, gold, ks=range(1, 11))
        values = [curve[k] for k in range(1, 11)]
        assert values == sorted(values)

    def test_post_iteration_order_irrelevant(self):
        gold = PairSet([(1, 10), (2, 20), (3, 30)])
        forward = PredictionSet({1: [10], 2: [21], 3: [30]})
        backward = PredictionSet({3: [30], 2: [21], 1: [10]})
        assert success_at_k(forward, gold) == success_at_k(backward, gold)


class TestMacroAverage:
    def test_published_retrieval_row(self):
        values = {
            "eng": 78.03, "spa": 81.30, "deu": 79.51, "por": 80.46,
            "fra": 84.04, "ara": 80.76, "msa": 78.09, "tha": 95.23,
        }
        assert macro_average(values) == 82.18

    def test_published_voting_row(self):
        values = {
            "eng": 91.21, "spa": 95.44, "deu": 93.97, "por": 94.03,
            "fra": 95.74, "ara": 93.58, "msa": 97.14, "tha": 100.0,
        }
        assert macro_average(values) == 95.14

    def test_singleton_is_identity(self):
        assert macro_average({"tha": 97.61}) == 97.61

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            macro_average({})


class TestImprovement:
    def test_published_monolingual_gain(self):
        assert improvement(95.14, 93.73) == 1.41

    def test_published_crosslingual_gain(self):
        assert improvement(84.05, 80.25) == 3.80

    def test_equal_inputs(self):
        assert improvement(80.0, 80.0) == 0.00


def _report() -> EvaluationReport:
    return EvaluationReport(
        track="monolingual",
        rows=(
            ReportRow(model="model-a", plan="OT",
                      by_language={"eng": 80.125, "tha": 90.0}),
            ReportRow(model="Voting", plan="OT",
                      by_language={"eng": 81.5, "tha": 92.345}),
        ),
    )


class TestReportRendering:
    def test_single_model_two_languages_shape(self):
        report = EvaluationReport(
            track="monolingual",
            rows=(ReportRow(model="m", plan="O", by_language={"eng": 50.0, "deu": 60.0}),),
        )
        text = render_report(report)
        lines = text.strip().splitlines()
        assert len(lines) == 4  # title, header, separator, one data row
        assert lines[1].split("|")[2].strip() == "Avg"
        data_cells = [c.strip() for c in lines[3].split("|")]
        assert data_cells == ["m", "O", "55.00", "50.00", "60.00"]

    def test_languages_follow_paper_order(self):
        report = EvaluationReport(
            track="monolingual",
            rows=(ReportRow(model="m", plan="O",
                            by_language={"tha": 1.0, "eng": 2.0, "ara": 3.0}),),
        )
        header = render_report(report).splitlines()[1]
        assert header.index("eng") < header.index("ara") < header.index("tha")

    def test_crosslingual_single_avg_column(self):
        report = EvaluationReport(
            track="crosslingual",
            rows=(ReportRow(model="m", plan="T", avg=72.64),),
        )
        lines = render_report(report).strip().splitlines()
        assert [c.strip() for c in lines[1].split("|")] == ["Model", "Plan", "Avg"]
        assert "72.64" in lines[3]

    def test_json_round_trip(self):
        report = _report()
        rebuilt = report_from_json_dict(json.loads(json.dumps(report_to_json_dict(report))))
        assert rebuilt == report

    def test_matches_golden_file(self):
        assert render_report(_report()) == GOLDEN.read_text(encoding="utf-8")

    def test_avg_consistent_with_macro_average(self):
        row = _report().rows[0]
        assert row.average() == macro_average(row.by_language)


class TestSubmissionFiles:
    def test_round_trip(self, tmp_path):
        predictions = PredictionSet({2: [5, 6], 1: [7]})
        path = tmp_path / "monolingual_predictions.json"
        write_submission(predictions, path)
        assert read_submission(path) == predictions

    def test_keys_written_in_numeric_order(self, tmp_path):
        predictions = PredictionSet({10: [1], 2: [1]})
        path = tmp_path / "predictions.json"
        write_submission(predictions, path)
        text = path.read_text()
        assert text.index('"2"') < text.index('"10"')

    def test_byte_determinism(self, tmp_path):
        predictions = PredictionSet({3: [9, 8], 1: [7, 6]})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_submission(predictions, a)
        write_submission(predictions, b)
        assert a.read_bytes() == b.read_bytes()

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValidationError):
            read_submission(path)
