"""Report rendering: csv/md, best-cell marking, figures."""

import numpy as np
import pytest

from rankmcc.report import (
    ExperimentReport,
    ReportRow,
    best_flags,
    parse_csv,
    render_figure,
    to_csv,
    to_markdown,
    write_report,
)


def _row(loss, head, t1, t5, n5):
    return ReportRow("blobs", loss, head, t1, t5, n5)


@pytest.fixture
def report():
    return ExperimentReport(
        rows=[
            _row("softmax_ce", "dot", 12.0, 3.0, 88.5),
            _row("softmax_ce", "lc_mlp", 11.0, 3.0, 89.25),
            _row("mse", "dot", 11.0, 2.5, 87.0),
        ],
        config={"seed": 1},
        seed=1,
    )


class TestCsv:
    def test_round_trip_two_decimals(self, report):
        text = to_csv(report)
        back = parse_csv(text)
        assert len(back.rows) == 3
        for a, b in zip(report.rows, back.rows):
            assert (a.dataset, a.loss, a.interaction) == (b.dataset, b.loss, b.interaction)
            assert b.top1_error == pytest.approx(a.top1_error, abs=0.005)
            assert b.top5_error == pytest.approx(a.top5_error, abs=0.005)
            assert b.ndcg5 == pytest.approx(a.ndcg5, abs=0.005)
        assert to_csv(back) == text

    def test_empty_report_is_header_only(self):
        text = to_csv(ExperimentReport(rows=[]))
        assert text == "dataset,loss,interaction,top1_error,top5_error,ndcg5\n"

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            parse_csv("a,b,c\n")


class TestBestMarking:
    def test_ties_share_the_mark(self, report):
        flags = best_flags(report)
        assert flags["top1_error"] == {1, 2}
        assert flags["top5_error"] == {2}
        assert flags["ndcg5"] == {1}

    def test_every_metric_column_has_a_mark(self, report):
        flags = best_flags(report)
        for column, marked in flags.items():
            assert marked, f"no best mark for {column}"

    def test_markdown_bolds_best(self, report):
        md = to_markdown(report)
        lines = md.splitlines()
        assert lines[0].startswith("| dataset | loss | interaction |")
        assert "**11.00\\***" in md
        assert "**2.50\\***" in md
        assert "**89.25\\***" in md
        assert md.count("12.00") == 1 and "**12.00" not in md

    def test_markdown_renders_all_rows(self, report):
        md = to_markdown(report)
        # header + separator + 3 rows (+ config echo)
        table_lines = [l for l in md.splitlines() if l.startswith("|")]
        assert len(table_lines) == 5


class TestValidation:
    def test_metric_range_enforced(self):
        with pytest.raises(ValueError, match="outside"):
            _row("softmax_ce", "dot", 101.0, 0.0, 50.0)
        with pytest.raises(ValueError, match="outside"):
            _row("softmax_ce", "dot", 0.0, -0.5, 50.0)


class TestWriteReport:
    def test_writes_csv_and_figure(self, report, tmp_path):
        out = tmp_path / "grid.csv"
        written = write_report(report, out, fmt="csv", figures=True)
        assert [str(out), str(tmp_path / "grid.png")] == written
        assert out.read_text().startswith("dataset,loss,")
        png = (tmp_path / "grid.png").read_bytes()
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_figure_bytes_deterministic(self, report, tmp_path):
        render_figure(report, tmp_path / "a.png")
        render_figure(report, tmp_path / "b.png")
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_no_figures_flag(self, report, tmp_path):
        written = write_report(report, tmp_path / "r.csv", fmt="csv", figures=False)
        assert written == [str(tmp_path / "r.csv")]

    def test_markdown_format(self, report, tmp_path):
        out = tmp_path / "grid.md"
        write_report(report, out, fmt="md", figures=False)
        assert out.read_text().startswith("| dataset |")

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(ValueError, match="format"):
            write_report(report, tmp_path / "r.txt", fmt="txt")
