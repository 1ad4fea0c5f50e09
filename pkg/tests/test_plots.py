"""SVG rendering: determinism, degenerate inputs, golden comparison."""

import pathlib

import pytest

from diffguide.experiments import SWEEP_COLUMNS
from diffguide.plots import plot_csv, render_curves

DATA = pathlib.Path(__file__).parent / "data"


class TestRenderCurves:
    def test_no_series_still_valid(self):
        svg = render_curves([], "x", "y", "empty")
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert "polyline" not in svg

    def test_single_point_is_one_marker(self):
        svg = render_curves([("m", [(1.0, 2.0)])], "x", "y", "one")
        assert svg.count("<circle") == 1
        assert "polyline" not in svg

    def test_deterministic(self):
        series = [("a", [(0.0, 0.1), (1.0, 0.7)]), ("b", [(0.2, 0.5)])]
        assert render_curves(series, "x", "y", "t") == render_curves(series, "x", "y", "t")


class TestPlotCsv:
    def test_golden_sweep_figure(self, tmp_path):
        """Byte-identical output for the blessed fixture."""
        paths = plot_csv(DATA / "sweep_fixture.csv", tmp_path)
        got = (tmp_path / "win_rate_vs_kl.svg").read_bytes()
        want = (DATA / "golden_win_rate_vs_kl.svg").read_bytes()
        assert got == want
        assert len(paths) == 2

    def test_headers_only_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(SWEEP_COLUMNS) + "\n")
        plot_csv(path, tmp_path)
        svg = (tmp_path / "win_rate_vs_kl.svg").read_text()
        assert "<line" in svg and "circle" not in svg

    def test_single_row_csv(self, tmp_path):
        src = (DATA / "sweep_fixture.csv").read_text().splitlines()
        path = tmp_path / "one.csv"
        path.write_text("\n".join(src[:2]) + "\n")
        plot_csv(path, tmp_path)
        assert (tmp_path / "win_rate_vs_kl.svg").read_text().count("<circle") == 1

    def test_mismatched_schema_names_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        cols = list(SWEEP_COLUMNS)
        cols[3] = "intruder"
        path.write_text(",".join(cols) + "\n")
        with pytest.raises(ValueError, match="eta"):
            plot_csv(path, tmp_path)
