"""Tests for CSV and JSON report emission."""

import json

import pytest

from gmudc import config
from gmudc.exceptions import ConfigurationError, EmptyReportError, NumericalError
from gmudc.reporting import ExperimentResult, emit_report, render_csv, render_json


def _result(rows=None, **header):
    return ExperimentResult(
        kind="quenched",
        columns=("user", "risk", "covered"),
        rows=[(1, 0.1 + 0.2, True), (2, None, False)] if rows is None else rows,
        header=header or {"seed": 7, "lambda": 0.001},
        scenario={"experiment": {"seed": 7}},
    )


def test_render_csv_layout():
    """Test provenance lines precede the header row and data rows."""
    lines = render_csv(_result()).splitlines()
    assert lines[0] == "# seed = 7"
    assert lines[1] == "# lambda = 0.001"
    assert lines[2] == "user,risk,covered"
    assert lines[3] == "1,0.30000000000000004,true"
    assert lines[4] == "2,,false"


def test_render_csv_respects_float_digits():
    """Test floats use the configured significant digits."""
    config.set_float_digits(4)
    assert "1,0.3,true" in render_csv(_result())


def test_render_csv_rejects_ragged_rows():
    """Test rows must match the column count."""
    with pytest.raises(ValueError) as exc_info:
        render_csv(_result(rows=[(1, 0.5)]))
    assert "row has 2 cells, expected 3" in str(exc_info.value)


def test_render_json_embeds_scenario():
    """Test the JSON mirror keys rows by column and embeds the scenario."""
    document = json.loads(render_json(_result()))
    assert document["kind"] == "quenched"
    assert document["columns"] == ["user", "risk", "covered"]
    assert document["rows"][0] == {"user": 1, "risk": 0.1 + 0.2, "covered": True}
    assert document["rows"][1]["risk"] is None
    assert document["scenario"] == {"experiment": {"seed": 7}}
    assert document["header"]["seed"] == "7"


def test_emit_report_writes_both_formats(tmp_path):
    """Test default formats, file names and the absence of temp files."""
    paths = emit_report(_result(), tmp_path / "out")
    assert [p.name for p in paths] == ["quenched.csv", "quenched.json"]
    assert all(p.exists() for p in paths)
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == [
        "quenched.csv",
        "quenched.json",
    ]


def test_emit_report_stem_and_single_format(tmp_path):
    """Test a custom stem and a csv-only request."""
    paths = emit_report(_result(), tmp_path, formats=["csv"], stem="run1")
    assert [p.name for p in paths] == ["run1.csv"]


def test_emit_report_replaces_existing_file(tmp_path):
    """Test a second emission overwrites the first."""
    emit_report(_result(), tmp_path, formats=["csv"])
    emit_report(_result(header={"seed": 8}), tmp_path, formats=["csv"])
    assert (tmp_path / "quenched.csv").read_text().startswith("# seed = 8\n")


def test_empty_report_is_refused(tmp_path):
    """Test zero rows raise and write nothing."""
    with pytest.raises(EmptyReportError) as exc_info:
        emit_report(_result(rows=[]), tmp_path)
    assert str(exc_info.value) == "No rows to emit for the quenched report"
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_non_finite_values_abort(tmp_path, bad):
    """Test non-finite cells raise NumericalError before any write."""
    with pytest.raises(NumericalError) as exc_info:
        emit_report(_result(rows=[(1, bad, True)]), tmp_path)
    assert exc_info.value.quantity == "risk"
    assert list(tmp_path.iterdir()) == []


def test_unknown_format(tmp_path):
    """Test unsupported formats are configuration errors."""
    with pytest.raises(ConfigurationError) as exc_info:
        emit_report(_result(), tmp_path, formats=["csv", "xml"])
    assert "xml" in str(exc_info.value)
    assert list(tmp_path.iterdir()) == []


def test_unwritable_output_directory(tmp_path):
    """Test an --out path that is a file reports a configuration error."""
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    with pytest.raises(ConfigurationError) as exc_info:
        emit_report(_result(), blocker)
    assert exc_info.value.key_path == "--out"
