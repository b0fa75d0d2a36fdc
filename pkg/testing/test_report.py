"""Tests for the versioned analysis report format."""

import json

import pytest

from app.errors import DimensionMismatch, ParseError
from app.report import (
    SCHEMA_VERSION,
    AnalysisReport,
    DatasetStats,
    SignalEntry,
    merge_reports,
    read_report,
    report_to_json,
    write_report,
)


def _entry(signal_id, status="ok"):
    if status == "ok":
        return SignalEntry(signal_id=signal_id, sample_rate=100.0, n_samples=1000, flags={"frames_used": 900})
    return SignalEntry(signal_id=signal_id, status="failed", error="AllBelowFloor", detail="no energy")


def _dataset(auc=0.75):
    return DatasetStats(
        n_samples=4,
        n_features=3,
        n_components=1,
        coeffs=[0.5, 0.1, -0.2, 0.3],
        scores={"a": 0.1, "b": 0.9},
        auc=auc,
        optimal_threshold=0.5,
        accuracy_at_optimal=0.75,
    )


def test_failed_property():
    report = AnalysisReport(signals=[_entry("a"), _entry("b", "failed"), _entry("c")])
    assert [s.signal_id for s in report.failed] == ["b"]


def test_json_is_canonical():
    report = AnalysisReport(config={"seed": 0}, signals=[_entry("a")], dataset=_dataset())
    text = report_to_json(report)
    assert text == report_to_json(AnalysisReport.model_validate(json.loads(text)))
    assert json.loads(text)["schema_version"] == SCHEMA_VERSION


def test_write_and_read(tmp_path):
    path = str(tmp_path / "report.json")
    report = AnalysisReport(signals=[_entry("a"), _entry("b", "failed")], dataset=_dataset())
    write_report(report, path)
    loaded = read_report(path)
    assert loaded.signals[1].error == "AllBelowFloor"
    assert loaded.dataset.auc == 0.75
    assert not (tmp_path / "report.json.tmp").exists()


def test_read_rejects_bad_files(tmp_path):
    path = tmp_path / "report.json"
    path.write_text(json.dumps({"schema_version": "0.1", "signals": []}), encoding="utf-8")
    with pytest.raises(ParseError):
        read_report(str(path))

    path.write_text("{", encoding="utf-8")
    with pytest.raises(ParseError):
        read_report(str(path))

    with pytest.raises(ParseError):
        read_report(str(tmp_path / "missing.json"))


def test_merge_reports():
    first = AnalysisReport(config={"seed": 1}, signals=[_entry("a"), _entry("b")])
    second = AnalysisReport(signals=[_entry("c", "failed")], dataset=_dataset())
    merged = merge_reports([first, second])
    assert [s.signal_id for s in merged.signals] == ["a", "b", "c"]
    assert merged.dataset.auc == 0.75
    assert merged.config == {"seed": 1}

    with pytest.raises(DimensionMismatch):
        merge_reports([first, AnalysisReport(signals=[_entry("a")])])
