"""Analysis report models and their versioned JSON file format."""

from typing import Dict, List, Optional
import json
import logging
import os

import jsonschema
from pydantic import BaseModel, ConfigDict

from app.errors import DimensionMismatch, ParseError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


class SPSSummary(BaseModel):
    model_config = ConfigDict(extra="ignore")

    D: int
    gamma: List[float]
    power: List[float]
    phase: List[float]
    aligned: bool
    normalized: bool = False
    condition_number: Optional[float] = None


class RidgeSummary(BaseModel):
    mean_hz: float
    min_hz: float
    max_hz: float
    std_hz: float
    mean_energy: float
    objective: Optional[float] = None  # penalized path score of the extracted ridge
    sst_concentration: Optional[float] = None  # mean share of frame energy near the ridge
    stft_concentration: Optional[float] = None


class BaselineSummary(BaseModel):
    """Periodogram, folding and beat-interval estimates for the same signal."""

    harmonic_shares: List[float]
    sps_shares: List[float]
    fold_residual: float
    rate_error_hz: Optional[float] = None
    n_beats: int = 0


class SignalEntry(BaseModel):
    """Outcome for one input signal; failed entries carry the error code."""

    model_config = ConfigDict(extra="ignore")

    signal_id: str
    source: str = ""
    status: str = "ok"  # "ok" | "failed"
    error: Optional[str] = None
    detail: Optional[str] = None
    sample_rate: Optional[float] = None
    n_samples: Optional[int] = None
    label: Optional[int] = None
    sps: Optional[SPSSummary] = None  # raw estimate
    sps_aligned: Optional[SPSSummary] = None  # aligned, unit energy; used for classification
    ridge: Optional[RidgeSummary] = None
    baseline: Optional[BaselineSummary] = None
    condition_number: Optional[float] = None
    flags: Dict[str, int] = {}
    exports: Dict[str, str] = {}


class DatasetStats(BaseModel):
    model_config = ConfigDict(extra="ignore")

    n_samples: int
    n_features: int
    n_components: int
    position: Optional[str] = None
    coeffs: List[float]
    scores: Dict[str, float]
    auc: float
    ci_lo: Optional[float] = None
    ci_hi: Optional[float] = None
    optimal_threshold: float
    accuracy_at_optimal: float
    loocv_accuracy: Optional[float] = None
    anova_p: Optional[float] = None


class AnalysisReport(BaseModel):
    model_config = ConfigDict(extra="ignore")

    schema_version: str = SCHEMA_VERSION
    config: Dict[str, object] = {}
    signals: List[SignalEntry] = []
    dataset: Optional[DatasetStats] = None

    @property
    def failed(self) -> List[SignalEntry]:
        return [s for s in self.signals if s.status != "ok"]


REPORT_SCHEMA = AnalysisReport.model_json_schema()


def report_to_json(report: AnalysisReport) -> str:
    """Validated, canonical JSON text of a report."""
    data = report.model_dump(mode="json")
    try:
        jsonschema.validate(instance=data, schema=REPORT_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.path) if e.path else "root"
        raise ParseError(f"Report does not match schema {SCHEMA_VERSION} at '{path}': {e.message}") from e
    return json.dumps(data, indent=4, sort_keys=True, allow_nan=False)


def write_report(report: AnalysisReport, path: str):
    text = report_to_json(report)
    temp_path = path + ".tmp"
    with open(temp_path, "w") as f:
        f.write(text)
        f.write("\n")
    os.replace(temp_path, path)
    logger.info(f"Wrote report to {path}")


def read_report(path: str) -> AnalysisReport:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ParseError(f"could not read report {path}: {e}") from e
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schema_version {version!r}")
    try:
        jsonschema.validate(instance=data, schema=REPORT_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ParseError(f"{path}: {e.message}") from e
    return AnalysisReport.model_validate(data)


def merge_reports(reports: List[AnalysisReport]) -> AnalysisReport:
    """Concatenate signal entries; the last dataset section wins.

    Raises DimensionMismatch if a signal id appears in more than one report.
    """
    merged = AnalysisReport()
    seen = set()
    for report in reports:
        for entry in report.signals:
            if entry.signal_id in seen:
                raise DimensionMismatch(f"signal {entry.signal_id!r} appears in more than one report")
            seen.add(entry.signal_id)
            merged.signals.append(entry)
        if report.dataset is not None:
            merged.dataset = report.dataset
        if report.config:
            merged.config = report.config
    return merged
