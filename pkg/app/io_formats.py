"""Signal ingestion and the plain-file exports behind reports and plots."""

from typing import Dict, Iterable, List, Optional, Sequence
import csv
import json
import logging
import os
import struct

import numpy as np
from PIL import Image

from app.errors import DimensionMismatch, EmptyFile, NonUniformSampling, ParseError
from app.model_core import SampledSignal
from app.config import DEFAULT_SAMPLE_RATE
from app.recovery import RecoveredComponent
from app.ridge import Ridge
from app.shape_regression import SPSRow, SPSVector
from app.stats import ROCResult
from app.tf_engine import TFRepresentation

logger = logging.getLogger(__name__)

BIN_MAGIC = b"WSST"
BIN_VERSION = 1
BIN_HEADER = struct.Struct("<4sId")  # magic, version, sample_rate
TIME_TOL = 1e-6  # seconds
SPS_FIXED_COLUMNS = ("signal_id", "subject", "position", "label")


def _num(x) -> str:
    return repr(float(x))


def infer_format(path: str) -> str:
    return "bin" if path.lower().endswith(".bin") else "csv"


# Signals


def _parse_float(text: str, path: str, line: int) -> float:
    try:
        return float(text)
    except ValueError as e:
        raise ParseError(f"{path}:{line}: not a number: {text!r}") from e


def _load_signal_csv(path: str, sample_rate: Optional[float]) -> SampledSignal:
    with open(path, "r", newline="") as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFile(f"{path} is empty")

    header = [cell.strip().lower() for cell in rows[0]]
    has_header = not _looks_numeric(rows[0][0])
    body = rows[1:] if has_header else rows
    if not body:
        raise EmptyFile(f"{path} has a header but no samples")

    width = len(body[0])
    if any(len(row) != width for row in body):
        raise ParseError(f"{path}: rows have differing column counts")
    if width == 1:
        values = [_parse_float(row[0], path, i + 1) for i, row in enumerate(body)]
        rate = sample_rate or DEFAULT_SAMPLE_RATE
        return SampledSignal(samples=np.asarray(values), sample_rate=rate)

    time_col, value_col = 0, 1
    if has_header and "time_s" in header and "value" in header:
        time_col, value_col = header.index("time_s"), header.index("value")
    times = np.array([_parse_float(row[time_col], path, i + 1) for i, row in enumerate(body)])
    values = np.array([_parse_float(row[value_col], path, i + 1) for i, row in enumerate(body)])
    if times.size < 2:
        return SampledSignal(samples=values, sample_rate=sample_rate or DEFAULT_SAMPLE_RATE)

    steps = np.diff(times)
    step = float(np.median(steps))
    if step <= 0 or np.max(np.abs(times - (times[0] + step * np.arange(times.size)))) > TIME_TOL:
        raise NonUniformSampling(f"{path}: time column is not uniformly spaced within {TIME_TOL} s")
    rate = 1.0 / step
    if sample_rate is not None and abs(rate - sample_rate) > 1e-6 * sample_rate:
        logger.warning(f"{path}: time column implies {rate:.6g} Hz, overriding {sample_rate} Hz")
    return SampledSignal(samples=values, sample_rate=rate)


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _load_signal_bin(path: str) -> SampledSignal:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw:
        raise EmptyFile(f"{path} is empty")
    if len(raw) < BIN_HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, version, rate = BIN_HEADER.unpack_from(raw)
    if magic != BIN_MAGIC or version != BIN_VERSION:
        raise ParseError(f"{path}: not a signal file (magic={magic!r}, version={version})")
    payload = raw[BIN_HEADER.size :]
    if len(payload) % 8:
        raise ParseError(f"{path}: payload is not a whole number of float64 samples")
    if not payload:
        raise EmptyFile(f"{path} has no samples")
    return SampledSignal(samples=np.frombuffer(payload, dtype="<f8"), sample_rate=rate)


def load_signal(path: str, format: Optional[str] = None, sample_rate: Optional[float] = None) -> SampledSignal:
    """Load a CSV (``time_s,value`` or one value column) or binary signal file."""
    fmt = format or infer_format(path)
    if not os.path.exists(path):
        raise ParseError(f"{path} does not exist")
    if fmt == "bin":
        signal = _load_signal_bin(path)
    elif fmt == "csv":
        signal = _load_signal_csv(path, sample_rate)
    else:
        raise ParseError(f"unknown signal format {fmt!r}")
    label = os.path.splitext(os.path.basename(path))[0]
    return SampledSignal(samples=signal.samples, sample_rate=signal.sample_rate, label=label)


def save_signal(signal: SampledSignal, path: str, format: Optional[str] = None):
    fmt = format or infer_format(path)
    if fmt == "bin":
        with open(path, "wb") as f:
            f.write(BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, signal.sample_rate))
            f.write(np.ascontiguousarray(signal.samples, dtype="<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["time_s", "value"])
            for t, v in zip(signal.time_axis, signal.samples):
                writer.writerow([_num(t), _num(v)])
    else:
        raise ParseError(f"unknown signal format {fmt!r}")


# Time-frequency matrices


def tf_metadata(tf: TFRepresentation) -> dict:
    return {
        "kind": tf.kind,
        "sample_rate": tf.sample_rate,
        "sigma": tf.window_sigma,
        "hop": tf.hop,
        "n_frames": tf.n_frames,
        "n_bins": tf.n_bins,
        "freq_min": float(tf.freq_axis[0]),
        "freq_max": float(tf.freq_axis[-1]),
        "boundary_frames": int(tf.boundary.sum()),
    }


def save_tf(tf: TFRepresentation, prefix: str) -> Dict[str, str]:
    """Write ``prefix.c64`` (row-major complex64), ``prefix.json``, ``prefix_mag.csv`` and ``prefix.png``."""
    paths = {
        "matrix": prefix + ".c64",
        "sidecar": prefix + ".json",
        "magnitude": prefix + "_mag.csv",
        "heatmap": prefix + ".png",
    }
    np.ascontiguousarray(tf.values, dtype="<c8").tofile(paths["matrix"])
    with open(paths["sidecar"], "w") as f:
        json.dump(tf_metadata(tf), f, indent=4, sort_keys=True)

    magnitude = tf.magnitude()
    with open(paths["magnitude"], "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_s"] + [_num(x) for x in tf.freq_axis])
        for t, row in zip(tf.time_axis, magnitude):
            writer.writerow([_num(t)] + [_num(x) for x in row])

    save_heatmap(magnitude, paths["heatmap"])
    logger.info(f"Exported {tf.kind} matrix to {prefix}.*")
    return paths


def save_heatmap(magnitude: np.ndarray, path: str, dynamic_range_db: float = 60.0):
    """Greyscale log-magnitude image, frequency upward, time to the right."""
    peak = float(magnitude.max(initial=0.0))
    if peak > 0:
        db = 20.0 * np.log10(np.maximum(magnitude / peak, 1e-300))
        level = np.clip((db + dynamic_range_db) / dynamic_range_db, 0.0, 1.0)
    else:
        level = np.zeros_like(magnitude)
    pixels = np.ascontiguousarray(np.flipud((level * 255.0).round().astype(np.uint8).T))
    Image.fromarray(pixels).save(path)


def load_tf_matrix(prefix: str) -> np.ndarray:
    with open(prefix + ".json", "r") as f:
        meta = json.load(f)
    values = np.fromfile(prefix + ".c64", dtype="<c8")
    expected = meta["n_frames"] * meta["n_bins"]
    if values.size != expected:
        raise ParseError(f"{prefix}.c64 holds {values.size} values, sidecar says {expected}")
    return values.reshape(meta["n_frames"], meta["n_bins"])


# Tracks


def write_ridge_csv(ridge: Ridge, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "time_s", "freq_hz", "energy"])
        for m, (t, fr, e) in enumerate(zip(ridge.time_axis, ridge.freq_hz, ridge.energy)):
            writer.writerow([m, _num(t), _num(fr), _num(e)])


def write_component_csv(comp: RecoveredComponent, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_s", "amp", "phase_cycles", "if_hz"])
        for row in zip(comp.time_axis, comp.amp, comp.phase, comp.inst_freq):
            writer.writerow([_num(x) for x in row])


# SPS


def sps_to_dict(sps: SPSVector) -> dict:
    return {
        "D": sps.cap_d,
        "gamma": sps.gamma.tolist(),
        "power": sps.harmonic_power.tolist(),
        "phase": sps.harmonic_phase.tolist(),
        "aligned": bool(sps.aligned),
        "normalized": bool(sps.normalized),
        "condition_number": float(sps.condition_number),
    }


def sps_header(cap_d: int) -> List[str]:
    return list(SPS_FIXED_COLUMNS) + [f"gamma_{i}" for i in range(2 * cap_d + 1)]


def write_sps_dataset(rows: Sequence[SPSRow], path: str):
    if not rows:
        raise EmptyFile("no SPS rows to write")
    width = rows[0].gamma.size
    if any(r.gamma.size != width for r in rows):
        raise DimensionMismatch("SPS rows have different lengths")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(sps_header((width - 1) // 2))
        for r in rows:
            label = "" if r.label is None else str(int(r.label))
            writer.writerow([r.signal_id, r.subject, r.position, label] + [_num(g) for g in r.gamma])


def read_sps_dataset(path: str) -> List[SPSRow]:
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        if tuple(header[:4]) != SPS_FIXED_COLUMNS or len(header) < 5:
            raise ParseError(f"{path}: expected header {','.join(SPS_FIXED_COLUMNS)},gamma_0,...")
        rows = []
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{line}: expected {len(header)} columns, got {len(rec)}")
            label = int(_parse_float(rec[3], path, line)) if rec[3].strip() else None
            gamma = np.array([_parse_float(x, path, line) for x in rec[4:]])
            rows.append(SPSRow(signal_id=rec[0], gamma=gamma, subject=rec[1], position=rec[2], label=label))
    if not rows:
        raise EmptyFile(f"{path} has no SPS rows")
    return rows


def write_labels(labels: Dict[str, int], path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["signal_id", "label"])
        for signal_id, label in labels.items():
            writer.writerow([signal_id, int(label)])


def read_labels(path: str) -> Dict[str, int]:
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        if [h.strip() for h in header[:2]] != ["signal_id", "label"]:
            raise ParseError(f"{path}: expected header signal_id,label")
        labels = {}
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) < 2:
                raise ParseError(f"{path}:{line}: missing label")
            labels[rec[0]] = int(_parse_float(rec[1], path, line))
    if not labels:
        raise EmptyFile(f"{path} has no labels")
    return labels


# Statistics plot data


def write_roc_csv(roc: ROCResult, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", "sens", "spec"])
        for t, se, sp in zip(roc.thresholds, roc.sens, roc.spec):
            writer.writerow([_num(t), _num(se), _num(sp)])


def write_gps_histogram(scores: Iterable[float], labels: Iterable[int], path: str, n_bins: int = 20):
    """Per-class GPS counts over shared bin edges."""
    scores = np.asarray(list(scores), dtype=np.float64)
    labels = np.asarray(list(labels))
    edges = np.histogram_bin_edges(scores, bins=n_bins)
    count0, _ = np.histogram(scores[labels == 0], bins=edges)
    count1, _ = np.histogram(scores[labels == 1], bins=edges)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_lo", "bin_hi", "count_class0", "count_class1"])
        for lo, hi, c0, c1 in zip(edges[:-1], edges[1:], count0, count1):
            writer.writerow([_num(lo), _num(hi), int(c0), int(c1)])
