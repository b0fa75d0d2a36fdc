"""
Analysis API Router
Runs the per-signal pipeline and the dataset statistics over HTTP.
"""

from typing import Any, Dict, List, Optional
import logging

import numpy as np
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, ValidationError

import app.commands  # noqa: F401
from app.command_registry import is_registered, list_commands, validate_command_config
from app.config import PipelineConfig, apply_env_overrides
from app.model_core import SampledSignal
from app.pipeline import analyze_signal, classify_dataset, signal_entry

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["analysis"])


class AnalyzeRequest(BaseModel):
    samples: List[float]
    sample_rate: float
    label: Optional[str] = None
    config: Dict[str, Any] = {}


class ClassifyRequest(BaseModel):
    features: List[List[float]]
    labels: List[int]
    ids: Optional[List[str]] = None
    config: Dict[str, Any] = {}


def _pipeline_config(overrides: Dict[str, Any]) -> PipelineConfig:
    data = PipelineConfig().model_dump(mode="json")
    data.update(overrides)
    try:
        validate_command_config("analyze", data)
        return apply_env_overrides(PipelineConfig.model_validate(data))
    except (ValueError, ValidationError) as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.get("/health")
async def health():
    import fastapi
    import scipy

    return {
        "status": "ok",
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "fastapi": fastapi.__version__},
    }


@router.get("/commands")
async def commands():
    return {"commands": list_commands()}


@router.get("/commands/{name}")
async def command_info(name: str):
    if not is_registered(name):
        raise HTTPException(status_code=404, detail=f"Unknown command: {name}")
    return next(c for c in list_commands() if c["name"] == name)


# Pipeline errors propagate to the app-level handler (422 with the error code).
@router.post("/analyze")
def analyze(request: AnalyzeRequest):
    config = _pipeline_config(request.config)
    signal = SampledSignal(samples=np.asarray(request.samples), sample_rate=request.sample_rate, label=request.label)
    logger.debug(f"Analyzing {len(signal)} samples at {signal.sample_rate} Hz")
    analysis = analyze_signal(signal, config)
    entry = signal_entry(request.label or "signal", analysis)
    return entry.model_dump(mode="json")


@router.post("/classify")
def classify(request: ClassifyRequest):
    config = _pipeline_config(request.config)
    report, _ = classify_dataset(config, np.asarray(request.features), np.asarray(request.labels), ids=request.ids)
    return report.dataset.model_dump(mode="json")
