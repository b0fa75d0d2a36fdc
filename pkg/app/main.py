from contextlib import asynccontextmanager
from typing import List
import logging
import os

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.errors import PulseSignatureError

# Configure logging
LOG_LEVEL_NAME = os.environ.get("WSST_LOG_LEVEL", "WARNING").upper()
LOG_LEVEL = getattr(logging, LOG_LEVEL_NAME, logging.WARNING)

logging.basicConfig(
    level=LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[
        logging.StreamHandler(),  # Console output
    ],
    force=True,
)

# Keep noisy dependency logs quiet.
for noisy_logger in ("uvicorn.access", "asyncio", "PIL"):
    logging.getLogger(noisy_logger).setLevel(logging.WARNING)

logger = logging.getLogger(__name__)


def _parse_cors_origins() -> List[str]:
    """
    Parse allowed CORS origins from env.
    Defaults to local origins rather than wildcard.
    """
    raw = os.environ.get("WSST_CORS_ORIGINS", "").strip()
    if raw:
        origins = [o.strip() for o in raw.split(",") if o.strip()]
        if "*" in origins:
            return ["*"]
        return origins
    return [
        "http://localhost",
        "http://localhost:8000",
        "http://127.0.0.1",
        "http://127.0.0.1:8000",
    ]


# Import commands package to trigger auto-discovery and registration
import app.commands  # noqa: E402,F401
from app.command_registry import get_registry_stats  # noqa: E402
from app.routers import analysis  # noqa: E402


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Startup and shutdown events."""
    stats = get_registry_stats()
    logger.info(f"Registered {stats['total_commands']} commands: {', '.join(stats['commands'])}")
    yield


app = FastAPI(
    title="WSST pulse signature service",
    description="Synchrosqueezing-based wave-shape analysis of pulse signals.",
    version="0.1.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=_parse_cors_origins(),
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(PulseSignatureError)
async def pulse_signature_error_handler(request: Request, exc: PulseSignatureError):
    return JSONResponse(status_code=422, content={"error": exc.code, "detail": str(exc)})


app.include_router(analysis.router)
