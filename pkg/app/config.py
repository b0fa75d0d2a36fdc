from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import Literal, Optional, Tuple, Type, TypeVar
import json
import os
import logging

import numpy as np

# Constants
DEFAULT_SAMPLE_RATE = 100.0
SEED_ENV = "WSST_SEED"
logger = logging.getLogger(__name__)

# Fixed per-stage codes for seed derivation; changing them changes every
# seeded output, so they are append-only.
STAGE_CODES = {
    "generate": 1,
    "noise": 2,
    "bootstrap": 3,
    "permutation": 4,
    "loocv": 5,
}


class PipelineConfig(BaseModel):
    """Settings for the analyze and classify stages."""

    model_config = ConfigDict(extra="ignore")

    # tf-engine
    window_sigma: float = 0.5  # seconds
    window_half_width_sigmas: float = 4.0
    hop: int = 1  # samples
    n_bins: int = 512
    freq_max: float = 10.0  # Hz
    gamma_thresh_rel: float = 1e-8
    boundary_sigmas: float = 4.0

    # ridge / recovery
    ridge_band: Tuple[float, float] = (0.5, 3.0)  # Hz
    ridge_penalty: float = 1.0
    refine_ridge: bool = True
    recon_band: float = 0.06  # Hz

    # shape regression
    cap_d: int = 6
    exclude_boundary: bool = True

    # classification
    n_components: Optional[int] = None  # None = min(5, p, n - 1)
    n_boot: int = 1000
    n_perm: int = 1000
    loocv_repeats: int = 1
    select_components: bool = False  # choose n_components by inner LOOCV

    # batch
    workers: int = 1
    export_tf: bool = False
    seed: int = 0

    @field_validator("window_sigma", "freq_max", "recon_band", "window_half_width_sigmas")
    @classmethod
    def validate_positive(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("hop", "workers", "loocv_repeats")
    @classmethod
    def validate_at_least_one(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("n_bins")
    @classmethod
    def validate_n_bins(cls, v):
        if v < 2:
            raise ValueError("n_bins must be >= 2")
        return v

    @field_validator("ridge_penalty", "boundary_sigmas")
    @classmethod
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError("must be non-negative")
        return v

    @field_validator("gamma_thresh_rel")
    @classmethod
    def validate_gamma_thresh_rel(cls, v):
        if not 0 <= v < 1:
            raise ValueError("gamma_thresh_rel must be in [0, 1)")
        return v

    @field_validator("cap_d")
    @classmethod
    def validate_cap_d(cls, v):
        if not 1 <= v <= 12:
            raise ValueError("cap_d must be between 1 and 12")
        return v

    @field_validator("n_components")
    @classmethod
    def validate_n_components(cls, v):
        if v is not None and v < 1:
            raise ValueError("n_components must be >= 1")
        return v

    @field_validator("n_boot")
    @classmethod
    def validate_n_boot(cls, v):
        if v < 100:
            raise ValueError("n_boot must be >= 100")
        return v

    @field_validator("n_perm")
    @classmethod
    def validate_n_perm(cls, v):
        if v < 1:
            raise ValueError("n_perm must be >= 1")
        return v

    @model_validator(mode="after")
    def validate_ridge_band(self):
        lo, hi = self.ridge_band
        if not 0 <= lo < hi <= self.freq_max:
            raise ValueError("ridge_band must satisfy 0 <= lo < hi <= freq_max")
        return self


class GenerateConfig(BaseModel):
    """Settings for synthetic cohort generation."""

    model_config = ConfigDict(extra="ignore")

    n_per_class: int = 10
    duration_s: float = 10.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    base_freq: float = 1.2  # Hz
    if_wander: float = 0.15  # Hz, sinusoidal IF excursion
    if_wander_freq: float = 0.08  # Hz
    am_depth: float = 0.1  # relative amplitude excursion
    am_freq: float = 0.05  # Hz
    eps: float = 0.1
    class_shift: float = 0.15  # second-harmonic amplitude change for class 1
    jitter: float = 0.02  # per-recording coefficient jitter
    noise_snr_db: Optional[float] = None  # None = clean
    noise_interval_s: Tuple[float, float] = (2.5, 5.5)
    noise_dof: float = 3.0
    format: Literal["csv", "bin"] = "csv"
    seed: int = 0

    @field_validator("n_per_class")
    @classmethod
    def validate_n_per_class(cls, v):
        if v < 1:
            raise ValueError("n_per_class must be >= 1")
        return v

    @field_validator("duration_s", "sample_rate", "base_freq", "eps")
    @classmethod
    def validate_positive(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("am_depth", "class_shift", "jitter", "if_wander", "if_wander_freq", "am_freq")
    @classmethod
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError("must be non-negative")
        return v

    @field_validator("am_depth", "class_shift")
    @classmethod
    def validate_below_one(cls, v):
        if v >= 1:
            raise ValueError("must be < 1")
        return v

    @field_validator("noise_dof")
    @classmethod
    def validate_noise_dof(cls, v):
        if not v > 2:
            raise ValueError("noise_dof must be > 2 for finite variance")
        return v

    @model_validator(mode="after")
    def validate_noise_interval(self):
        start, stop = self.noise_interval_s
        if not 0 <= start < stop:
            raise ValueError("noise_interval_s must satisfy 0 <= start < stop")
        if self.if_wander >= self.base_freq:
            raise ValueError("if_wander must be smaller than base_freq")
        return self


ConfigT = TypeVar("ConfigT", PipelineConfig, GenerateConfig)


def derive_seed(seed: int, stage: str, index: int = 0) -> int:
    """Derive an independent 32-bit seed for (stage, index) from the top-level seed."""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, STAGE_CODES[stage], int(index)])
    return int(sequence.generate_state(1)[0])


def apply_env_overrides(config: ConfigT) -> ConfigT:
    """Apply WSST_SEED on top of a loaded config."""
    raw = os.environ.get(SEED_ENV, "").strip()
    if not raw:
        return config
    try:
        seed = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {SEED_ENV}={raw!r}")
        return config
    return config.model_copy(update={"seed": seed})


def _try_load_config_file(config_path: str, model: Type[ConfigT]) -> Optional[ConfigT]:
    """Attempt to load config from a specific file path. Returns None on failure."""
    if not os.path.exists(config_path):
        return None

    try:
        with open(config_path, "r") as f:
            data = json.load(f)
        return model(**data)
    except Exception as e:
        logger.warning(f"Could not load config from {config_path}: {e}")
        return None


def load_config(config_path: Optional[str] = None, model: Type[ConfigT] = PipelineConfig) -> ConfigT:
    """Load settings from a JSON file or its backup, or return defaults."""
    if config_path is None:
        return apply_env_overrides(model())

    config = _try_load_config_file(config_path, model)
    if config is None:
        backup_path = config_path + ".bak"
        config = _try_load_config_file(backup_path, model)
        if config is not None:
            logger.warning(f"Loaded backup config {backup_path}")
        elif os.path.exists(config_path):
            logger.warning(f"Falling back to default config; {config_path} is unreadable")
    if config is None:
        config = model()
    return apply_env_overrides(config)


def dump_config(config: BaseModel) -> str:
    """Canonical JSON text for a config (stable key order)."""
    return json.dumps(config.model_dump(mode="json"), indent=4, sort_keys=True)


def save_config(config: BaseModel, config_path: str):
    """Saves a config to JSON using atomic write to prevent corruption."""
    backup_path = config_path + ".bak"
    temp_path = config_path + ".tmp"

    try:
        # Write to temp file first
        with open(temp_path, "w") as f:
            f.write(dump_config(config))
            f.flush()
            os.fsync(f.fileno())

        # Backup existing config
        if os.path.exists(config_path):
            try:
                if os.path.exists(backup_path):
                    os.remove(backup_path)
                os.rename(config_path, backup_path)
            except Exception:
                logger.warning("Failed to back up %s", config_path, exc_info=True)

        # Atomic rename
        os.replace(temp_path, config_path)

    except Exception:
        if os.path.exists(temp_path):
            try:
                os.remove(temp_path)
            except Exception:
                pass
        raise
