"""Central configuration: numerical tolerances, size caps and defaults"""

import os
import logging
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

ENV_PREFIX = "STRADDLE_"


class Settings(BaseModel):
    """Every tolerance and cap used by the package lives here"""

    model_config = ConfigDict(frozen=True)

    unitarity_tol: float = Field(1e-10, gt=0)
    orthonormality_tol: float = Field(1e-8, gt=0)
    rank_cutoff: float = Field(1e-9, gt=0)
    norm_tol: float = Field(1e-10, gt=0)
    identity_tol: float = Field(1e-10, gt=0)
    fidelity_tol: float = Field(1e-8, gt=0)
    operator_tol: float = Field(1e-8, gt=0)

    max_unitary_qubits: int = Field(10, ge=1)
    max_qsd_qubits: int = Field(8, ge=1)

    certifier_max_qubits: int = Field(5, ge=1)
    certifier_max_party_qubits: int = Field(2, ge=1)
    certifier_achievable: float = Field(1e-6, gt=0)
    certifier_not_found: float = Field(1e-4, gt=0)
    certifier_max_iterations: int = Field(10000, ge=1)

    default_seed: int = 7
    log_level: str = "WARNING"


def _env_overrides() -> dict:
    """Collect STRADDLE_* variables that match a Settings field"""
    overrides = {}
    for name in Settings.model_fields:
        value = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if value is not None:
            overrides[name] = value
    return overrides


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load settings once from .env and the process environment"""
    load_dotenv()
    overrides = _env_overrides()
    if overrides:
        logger.info(f"Settings overridden from environment: {sorted(overrides)}")
    return Settings(**overrides)


def resolve(settings: Optional[Settings]) -> Settings:
    """Return the explicit settings or the process-wide defaults"""
    return settings if settings is not None else get_settings()
