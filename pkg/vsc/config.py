"""Toolkit configuration, run-config files and seed handling"""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import zlib
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic_settings import BaseSettings

from vsc.errors import ConfigError
from vsc.models.schemas import RunConfig


class Settings(BaseSettings):
    """Process settings from environment variables"""

    log_level: str = "INFO"
    out_dir: str = "runs/latest"
    workers: int = 1  # process pool size for independent design points
    seed: Optional[int] = None  # overrides the run-config seed when set

    model_config = {
        "env_prefix": "VSC_",
        "env_file": ".env",
        "case_sensitive": False,
        "extra": "ignore",
    }


# Global settings instance
settings = Settings()

# Configure structured logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)

logger = logging.getLogger(__name__)


# =============================================================================
# RUN CONFIG FILES
# =============================================================================

def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Read a JSON or TOML run configuration.

    Args:
        path: File with a .json or .toml suffix

    Returns:
        Validated RunConfig (pydantic.ValidationError on bad values)
    """
    path = Path(path)
    try:
        if path.suffix.lower() == ".toml":
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        elif path.suffix.lower() == ".json":
            data = json.loads(path.read_text())
        else:
            raise ConfigError(f"unsupported config format {path.suffix!r} (use .json or .toml)")
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    config = RunConfig.model_validate(data)
    logger.info(f"Loaded run config from {path} (seed={config.seed})")
    return config


def save_run_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2))
    return path


def resolve_run_config(
    path: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    """Config file (or defaults) with the seed override applied: CLI flag, then VSC_SEED"""
    config = load_run_config(path) if path else RunConfig()
    override = seed if seed is not None else settings.seed
    if override is not None and override != config.seed:
        logger.info(f"Seed override: {config.seed} -> {override}")
        config = config.model_copy(update={"seed": override})
    return config


# =============================================================================
# SEEDS
# =============================================================================

def stage_seed(seed: int, stage: str) -> int:
    """Deterministic 32-bit seed for one named pipeline stage"""
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode("utf-8"))])
    return int(sequence.generate_state(1)[0])
