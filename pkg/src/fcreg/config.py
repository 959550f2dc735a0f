"""
Configuration utilities: environment-dependent settings and run-config loading
"""

import logging
import os
from pathlib import Path
from typing import Dict, List, Optional

import yaml

from .errors import ConfigError
from .schemas import RunConfig

logger = logging.getLogger(__name__)


def get_cache_dir() -> Path:
    """
    Directory of the VR null-quantile cache

    Returns:
        Path: FCREG_CACHE_DIR when set, else ~/.cache/fcreg
    """
    # Environment variable override (highest priority)
    env_dir = os.getenv("FCREG_CACHE_DIR")
    if env_dir and env_dir.strip():
        return Path(env_dir.strip()).expanduser()
    return Path.home() / ".cache" / "fcreg"


def get_n_jobs(requested: Optional[int] = None) -> int:
    """
    Number of joblib workers: explicit value, then FCREG_N_JOBS, then 1
    """
    if requested is not None:
        return requested
    env_jobs = os.getenv("FCREG_N_JOBS")
    if env_jobs and env_jobs.strip():
        try:
            return int(env_jobs.strip())
        except ValueError:
            raise ConfigError(f"FCREG_N_JOBS must be an integer, got '{env_jobs}'")
    return 1


def load_config_file(path: str) -> Dict:
    """Read a flat YAML mapping of run settings"""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(config_path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a key/value mapping")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Config must be flat; nested sections found: {nested}")
    return data


def parse_overrides(pairs: List[str]) -> Dict:
    """Parse --set key=value pairs; values are read as YAML scalars or lists"""
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"Override '{pair}' is not of the form key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"Override '{pair}' has an empty key")
        try:
            overrides[key] = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError:
            raise ConfigError(f"Cannot parse the value of override '{pair}'")
    return overrides


def resolve_run_config(command: str, config_path: Optional[str] = None, overrides: Optional[List[str]] = None,
                       **flags) -> RunConfig:
    """
    Merge defaults, the config file, --set overrides and dedicated flags (in that order)

    Raises:
        ConfigError: unknown keys or a malformed file; pydantic ValidationError for invalid values
    """
    values = load_config_file(config_path) if config_path else {}
    values.update(parse_overrides(overrides))
    values.update({k: v for k, v in flags.items() if v is not None})
    values["command"] = command
    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {unknown}")
    return RunConfig(**values)


def dump_resolved_config(cfg: RunConfig, output_dir: Path) -> Path:
    """Write every setting, defaults filled, next to the run outputs"""
    path = Path(output_dir) / "resolved_config.yaml"
    with open(path, "w") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=True)
    return path


def get_config() -> dict:
    """
    Environment-dependent settings of the current process

    Returns:
        dict: cache directory and default worker count
    """
    return {
        'cache_dir': str(get_cache_dir()),
        'n_jobs': get_n_jobs(),
        'debug_info': {
            'env_cache_dir': os.getenv('FCREG_CACHE_DIR'),
            'env_n_jobs': os.getenv('FCREG_N_JOBS'),
        },
    }
