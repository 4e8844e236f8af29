"""
Configuration loader for frobhodge

Loads configuration from config/settings.yaml with support for environment variable overrides.
"""

import os
import sys
import yaml
from pathlib import Path
from typing import Dict, Any, Optional


SIGN_CALIBRATIONS = ('geometric', 'literal')


def get_project_root() -> Path:
    """Get the project root directory (where config/ lives)."""
    current = Path(__file__).resolve().parent  # frobhodge/

    for _ in range(5):
        if (current / 'config' / 'settings.yaml').exists():
            return current
        current = current.parent

    return Path.cwd()


def get_default_config() -> Dict[str, Any]:
    """Return default configuration."""
    return {
        'series': {
            'order': 10,
        },
        'sampling': {
            'seed': 0,
            'samples': 5,
        },
        'hodge': {
            'sign_calibration': 'geometric',
        },
        'runtime': {
            'n_jobs': 1,
            'verbose': False,
        },
        'report': {
            'format': 'json',
        },
    }


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        config_path: Optional path to config file. If not provided,
                     looks for config/settings.yaml in project root.

    Returns:
        Configuration dictionary with all settings.
    """
    if config_path is None:
        config_path = get_project_root() / 'config' / 'settings.yaml'
    else:
        config_path = Path(config_path)

    config = get_default_config()
    if not config_path.exists():
        print(f"Warning: Config file not found at {config_path}, using defaults", file=sys.stderr)
    else:
        with open(config_path, 'r') as f:
            loaded = yaml.safe_load(f) or {}
        for section, values in loaded.items():
            config.setdefault(section, {}).update(values or {})

    apply_env_overrides(config)
    _check(config)
    return config


def _env_flag(value: str) -> bool:
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


def apply_env_overrides(config: Dict[str, Any]) -> None:
    """Apply environment variable overrides to config."""

    if os.getenv('FROBHODGE_ORDER'):
        config['series']['order'] = int(os.getenv('FROBHODGE_ORDER'))

    if os.getenv('FROBHODGE_SEED'):
        config['sampling']['seed'] = int(os.getenv('FROBHODGE_SEED'))

    if os.getenv('FROBHODGE_SAMPLES'):
        config['sampling']['samples'] = int(os.getenv('FROBHODGE_SAMPLES'))

    if os.getenv('FROBHODGE_SIGN_CALIBRATION'):
        config['hodge']['sign_calibration'] = os.getenv('FROBHODGE_SIGN_CALIBRATION')

    if os.getenv('FROBHODGE_N_JOBS'):
        config['runtime']['n_jobs'] = int(os.getenv('FROBHODGE_N_JOBS'))

    if os.getenv('FROBHODGE_VERBOSE'):
        config['runtime']['verbose'] = _env_flag(os.getenv('FROBHODGE_VERBOSE'))


def _check(config: Dict[str, Any]) -> None:
    if config['series']['order'] < 0:
        raise ValueError(f"series.order must be >= 0, got {config['series']['order']}")
    if config['sampling']['samples'] < 0:
        raise ValueError(f"sampling.samples must be >= 0, got {config['sampling']['samples']}")
    if config['hodge']['sign_calibration'] not in SIGN_CALIBRATIONS:
        raise ValueError(f"hodge.sign_calibration must be one of {SIGN_CALIBRATIONS}, "
                         f"got {config['hodge']['sign_calibration']!r}")


# Global config instance (loaded on first access)
_config: Optional[Dict[str, Any]] = None


def get_config() -> Dict[str, Any]:
    """Get the global configuration, loading it if necessary."""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def set_config(config: Dict[str, Any]) -> None:
    """Replace the global configuration (used by the CLI --config flag)."""
    global _config
    _check(config)
    _config = config


def get_default_order() -> int:
    return get_config()['series']['order']


def get_seed() -> int:
    return get_config()['sampling']['seed']


def get_samples() -> int:
    return get_config()['sampling']['samples']


def get_sign_calibration() -> str:
    return get_config()['hodge']['sign_calibration']


def get_n_jobs() -> int:
    return get_config()['runtime']['n_jobs']
