"""YAML loading for run configuration files."""

from pathlib import Path
from typing import Any, Dict, Mapping

import yaml


def load_config(config_path: str | Path = "nsdp.yaml") -> Dict[str, Any]:
    """Load a YAML run-configuration file into a dictionary.

    Validation happens in ``RunConfig``; this only parses.
    """
    try:
        with open(config_path) as f:
            raw = yaml.safe_load(f)
        if raw is None:
            raise ValueError(f"Config file {config_path} is empty")
        if not isinstance(raw, dict):
            raise ValueError(f"Config file {config_path} must contain a dictionary")

        return raw
    except FileNotFoundError:
        raise FileNotFoundError(f"Config file not found: {config_path}") from None
    except yaml.YAMLError as e:
        raise ValueError(f"Invalid YAML in config file {config_path}: {e}") from e


def merge_overrides(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``overrides`` into ``base``; ``None`` overrides are skipped.

    Nested dictionaries merge key by key so that a single tolerance override on the
    command line keeps the remaining file values.
    """
    merged: Dict[str, Any] = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        current = merged.get(key)
        if isinstance(current, Mapping) and isinstance(value, Mapping):
            merged[key] = merge_overrides(current, value)
        else:
            merged[key] = value
    return merged
