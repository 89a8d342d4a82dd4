"""Pipeline configuration: JSON file keys plus defaults.

Secrets never live in the config file; the provider key comes from the
``GENIA_API_KEY`` environment variable only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-mini"
    temperature: float = 0.0
    schema_role: str = "user"  # where the output-schema text goes: system or user
    prompt_char_budget: int = 48_000
    prune_budget: int = 200_000
    fetch_timeout: float = 30.0
    request_timeout: float = 120.0
    retry_attempts: int = 3
    retry_backoff: float = 2.0
    template_dir: Path | None = None  # None = packaged templates
    whitelist_path: Path | None = None  # None = packaged keyword whitelist
    nav_phrases: tuple[str, ...] = ("navigate to",)

    def __post_init__(self) -> None:
        if self.schema_role not in ("system", "user"):
            raise ConfigError(f"prompt.schema_role must be system or user, got {self.schema_role!r}")
        if self.prompt_char_budget <= 0 or self.prune_budget <= 0:
            raise ConfigError("budgets must be positive")


_SECTIONS = {
    "provider": {"base_url": str, "model": str, "temperature": (int, float)},
    "prompt": {"schema_role": str},
    "budgets": {"prompt_chars": int, "prune_chars": int},
    "timeouts": {"fetch": (int, float), "request": (int, float)},
    "retries": {"attempts": int, "backoff": (int, float)},
    "templates": {"dir": str},
    "lint": {"whitelist": str},
    "modularizer": {"nav_phrases": list},
}

_FIELD_MAP = {
    ("provider", "base_url"): "base_url",
    ("provider", "model"): "model",
    ("provider", "temperature"): "temperature",
    ("prompt", "schema_role"): "schema_role",
    ("budgets", "prompt_chars"): "prompt_char_budget",
    ("budgets", "prune_chars"): "prune_budget",
    ("timeouts", "fetch"): "fetch_timeout",
    ("timeouts", "request"): "request_timeout",
    ("retries", "attempts"): "retry_attempts",
    ("retries", "backoff"): "retry_backoff",
}


def load_config(path: Path | str | None) -> PipelineConfig:
    """Load a JSON config file; None returns the defaults."""
    config = PipelineConfig()
    if path is None:
        return config
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config top level must be a JSON object")
    updates: dict = {}
    for section, keys in _SECTIONS.items():
        block = raw.get(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, kind in keys.items():
            if key not in block:
                continue
            value = block[key]
            if not isinstance(value, kind) or isinstance(value, bool):
                raise ConfigError(f"config {section}.{key} has the wrong type")
            if (section, key) in _FIELD_MAP:
                name = _FIELD_MAP[(section, key)]
                updates[name] = float(value) if name in (
                    "temperature", "fetch_timeout", "request_timeout", "retry_backoff"
                ) else value
            elif (section, key) == ("templates", "dir"):
                updates["template_dir"] = Path(value)
            elif (section, key) == ("lint", "whitelist"):
                updates["whitelist_path"] = Path(value)
            elif (section, key) == ("modularizer", "nav_phrases"):
                if not all(isinstance(p, str) for p in value):
                    raise ConfigError("config modularizer.nav_phrases must be strings")
                updates["nav_phrases"] = tuple(value)
    return replace(config, **updates)
