"""YAML service configuration: which models to serve and request limits."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

KNOWN_KINDS = ("hash", "sentence-transformers")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str  # "hash" (deterministic offline stub) or "sentence-transformers"
    dim: int
    max_tokens: int
    model_id: str = ""  # weight identifier for sentence-transformers kinds
    seed: int = 0


@dataclass
class ServiceConfig:
    models: list[ModelSpec] = field(default_factory=list)
    max_batch: int = 256

    def spec_for(self, name: str) -> ModelSpec | None:
        for spec in self.models:
            if spec.name == name:
                return spec
        return None


def load_config(path) -> ServiceConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    models = []
    for entry in raw.get("models", []):
        kind = entry.get("kind", "sentence-transformers")
        if kind not in KNOWN_KINDS:
            raise ConfigError(f"unknown encoder kind {kind!r} for model {entry.get('name')!r}")
        for key in ("name", "dim", "max_tokens"):
            if key not in entry:
                raise ConfigError(f"model entry missing {key!r}: {entry}")
        if kind == "sentence-transformers" and not entry.get("model_id"):
            raise ConfigError(f"sentence-transformers model {entry['name']!r} needs a model_id")
        models.append(
            ModelSpec(
                name=str(entry["name"]),
                kind=kind,
                dim=int(entry["dim"]),
                max_tokens=int(entry["max_tokens"]),
                model_id=str(entry.get("model_id", "")),
                seed=int(entry.get("seed", 0)),
            )
        )
    if not models:
        raise ConfigError(f"{path}: no models configured")
    names = [m.name for m in models]
    if len(names) != len(set(names)):
        raise ConfigError(f"duplicate model names in {path}")
    return ServiceConfig(models=models, max_batch=int(raw.get("max_batch", 256)))


DEFAULT_CONFIG = Path(__file__).resolve().parents[2] / "configs" / "models.yaml"
