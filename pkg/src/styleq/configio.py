"""Strict YAML config loading with unknown-key rejection.

Config files are mappings with optional ``synth``, ``model``, ``train`` and
``generate`` sections; every key must match a known field of the target
dataclass so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
from pathlib import Path

import yaml

from .inference import GenerationConfig
from .seqmodel import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


SYNTH_KEYS = frozenset(
    {"num_samples", "alphabet_size", "min_len", "max_len", "style_sampler", "seed", "base_points"}
)
SECTION_KEYS = frozenset({"synth", "model", "train", "generate"})


def load_yaml(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing config file: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(doc).__name__}")
    return doc


def check_keys(section: dict, allowed: frozenset, context: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


def _dataclass_section(section: dict, cls, context: str):
    allowed = frozenset(f.name for f in dataclasses.fields(cls))
    check_keys(section, allowed, context)
    try:
        return cls.from_dict(section) if hasattr(cls, "from_dict") else cls(**section)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {context}: {e}") from e


def load_config(path: Path) -> dict:
    """Parse and validate a full config file into typed sections.

    Returns {"synth": dict|None, "model": ModelConfig|None,
    "train": TrainConfig|None, "generate": GenerationConfig|None}.
    """
    doc = load_yaml(path)
    check_keys(doc, SECTION_KEYS, f"config {path}")
    out = {"synth": None, "model": None, "train": None, "generate": None}
    if "synth" in doc:
        synth = doc["synth"] or {}
        check_keys(synth, SYNTH_KEYS, "synth section")
        if "min_len" in synth and "max_len" in synth and synth["min_len"] > synth["max_len"]:
            raise ConfigError("synth section: min_len > max_len")
        out["synth"] = synth
    if "model" in doc:
        out["model"] = _dataclass_section(doc["model"] or {}, ModelConfig, "model section")
    if "train" in doc:
        out["train"] = _dataclass_section(doc["train"] or {}, TrainConfig, "train section")
    if "generate" in doc:
        out["generate"] = _dataclass_section(doc["generate"] or {}, GenerationConfig, "generate section")
    return out


def config_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
