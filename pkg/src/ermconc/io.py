"""Artifact plumbing: config loading, deterministic tables and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

__all__ = ["Artifact", "Manifest", "load_config", "fmt", "csv_table", "dumps_json", "sha256_bytes"]

MANIFEST_NAME = "manifest.json"


def fmt(x) -> str:
    """Shortest round-trip decimal form (``repr``) of a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def csv_table(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class Artifact:
    """One output file: relative name, text content and its scenario id."""

    name: str
    text: str
    scenario: str


@dataclass
class Manifest:
    seed: int
    entries: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def write_artifact(self, out_dir, art: Artifact):
        path = os.path.join(out_dir, art.name)
        if os.path.dirname(art.name):
            os.makedirs(os.path.dirname(path), exist_ok=True)
        data = art.text.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(data)
        self.entries.append({"file": art.name, "scenario": art.scenario, "seed": int(self.seed),
                             "sha256": sha256_bytes(data)})

    def to_dict(self):
        return {"entries": sorted(self.entries, key=lambda e: e["file"]), "flags": self.flags}

    def write(self, out_dir):
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, "wb") as fh:
            fh.write(dumps_json(self.to_dict()).encode("utf-8"))
        return path


def load_manifest(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("entries"), list):
        raise ConfigurationError(f"{path}: field 'entries' must be a list")
    for k, e in enumerate(data["entries"]):
        for key in ("file", "scenario", "seed", "sha256"):
            if key not in e:
                raise ConfigurationError(f"{path}: entries[{k}] lacks field '{key}'")
    return data


def load_config(path) -> dict:
    """Parse a TOML config file; syntax errors report the line and column."""
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
