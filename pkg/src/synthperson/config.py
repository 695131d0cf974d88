"""Run configuration: defaults, TOML/JSON loading, overrides, canonical hash.

A config is a nested dict with fixed sections.  Every run echoes its fully
resolved config into header.json; re-running from that echo reproduces the
run.  The config hash excludes emission.out_dir so relocated reruns compare
equal.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys

from .errors import ConfigurationError
from .presets import CONFIG_PRESETS

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version dependent
    import tomli as tomllib

DEFAULT_CONFIG = {
    "seed": 1,
    "identities": {
        "count": 10,
        "texture_mode": "real",  # random | generated | real
        "accessories": True,
        "hard_fraction": 0.0,
    },
    "clothing": {
        "palette": "normal",  # normal | black
        "corpus_dir": "",  # empty -> builtin clothing images
        "random_corpus_dir": "",  # empty -> builtin universal images
    },
    "world": {
        "scene_preset": "default4",
        "camera_preset": "cam34",
        "resolution": [512, 384],
    },
    "capture": {
        "wave_size": 24,  # pedestrians walking simultaneously per scene
        "wave_duration": 20.0,  # seconds each wave is captured
        "dt": 0.25,  # simulated seconds per captured frame
    },
    "illumination": {"preset": "day"},
    "annotation": {
        "min_height_px": 40,
        "min_visible_ratio": 0.5,
        "reject_edge_touching": True,
        "enlarge_factor": 0.1,
        "enlarge_mode": "stochastic",  # stochastic | fixed
    },
    "emission": {
        "out_dir": "out/run",
        "per_id_budget": 40,
        "format": "png",  # png | jpeg
        "jpeg_quality": 92,
    },
}


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigurationError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"config section {here!r} must be a table")
            out[key] = _deep_merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(partial: dict) -> dict:
    """Expand a partial config over the defaults; rejects unknown keys."""
    # A header.json echo nests the config under "config".
    if "config" in partial and isinstance(partial.get("config"), dict):
        partial = partial["config"]
    return _deep_merge(DEFAULT_CONFIG, partial)


def preset_config(name: str) -> dict:
    if name not in CONFIG_PRESETS:
        raise ConfigurationError(
            f"unknown config preset {name!r}; available: {sorted(CONFIG_PRESETS)}"
        )
    return resolve_config(CONFIG_PRESETS[name])


def load_config(path: str) -> dict:
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return resolve_config(data)


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("["):
        return json.loads(text)
    return text


def apply_overrides(config: dict, overrides) -> dict:
    """CLI --set entries: dotted.key=value, values coerced by literal shape."""
    cfg = copy.deepcopy(config)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigurationError(f"unknown config section {key!r}")
            node = node[p]
        leaf = parts[-1]
        if leaf not in node:
            raise ConfigurationError(f"unknown config key {key!r}")
        node[leaf] = _coerce(raw.strip())
    return cfg


def config_hash(config: dict) -> str:
    trimmed = copy.deepcopy(config)
    trimmed.get("emission", {}).pop("out_dir", None)
    blob = json.dumps(trimmed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_config(config: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config, fh, sort_keys=True, indent=2)
        fh.write("\n")
