"""Hierarchical configuration: defaults, one YAML file, environment overrides.

Precedence (highest wins): environment > file > built-in defaults.
Recognized environment variables: MINIORC_CONFIG (file path),
MINIORC_JOURNAL_DIR, MINIORC_CLOCK_MODE.
"""

from __future__ import annotations

import copy
import os
from pathlib import Path

import yaml

from miniorc.errors import MiniorcError


class ConfigError(MiniorcError):
    code = "CONFIG_ERROR"


DEFAULTS: dict = {
    "clock": {"mode": "manual", "start": 0.0},
    "journal": {"dir": "./miniorc-journal", "snapshot_every": 1000},
    "iam": {"secret": "miniorc-dev-secret", "token_ttl": 3600.0, "admin_group": "admin"},
    "scheduler": {"policy": "drf"},
    "autoscaler": {
        "min_nodes": 1,
        "max_nodes": 10,
        "scaleout_delay": 30.0,
        "idle_timeout": 120.0,
        "node_template": {"cpu": 4, "mem": 8, "disk": 40},
    },
    "transfers": {"window_ticks": 5, "initial_streams": 2, "max_streams": 32},
    "links": {
        "default": {"rate": 10_000_000.0, "capacity": None},
        "pairs": [],
    },
    "orchestrator": {
        "retry_limit": 3,
        "site_cooldown": 300.0,
        "configure_delay": 0.0,
        "capacity_patience": 3,
        "cluster_site": None,
    },
    "gateway": {"long_poll_max": 30.0},
    "bootstrap": {"clients": [], "sites": [], "datasets": [], "identities": [], "rules": []},
}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class Config:
    def __init__(self, data: dict):
        self.data = data

    def get(self, dotted: str, default=None):
        node = self.data
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def section(self, name: str) -> dict:
        value = self.data.get(name, {})
        return value if isinstance(value, dict) else {}


def load_config(path: str | os.PathLike | None = None, env: dict | None = None) -> Config:
    env = dict(os.environ if env is None else env)
    data = copy.deepcopy(DEFAULTS)

    file_path = path or env.get("MINIORC_CONFIG")
    if file_path:
        raw_path = Path(file_path)
        if not raw_path.exists():
            raise ConfigError(f"config file not found: {raw_path}")
        try:
            loaded = yaml.safe_load(raw_path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {raw_path} is not valid YAML: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {raw_path} must contain a mapping")
        data = _deep_merge(data, loaded)

    if env.get("MINIORC_JOURNAL_DIR"):
        data["journal"]["dir"] = env["MINIORC_JOURNAL_DIR"]
    if env.get("MINIORC_CLOCK_MODE"):
        mode = env["MINIORC_CLOCK_MODE"]
        if mode not in ("manual", "realtime"):
            raise ConfigError(f"MINIORC_CLOCK_MODE must be manual or realtime, got {mode!r}")
        data["clock"]["mode"] = mode
    return Config(data)
