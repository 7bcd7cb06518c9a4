"""Flat key=value configuration files shared by the server and worker CLIs.

Format: one ``key = value`` per line, ``#`` comments, optional single or
double quotes around values. Example server config:

    listen = 127.0.0.1:8080
    catalog = /data/catalog
    workers = 2
    static_dir = frontend/dist
    cluster_listen = 127.0.0.1:0
    heartbeat_interval_s = 2.0

Worker config keys: catalog, frontend, heartbeat_interval_s, catalog_mode
(must stay ``read_only``; anything else is refused at startup).
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(Exception):
    pass


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key = key.strip()
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        values[key] = value
    return values


def get_int(cfg: dict[str, str], key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key} must be an integer, got {cfg[key]!r}") from None


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key} must be a number, got {cfg[key]!r}") from None
