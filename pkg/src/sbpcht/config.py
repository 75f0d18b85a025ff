"""Run-configuration file parsing and validation.

The on-disk format is an INI-style text file with the sections geometry,
physics, sat, time, and output; every run artifact embeds the resolved
values so results are reproducible from their headers alone.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict
from pathlib import Path

from .physics import PdeParams
from .problem import GeometryConfig, OutputConfig, RunConfig, SatConfig, TimeSection

__all__ = ["ConfigError", "load_config", "resolved_items"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_KNOWN_KEYS = {
    "geometry": {"map", "nx", "ny", "degree", "left", "right"},
    "physics": {"epsilon", "kappa", "advection", "zeta_mode", "phi_mode", "mms"},
    "sat": {"mode", "cstar", "gamma1", "gamma2_left", "gamma2_right"},
    "time": {"scheme", "dt", "t_final", "n_loop", "strict", "ledger"},
    "output": {"dir", "write_ledger"},
}


def _numbers(raw: str, count: int, where: str):
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != count:
        raise ConfigError(f"{where}: expected {count} numbers, got {len(parts)}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _boolean(raw: str, where: str) -> bool:
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in section [{section}]")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    try:
        geo = GeometryConfig(
            map=get("geometry", "map", "curvilinear"),
            nx=int(get("geometry", "nx", "20")),
            ny=int(get("geometry", "ny", "20")),
            degree=int(get("geometry", "degree", "2")),
            left=_numbers(get("geometry", "left", "-1 0 -1 1"), 4, f"{path}: geometry.left"),
            right=_numbers(get("geometry", "right", "0 1.2 -1 1"), 4, f"{path}: geometry.right"),
        )
        zeta_mode = get("physics", "zeta_mode", "upwind")
        if zeta_mode != "upwind":
            zeta_mode = float(zeta_mode)
        phi_mode = get("physics", "phi_mode", "kappa")
        if phi_mode != "kappa":
            phi_mode = float(phi_mode)
        physics = PdeParams(
            epsilon=float(get("physics", "epsilon", "1.0")),
            kappa=float(get("physics", "kappa", "1.0")),
            advection=_numbers(get("physics", "advection", "0 1"), 2, f"{path}: physics.advection"),
            zeta_mode=zeta_mode,
            phi_mode=phi_mode,
        )
        mms = _boolean(get("physics", "mms", "true"), f"{path}: physics.mms")
        sat = SatConfig(
            mode=get("sat", "mode", "auto"),
            cstar=float(get("sat", "cstar", "1.0")),
            gamma1=float(get("sat", "gamma1", "0.5")),
            gamma2_left=float(get("sat", "gamma2_left", "0.1")),
            gamma2_right=float(get("sat", "gamma2_right", "0.1")),
        )
        dt_raw = get("time", "dt", "1e-3")
        time = TimeSection(
            scheme=get("time", "scheme", "be-ext2").lower(),
            dt="auto" if dt_raw == "auto" else float(dt_raw),
            t_final=float(get("time", "t_final", "0.1")),
            n_loop=int(get("time", "n_loop", "1")),
            strict=_boolean(get("time", "strict", "false"), f"{path}: time.strict"),
            ledger=_boolean(get("time", "ledger", "false"), f"{path}: time.ledger"),
        )
        output = OutputConfig(
            directory=get("output", "dir", "out"),
            write_ledger=_boolean(get("output", "write_ledger", "false"), f"{path}: output.write_ledger"),
        )
        return RunConfig(geometry=geo, physics=physics, mms=mms, sat=sat, time=time, output=output)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def resolved_items(cfg: RunConfig):
    """Flat (section.key, value) pairs of the fully resolved configuration."""
    sections = {
        "geometry": asdict(cfg.geometry),
        "physics": {**asdict(cfg.physics), "mms": cfg.mms},
        "sat": asdict(cfg.sat),
        "time": asdict(cfg.time),
        "output": asdict(cfg.output),
    }
    for section, body in sections.items():
        for key, value in body.items():
            yield f"{section}.{key}", value
