"""Flat key-value text files used for calibrations, parameters, gains and scenarios.

One entry per line: ``key = value  # optional unit or comment``. Blank lines and
lines starting with ``#`` are ignored. Values are kept as strings; the typed
accessors below convert them on demand.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class ConfigError(ValueError):
    pass


@dataclass
class KeyValueFile:
    entries: dict[str, str] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)
    source: str = "<memory>"

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def keys(self):
        return self.entries.keys()

    def raw(self, key: str) -> str:
        try:
            return self.entries[key]
        except KeyError:
            raise ConfigError(f"{self.source}: missing key '{key}'") from None

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"{self.source}: missing key '{key}'")
            return float(default)
        try:
            return float(self.entries[key])
        except ValueError:
            raise ConfigError(f"{self.source}: key '{key}' is not a number: {self.entries[key]!r}") from None

    def get_floats(self, key: str, n: int | None = None, default: Iterable[float] | None = None) -> list[float]:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"{self.source}: missing key '{key}'")
            return [float(v) for v in default]
        parts = [p for p in re.split(r"[,\s]+", self.entries[key].strip()) if p]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"{self.source}: key '{key}' has a non-numeric entry") from None
        if n is not None and len(vals) != n:
            raise ConfigError(f"{self.source}: key '{key}' needs {n} values, got {len(vals)}")
        return vals

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"{self.source}: missing key '{key}'")
            return default
        return self.entries[key]

    def get_bool(self, key: str, default: bool = False) -> bool:
        if key not in self.entries:
            return default
        v = self.entries[key].strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.source}: key '{key}' is not a boolean: {v!r}")


def parse_key_values(text: str, source: str = "<memory>") -> KeyValueFile:
    out = KeyValueFile(source=source)
    for lineno, line in enumerate(text.splitlines(), 1):
        body, _, comment = line.partition("#")
        if not body.strip():
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for '{key}'")
        if key in out.entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        out.entries[key] = value
        if comment.strip():
            out.units[key] = comment.strip()
    return out


def load_key_values(path: str | os.PathLike) -> KeyValueFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_key_values(text, source=str(path))


def format_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_key_values(entries: Mapping[str, object], units: Mapping[str, str] | None = None,
                    header: Iterable[str] = ()) -> str:
    units = units or {}
    lines = [f"# {h}" for h in header]
    for k, v in entries.items():
        line = f"{k} = {format_value(v)}"
        if k in units:
            line += f"  # {units[k]}"
        lines.append(line)
    return "\n".join(lines) + "\n"
