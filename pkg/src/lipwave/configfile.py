"""Flat key = value experiment config files.

One assignment per line, `#` starts a comment. Values parse as int,
float, true/false, a comma-separated list of those, or a bare string.
Every file carries schema_version for forward compatibility.

    schema_version = 1
    corpus.sentences = 54
    feature_choice = phase_delta_double_delta
    augmentation.factors = 0.5, 0.63, 0.794, 1.0, 1.26, 1.587, 2.0
"""

from __future__ import annotations

from pathlib import Path

SCHEMA_VERSION = 1


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_scalar(part) for part in text.split(",") if part.strip()]
    return _parse_scalar(text)


def loads(text: str) -> dict:
    """Parse config text into a flat {dotted_key: value} dict."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    if "schema_version" not in out:
        raise ValueError("config is missing schema_version")
    if out["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {out['schema_version']!r}")
    return out


def load(path: str | Path) -> dict:
    return loads(Path(path).read_text())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def dumps(config: dict) -> str:
    """Render a flat config dict; schema_version is always emitted first."""
    items = dict(config)
    items.setdefault("schema_version", SCHEMA_VERSION)
    lines = [f"schema_version = {items.pop('schema_version')}"]
    for key in sorted(items):
        lines.append(f"{key} = {_format_value(items[key])}")
    return "\n".join(lines) + "\n"


def dump(path: str | Path, config: dict) -> None:
    Path(path).write_text(dumps(config))
