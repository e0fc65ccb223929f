"""Flat ``key=value`` config files.

Keys may use dots or dashes (``buffer.capacity``, ``buffer-capacity``); both
map to the underscore form of the matching command-line option.
"""

from __future__ import annotations

from pathlib import Path


def normalize_key(key: str) -> str:
    return key.strip().replace(".", "_").replace("-", "_")


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[normalize_key(key)] = value.strip()
    return out


def write_config(path, values: dict, header: list[str] | None = None) -> None:
    lines = [f"# {h}" for h in header or []]
    for key in sorted(values):
        value = values[key]
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
