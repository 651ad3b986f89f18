"""Locating and reading bundled resource files."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from courtrel.errors import ResourceError

#: Environment variable naming a directory that overrides the bundled resources.
RESOURCE_DIR_ENV = "COURTREL_RESOURCES"


def bundled_dir(kind: str = "resources") -> Path:
    return Path(str(resources.files("courtrel") / kind))


def resource_dir(override: str | os.PathLike | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(RESOURCE_DIR_ENV)
    if env:
        return Path(env)
    return bundled_dir()


def resolve(name: str, directory: str | os.PathLike | None = None) -> Path:
    """Find ``name`` in ``directory`` (or the env override), falling back to the bundled copy."""
    base = resource_dir(directory)
    candidate = base / name
    if candidate.is_file():
        return candidate
    fallback = bundled_dir() / name
    if fallback.is_file():
        return fallback
    raise ResourceError(f"resource file {name!r} not found in {base}")


def data_path(name: str) -> Path:
    """Path of a bundled fixture under ``courtrel/data``."""
    return bundled_dir("data") / name


def read_entries(path: str | os.PathLike) -> list[tuple[int, str]]:
    """Non-blank, non-comment lines of a UTF-8 resource file with their 1-based line numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ResourceError(f"cannot read resource: {exc}", source=str(path)) from exc
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.rstrip("\n\r")
        if not stripped.strip() or stripped.lstrip().startswith("#"):
            continue
        out.append((lineno, stripped))
    return out
