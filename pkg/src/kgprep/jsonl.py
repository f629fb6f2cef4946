"""JSONL and atomic-file helpers shared by the CLI subcommands."""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

from kgprep.errors import RecordError


def dumps(obj: Any) -> str:
    """Compact, key-order-preserving, non-ASCII-preserving JSON."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def parse_line(raw: bytes) -> Any:
    """Decode and parse one JSONL line."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RecordError(f"not valid UTF-8: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"invalid JSON: {exc.msg}") from None


def iter_lines(path) -> Iterator[tuple[int, bytes]]:
    """(0-based line index, raw line) pairs, skipping blank lines."""
    with open(path, "rb") as fh:
        for idx, raw in enumerate(fh):
            if raw.strip():
                yield idx, raw


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a sibling temp file, renamed over `path` only on success,
    so failed runs leave no partial output behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, encoding="utf-8" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_json(path, obj: Any) -> None:
    with atomic_write(path) as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
