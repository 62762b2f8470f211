"""Line-delimited JSON trace files, one record per iteration."""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Any

from .checkpoint import atomic_write_text
from .spsa import IterationRecord

logger = logging.getLogger(__name__)


def dumps_record(record: IterationRecord | dict[str, Any]) -> str:
    d = record.to_dict() if isinstance(record, IterationRecord) else record
    return json.dumps(d, separators=(",", ":"))


class TraceWriter:
    """Append-only, internally synchronized trace sink; flushes every row."""

    def __init__(self, path, truncate: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = open(self.path, "w" if truncate else "a", encoding="utf-8")

    def __call__(self, record: IterationRecord) -> None:
        line = dumps_record(record) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path) -> list[dict[str, Any]]:
    """Parse a trace; a torn final line (crash mid-write) is dropped with a warning."""
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            if lineno == len(lines):
                logger.warning("%s: ignoring incomplete last line %d", path, lineno)
                continue
            raise ValueError(f"{path}:{lineno}: invalid trace row") from None
    return rows


def truncate_trace(path, last_iteration: int) -> int:
    """Drop rows past ``last_iteration`` (rows written after the checkpoint).

    Returns the number of rows kept.  The file is rewritten atomically and
    only when something has to go.
    """
    path = Path(path)
    if not path.exists():
        return 0
    rows = read_trace(path)
    kept = [r for r in rows if r["iteration"] <= last_iteration]
    raw_lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(kept) != len(raw_lines):
        atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in kept))
    return len(kept)
