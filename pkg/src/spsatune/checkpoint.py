"""Checkpoint files: one JSON document holding space, options and tuner state.

Writes go to a temporary file in the target directory followed by an
atomic rename, so a reader never sees a half-written checkpoint.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import CheckpointError, CheckpointVersionError
from .space import ParameterSpace
from .spsa import EngineOptions, TunerState

FORMAT = "spsatune-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    state: TunerState
    space: ParameterSpace | None
    options: EngineOptions | None
    fingerprint: str | None


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def dumps_checkpoint(state: TunerState, space: ParameterSpace | None = None,
                     options: EngineOptions | None = None) -> str:
    doc = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "space_fingerprint": space.fingerprint() if space is not None else None,
        "space": space.to_list() if space is not None else None,
        "options": options.to_dict() if options is not None else None,
        "state": state.to_dict(),
    }
    return json.dumps(doc, indent=2) + "\n"


def save_checkpoint(state: TunerState, path, space: ParameterSpace | None = None,
                    options: EngineOptions | None = None) -> None:
    atomic_write_text(path, dumps_checkpoint(state, space, options))


def read_checkpoint(path) -> Checkpoint:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint {path} does not exist") from None
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a checkpoint file")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint {path} has format version {version}, this build reads {FORMAT_VERSION}")
    try:
        state = TunerState.from_dict(doc["state"])
        space = ParameterSpace.from_list(doc["space"]) if doc.get("space") is not None else None
        options = EngineOptions.from_dict(doc["options"]) if doc.get("options") is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint {path} is malformed: {exc!r}") from None
    fingerprint = doc.get("space_fingerprint")
    if space is not None and fingerprint != space.fingerprint():
        raise CheckpointError(f"checkpoint {path}: stored fingerprint does not match its space")
    return Checkpoint(state, space, options, fingerprint)


def load_checkpoint(path) -> TunerState:
    return read_checkpoint(path).state
