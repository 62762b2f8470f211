"""Counter-based random streams with a fixed-width serializable state.

All randomness in a run comes from numpy's Philox 4x64 generator.  The
perturbation stream's full state packs into 13 little-endian uint64 words
(104 bytes), which is what checkpoints store.  Objective noise uses
short-lived child streams keyed by ``(seed, iteration, replicate, probe,
attempt)`` so it never has to be checkpointed.
"""

from __future__ import annotations

import numpy as np

from .errors import CheckpointError

RNG_NAME = "philox4x64"
RNG_VERSION = 1
STATE_BYTES = 13 * 8


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent stream for one evaluation, addressed by its position in the run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


def dump_state(rng: np.random.Generator) -> str:
    st = rng.bit_generator.state
    if st["bit_generator"] != "Philox":
        raise TypeError(f"only Philox generators are serializable, got {st['bit_generator']}")
    words = np.concatenate([
        np.asarray(st["state"]["counter"], dtype="<u8"),
        np.asarray(st["state"]["key"], dtype="<u8"),
        np.asarray(st["buffer"], dtype="<u8"),
        np.array([st["buffer_pos"], st["has_uint32"], st["uinteger"]], dtype="<u8"),
    ])
    return words.tobytes().hex()


def load_state(blob: str) -> np.random.Generator:
    try:
        raw = bytes.fromhex(blob)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"rng state is not valid hex: {exc}") from None
    if len(raw) != STATE_BYTES:
        raise CheckpointError(f"rng state must be {STATE_BYTES} bytes, got {len(raw)}")
    words = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
    bitgen = np.random.Philox()
    bitgen.state = {
        "bit_generator": "Philox",
        "state": {"counter": words[0:4].copy(), "key": words[4:6].copy()},
        "buffer": words[6:10].copy(),
        "buffer_pos": int(words[10]),
        "has_uint32": int(words[11]),
        "uinteger": int(words[12]),
    }
    return np.random.Generator(bitgen)
