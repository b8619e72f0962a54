"""Small shared helpers: canonical JSON, hashing, seed derivation."""
from __future__ import annotations

import hashlib
import json

import numpy as np


def canonical_json(obj) -> str:
    """Serialize with sorted keys and fixed separators so hashes are stable."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def spawn_seed(root_seed: int, index: int) -> int:
    """Derive a child seed from a root seed by counter.

    Uses numpy's SeedSequence with the counter as spawn key, so children are
    statistically independent and the scheme is replayable from (root, index).
    """
    ss = np.random.SeedSequence(root_seed, spawn_key=(index,))
    return int(ss.generate_state(1)[0])


def rng_from(root_seed: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(spawn_seed(root_seed, index))
