"""Counter-based random streams with explicit, named derivation.

Every stochastic routine in the package receives its randomness through
:func:`stream`, keyed by a root seed plus a path of stream identifiers
(strings or integers).  The same (seed, path) pair always yields the same
Philox stream, distinct paths yield statistically independent streams, and
no global RNG state exists anywhere.  This is what makes results bit-exact
regardless of how work is split across workers: each chain, trajectory
batch, or instance owns the stream named after it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _token_entropy(token) -> int:
    if isinstance(token, (int, np.integer)):
        # Map signed ints into the non-negative range SeedSequence accepts.
        return int(token) & 0xFFFFFFFFFFFFFFFF
    if isinstance(token, str):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream path tokens must be int or str, got {type(token)!r}")


def stream(seed: int, *path) -> np.random.Generator:
    """Return the Philox generator for the stream named ``path`` under ``seed``."""
    entropy = [_token_entropy(seed)] + [_token_entropy(t) for t in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *path) -> int:
    """A derived integer seed for components that take a seed, not a stream."""
    material = b"".join(_token_entropy(t).to_bytes(8, "little") for t in (seed, *path))
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "little") >> 1
