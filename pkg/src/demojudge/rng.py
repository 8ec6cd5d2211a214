"""Deterministic random-stream derivation.

All stochastic operations in this package take an explicit
``numpy.random.Generator`` (PCG64) argument; there is no global RNG state.
Streams for independent units of work (one per query, per tuning grid point,
per verification check, ...) are derived with :func:`substream`, which mixes a
root seed with a BLAKE2b hash of string/int labels.  Derived streams are
therefore reproducible across runs and platforms and independent of execution
order, which is what makes parallel batch runs byte-identical to sequential
ones.

:func:`key_uniform` provides the related primitive of a deterministic uniform
variate keyed purely by content (no stream involved), used wherever a value
must be a fixed function of its inputs, e.g. the latent success probability of
a (query, context) pair.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "spawn_seed", "key_hash64", "key_uniform"]

_TWO64 = float(2**64)


def _encode(parts: tuple) -> bytes:
    """Unambiguous length-prefixed encoding of str/int label tuples."""
    chunks = []
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (str, int)):
            raise TypeError(f"stream labels must be str or int, got {type(part).__name__}")
        raw = part.encode("utf-8") if isinstance(part, str) else str(part).encode("ascii")
        chunks.append(len(raw).to_bytes(4, "big"))
        chunks.append(raw)
    return b"".join(chunks)


def key_hash64(*parts: str | int) -> int:
    """64-bit BLAKE2b hash of the label tuple, stable across runs/platforms."""
    digest = hashlib.blake2b(_encode(parts), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def key_uniform(*parts: str | int) -> float:
    """Deterministic uniform variate in the open interval (0, 1) keyed by content."""
    return (key_hash64(*parts) + 0.5) / _TWO64


def spawn_seed(seed: int, *labels: str | int) -> np.random.SeedSequence:
    """Derive a child seed sequence from a root seed and a label path."""
    if seed < 0:
        raise ValueError("root seed must be non-negative")
    digest = hashlib.blake2b(_encode(labels), digest_size=16).digest()
    words = [int.from_bytes(digest[:8], "big"), int.from_bytes(digest[8:], "big")]
    return np.random.SeedSequence([seed, *words])


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """PCG64 generator for the (seed, labels) path; same inputs, same stream."""
    return np.random.Generator(np.random.PCG64(spawn_seed(seed, *labels)))
