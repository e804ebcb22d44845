"""Deterministic seed derivation shared by the environment, generators and harness.

Everything that consumes randomness is seeded from explicit integers; nested
components get their own streams via `derive`, so adding or reordering work
never shifts the randomness seen elsewhere.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4B1C15


def mix64(value: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit integer."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_draw(seed: int, calls: int) -> int:
    """Value of draw number `calls` from the counter-based stream `seed`.

    Stateless: the (seed, calls) pair fully determines the output, which is
    what makes environment states replayable values.
    """
    return mix64((seed + (calls + 1) * _GOLDEN) & MASK64)


def derive(*parts: int | str) -> int:
    """Derive an independent 63-bit seed from a sequence of labels and seeds."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        token = f"i{part}" if isinstance(part, int) else f"s{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") >> 1
