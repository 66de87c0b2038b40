"""Stable hashing used for seeded, order-insensitive random decisions."""

from __future__ import annotations

import hashlib


def stable_hash64(*parts: str | int) -> int:
    """64-bit hash of the parts, identical across runs, platforms, and shards."""
    joined = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(joined, digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stable_unit(*parts: str | int) -> float:
    """Map the parts to a deterministic value in [0, 1)."""
    return stable_hash64(*parts) / 2.0**64
