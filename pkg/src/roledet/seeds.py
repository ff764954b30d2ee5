"""Deterministic seed derivation.

A single master seed is expanded into independent per-stage / per-fold seeds
by hashing (master, stage label, index) with BLAKE2b. Adding or reordering
stages therefore never silently reseeds existing ones, and the scheme is
platform independent.
"""

import hashlib
import struct


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    """64-bit seed for (master, stage, index); master and index taken mod 2^64."""
    mask = 0xFFFFFFFFFFFFFFFF
    payload = struct.pack("<QQ", int(master) & mask, int(index) & mask) + stage.encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")
