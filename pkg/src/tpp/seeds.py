"""Stable sub-seed derivation so every random stream hangs off one seed."""

import hashlib


def derive_seed(seed: int, role: str) -> int:
    """64-bit seed from (seed, role); stable across runs and platforms."""
    digest = hashlib.sha256(f"{int(seed)}:{role}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
