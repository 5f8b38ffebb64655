"""Deterministic seed derivation shared by training, search, and the CLI."""

import hashlib


def derive_seed(*parts) -> int:
    """Map an arbitrary tuple of ints/strings to a stable 63-bit seed.

    Uses SHA-256 so results are identical across processes and platforms
    (Python's builtin hash() is salted per process and unusable here).
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
