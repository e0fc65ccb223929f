"""Per-component seed derivation from a single master seed."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, component: str) -> int:
    """Stable 63-bit seed from ``sha256("<master>:<component>")``."""
    digest = hashlib.sha256(f"{int(master)}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
