"""Deterministic seed derivation.

A master seed fans out to per-pair and per-iteration streams by hashing the
seed together with string/int context keys, so any pair-level run can be
reproduced in isolation and shard order never matters.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary context parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
