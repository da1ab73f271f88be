"""Digest type and hash helpers.

All tree values are 32-byte SHA-256 digests. Internal nodes hash the raw
concatenation of their two child digests, with no domain-separation
prefixes; second-preimage hardening is explicitly out of scope.
"""

from __future__ import annotations

import hashlib
from typing import Callable

DIGEST_LEN = 32

Hasher = Callable[[bytes], bytes]


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Digest(bytes):
    """A fixed-length 32-byte hash value.

    Subclasses ``bytes`` so digests concatenate and hash at native speed;
    construction enforces the length invariant. Hex form is lowercase,
    64 characters, and round-trips exactly.
    """

    __slots__ = ()

    def __new__(cls, value: bytes) -> "Digest":
        if len(value) != DIGEST_LEN:
            raise ValueError(f"digest must be {DIGEST_LEN} bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        if len(text) != 2 * DIGEST_LEN:
            raise ValueError(f"digest hex must be {2 * DIGEST_LEN} chars, got {len(text)}")
        if text != text.lower():
            raise ValueError("digest hex must be lowercase")
        return cls(bytes.fromhex(text))

    def __repr__(self) -> str:
        return f"Digest({self.hex()!r})"


class CountingHasher:
    """Wraps a hash function and counts invocations (cost instrumentation)."""

    def __init__(self, fn: Hasher = sha256):
        self._fn = fn
        self.count = 0

    def __call__(self, data: bytes) -> bytes:
        self.count += 1
        return self._fn(data)

    def reset(self) -> None:
        self.count = 0
