"""Pure-Python kernels for tree construction, proof extraction and folding.

This module mirrors the compiled ``merkcert._native`` extension and is the
import-time fallback when the extension is unavailable. Both produce the
same flat node-array layout:

* ``values``  — concatenated 32-byte node values, creation order
* ``indexes`` — node index per slot (``array('q')``)
* ``lefts``/``rights`` — child slot positions, -1 for none (``array('i')``)
* ``dups``    — duplication flags, one byte per slot

Slots are created bottom-up: original leaves first, then per level an
optional duplicate of the trailing node followed by the parents. The root
is always the last slot.
"""

from __future__ import annotations

import hashlib
from array import array
from typing import Callable, Sequence

_DIGEST_LEN = 32


def _slot_count(n: int) -> int:
    total = n
    level = n
    while level > 1:
        if level & 1:
            total += 1
            level += 1
        total += level // 2
        level //= 2
    return total


def build(
    items: Sequence[bytes],
    prehashed: bool,
    hasher: Callable[[bytes], bytes] | None = None,
) -> tuple[bytes, array, array, array, bytes, int, int]:
    h = hasher if hasher is not None else (lambda b: hashlib.sha256(b).digest())
    n = len(items)
    if n == 0:
        raise ValueError("no data to certify")
    total = _slot_count(n)

    values = bytearray(total * _DIGEST_LEN)
    indexes = array("q", bytes(8 * total))
    lefts = array("i", bytes(4 * total))
    rights = array("i", bytes(4 * total))
    dups = bytearray(total)

    hash_count = 0
    pos = 0
    cur = list(range(n))
    for i, item in enumerate(items):
        if prehashed:
            value = item
            if len(value) != _DIGEST_LEN:
                raise ValueError(f"leaf digest must be {_DIGEST_LEN} bytes")
        else:
            value = h(item)
            if len(value) != _DIGEST_LEN:
                raise ValueError("hasher must return 32-byte digests")
            hash_count += 1
        values[pos * _DIGEST_LEN : (pos + 1) * _DIGEST_LEN] = value
        indexes[pos] = 2 * i + 1
        lefts[pos] = -1
        rights[pos] = -1
        pos += 1

    height = 0
    level_len = n
    while level_len > 1:
        if level_len & 1:
            # replicate the trailing node: same index and value, no children
            last = cur[level_len - 1]
            values[pos * _DIGEST_LEN : (pos + 1) * _DIGEST_LEN] = values[
                last * _DIGEST_LEN : (last + 1) * _DIGEST_LEN
            ]
            indexes[pos] = indexes[last]
            lefts[pos] = -1
            rights[pos] = -1
            dups[pos] = 1
            cur.append(pos)
            pos += 1
            level_len += 1
        nxt = []
        for i in range(0, level_len, 2):
            left = cur[i]
            right = cur[i + 1]
            parent = h(
                bytes(values[left * _DIGEST_LEN : (left + 1) * _DIGEST_LEN])
                + bytes(values[right * _DIGEST_LEN : (right + 1) * _DIGEST_LEN])
            )
            if len(parent) != _DIGEST_LEN:
                raise ValueError("hasher must return 32-byte digests")
            hash_count += 1
            values[pos * _DIGEST_LEN : (pos + 1) * _DIGEST_LEN] = parent
            indexes[pos] = indexes[left] + (1 << height)
            lefts[pos] = left
            rights[pos] = right
            nxt.append(pos)
            pos += 1
        cur = nxt
        level_len = len(cur)
        height += 1

    return bytes(values), indexes, lefts, rights, bytes(dups), height, hash_count


def extract(
    values: bytes,
    indexes: array,
    lefts: array,
    rights: array,
    root_pos: int,
    leaf_index: int,
    height: int,
) -> tuple[bytes, array, int]:
    """Index-guided root-to-leaf traversal; steps returned leaf-to-root."""
    sides = bytearray(height)
    sibs = array("i", bytes(4 * height))
    node = root_pos
    visits = 1
    depth = 0
    while lefts[node] != -1:
        slot = height - 1 - depth
        if leaf_index > indexes[node]:
            sides[slot] = 0  # sibling sits to the left of the running value
            sibs[slot] = lefts[node]
            node = rights[node]
        else:
            sides[slot] = 1
            sibs[slot] = rights[node]
            node = lefts[node]
        depth += 1
        visits += 1
    if indexes[node] != leaf_index or depth != height:
        raise KeyError("unknown leaf")
    return bytes(sides), sibs, visits


def fold(leaf_digest: bytes, sides: bytes, siblings: bytes) -> bytes:
    if len(leaf_digest) != _DIGEST_LEN:
        raise ValueError(f"leaf digest must be {_DIGEST_LEN} bytes")
    if len(siblings) != len(sides) * _DIGEST_LEN:
        raise ValueError("siblings blob does not match step count")
    running = leaf_digest
    for t, side in enumerate(sides):
        sib = siblings[t * _DIGEST_LEN : (t + 1) * _DIGEST_LEN]
        if side == 0:
            running = hashlib.sha256(sib + running).digest()
        else:
            running = hashlib.sha256(running + sib).digest()
    return running
