"""Independent reference implementations used as test oracles.

Deliberately written with plain lists and hashlib, sharing no code with
the package: recursion-free layer climbing for roots, exhaustive leaf
scanning for proofs.
"""

from __future__ import annotations

import hashlib


def sha(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def oracle_root(leaf_digests: list[bytes]) -> bytes:
    """Recursive pairwise hashing, duplicating the last element of odd levels."""
    level = list(leaf_digests)
    if not level:
        raise ValueError("need at least one leaf")
    while len(level) > 1:
        if len(level) % 2 == 1:
            level = level + [level[-1]]
        level = [sha(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def oracle_root_from_items(items: list[bytes]) -> bytes:
    return oracle_root([sha(i) for i in items])


def oracle_layers(leaf_digests: list[bytes]) -> list[list[tuple[int, bytes, bool]]]:
    """All layers bottom-up as (index, digest, duplicated) triples."""
    layer = [(2 * k + 1, d, False) for k, d in enumerate(leaf_digests)]
    layers = [layer]
    height = 0
    while len(layer) > 1:
        if len(layer) % 2 == 1:
            idx, dig, _ = layer[-1]
            layer = layer + [(idx, dig, True)]
            layers[-1] = layer
        nxt = []
        for i in range(0, len(layer), 2):
            left_idx, left_dig, _ = layer[i]
            _, right_dig, _ = layer[i + 1]
            nxt.append((left_idx + 2**height, sha(left_dig + right_dig), False))
        layers.append(nxt)
        layer = nxt
        height += 1
    return layers


def oracle_proof_full_scan(
    leaf_digests: list[bytes], leaf_index: int
) -> tuple[list[tuple[str, bytes, int]], bytes]:
    """Naive proof oracle: locate the leaf by exhaustive scan, then record the
    sibling at every layer by position. Returns (steps leaf-to-root, root).

    Steps are (side, sibling_digest, sibling_index) with side being the
    sibling's position: 'L' when the sibling is the left operand.
    """
    layers = oracle_layers(leaf_digests)
    pos = None
    for p, (idx, _, dup) in enumerate(layers[0]):
        if idx == leaf_index and not dup:
            pos = p
            break
    if pos is None:
        raise KeyError(f"leaf index {leaf_index} not found")
    steps = []
    for layer in layers[:-1]:
        sib = pos ^ 1
        side = "L" if sib < pos else "R"
        steps.append((side, layer[sib][1], layer[sib][0]))
        pos //= 2
    return steps, layers[-1][0][1]


def oracle_fold(leaf_digest: bytes, steps: list[tuple[str, bytes, int]]) -> bytes:
    running = leaf_digest
    for side, sibling, _ in steps:
        running = sha(sibling + running) if side == "L" else sha(running + sibling)
    return running
