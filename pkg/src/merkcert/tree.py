"""Indexed Merkle tree: construction, proofs, verification, serialization.

Nodes carry integer indexes: leaves take the odd numbers 1, 3, 5, ... left
to right, and a parent over children of height ``h`` takes
``left.index + 2**h``. Proof extraction descends from the root comparing
the target leaf index against node indexes, so locating a leaf never scans
the leaf layer.

Unbalanced layers are padded by replicating their trailing node (same
index, same value, ``duplicated`` flag set, no children) before pairing.

Built trees are immutable and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

from merkcert import kernels
from merkcert.errors import (
    EmptyDataError,
    NotALeafIndexError,
    TreeFormatError,
    UnknownLeafError,
)
from merkcert.hashing import DIGEST_LEN, Digest, Hasher, sha256

__all__ = [
    "Side",
    "ProofStep",
    "MerkleProof",
    "TreeNode",
    "IndexedMerkleTree",
    "parent_index",
    "build_tree",
    "build_tree_from_digests",
    "extract_proof",
    "extract_proof_instrumented",
    "compute_root",
    "verify_proof",
    "serialize_tree",
    "deserialize_tree",
    "tree_to_obj",
    "tree_from_obj",
    "serialize_proof",
    "deserialize_proof",
    "proof_to_obj",
    "proof_from_obj",
]


class Side(Enum):
    """Position of a proof step's sibling hash relative to the running value."""

    LEFT = "L"
    RIGHT = "R"


@dataclass(frozen=True, slots=True)
class ProofStep:
    side: Side
    sibling: Digest
    sibling_index: int


@dataclass(frozen=True, slots=True)
class MerkleProof:
    """Sibling-hash path from one leaf to the root, in verification order.

    ``multi_index`` is set on proofs extracted from multi-level trees; its
    steps then span several stacked trees and the per-step indexes are
    local to each level.
    """

    leaf_index: int
    steps: tuple[ProofStep, ...]
    expected_root: Digest
    multi_index: tuple[int, ...] | None = None


def parent_index(idx_left: int, child_height: int) -> int:
    """Index of the parent over a left child of index ``idx_left`` at height ``child_height``."""
    if idx_left < 1:
        raise ValueError("left-child index must be positive")
    if child_height < 0:
        raise ValueError("child height must be non-negative")
    return idx_left + (1 << child_height)


class TreeNode:
    """Read-only view of one node of an :class:`IndexedMerkleTree`."""

    __slots__ = ("_tree", "_pos")

    def __init__(self, tree: "IndexedMerkleTree", pos: int):
        self._tree = tree
        self._pos = pos

    @property
    def index(self) -> int:
        return self._tree._indexes[self._pos]

    @property
    def value(self) -> Digest:
        return self._tree._value_at(self._pos)

    @property
    def duplicated(self) -> bool:
        return bool(self._tree._dups[self._pos])

    @property
    def left(self) -> "TreeNode | None":
        pos = self._tree._lefts[self._pos]
        return None if pos < 0 else TreeNode(self._tree, pos)

    @property
    def right(self) -> "TreeNode | None":
        pos = self._tree._rights[self._pos]
        return None if pos < 0 else TreeNode(self._tree, pos)

    def is_leaf(self) -> bool:
        return self._tree._lefts[self._pos] < 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeNode):
            return NotImplemented
        if self._tree is other._tree:
            return self._pos == other._pos
        return (
            self.index == other.index
            and self.value == other.value
            and self.duplicated == other.duplicated
            and self.left == other.left
            and self.right == other.right
        )

    def __hash__(self) -> int:
        return hash((self.index, self.value, self.duplicated))

    def __repr__(self) -> str:
        kind = "leaf" if self.is_leaf() else "node"
        dup = ", duplicated" if self.duplicated else ""
        return f"<{kind} idx={self.index} value={self.value.hex()[:12]}…{dup}>"


class IndexedMerkleTree:
    """Immutable indexed binary hash tree built over a sequence of leaves.

    ``node_count`` counts every materialized node, including duplicated
    placeholder nodes; for a power-of-two leaf count it equals ``2N - 1``.
    ``hash_count`` records how many hash invocations construction spent.
    """

    __slots__ = (
        "_values",
        "_indexes",
        "_lefts",
        "_rights",
        "_dups",
        "leaf_count",
        "height",
        "hash_count",
    )

    def __init__(self, values, indexes, lefts, rights, dups, leaf_count, height, hash_count):
        self._values = values
        self._indexes = indexes
        self._lefts = lefts
        self._rights = rights
        self._dups = dups
        self.leaf_count = leaf_count
        self.height = height
        self.hash_count = hash_count

    @property
    def node_count(self) -> int:
        return len(self._indexes)

    @property
    def root_pos(self) -> int:
        return self.node_count - 1

    @property
    def root(self) -> TreeNode:
        return TreeNode(self, self.root_pos)

    @property
    def root_value(self) -> Digest:
        return self._value_at(self.root_pos)

    def _value_at(self, pos: int) -> Digest:
        return Digest(self._values[pos * DIGEST_LEN : (pos + 1) * DIGEST_LEN])

    def leaf_indexes(self) -> Iterator[int]:
        return iter(range(1, 2 * self.leaf_count, 2))

    def leaf_digest(self, leaf_index: int) -> Digest:
        """Digest stored at the leaf with the given (odd) index."""
        self._check_leaf_index(leaf_index)
        return self._value_at((leaf_index - 1) // 2)

    def _check_leaf_index(self, leaf_index: int) -> None:
        if not isinstance(leaf_index, int) or isinstance(leaf_index, bool):
            raise NotALeafIndexError("not a leaf index")
        if leaf_index % 2 == 0:
            raise NotALeafIndexError("not a leaf index")
        if leaf_index < 1 or leaf_index > 2 * self.leaf_count - 1:
            raise UnknownLeafError("unknown leaf")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexedMerkleTree):
            return NotImplemented
        return (
            self.leaf_count == other.leaf_count
            and self.height == other.height
            and self._values == other._values
            and self._indexes == other._indexes
            and self._lefts == other._lefts
            and self._rights == other._rights
            and self._dups == other._dups
        )

    def __hash__(self) -> int:
        return hash((self.leaf_count, self._values))

    def __repr__(self) -> str:
        return (
            f"IndexedMerkleTree(leaves={self.leaf_count}, height={self.height}, "
            f"root={self.root_value.hex()[:12]}…)"
        )


def _build(items: Sequence[bytes], prehashed: bool, hasher: Hasher | None, kernel: str):
    if len(items) == 0:
        raise EmptyDataError("no data to certify")
    coerced = [i if type(i) is bytes else bytes(i) for i in items]
    if hasher is not None and not prehashed:
        # custom hashers are a Python-kernel feature
        out = kernels.kernel("python").build(coerced, False, hasher)
    else:
        out = kernels.kernel(kernel).build(coerced, prehashed)
    values, indexes, lefts, rights, dups, height, hash_count = out
    return IndexedMerkleTree(values, indexes, lefts, rights, dups, len(coerced), height, hash_count)


def build_tree(items: Sequence[bytes], hasher: Hasher | None = None, *, kernel: str = "auto") -> IndexedMerkleTree:
    """Hash each item into a leaf and build the indexed tree bottom-up."""
    return _build(items, False, hasher, kernel)


def build_tree_from_digests(digests: Sequence[bytes], *, kernel: str = "auto") -> IndexedMerkleTree:
    """Build a tree whose leaves carry the given 32-byte digests verbatim.

    Used for parent levels of multi-level trees, where a leaf is the root
    digest of the subtree below it rather than the hash of a payload.
    """
    return _build(digests, True, None, kernel)


def extract_proof(tree: IndexedMerkleTree, leaf_index: int, *, kernel: str = "auto") -> MerkleProof:
    """Extract the Merkle proof for a leaf by index-guided traversal."""
    proof, _ = extract_proof_instrumented(tree, leaf_index, kernel=kernel)
    return proof


def extract_proof_instrumented(
    tree: IndexedMerkleTree, leaf_index: int, *, kernel: str = "auto"
) -> tuple[MerkleProof, int]:
    """Like :func:`extract_proof` but also reports how many nodes were visited."""
    tree._check_leaf_index(leaf_index)
    sides, sib_positions, visits = kernels.kernel(kernel).extract(
        tree._values, tree._indexes, tree._lefts, tree._rights,
        tree.root_pos, leaf_index, tree.height,
    )
    steps = tuple(
        ProofStep(
            side=Side.LEFT if sides[t] == 0 else Side.RIGHT,
            sibling=tree._value_at(pos),
            sibling_index=tree._indexes[pos],
        )
        for t, pos in enumerate(sib_positions)
    )
    proof = MerkleProof(leaf_index=leaf_index, steps=steps, expected_root=tree.root_value)
    return proof, visits


def compute_root(leaf_digest: bytes, proof: MerkleProof, hasher: Hasher | None = None, *,
                 kernel: str = "auto") -> Digest:
    """Fold a leaf digest through the proof steps up to a root digest."""
    leaf_digest = bytes(leaf_digest)
    if hasher is not None:
        running = leaf_digest
        for step in proof.steps:
            if step.side is Side.LEFT:
                running = hasher(step.sibling + running)
            else:
                running = hasher(running + step.sibling)
        return Digest(running)
    sides = bytes(0 if s.side is Side.LEFT else 1 for s in proof.steps)
    siblings = b"".join(s.sibling for s in proof.steps)
    return Digest(kernels.kernel(kernel).fold(leaf_digest, sides, siblings))


def _steps_index_consistent(proof: MerkleProof) -> bool:
    # Flat proofs carry redundant per-step indexes; reject combinations the
    # construction can never produce (a left sibling never has an index >=
    # the running node, equality only occurs for duplicates on the right).
    running = proof.leaf_index
    if not isinstance(running, int) or running < 1 or running % 2 == 0:
        return False
    for t, step in enumerate(proof.steps):
        if step.side is Side.LEFT:
            if step.sibling_index >= running:
                return False
            running = step.sibling_index + (1 << t)
        else:
            if step.sibling_index < running:
                return False
            running = running + (1 << t)
    return True


def verify_proof(data: bytes, proof: MerkleProof, onchain_root: bytes,
                 hasher: Hasher | None = None, *, kernel: str = "auto") -> bool:
    """Check a payload against a proof and an anchored root digest.

    A mismatch returns False rather than raising. Structurally inconsistent
    flat proofs also return False; multi-level proofs span stacked index
    spaces, so only the recomputed root is checked for them.
    """
    if proof.multi_index is None and not _steps_index_consistent(proof):
        return False
    h = hasher if hasher is not None else sha256
    digest = h(bytes(data))
    return compute_root(digest, proof, hasher, kernel=kernel) == bytes(onchain_root)


# --- canonical JSON serialization -----------------------------------------

def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("ascii")


def _parse_json(data: bytes | str, what: str):
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"{what}: parse error at position {exc.pos}: {exc.msg}") from None


def tree_to_obj(tree: IndexedMerkleTree) -> dict:
    def node_obj(pos: int) -> dict:
        left = tree._lefts[pos]
        right = tree._rights[pos]
        return {
            "index": tree._indexes[pos],
            "value": tree._values[pos * DIGEST_LEN : (pos + 1) * DIGEST_LEN].hex(),
            "duplicated": bool(tree._dups[pos]),
            "left": node_obj(left) if left >= 0 else None,
            "right": node_obj(right) if right >= 0 else None,
        }

    return {"leaf_count": tree.leaf_count, "root": node_obj(tree.root_pos)}


def serialize_tree(tree: IndexedMerkleTree) -> bytes:
    """Canonical JSON encoding; byte-identical across round-trips."""
    return _canonical_json(tree_to_obj(tree))


_NODE_KEYS = {"index", "value", "duplicated", "left", "right"}


def _collect_leaf_digests(node, path: str, out: list[bytes]) -> None:
    if not isinstance(node, dict) or set(node) != _NODE_KEYS:
        raise TreeFormatError(f"{path}: node must be an object with keys {sorted(_NODE_KEYS)}")
    if not isinstance(node["index"], int) or node["index"] < 1:
        raise TreeFormatError(f"{path}: index must be a positive integer")
    value = node["value"]
    if not isinstance(value, str) or len(value) != 2 * DIGEST_LEN or value != value.lower():
        raise TreeFormatError(f"{path}: value must be {2 * DIGEST_LEN} lowercase hex chars")
    try:
        bytes.fromhex(value)
    except ValueError:
        raise TreeFormatError(f"{path}: value is not valid hex") from None
    if not isinstance(node["duplicated"], bool):
        raise TreeFormatError(f"{path}: duplicated must be a boolean")
    left, right = node["left"], node["right"]
    if (left is None) != (right is None):
        raise TreeFormatError(f"{path}: children must both be present or both absent")
    if left is None:
        if not node["duplicated"]:
            out.append(bytes.fromhex(value))
        return
    _collect_leaf_digests(left, path + ".left", out)
    _collect_leaf_digests(right, path + ".right", out)


def _compare_node(tree: IndexedMerkleTree, pos: int, node: dict, path: str) -> None:
    if tree._indexes[pos] != node["index"]:
        raise TreeFormatError(
            f"{path}: index {node['index']} does not match the derived "
            f"indexing (expected {tree._indexes[pos]})"
        )
    expected = tree._values[pos * DIGEST_LEN : (pos + 1) * DIGEST_LEN].hex()
    if node["value"] != expected:
        raise TreeFormatError(f"{path}: value does not match recomputed hash")
    if bool(tree._dups[pos]) != node["duplicated"]:
        raise TreeFormatError(f"{path}: duplicated flag inconsistent with structure")
    left = tree._lefts[pos]
    if (left < 0) != (node["left"] is None):
        raise TreeFormatError(f"{path}: child layout inconsistent with leaf count")
    if left >= 0:
        _compare_node(tree, left, node["left"], path + ".left")
        _compare_node(tree, tree._rights[pos], node["right"], path + ".right")


def tree_from_obj(obj, what: str = "tree", *, kernel: str = "auto") -> IndexedMerkleTree:
    """Validate a parsed tree object and rebuild the tree it describes.

    The stored structure is checked against a full rebuild from its leaf
    digests, so any tampered value, index, flag or shape fails to load.
    """
    if not isinstance(obj, dict) or set(obj) != {"leaf_count", "root"}:
        raise TreeFormatError(f"{what}: top level must be an object with leaf_count and root")
    leaf_count = obj["leaf_count"]
    if not isinstance(leaf_count, int) or leaf_count < 1:
        raise TreeFormatError(f"{what}: leaf_count must be a positive integer")
    digests: list[bytes] = []
    _collect_leaf_digests(obj["root"], f"{what}: root", digests)
    if len(digests) != leaf_count:
        raise TreeFormatError(
            f"{what}: leaf_count is {leaf_count} but structure holds {len(digests)} leaves"
        )
    tree = build_tree_from_digests(digests, kernel=kernel)
    _compare_node(tree, tree.root_pos, obj["root"], f"{what}: root")
    return tree


def deserialize_tree(data: bytes | str, *, kernel: str = "auto") -> IndexedMerkleTree:
    """Load a serialized tree, re-deriving every invariant from the leaves."""
    return tree_from_obj(_parse_json(data, "tree"), "tree", kernel=kernel)


def proof_to_obj(proof: MerkleProof) -> dict:
    obj = {
        "leaf_index": proof.leaf_index,
        "steps": [
            {"side": step.side.value, "sibling": step.sibling.hex(), "sibling_index": step.sibling_index}
            for step in proof.steps
        ],
        "expected_root": proof.expected_root.hex(),
    }
    if proof.multi_index is not None:
        obj["multi_index"] = list(proof.multi_index)
    return obj


def serialize_proof(proof: MerkleProof) -> bytes:
    return _canonical_json(proof_to_obj(proof))


def proof_from_obj(obj) -> MerkleProof:
    if not isinstance(obj, dict):
        raise TreeFormatError("proof: top level must be an object")
    allowed = {"leaf_index", "steps", "expected_root", "multi_index"}
    if not {"leaf_index", "steps", "expected_root"} <= set(obj) or not set(obj) <= allowed:
        raise TreeFormatError("proof: expected leaf_index, steps, expected_root")
    leaf_index = obj["leaf_index"]
    if not isinstance(leaf_index, int) or leaf_index < 1 or leaf_index % 2 == 0:
        raise TreeFormatError("proof: leaf_index must be a positive odd integer")
    if not isinstance(obj["steps"], list):
        raise TreeFormatError("proof: steps must be a list")
    steps = []
    for t, step in enumerate(obj["steps"]):
        where = f"proof: step {t}"
        if not isinstance(step, dict) or set(step) != {"side", "sibling", "sibling_index"}:
            raise TreeFormatError(f"{where}: expected side, sibling, sibling_index")
        if step["side"] not in ("L", "R"):
            raise TreeFormatError(f"{where}: side must be 'L' or 'R'")
        if not isinstance(step["sibling_index"], int) or step["sibling_index"] < 1:
            raise TreeFormatError(f"{where}: sibling_index must be a positive integer")
        try:
            sibling = Digest.from_hex(step["sibling"])
        except (ValueError, TypeError):
            raise TreeFormatError(f"{where}: sibling must be 64 lowercase hex chars") from None
        steps.append(ProofStep(side=Side(step["side"]), sibling=sibling, sibling_index=step["sibling_index"]))
    try:
        root = Digest.from_hex(obj["expected_root"])
    except (ValueError, TypeError):
        raise TreeFormatError("proof: expected_root must be 64 lowercase hex chars") from None
    multi_index = None
    if "multi_index" in obj:
        mi = obj["multi_index"]
        if not isinstance(mi, list) or not all(isinstance(e, int) and e >= 1 for e in mi):
            raise TreeFormatError("proof: multi_index must be a list of positive integers")
        multi_index = tuple(mi)
    return MerkleProof(leaf_index=leaf_index, steps=tuple(steps), expected_root=root,
                       multi_index=multi_index)


def deserialize_proof(data: bytes | str) -> MerkleProof:
    return proof_from_obj(_parse_json(data, "proof"))
