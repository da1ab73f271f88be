"""Multi-level indexed Merkle trees.

A multi-level tree stacks indexed Merkle trees: the root digest of each
subtree becomes a leaf (verbatim, not re-hashed) of the tree one level
above, and nodes are addressed by vector indexes. A node of the z-th
subtree under some parent carries the entry ``2z + 1`` — the odd leaf
index its subtree root occupies in the parent tree.

Because subtrees are appended left to right and parent levels are derived
from subtree roots, a leaf's vector index assigned while an anchoring
transaction is in flight stays valid however many further subtrees are
appended after rejections.

Writers must be single-threaded per tree; ``snapshot()`` hands out an
independently readable clone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from merkcert.errors import (
    CapacityError,
    EmptyDataError,
    NotALeafIndexError,
    TreeFormatError,
    UnknownLeafError,
    UnknownRefError,
)
from merkcert.hashing import Digest
from merkcert.tree import (
    IndexedMerkleTree,
    MerkleProof,
    _canonical_json,
    _parse_json,
    build_tree_from_digests,
    extract_proof_instrumented,
    tree_from_obj,
    tree_to_obj,
)

__all__ = [
    "MultiIndex",
    "StableLeafRef",
    "MultiLevelTree",
    "assign_multi_index",
    "append_subtree",
    "extract_multilevel_proof",
    "extract_multilevel_proof_instrumented",
    "build_poa_tree",
    "serialize_mltree",
    "deserialize_mltree",
]


class MultiIndex(tuple):
    """Vector index of a node across tree levels; a level-l node has l+1 entries."""

    __slots__ = ()

    def __new__(cls, entries: Iterable[int]) -> "MultiIndex":
        entries = tuple(entries)
        if not entries:
            raise ValueError("multi-index needs at least one entry")
        for e in entries:
            if not isinstance(e, int) or isinstance(e, bool) or e < 1:
                raise ValueError("multi-index entries must be positive integers")
        return super().__new__(cls, entries)

    @property
    def level(self) -> int:
        return len(self) - 1

    def __repr__(self) -> str:
        return f"MultiIndex({list(self)})"


def assign_multi_index(subtree_number: int, local_index: int,
                       parent_prefix: Sequence[int] = ()) -> MultiIndex:
    """Vector index of node ``local_index`` inside subtree number ``subtree_number``.

    Subtree numbers are 0-based; the z-th subtree contributes the entry
    ``2z + 1``. Deeper layouts prefix the entries of the enclosing levels.
    """
    if subtree_number < 0:
        raise ValueError("subtree number must be non-negative")
    if local_index < 1:
        raise ValueError("local node index must be positive")
    return MultiIndex((*parent_prefix, 2 * subtree_number + 1, local_index))


@dataclass(frozen=True, slots=True)
class StableLeafRef:
    """Durable pointer to one certified leaf; survives appends and retries."""

    multi_index: MultiIndex
    data_digest: Digest
    assigned_at: float

    def to_obj(self) -> dict:
        return {
            "multi_index": list(self.multi_index),
            "data_digest": self.data_digest.hex(),
            "assigned_at": self.assigned_at,
        }

    @classmethod
    def from_obj(cls, obj) -> "StableLeafRef":
        if not isinstance(obj, dict) or set(obj) != {"multi_index", "data_digest", "assigned_at"}:
            raise TreeFormatError("leaf ref: expected multi_index, data_digest, assigned_at")
        if not isinstance(obj["assigned_at"], (int, float)) or isinstance(obj["assigned_at"], bool):
            raise TreeFormatError("leaf ref: assigned_at must be a number")
        try:
            mi = MultiIndex(obj["multi_index"])
            digest = Digest.from_hex(obj["data_digest"])
        except (ValueError, TypeError) as exc:
            raise TreeFormatError(f"leaf ref: {exc}") from None
        return cls(multi_index=mi, data_digest=digest, assigned_at=float(obj["assigned_at"]))


class MultiLevelTree:
    """A fixed-depth stack of indexed Merkle trees.

    ``levels`` is the configured number of levels k; appended subtrees live
    at level k-1 and every level above is re-derived eagerly from its
    children's root digests. ``capacity``, when set, bounds how many
    subtrees any parent slot may receive.
    """

    def __init__(self, levels: int = 2, capacity: int | None = None):
        if not isinstance(levels, int) or levels < 2:
            raise ValueError("a multi-level tree needs at least 2 levels")
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive when set")
        self.levels = levels
        self.capacity = capacity
        self._trees: dict[tuple[int, ...], IndexedMerkleTree] = {}

    @property
    def top(self) -> IndexedMerkleTree | None:
        return self._trees.get(())

    @property
    def root_value(self) -> Digest:
        top = self.top
        if top is None:
            raise EmptyDataError("multi-level tree is empty")
        return top.root_value

    def tree_at(self, prefix: Sequence[int]) -> IndexedMerkleTree:
        try:
            return self._trees[tuple(prefix)]
        except KeyError:
            raise UnknownRefError(f"no subtree at prefix {list(prefix)}") from None

    def child_count(self, parent_prefix: Sequence[int] = ()) -> int:
        parent = tuple(parent_prefix)
        depth = len(parent) + 1
        return sum(1 for k in self._trees if len(k) == depth and k[: len(parent)] == parent)

    def subtree_prefixes(self) -> list[tuple[int, ...]]:
        return sorted(k for k in self._trees if k)

    def leaf_digest(self, multi_index: Sequence[int]) -> Digest:
        mi = tuple(multi_index)
        if len(mi) != self.levels:
            raise UnknownRefError(
                f"multi-index has {len(mi)} entries; this tree addresses leaves with {self.levels}"
            )
        return self.tree_at(mi[:-1]).leaf_digest(mi[-1])

    def snapshot(self) -> "MultiLevelTree":
        """Cheap immutable-content clone safe to read while the original mutates."""
        clone = MultiLevelTree(levels=self.levels, capacity=self.capacity)
        clone._trees = dict(self._trees)
        return clone

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiLevelTree):
            return NotImplemented
        return self.levels == other.levels and self._trees == other._trees

    def __hash__(self) -> int:
        return hash((self.levels, frozenset(self._trees)))

    def __repr__(self) -> str:
        return f"MultiLevelTree(levels={self.levels}, subtrees={len(self._trees) - (1 if () in self._trees else 0)})"


def append_subtree(mlt: MultiLevelTree, subtree: IndexedMerkleTree,
                   under: Sequence[int] = ()) -> MultiLevelTree:
    """Append a constructed subtree as the next leaf under ``under``.

    The subtree's root digest becomes the next leaf of the parent-level
    tree, which is rebuilt together with every level above it. References
    issued against earlier subtrees keep resolving to the same digests.
    """
    under = tuple(under)
    if len(under) != mlt.levels - 2:
        raise ValueError(
            f"a {mlt.levels}-level tree appends subtrees under prefixes of "
            f"length {mlt.levels - 2}, got {len(under)}"
        )
    for d, entry in enumerate(under):
        if not isinstance(entry, int) or entry < 1 or entry % 2 == 0:
            raise ValueError("prefix entries must be odd positive integers")
        slot = (entry - 1) // 2
        existing = mlt.child_count(under[:d])
        if slot > existing:
            raise ValueError(
                f"prefix {list(under[: d + 1])} skips subtree slots (next free entry is {2 * existing + 1})"
            )
        if mlt.capacity is not None and slot >= mlt.capacity:
            raise CapacityError(f"level capacity {mlt.capacity} exceeded at prefix {list(under[: d + 1])}")
    z = mlt.child_count(under)
    if mlt.capacity is not None and z >= mlt.capacity:
        raise CapacityError(f"level capacity {mlt.capacity} exceeded under prefix {list(under)}")
    mlt._trees[under + (2 * z + 1,)] = subtree
    for d in range(len(under), -1, -1):
        parent = under[:d]
        roots = [
            bytes(mlt._trees[parent + (2 * i + 1,)].root_value)
            for i in range(mlt.child_count(parent))
        ]
        mlt._trees[parent] = build_tree_from_digests(roots)
    return mlt


def extract_multilevel_proof(mlt: MultiLevelTree, ref: StableLeafRef, *,
                             kernel: str = "auto") -> MerkleProof:
    """Proof spanning every level, from the referenced leaf up to the top root."""
    proof, _ = extract_multilevel_proof_instrumented(mlt, ref, kernel=kernel)
    return proof


def extract_multilevel_proof_instrumented(
    mlt: MultiLevelTree, ref: StableLeafRef, *, kernel: str = "auto"
) -> tuple[MerkleProof, list[int]]:
    """Like :func:`extract_multilevel_proof`, also reporting node visits per level."""
    mi = tuple(ref.multi_index)
    if len(mi) != mlt.levels:
        raise UnknownRefError(
            f"reference has {len(mi)} entries; this tree addresses leaves with {mlt.levels}"
        )
    prefix, local = mi[:-1], mi[-1]
    subtree = mlt.tree_at(prefix)
    try:
        stored = subtree.leaf_digest(local)
    except (UnknownLeafError, NotALeafIndexError):
        raise UnknownRefError(f"no leaf {local} under prefix {list(prefix)}") from None
    if stored != ref.data_digest:
        raise UnknownRefError("reference digest does not match the stored leaf")

    steps: list = []
    visits: list[int] = []
    level_proof, seen = extract_proof_instrumented(subtree, local, kernel=kernel)
    steps.extend(level_proof.steps)
    visits.append(seen)
    for d in range(len(prefix), 0, -1):
        parent = mlt.tree_at(prefix[: d - 1])
        level_proof, seen = extract_proof_instrumented(parent, prefix[d - 1], kernel=kernel)
        steps.extend(level_proof.steps)
        visits.append(seen)
    proof = MerkleProof(
        leaf_index=local,
        steps=tuple(steps),
        expected_root=mlt.root_value,
        multi_index=mi,
    )
    return proof, visits


def build_poa_tree(
    attractions: Sequence[Sequence[bytes]],
    failures_so_far: Sequence[Sequence[IndexedMerkleTree]] | None = None,
) -> MultiLevelTree:
    """Three-level layout certifying event attendance across attractions.

    Level 2 holds one subtree per (attraction, anchoring attempt) built
    over attendance digests, level 1 one tree per attraction over those
    subtree roots, level 0 the single top tree whose root gets anchored.
    An attraction with prior attempts but no new attendance receives a
    single-leaf placeholder carrying the previous attempt's root, keeping
    the attraction subtree balanced.
    """
    if len(attractions) == 0:
        raise EmptyDataError("no attractions to certify")
    if failures_so_far is None:
        failures = [[] for _ in attractions]
    else:
        failures = [list(f) for f in failures_so_far]
        if len(failures) != len(attractions):
            raise ValueError("failures_so_far must align with attractions")
    if all(len(a) == 0 for a in attractions) and all(len(f) == 0 for f in failures):
        raise EmptyDataError("no attendance data to certify")

    mlt = MultiLevelTree(levels=3)
    for i, (digests, prior) in enumerate(zip(attractions, failures)):
        attempts = list(prior)
        if len(digests) > 0:
            attempts.append(build_tree_from_digests([bytes(d) for d in digests]))
        elif attempts:
            # balancing placeholder: a single leaf holding the previous attempt's root
            attempts.append(build_tree_from_digests([bytes(attempts[-1].root_value)]))
        else:
            raise EmptyDataError(
                f"attraction {i + 1} has neither attendance data nor prior attempts"
            )
        for subtree in attempts:
            append_subtree(mlt, subtree, under=(2 * i + 1,))
    return mlt


# --- serialization ---------------------------------------------------------

def mltree_to_obj(mlt: MultiLevelTree) -> dict:
    top = mlt.top
    return {
        "levels": mlt.levels,
        "top": tree_to_obj(top) if top is not None else None,
        "subtrees": [
            {"prefix": list(prefix), "tree": tree_to_obj(mlt._trees[prefix])}
            for prefix in mlt.subtree_prefixes()
        ],
    }


def serialize_mltree(mlt: MultiLevelTree) -> bytes:
    return _canonical_json(mltree_to_obj(mlt))


def _tree_from_obj_checked(obj, what: str) -> IndexedMerkleTree:
    return tree_from_obj(obj, what)


def deserialize_mltree(data: bytes | str) -> MultiLevelTree:
    """Load a serialized multi-level tree, revalidating every level.

    Each stored tree is checked against a rebuild from its leaves, and
    every parent level must re-derive exactly from its children's roots.
    """
    obj = _parse_json(data, "multi-level tree")
    if not isinstance(obj, dict) or set(obj) != {"levels", "top", "subtrees"}:
        raise TreeFormatError("multi-level tree: expected levels, top, subtrees")
    levels = obj["levels"]
    if not isinstance(levels, int) or levels < 2:
        raise TreeFormatError("multi-level tree: levels must be an integer >= 2")
    if not isinstance(obj["subtrees"], list):
        raise TreeFormatError("multi-level tree: subtrees must be a list")

    trees: dict[tuple[int, ...], IndexedMerkleTree] = {}
    for ent in obj["subtrees"]:
        if not isinstance(ent, dict) or set(ent) != {"prefix", "tree"}:
            raise TreeFormatError("multi-level tree: each subtree needs prefix and tree")
        prefix_obj = ent["prefix"]
        if (
            not isinstance(prefix_obj, list)
            or not prefix_obj
            or not all(isinstance(e, int) and e >= 1 and e % 2 == 1 for e in prefix_obj)
        ):
            raise TreeFormatError("multi-level tree: prefixes must be non-empty lists of odd positive integers")
        prefix = tuple(prefix_obj)
        if len(prefix) > levels - 1:
            raise TreeFormatError(f"multi-level tree: prefix {prefix_obj} deeper than {levels} levels allow")
        if prefix in trees:
            raise TreeFormatError(f"multi-level tree: duplicate prefix {prefix_obj}")
        trees[prefix] = _tree_from_obj_checked(ent["tree"], f"subtree {prefix_obj}")

    if obj["top"] is None:
        if trees:
            raise TreeFormatError("multi-level tree: subtrees present but top tree missing")
    else:
        trees[()] = _tree_from_obj_checked(obj["top"], "top tree")
        if not any(len(k) == 1 for k in trees):
            raise TreeFormatError("multi-level tree: top tree present but no level-1 subtrees")

    mlt = MultiLevelTree(levels=levels)
    mlt._trees = trees
    for prefix in sorted(trees, key=len):
        children = mlt.child_count(prefix)
        if children:
            expected_entries = {prefix + (2 * i + 1,) for i in range(children)}
            actual = {k for k in trees if len(k) == len(prefix) + 1 and k[: len(prefix)] == prefix}
            if actual != expected_entries:
                raise TreeFormatError(
                    f"multi-level tree: children of prefix {list(prefix)} are not contiguous"
                )
            derived = build_tree_from_digests(
                [bytes(trees[prefix + (2 * i + 1,)].root_value) for i in range(children)]
            )
            if derived != trees[prefix]:
                raise TreeFormatError(
                    f"multi-level tree: tree at prefix {list(prefix)} does not derive from its children"
                )
        elif len(prefix) < levels - 1 and prefix:
            raise TreeFormatError(
                f"multi-level tree: intermediate prefix {list(prefix)} has no children"
            )
    return mlt
