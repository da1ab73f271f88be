"""Certification pipeline: off-chain store, batching, anchoring, verification.

Data items are buffered off-chain and certified either one transaction per
item or batched under a Merkle root. In the batched mode each submission
reserves a leaf slot in the current attempt subtree of a two-level tree,
so the caller learns its stable vector index immediately; if the anchoring
transaction is refused, later submissions open the next attempt subtree
and one resubmission certifies old and new data under a single root.

Store layout (one directory per pipeline):

* ``store.json``    — pipeline configuration (certification approach)
* ``items.jsonl``   — append-only payload log
* ``records.jsonl`` — append-only record log; the last line per item wins
* ``trees/<batch>.attempt<k>.mltree.json`` — tree saved per anchor attempt

Intake is serialized behind a lock; certification must not run
concurrently with intake on the same store. Verification is read-only.
"""

from __future__ import annotations

import base64
import json
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from merkcert.anchor import AnchorClient, AnchorReceipt
from merkcert.errors import (
    DuplicateItemError,
    EmptyBatchError,
    StoreError,
    TreeFormatError,
    UnknownRefError,
)
from merkcert.hashing import Digest, sha256
from merkcert.multilevel import (
    MultiLevelTree,
    StableLeafRef,
    append_subtree,
    assign_multi_index,
    deserialize_mltree,
    extract_multilevel_proof,
    extract_multilevel_proof_instrumented,
    serialize_mltree,
)
from merkcert.tree import (
    MerkleProof,
    build_tree_from_digests,
    proof_from_obj,
    proof_to_obj,
    verify_proof,
)

__all__ = [
    "Approach",
    "Trigger",
    "RecordStatus",
    "DataItem",
    "CertificationRecord",
    "Batch",
    "CertificationStore",
    "submit",
    "submit_payload",
    "certify_single",
    "certify_batch",
    "verify_record",
    "resolve_proof",
    "resolve_proof_instrumented",
    "should_trigger",
]


class Approach(str, Enum):
    SINGLE = "single"
    MERKLE = "merkle"


class Trigger(str, Enum):
    TIME_BASED = "time"
    MANUAL = "manual"


class RecordStatus(str, Enum):
    PENDING = "pending"
    ANCHORED = "anchored"
    FAILED = "failed"


@dataclass(frozen=True, slots=True)
class DataItem:
    id: str
    payload: bytes
    received_at: float

    def __post_init__(self):
        if not self.id:
            raise ValueError("item id must be non-empty")
        if len(self.payload) == 0:
            raise ValueError("item payload must be non-empty")


@dataclass
class CertificationRecord:
    """Certification state of one item, enriched as anchoring progresses."""

    item_id: str
    approach: Approach
    digest: Digest
    tx_id: str = ""
    leaf_ref: StableLeafRef | None = None
    proof: MerkleProof | None = None
    anchored_root: Digest | None = None
    status: RecordStatus = RecordStatus.PENDING
    batch: int | None = None
    attempts: int = 0

    def to_obj(self) -> dict:
        return {
            "item_id": self.item_id,
            "approach": self.approach.value,
            "digest": self.digest.hex(),
            "tx_id": self.tx_id,
            "leaf_ref": self.leaf_ref.to_obj() if self.leaf_ref else None,
            "proof": proof_to_obj(self.proof) if self.proof else None,
            "anchored_root": self.anchored_root.hex() if self.anchored_root else None,
            "status": self.status.value,
            "batch": self.batch,
            "attempts": self.attempts,
        }

    @classmethod
    def from_obj(cls, obj) -> "CertificationRecord":
        try:
            return cls(
                item_id=obj["item_id"],
                approach=Approach(obj["approach"]),
                digest=Digest.from_hex(obj["digest"]),
                tx_id=obj["tx_id"],
                leaf_ref=StableLeafRef.from_obj(obj["leaf_ref"]) if obj["leaf_ref"] else None,
                proof=proof_from_obj(obj["proof"]) if obj["proof"] else None,
                anchored_root=Digest.from_hex(obj["anchored_root"]) if obj["anchored_root"] else None,
                status=RecordStatus(obj["status"]),
                batch=obj["batch"],
                attempts=obj["attempts"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeFormatError(f"record: {exc}") from None


@dataclass
class Batch:
    """Items covered by one eventually-anchored root, plus attempt bookkeeping."""

    items: list[str] = field(default_factory=list)
    trigger: Trigger = Trigger.MANUAL
    attempts: int = 0


_TREE_FILE_RE = re.compile(r"^batch(\d{4})\.attempt(\d+)\.mltree\.json$")


def _record_line(record: CertificationRecord) -> str:
    return json.dumps(record.to_obj(), sort_keys=True, separators=(",", ":"))


def _item_line(item: DataItem) -> str:
    return json.dumps(
        {
            "id": item.id,
            "payload_b64": base64.b64encode(item.payload).decode("ascii"),
            "received_at": item.received_at,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


class CertificationStore:
    """Directory-backed off-chain store for one certification pipeline."""

    MLT_LEVELS = 2

    def __init__(
        self,
        root: str | Path,
        approach: Approach | str | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.root = Path(root)
        self.clock = clock
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "trees").mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self.last_receipt: AnchorReceipt | None = None
        self.opened_at = clock()
        self.last_certify_at: float | None = None

        requested = Approach(approach) if approach is not None else None
        config_path = self.root / "store.json"
        if config_path.exists():
            try:
                config = json.loads(config_path.read_text())
                stored = Approach(config["approach"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise StoreError(f"unreadable store.json: {exc}") from None
            if requested is not None and requested is not stored:
                raise StoreError(
                    f"store was created with the {stored.value} approach; "
                    f"got {requested.value}"
                )
            self.approach = stored
        else:
            self.approach = requested if requested is not None else Approach.MERKLE
            config_path.write_text(
                json.dumps({"approach": self.approach.value, "version": 1}, sort_keys=True) + "\n"
            )

        self.items: dict[str, DataItem] = {}
        self.records: dict[str, CertificationRecord] = {}
        self._load_items()
        self._load_records()
        self._recover_batch_state()

    # --- persistence --------------------------------------------------------

    @property
    def items_path(self) -> Path:
        return self.root / "items.jsonl"

    @property
    def records_path(self) -> Path:
        return self.root / "records.jsonl"

    @property
    def trees_dir(self) -> Path:
        return self.root / "trees"

    def _load_items(self) -> None:
        if not self.items_path.exists():
            return
        for lineno, line in enumerate(self.items_path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                item = DataItem(
                    id=obj["id"],
                    payload=base64.b64decode(obj["payload_b64"]),
                    received_at=float(obj["received_at"]),
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise StoreError(f"items.jsonl line {lineno}: {exc}") from None
            self.items[item.id] = item

    def _load_records(self) -> None:
        if not self.records_path.exists():
            return
        for lineno, line in enumerate(self.records_path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = CertificationRecord.from_obj(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StoreError(f"records.jsonl line {lineno}: {exc}") from None
            # dict update keeps first-insertion (submission) order
            self.records[record.item_id] = record

    def _append_item(self, item: DataItem) -> None:
        with self.items_path.open("a", encoding="ascii") as fh:
            fh.write(_item_line(item) + "\n")

    def _append_record(self, record: CertificationRecord) -> None:
        with self.records_path.open("a", encoding="ascii") as fh:
            fh.write(_record_line(record) + "\n")

    def _tree_path(self, batch: int, attempt: int) -> Path:
        return self.trees_dir / f"batch{batch:04d}.attempt{attempt}.mltree.json"

    def _batch_tree_files(self, batch: int) -> list[tuple[int, Path]]:
        found = []
        for path in self.trees_dir.iterdir():
            match = _TREE_FILE_RE.match(path.name)
            if match and int(match.group(1)) == batch:
                found.append((int(match.group(2)), path))
        return sorted(found)

    def _recover_batch_state(self) -> None:
        merkle_batches = [
            r.batch for r in self.records.values()
            if r.approach is Approach.MERKLE and r.batch is not None
        ]
        current = max(merkle_batches, default=1)
        closed = any(
            r.batch == current and r.status is RecordStatus.ANCHORED
            for r in self.records.values()
            if r.approach is Approach.MERKLE
        )
        if closed:
            current += 1
        self.current_batch = current
        files = self._batch_tree_files(current)
        if files:
            self.batch_attempts = files[-1][0]
            try:
                self._mlt = deserialize_mltree(files[-1][1].read_bytes())
            except TreeFormatError as exc:
                raise StoreError(f"cannot load {files[-1][1].name}: {exc}") from None
        else:
            self.batch_attempts = 0
            self._mlt = MultiLevelTree(levels=self.MLT_LEVELS)

    # --- derived batch state --------------------------------------------------

    @property
    def subtree_number(self) -> int:
        """Attempt subtree receiving new submissions (0-based)."""
        return self._mlt.child_count(())

    def merkle_batch_records(self, batch: int) -> list[CertificationRecord]:
        return [
            r for r in self.records.values()
            if r.approach is Approach.MERKLE and r.batch == batch
        ]

    def new_pending_records(self) -> list[CertificationRecord]:
        """Pending records not yet covered by any attempt subtree."""
        first_entry = 2 * self.subtree_number + 1
        return [
            r for r in self.merkle_batch_records(self.current_batch)
            if r.status is RecordStatus.PENDING
            and r.leaf_ref is not None
            and r.leaf_ref.multi_index[0] == first_entry
        ]

    def covered_pending_records(self) -> list[CertificationRecord]:
        """Records already inside the retained tree, awaiting a successful anchor."""
        first_entry = 2 * self.subtree_number + 1
        return [
            r for r in self.merkle_batch_records(self.current_batch)
            if r.status is RecordStatus.PENDING
            and r.leaf_ref is not None
            and r.leaf_ref.multi_index[0] < first_entry
        ]

    def pending_records(self) -> list[CertificationRecord]:
        return [r for r in self.records.values() if r.status is not RecordStatus.ANCHORED]

    def get_record(self, item_id: str) -> CertificationRecord:
        try:
            return self.records[item_id]
        except KeyError:
            raise UnknownRefError(f"no record for item {item_id!r}") from None


def submit(store: CertificationStore, item: DataItem) -> StableLeafRef | None:
    """Persist an item; in the batched mode, reserve its leaf and return the ref.

    The k-th item of an attempt subtree receives local leaf index 2k-1;
    after a refused anchor attempt the subtree number advances, so the
    first entry of newly issued vector indexes moves to the next odd value.
    """
    with store._lock:
        if item.id in store.items:
            raise DuplicateItemError(f"item id {item.id!r} already submitted")
        digest = Digest(sha256(item.payload))
        if store.approach is Approach.MERKLE:
            ordinal = len(store.new_pending_records()) + 1
            ref = StableLeafRef(
                multi_index=assign_multi_index(store.subtree_number, 2 * ordinal - 1),
                data_digest=digest,
                assigned_at=store.clock(),
            )
            record = CertificationRecord(
                item_id=item.id,
                approach=Approach.MERKLE,
                digest=digest,
                leaf_ref=ref,
                batch=store.current_batch,
            )
        else:
            ref = None
            record = CertificationRecord(
                item_id=item.id, approach=Approach.SINGLE, digest=digest
            )
        store.items[item.id] = item
        store.records[item.id] = record
        store._append_item(item)
        store._append_record(record)
        return ref


def submit_payload(store: CertificationStore, item_id: str, payload: bytes) -> StableLeafRef | None:
    return submit(store, DataItem(id=item_id, payload=payload, received_at=store.clock()))


def certify_single(
    store: CertificationStore,
    item_id: str,
    anchor: AnchorClient,
    gas_price: float = 1.0,
) -> CertificationRecord:
    """Anchor one item's digest in its own transaction."""
    record = store.get_record(item_id)
    if record.approach is not Approach.SINGLE:
        raise StoreError(f"item {item_id!r} belongs to a {record.approach.value}-approach store")
    if record.status is RecordStatus.ANCHORED:
        raise StoreError(f"item {item_id!r} is already anchored")
    receipt = anchor.submit_tx(bytes(record.digest), gas_price)
    store.last_receipt = receipt
    record.attempts += 1
    if receipt.accepted:
        record.status = RecordStatus.ANCHORED
        record.tx_id = receipt.tx_id
    else:
        record.status = RecordStatus.FAILED
    store._append_record(record)
    store.last_certify_at = store.clock()
    return record


def certify_batch(
    store: CertificationStore,
    trigger: Trigger | str,
    anchor: AnchorClient,
    gas_price: float = 1.0,
    *,
    allow_empty_retry: bool = False,
    materialize_proofs: bool = False,
) -> list[CertificationRecord]:
    """Extend the batch tree over pending items and anchor its top root.

    One transaction covers everything submitted so far in this batch. On
    refusal the tree is retained: future submissions open a fresh attempt
    subtree and the next call certifies old and new data under one updated
    root. ``allow_empty_retry`` permits resubmitting an unchanged root
    when nothing new arrived since the refusal.
    """
    if store.approach is not Approach.MERKLE:
        raise StoreError("certify_batch requires a merkle-approach store")
    trigger = Trigger(trigger)
    new = store.new_pending_records()
    covered = store.covered_pending_records()
    if not new and not (covered and allow_empty_retry):
        raise EmptyBatchError("no pending items to certify")

    if new:
        expected_first = 2 * store.subtree_number + 1
        for position, record in enumerate(new, start=1):
            expected = (expected_first, 2 * position - 1)
            if tuple(record.leaf_ref.multi_index) != expected:
                raise StoreError(
                    f"leaf reservation for {record.item_id!r} is {list(record.leaf_ref.multi_index)}, "
                    f"expected {list(expected)}"
                )
        subtree = build_tree_from_digests([bytes(r.digest) for r in new])
        append_subtree(store._mlt, subtree, under=())

    store.batch_attempts += 1
    tree_path = store._tree_path(store.current_batch, store.batch_attempts)
    tree_path.write_bytes(serialize_mltree(store._mlt))

    root = store._mlt.root_value
    receipt = anchor.submit_tx(bytes(root), gas_price)
    store.last_receipt = receipt
    store.last_certify_at = store.clock()

    batch_records = covered + new
    if receipt.accepted:
        snapshot = store._mlt
        for record in batch_records:
            record.status = RecordStatus.ANCHORED
            record.tx_id = receipt.tx_id
            record.anchored_root = root
            record.attempts = store.batch_attempts
            if materialize_proofs:
                record.proof = extract_multilevel_proof(snapshot, record.leaf_ref)
            store._append_record(record)
        store.current_batch += 1
        store.batch_attempts = 0
        store._mlt = MultiLevelTree(levels=store.MLT_LEVELS)
    else:
        for record in batch_records:
            record.attempts = store.batch_attempts
            store._append_record(record)
    return batch_records


def resolve_proof(store: CertificationStore, leaf_ref: StableLeafRef) -> MerkleProof:
    proof, _ = resolve_proof_instrumented(store, leaf_ref)
    return proof


def resolve_proof_instrumented(
    store: CertificationStore, leaf_ref: StableLeafRef
) -> tuple[MerkleProof, list[int]]:
    """Load the covering tree from disk and extract the proof by index.

    Also reports how many nodes the traversal visited per level (at most
    height+1 each). No leaf scanning takes place.
    """
    owner = None
    for record in store.records.values():
        if (
            record.leaf_ref is not None
            and tuple(record.leaf_ref.multi_index) == tuple(leaf_ref.multi_index)
            and record.leaf_ref.data_digest == leaf_ref.data_digest
        ):
            owner = record
            break
    if owner is None or owner.batch is None:
        raise UnknownRefError("leaf reference was not issued by this store")
    files = store._batch_tree_files(owner.batch)
    if not files:
        raise StoreError(f"no saved tree for batch {owner.batch}")
    try:
        mlt = deserialize_mltree(files[-1][1].read_bytes())
    except TreeFormatError as exc:
        raise StoreError(f"cannot load {files[-1][1].name}: {exc}") from None
    return extract_multilevel_proof_instrumented(mlt, leaf_ref)


def verify_record(store: CertificationStore, record: CertificationRecord, chain: AnchorClient) -> bool:
    """End-to-end check of an anchored record against the chain.

    Single records compare the recomputed payload digest with the
    transaction's data field; batched records recompute the root through
    the resolved proof and compare with the anchored root. A missing
    transaction raises, it is not a False verdict.
    """
    if record.status is not RecordStatus.ANCHORED:
        raise StoreError(f"record for {record.item_id!r} is not anchored")
    item = store.items.get(record.item_id)
    if item is None:
        raise StoreError(f"payload for {record.item_id!r} is missing from the store")
    tx = chain.get_tx(record.tx_id)
    if record.approach is Approach.SINGLE:
        return tx.data == sha256(item.payload)
    proof = record.proof
    if proof is None:
        if record.leaf_ref is None:
            raise StoreError(f"record for {record.item_id!r} has no leaf reference")
        proof = resolve_proof(store, record.leaf_ref)
    return verify_proof(item.payload, proof, tx.data)


def should_trigger(store: CertificationStore, interval: float, now: float | None = None) -> bool:
    """Time-based trigger: pending work exists and the interval has elapsed."""
    if interval < 0:
        raise ValueError("interval must be non-negative")
    if store.approach is Approach.MERKLE:
        has_work = bool(store.new_pending_records() or store.covered_pending_records())
    else:
        has_work = bool(store.pending_records())
    if not has_work:
        return False
    now = store.clock() if now is None else now
    reference = store.last_certify_at if store.last_certify_at is not None else store.opened_at
    return now - reference >= interval
