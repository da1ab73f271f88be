from __future__ import annotations

import json
import random

import pytest

from merkcert.anchor import SimulatedChain
from merkcert.errors import TreeFormatError
from merkcert.hashing import Digest, sha256
from merkcert.multilevel import (
    MultiLevelTree,
    StableLeafRef,
    append_subtree,
    deserialize_mltree,
    serialize_mltree,
)
from merkcert.pipeline import Approach, CertificationRecord, RecordStatus
from merkcert.tree import (
    build_tree,
    build_tree_from_digests,
    deserialize_proof,
    deserialize_tree,
    extract_proof,
    serialize_proof,
    serialize_tree,
)

from .conftest import make_items


def test_single_leaf_tree_layout():
    blob = serialize_tree(build_tree([b"d"]))
    obj = json.loads(blob)
    assert obj["leaf_count"] == 1
    node = obj["root"]
    assert node["index"] == 1
    assert node["left"] is None and node["right"] is None
    assert node["duplicated"] is False
    assert node["value"] == sha256(b"d").hex()
    assert len(node["value"]) == 64 and node["value"] == node["value"].lower()


def test_157_leaf_roundtrip_preserves_root_and_bytes():
    tree = build_tree(make_items(157, seed=10))
    blob = serialize_tree(tree)
    loaded = deserialize_tree(blob)
    assert loaded == tree
    assert loaded.root_value == tree.root_value
    assert serialize_tree(loaded) == blob


def test_tampered_node_value_fails_validation():
    tree = build_tree(make_items(9, seed=11))
    obj = json.loads(serialize_tree(tree))
    victim = obj["root"]["left"]["right"]
    victim["value"] = ("0" if victim["value"][0] != "0" else "1") + victim["value"][1:]
    with pytest.raises(TreeFormatError, match="does not match recomputed hash"):
        deserialize_tree(json.dumps(obj))


def test_tampered_leaf_value_detected_at_parent():
    tree = build_tree(make_items(4, seed=12))
    obj = json.loads(serialize_tree(tree))
    leaf = obj["root"]["left"]["left"]
    leaf["value"] = sha256(b"swapped payload").hex()
    with pytest.raises(TreeFormatError):
        deserialize_tree(json.dumps(obj))


def test_tampered_index_and_flag_detected():
    tree = build_tree(make_items(6, seed=13))
    obj = json.loads(serialize_tree(tree))
    obj["root"]["left"]["index"] = 5
    with pytest.raises(TreeFormatError, match="index"):
        deserialize_tree(json.dumps(obj))

    obj = json.loads(serialize_tree(tree))
    obj["root"]["left"]["duplicated"] = True
    with pytest.raises(TreeFormatError):
        deserialize_tree(json.dumps(obj))


def test_wrong_leaf_count_detected():
    tree = build_tree(make_items(5, seed=14))
    obj = json.loads(serialize_tree(tree))
    obj["leaf_count"] = 6
    with pytest.raises(TreeFormatError, match="leaf_count"):
        deserialize_tree(json.dumps(obj))


def test_malformed_json_reports_position():
    blob = serialize_tree(build_tree([b"x"]))
    with pytest.raises(TreeFormatError, match=r"parse error at position \d+"):
        deserialize_tree(blob[:-5])  # unterminated document
    with pytest.raises(TreeFormatError, match=r"parse error at position \d+"):
        deserialize_tree(blob.replace(b'"leaf_count":1', b'"leaf_count":'))


def test_one_sided_child_rejected():
    tree = build_tree(make_items(2, seed=15))
    obj = json.loads(serialize_tree(tree))
    obj["root"]["right"] = None
    with pytest.raises(TreeFormatError, match="both"):
        deserialize_tree(json.dumps(obj))


# --- proofs ------------------------------------------------------------------


def test_proof_roundtrip_bytes_identical():
    tree = build_tree(make_items(13, seed=16))
    for leaf_index in (1, 7, 25):
        proof = extract_proof(tree, leaf_index)
        blob = serialize_proof(proof)
        loaded = deserialize_proof(blob)
        assert loaded == proof
        assert serialize_proof(loaded) == blob


def test_proof_side_and_hex_validation():
    tree = build_tree(make_items(4, seed=17))
    obj = json.loads(serialize_proof(extract_proof(tree, 3)))
    bad = json.loads(json.dumps(obj))
    bad["steps"][0]["side"] = "X"
    with pytest.raises(TreeFormatError, match="side"):
        deserialize_proof(json.dumps(bad))
    bad = json.loads(json.dumps(obj))
    bad["steps"][1]["sibling"] = "zz" * 32
    with pytest.raises(TreeFormatError, match="sibling"):
        deserialize_proof(json.dumps(bad))
    bad = json.loads(json.dumps(obj))
    bad["leaf_index"] = 4
    with pytest.raises(TreeFormatError, match="leaf_index"):
        deserialize_proof(json.dumps(bad))


def test_multilevel_proof_roundtrips_with_multi_index():
    mlt = MultiLevelTree(levels=2)
    append_subtree(mlt, build_tree(make_items(4, seed=18)))
    append_subtree(mlt, build_tree(make_items(4, seed=19)))
    from merkcert.multilevel import extract_multilevel_proof

    ref = StableLeafRef(
        multi_index=__import__("merkcert.multilevel", fromlist=["MultiIndex"]).MultiIndex((3, 5)),
        data_digest=mlt.tree_at((3,)).leaf_digest(5),
        assigned_at=0.0,
    )
    proof = extract_multilevel_proof(mlt, ref)
    blob = serialize_proof(proof)
    loaded = deserialize_proof(blob)
    assert loaded == proof
    assert loaded.multi_index == (3, 5)
    assert json.loads(blob)["multi_index"] == [3, 5]


# --- multi-level trees ---------------------------------------------------------


def _sample_mltree(seed: int) -> MultiLevelTree:
    rng = random.Random(seed)
    mlt = MultiLevelTree(levels=2)
    for s in range(rng.randint(1, 4)):
        append_subtree(mlt, build_tree(make_items(rng.randint(1, 9), seed=seed * 31 + s)))
    return mlt


def test_mltree_roundtrip_bytes_identical():
    for seed in range(6):
        mlt = _sample_mltree(seed)
        blob = serialize_mltree(mlt)
        loaded = deserialize_mltree(blob)
        assert loaded == mlt
        assert serialize_mltree(loaded) == blob


def test_mltree_parent_derivation_checked():
    mlt = _sample_mltree(7)
    obj = json.loads(serialize_mltree(mlt))
    # swap in a top tree built over the wrong digests
    wrong = build_tree_from_digests([sha256(b"not the subtree root")] * max(1, len(obj["subtrees"])))
    from merkcert.tree import tree_to_obj

    obj["top"] = tree_to_obj(wrong)
    with pytest.raises(TreeFormatError, match="derive"):
        deserialize_mltree(json.dumps(obj))


def test_mltree_rejects_gapped_prefixes():
    mlt = MultiLevelTree(levels=2)
    append_subtree(mlt, build_tree(make_items(2, seed=20)))
    obj = json.loads(serialize_mltree(mlt))
    obj["subtrees"][0]["prefix"] = [3]
    with pytest.raises(TreeFormatError, match="contiguous"):
        deserialize_mltree(json.dumps(obj))


def test_empty_mltree_roundtrip():
    mlt = MultiLevelTree(levels=2)
    blob = serialize_mltree(mlt)
    assert json.loads(blob)["top"] is None
    loaded = deserialize_mltree(blob)
    assert loaded == mlt


# --- records and chain state ----------------------------------------------------


def test_record_roundtrip_bytes_identical():
    tree = build_tree(make_items(4, seed=21))
    proof = extract_proof(tree, 3)
    from merkcert.multilevel import MultiIndex

    record = CertificationRecord(
        item_id="abc",
        approach=Approach.MERKLE,
        digest=Digest(sha256(b"payload")),
        tx_id="f" * 64,
        leaf_ref=StableLeafRef(MultiIndex((1, 3)), Digest(sha256(b"payload")), 12.5),
        proof=proof,
        anchored_root=tree.root_value,
        status=RecordStatus.ANCHORED,
        batch=1,
        attempts=2,
    )
    blob = json.dumps(record.to_obj(), sort_keys=True, separators=(",", ":"))
    loaded = CertificationRecord.from_obj(json.loads(blob))
    assert loaded == record
    assert json.dumps(loaded.to_obj(), sort_keys=True, separators=(",", ":")) == blob


def test_chain_state_roundtrip(tmp_path):
    chain = SimulatedChain(seed=42, extra_failure_rate=0.25, min_gas_price=[(0, 1.0), (3, 2.0)])
    for i in range(12):
        chain.submit_tx(sha256(bytes([i])), gas_price=1.5)
    path = tmp_path / "chain.json"
    chain.save(path)
    loaded = SimulatedChain.load(path)
    assert loaded.to_json() == chain.to_json()
    assert loaded.submissions == chain.submissions
    assert loaded.accepted_count == chain.accepted_count
    # continued use stays deterministic across the save/load boundary
    a = chain.submit_tx(b"after", 5.0)
    b = loaded.submit_tx(b"after", 5.0)
    assert a == b
