from __future__ import annotations

import pytest

from merkcert import kernels
from merkcert.errors import EmptyDataError, NotALeafIndexError, UnknownLeafError
from merkcert.hashing import CountingHasher, Digest, sha256
from merkcert.tree import (
    MerkleProof,
    Side,
    build_tree,
    build_tree_from_digests,
    compute_root,
    extract_proof,
    extract_proof_instrumented,
    parent_index,
    verify_proof,
)

from .conftest import make_items
from .oracles import oracle_proof_full_scan, oracle_root, oracle_root_from_items

ITEMS8 = [f"item-{k}".encode() for k in range(1, 9)]
ITEMS5 = [f"item-{k}".encode() for k in range(1, 6)]
# frozen from tests/oracles.py, independently of the package
ROOT8_HEX = "a3e4d92b3ce4baea5a6c988725059b78f6fe014b8ce8a4333ba44c8af562a307"
ROOT5_HEX = "1fb1de913040f46f6bc96738aa1b325e1516b46d09993fe1c204028361f9906a"

KERNELS = ["auto"] + (["native", "python"] if kernels.have_native() else ["python"])


def test_parent_index_worked_examples():
    assert parent_index(1, 0) == 2
    assert parent_index(2, 1) == 4
    assert parent_index(4, 2) == 8
    assert parent_index(9, 0) == 10


def test_parent_index_rejects_bad_inputs():
    with pytest.raises(ValueError):
        parent_index(0, 0)
    with pytest.raises(ValueError):
        parent_index(1, -1)


@pytest.mark.parametrize("kernel", KERNELS)
def test_eight_leaf_tree_matches_figure(kernel):
    tree = build_tree(ITEMS8, kernel=kernel)
    assert tree.leaf_count == 8
    assert tree.height == 3
    assert tree.node_count == 15
    assert tree.root_value.hex() == ROOT8_HEX

    def indexes(node):
        if node is None:
            return []
        return indexes(node.left) + [node.index] + indexes(node.right)

    # in-order walk gives 1..15; the root splits into 4 and 12
    assert indexes(tree.root) == list(range(1, 16))
    assert tree.root.index == 8
    assert tree.root.left.index == 4
    assert tree.root.right.index == 12
    assert tree.root.left.left.index == 2
    assert tree.root.left.right.index == 6
    assert tree.root.right.left.index == 10
    assert tree.root.right.right.index == 14
    assert [tree.root.right.right.left.index, tree.root.right.right.right.index] == [13, 15]
    assert not any(
        n.duplicated for n in [tree.root, tree.root.left, tree.root.right]
    )


def test_single_item_tree_is_one_hashed_node():
    tree = build_tree([b"d"])
    assert tree.leaf_count == 1
    assert tree.height == 0
    assert tree.node_count == 1
    assert tree.root.index == 1
    assert tree.root.value == sha256(b"d")
    assert tree.root.is_leaf() and not tree.root.duplicated


@pytest.mark.parametrize("kernel", KERNELS)
def test_five_leaf_tree_duplicates_match_figure(kernel):
    tree = build_tree(ITEMS5, kernel=kernel)
    assert tree.root_value.hex() == ROOT5_HEX
    root = tree.root
    assert root.index == 8
    assert root.left.index == 4 and root.right.index == 12

    # height 1: the replica of node 10 is childless and flagged
    dup10 = root.right.right
    assert dup10.index == 10 and dup10.duplicated and dup10.is_leaf()
    real10 = root.right.left
    assert real10.index == 10 and not real10.duplicated
    assert dup10.value == real10.value

    # height 0: leaf 9 replicated
    dup9 = real10.right
    assert dup9.index == 9 and dup9.duplicated and dup9.is_leaf()
    assert dup9.value == real10.left.value == sha256(ITEMS5[4])


def test_two_item_root_is_hash_of_child_digests():
    tree = build_tree([b"a", b"b"])
    assert tree.root_value == sha256(sha256(b"a") + sha256(b"b"))


def test_empty_input_rejected():
    with pytest.raises(EmptyDataError, match="no data to certify"):
        build_tree([])


@pytest.mark.parametrize("n", list(range(1, 65)))
def test_root_matches_pairwise_oracle(n):
    items = make_items(n, seed=1)
    assert bytes(build_tree(items).root_value) == oracle_root_from_items(items)


def test_leaves_carry_odd_indexes_left_to_right():
    tree = build_tree(make_items(12))
    assert list(tree.leaf_indexes()) == [2 * k - 1 for k in range(1, 13)]
    for k, item in enumerate(make_items(12), start=1):
        assert tree.leaf_digest(2 * k - 1) == sha256(item)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 64, 256, 1024])
def test_power_of_two_node_count_law(n):
    tree = build_tree(make_items(n, seed=2))
    assert tree.node_count == 2 * n - 1
    seen = [tree._indexes[i] for i in range(tree.node_count)]
    assert len(set(seen)) == len(seen)
    assert set(seen) <= set(range(1, 2 * n))


# --- proof extraction -------------------------------------------------------


def test_figure_proof_for_leaf_13():
    tree = build_tree(ITEMS8)
    proof = extract_proof(tree, 13)
    # root-to-leaf the collected siblings are 4, 10, 15 (sides L, L, R)
    assert [(s.side, s.sibling_index) for s in reversed(proof.steps)] == [
        (Side.LEFT, 4),
        (Side.LEFT, 10),
        (Side.RIGHT, 15),
    ]
    assert len(proof.steps) == tree.height
    assert proof.expected_root == tree.root_value


def test_two_leaf_proof_is_single_right_step():
    tree = build_tree([b"a", b"b"])
    proof = extract_proof(tree, 1)
    assert len(proof.steps) == 1
    step = proof.steps[0]
    assert step.side is Side.RIGHT
    assert step.sibling == sha256(b"b")
    assert step.sibling_index == 3


def test_five_leaf_proof_equals_full_scan_oracle():
    digests = [sha256(i) for i in ITEMS5]
    tree = build_tree(ITEMS5)
    proof = extract_proof(tree, 9)
    expected_steps, expected_root = oracle_proof_full_scan(digests, 9)
    got = [(s.side.value, bytes(s.sibling), s.sibling_index) for s in proof.steps]
    assert got == expected_steps
    assert bytes(tree.root_value) == expected_root


@pytest.mark.parametrize("n", list(range(1, 33)) + [57, 100])
def test_all_proofs_equal_full_scan_oracle(n):
    items = make_items(n, seed=3)
    digests = [sha256(i) for i in items]
    tree = build_tree(items)
    for leaf_index in tree.leaf_indexes():
        proof = extract_proof(tree, leaf_index)
        expected_steps, _ = oracle_proof_full_scan(digests, leaf_index)
        got = [(s.side.value, bytes(s.sibling), s.sibling_index) for s in proof.steps]
        assert got == expected_steps


def test_extract_errors():
    tree = build_tree(ITEMS8)
    with pytest.raises(NotALeafIndexError, match="not a leaf index"):
        extract_proof(tree, 4)
    with pytest.raises(UnknownLeafError, match="unknown leaf"):
        extract_proof(tree, 17)
    with pytest.raises(UnknownLeafError):
        extract_proof(tree, -3)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 33, 64, 100, 157])
def test_traversal_visit_bound(n):
    import math

    tree = build_tree(make_items(n, seed=4))
    bound = (math.ceil(math.log2(n)) if n > 1 else 0) + 1
    for leaf_index in tree.leaf_indexes():
        proof, visits = extract_proof_instrumented(tree, leaf_index)
        assert visits <= bound
        assert len(proof.steps) == tree.height


# --- root computation and verification --------------------------------------


def test_compute_root_empty_steps_is_identity():
    digest = sha256(b"solo")
    proof = MerkleProof(leaf_index=1, steps=(), expected_root=Digest(digest))
    assert compute_root(digest, proof) == digest


def test_compute_root_recovers_root_for_leaf_13():
    tree = build_tree(ITEMS8)
    proof = extract_proof(tree, 13)
    assert compute_root(sha256(ITEMS8[6]), proof) == tree.root_value


def test_compute_root_detects_flipped_sibling_bit():
    tree = build_tree(ITEMS8)
    proof = extract_proof(tree, 13)
    for t in range(len(proof.steps)):
        mutated = bytearray(proof.steps[t].sibling)
        mutated[0] ^= 0x01
        steps = list(proof.steps)
        steps[t] = type(steps[t])(
            side=steps[t].side, sibling=Digest(bytes(mutated)), sibling_index=steps[t].sibling_index
        )
        bad = MerkleProof(13, tuple(steps), proof.expected_root)
        assert compute_root(sha256(ITEMS8[6]), bad) != tree.root_value


def test_verify_proof_roundtrip_and_tamper():
    tree = build_tree(ITEMS8)
    proof = extract_proof(tree, 13)
    assert verify_proof(ITEMS8[6], proof, tree.root_value) is True
    tampered = ITEMS8[6][:-1] + bytes([ITEMS8[6][-1] ^ 0xFF])
    assert verify_proof(tampered, proof, tree.root_value) is False


def test_verify_proof_with_wrong_leafs_data_fails():
    tree = build_tree(ITEMS8)
    proof13 = extract_proof(tree, 13)
    assert verify_proof(ITEMS8[4], proof13, tree.root_value) is False  # leaf 9's payload


def test_verify_proof_rejects_flipped_side_flags():
    # includes the duplicate-path case where the fold alone cannot tell
    for items in (ITEMS8, ITEMS5, make_items(3, seed=5)):
        tree = build_tree(items)
        for k, item in enumerate(items, start=1):
            proof = extract_proof(tree, 2 * k - 1)
            for t in range(len(proof.steps)):
                steps = list(proof.steps)
                old = steps[t]
                flipped = Side.LEFT if old.side is Side.RIGHT else Side.RIGHT
                steps[t] = type(old)(side=flipped, sibling=old.sibling, sibling_index=old.sibling_index)
                bad = MerkleProof(proof.leaf_index, tuple(steps), proof.expected_root)
                assert verify_proof(item, bad, tree.root_value) is False


# --- kernels and hashers -----------------------------------------------------


@pytest.mark.skipif(not kernels.have_native(), reason="native kernel not built")
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 21, 64, 157])
def test_native_and_python_kernels_agree(n):
    items = make_items(n, seed=6)
    native = build_tree(items, kernel="native")
    fallback = build_tree(items, kernel="python")
    assert native == fallback
    for leaf_index in native.leaf_indexes():
        assert extract_proof(native, leaf_index, kernel="native") == extract_proof(
            fallback, leaf_index, kernel="python"
        )


def test_counting_hasher_matches_reported_hash_count():
    for n in (8, 5, 13, 64):
        counter = CountingHasher()
        tree = build_tree(make_items(n, seed=7), hasher=counter)
        assert counter.count == tree.hash_count
        assert bytes(tree.root_value) == oracle_root_from_items(make_items(n, seed=7))


def test_custom_hasher_threads_through_verification():
    import hashlib

    def blake(data: bytes) -> bytes:
        return hashlib.blake2s(data).digest()

    items = make_items(6, seed=8)
    tree = build_tree(items, hasher=blake)
    proof = extract_proof(tree, 5)
    assert verify_proof(items[2], proof, tree.root_value, hasher=blake) is True
    assert verify_proof(items[2], proof, tree.root_value) is False  # sha256 root differs


def test_build_from_digests_uses_leaves_verbatim():
    digests = [sha256(i) for i in ITEMS8]
    tree = build_tree_from_digests(digests)
    assert bytes(tree.root_value) == oracle_root(digests)
    assert tree.hash_count == 7  # leaves were not hashed
    assert tree.leaf_digest(1) == digests[0]
