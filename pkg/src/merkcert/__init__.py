"""merkcert: indexed Merkle tree data certification toolkit.

Builds indexed Merkle trees over batched data, anchors their roots to a
(simulated) public chain, survives transaction rejections via multi-level
trees with stable leaf indexes, and verifies certified records end to end.
"""

from merkcert.hashing import Digest, sha256
from merkcert.tree import (
    IndexedMerkleTree,
    MerkleProof,
    ProofStep,
    Side,
    TreeNode,
    build_tree,
    build_tree_from_digests,
    compute_root,
    deserialize_proof,
    deserialize_tree,
    extract_proof,
    parent_index,
    serialize_proof,
    serialize_tree,
    verify_proof,
)

__version__ = "0.1.0"

__all__ = [
    "Digest",
    "sha256",
    "Side",
    "ProofStep",
    "MerkleProof",
    "TreeNode",
    "IndexedMerkleTree",
    "parent_index",
    "build_tree",
    "build_tree_from_digests",
    "extract_proof",
    "compute_root",
    "verify_proof",
    "serialize_tree",
    "deserialize_tree",
    "serialize_proof",
    "deserialize_proof",
    "__version__",
]
