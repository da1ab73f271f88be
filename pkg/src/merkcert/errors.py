"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class MerkcertError(Exception):
    """Base class for all toolkit errors."""


class EmptyDataError(MerkcertError):
    """Raised when a tree or batch is requested over zero data items."""


class UnknownLeafError(MerkcertError, KeyError):
    """Raised when a leaf index is not present in the tree."""


class NotALeafIndexError(MerkcertError, ValueError):
    """Raised when an index cannot belong to a leaf (leaves have odd indexes)."""


class TreeFormatError(MerkcertError, ValueError):
    """Raised when a serialized tree/proof fails parsing or invariant checks."""


class CapacityError(MerkcertError):
    """Raised when appending a subtree would exceed a fixed multi-level layout."""


class UnknownRefError(MerkcertError, KeyError):
    """Raised when a leaf reference does not resolve within a tree lineage."""


class DuplicateItemError(MerkcertError, ValueError):
    """Raised when a data item id is submitted twice to the same store."""


class EmptyBatchError(MerkcertError):
    """Raised when certification is triggered with nothing to certify."""


class TxNotFoundError(MerkcertError, KeyError):
    """Raised when a transaction id cannot be located on the anchor chain."""


class OversizeDataError(MerkcertError, ValueError):
    """Raised when transaction data exceeds the chain's size limit."""


class StoreError(MerkcertError):
    """Raised on off-chain store inconsistencies (missing files, bad state)."""
