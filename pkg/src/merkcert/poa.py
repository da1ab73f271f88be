"""Attendance-certification scenario: naive per-attraction trees vs one
multi-level tree.

Simulates an attractions manager whose anchoring transactions get refused.
In the naive mode every refusal strands a tree that must be re-forwarded
alongside a new tree for late attendants, so each attraction eventually
pays for 1 + F_i accepted transactions. The multi-level mode folds every
attempt subtree under one top root and pays for exactly one, whatever the
refusal count. Refused submissions never enter a block and cost nothing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from merkcert.anchor import SimulatedChain
from merkcert.costs import poa_price
from merkcert.hashing import Digest
from merkcert.multilevel import MultiLevelTree, build_poa_tree
from merkcert.tree import build_tree_from_digests

__all__ = ["PoaSimResult", "simulate_poa"]

_OK_GAS = 1.0
_LOW_GAS = 0.0  # below any scheduled minimum, guaranteeing refusal


@dataclass(frozen=True, slots=True)
class PoaSimResult:
    attractions: int
    failures: tuple[int, ...]
    price_per_tx: float
    naive_accepted: int
    naive_rejected: int
    naive_spend: float
    multilevel_accepted: int
    multilevel_rejected: int
    multilevel_spend: float
    naive_formula: float
    multilevel_formula: float
    final_root: Digest

    def to_obj(self) -> dict:
        return {
            "attractions": self.attractions,
            "failures": list(self.failures),
            "price_per_tx": self.price_per_tx,
            "naive": {
                "accepted": self.naive_accepted,
                "rejected": self.naive_rejected,
                "spend": self.naive_spend,
                "formula": self.naive_formula,
            },
            "multilevel": {
                "accepted": self.multilevel_accepted,
                "rejected": self.multilevel_rejected,
                "spend": self.multilevel_spend,
                "formula": self.multilevel_formula,
            },
            "final_root": self.final_root.hex(),
        }


def _attendants(seed: int, attraction: int, window: int, count: int) -> list[bytes]:
    return [
        hashlib.sha256(f"poa:{seed}:attraction{attraction}:window{window}:guest{g}".encode()).digest()
        for g in range(count)
    ]


def simulate_poa(
    n_attractions: int = 2,
    failures: tuple[int, ...] = (1, 1),
    price_per_tx: float = 0.6,
    seed: int = 7,
    attendants_per_window: int = 3,
) -> PoaSimResult:
    """Replay both certification strategies on seeded chains and count spend.

    Spend is measured from the chains themselves: accepted transactions
    times the per-transaction price. Attendance digests and refusal points
    are derived from the seed, so runs replay identically.
    """
    failures = tuple(failures)
    if len(failures) != n_attractions:
        raise ValueError("failures must list one count per attraction")
    if any(f < 0 for f in failures):
        raise ValueError("failure counts must be non-negative")
    if n_attractions < 1:
        raise ValueError("at least one attraction is required")

    # per attraction: one attendance window per attempt (F_i failures + final)
    windows = [
        [_attendants(seed, i, j, attendants_per_window) for j in range(failures[i] + 1)]
        for i in range(n_attractions)
    ]

    # naive: every refusal strands a tree; each tree needs its own accepted tx
    naive_chain = SimulatedChain(seed=seed, min_gas_price=_OK_GAS, extra_failure_rate=0.0)
    for i in range(n_attractions):
        trees = [build_tree_from_digests(window) for window in windows[i]]
        for j in range(failures[i]):
            naive_chain.submit_tx(bytes(trees[j].root_value), _LOW_GAS)  # refused attempt
        for tree in trees:
            receipt = naive_chain.submit_tx(bytes(tree.root_value), _OK_GAS)
            assert receipt.accepted
    naive_accepted = naive_chain.accepted_count
    naive_rejected = naive_chain.submissions - naive_accepted

    # multi-level: one combined tree, extended across refused attempts
    ml_chain = SimulatedChain(seed=seed, min_gas_price=_OK_GAS, extra_failure_rate=0.0)
    prior: list[list] = [[] for _ in range(n_attractions)]
    total_attempts = max(failures) + 1
    mlt: MultiLevelTree | None = None
    for attempt in range(total_attempts):
        new_data = [
            windows[i][attempt] if attempt <= failures[i] else []
            for i in range(n_attractions)
        ]
        mlt = build_poa_tree(new_data, prior)
        last = attempt == total_attempts - 1
        receipt = ml_chain.submit_tx(bytes(mlt.root_value), _OK_GAS if last else _LOW_GAS)
        if not receipt.accepted:
            prior = [
                [mlt.tree_at((2 * i + 1, 2 * j + 1)) for j in range(mlt.child_count((2 * i + 1,)))]
                for i in range(n_attractions)
            ]
    assert mlt is not None
    ml_accepted = ml_chain.accepted_count
    ml_rejected = ml_chain.submissions - ml_accepted

    return PoaSimResult(
        attractions=n_attractions,
        failures=failures,
        price_per_tx=price_per_tx,
        naive_accepted=naive_accepted,
        naive_rejected=naive_rejected,
        naive_spend=naive_accepted * price_per_tx,
        multilevel_accepted=ml_accepted,
        multilevel_rejected=ml_rejected,
        multilevel_spend=ml_accepted * price_per_tx,
        naive_formula=poa_price(price_per_tx, failures, multilevel=False),
        multilevel_formula=poa_price(price_per_tx, failures, multilevel=True),
        final_root=mlt.root_value,
    )
