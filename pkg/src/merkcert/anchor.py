"""Anchoring contract and a deterministic simulated public chain.

The pipeline talks to anything exposing ``submit_tx``/``get_tx``; a
real-chain adapter would plug in here. :class:`SimulatedChain` models the
two refusal causes a client faces — an insufficient gas price against a
(possibly time-varying) network minimum, and congestion — while staying
fully deterministic: the same seed, schedule and call sequence always
produce the same receipts, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from merkcert.errors import OversizeDataError, TreeFormatError, TxNotFoundError

__all__ = [
    "TxView",
    "AnchorReceipt",
    "AnchorClient",
    "GasSchedule",
    "SimulatedChain",
]


@dataclass(frozen=True, slots=True)
class TxView:
    data: bytes
    block_time: float


@dataclass(frozen=True, slots=True)
class AnchorReceipt:
    """Outcome of one transaction submission; rejected receipts carry no tx id."""

    tx_id: str
    accepted: bool
    block_time: float
    gas_price_paid: float


class AnchorClient(Protocol):
    def submit_tx(self, data: bytes, gas_price: float) -> AnchorReceipt: ...

    def get_tx(self, tx_id: str) -> TxView: ...


class GasSchedule:
    """Piecewise-constant minimum gas price, indexed by submission ordinal."""

    def __init__(self, steps: Sequence[tuple[int, float]] | float = 1.0):
        if isinstance(steps, (int, float)):
            steps = [(0, float(steps))]
        steps = [(int(o), float(p)) for o, p in steps]
        if not steps or steps[0][0] != 0:
            raise ValueError("gas schedule must start at submission 0")
        ordinals = [o for o, _ in steps]
        if ordinals != sorted(set(ordinals)):
            raise ValueError("gas schedule ordinals must be strictly increasing")
        if any(p < 0 for _, p in steps):
            raise ValueError("gas prices must be non-negative")
        self._ordinals = ordinals
        self._prices = [p for _, p in steps]

    def price_at(self, ordinal: int) -> float:
        return self._prices[bisect_right(self._ordinals, ordinal) - 1]

    @property
    def steps(self) -> list[tuple[int, float]]:
        return list(zip(self._ordinals, self._prices))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GasSchedule):
            return NotImplemented
        return self.steps == other.steps

    def __repr__(self) -> str:
        return f"GasSchedule({self.steps})"


class SimulatedChain:
    """In-memory public chain with seeded rejection behavior.

    A submission is refused when its gas price is below the scheduled
    minimum, or when the seeded congestion draw for that submission fires.
    Accepted transactions enter an immutable ledger with monotonically
    increasing block times.
    """

    def __init__(
        self,
        seed: int = 0,
        min_gas_price: float | GasSchedule | Sequence[tuple[int, float]] = 1.0,
        extra_failure_rate: float = 0.1,
        max_data_len: int = 1024,
        genesis_time: float = 1_700_000_000.0,
        block_interval: float = 12.0,
    ):
        if not 0.0 <= extra_failure_rate <= 1.0:
            raise ValueError("extra_failure_rate must lie in [0, 1]")
        if max_data_len < 1:
            raise ValueError("max_data_len must be positive")
        self.seed = int(seed)
        self.schedule = min_gas_price if isinstance(min_gas_price, GasSchedule) else GasSchedule(min_gas_price)
        self.extra_failure_rate = float(extra_failure_rate)
        self.max_data_len = int(max_data_len)
        self.genesis_time = float(genesis_time)
        self.block_interval = float(block_interval)
        self.submissions = 0
        self._ledger: dict[str, TxView] = {}
        self._order: list[str] = []

    @property
    def accepted_count(self) -> int:
        return len(self._ledger)

    def _congestion_fires(self, ordinal: int) -> bool:
        # hash-derived Bernoulli stream: replayable and persistence-friendly
        raw = hashlib.sha256(f"chain:{self.seed}:congestion:{ordinal}".encode()).digest()
        draw = int.from_bytes(raw[:8], "big") / 2**64
        return draw < self.extra_failure_rate

    def submit_tx(self, data: bytes, gas_price: float) -> AnchorReceipt:
        data = bytes(data)
        if len(data) > self.max_data_len:
            raise OversizeDataError(
                f"transaction data of {len(data)} bytes exceeds the {self.max_data_len}-byte limit"
            )
        ordinal = self.submissions
        self.submissions += 1
        refused = gas_price < self.schedule.price_at(ordinal) or self._congestion_fires(ordinal)
        if refused:
            now = self.genesis_time + self.block_interval * self.accepted_count
            return AnchorReceipt(tx_id="", accepted=False, block_time=now, gas_price_paid=gas_price)
        tx_id = hashlib.sha256(f"tx:{self.seed}:{ordinal}:".encode() + data).hexdigest()
        block_time = self.genesis_time + self.block_interval * (self.accepted_count + 1)
        self._ledger[tx_id] = TxView(data=data, block_time=block_time)
        self._order.append(tx_id)
        return AnchorReceipt(tx_id=tx_id, accepted=True, block_time=block_time, gas_price_paid=gas_price)

    def get_tx(self, tx_id: str) -> TxView:
        try:
            return self._ledger[tx_id]
        except KeyError:
            raise TxNotFoundError("transaction not located") from None

    def transactions(self) -> list[tuple[str, TxView]]:
        return [(tx_id, self._ledger[tx_id]) for tx_id in self._order]

    # --- persistence (.chain.json) -----------------------------------------

    def to_obj(self) -> dict:
        return {
            "seed": self.seed,
            "min_gas_schedule": [[o, p] for o, p in self.schedule.steps],
            "extra_failure_rate": self.extra_failure_rate,
            "max_data_len": self.max_data_len,
            "genesis_time": self.genesis_time,
            "block_interval": self.block_interval,
            "submissions": self.submissions,
            "ledger": [
                {"tx_id": tx_id, "data": view.data.hex(), "block_time": view.block_time}
                for tx_id, view in self.transactions()
            ],
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":")).encode("ascii")

    @classmethod
    def from_obj(cls, obj) -> "SimulatedChain":
        required = {
            "seed", "min_gas_schedule", "extra_failure_rate", "max_data_len",
            "genesis_time", "block_interval", "submissions", "ledger",
        }
        if not isinstance(obj, dict) or set(obj) != required:
            raise TreeFormatError("chain state: unexpected layout")
        chain = cls(
            seed=obj["seed"],
            min_gas_price=GasSchedule([(o, p) for o, p in obj["min_gas_schedule"]]),
            extra_failure_rate=obj["extra_failure_rate"],
            max_data_len=obj["max_data_len"],
            genesis_time=obj["genesis_time"],
            block_interval=obj["block_interval"],
        )
        chain.submissions = int(obj["submissions"])
        for ent in obj["ledger"]:
            chain._ledger[ent["tx_id"]] = TxView(
                data=bytes.fromhex(ent["data"]), block_time=float(ent["block_time"])
            )
            chain._order.append(ent["tx_id"])
        return chain

    @classmethod
    def from_json(cls, data: bytes | str) -> "SimulatedChain":
        if isinstance(data, bytes):
            data = data.decode("utf-8", errors="replace")
        try:
            obj = json.loads(data)
        except json.JSONDecodeError as exc:
            raise TreeFormatError(f"chain state: parse error at position {exc.pos}: {exc.msg}") from None
        return cls.from_obj(obj)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "SimulatedChain":
        return cls.from_json(Path(path).read_bytes())
