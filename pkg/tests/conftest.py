from __future__ import annotations

import random

import pytest

from merkcert.anchor import SimulatedChain
from merkcert.pipeline import CertificationStore


def make_items(n: int, seed: int = 0, size: int = 24) -> list[bytes]:
    rng = random.Random(f"items:{seed}:{n}")
    return [rng.randbytes(size) for _ in range(n)]


@pytest.fixture
def reliable_chain() -> SimulatedChain:
    return SimulatedChain(seed=11, extra_failure_rate=0.0)


@pytest.fixture
def merkle_store(tmp_path) -> CertificationStore:
    return CertificationStore(tmp_path / "store", approach="merkle", clock=lambda: 0.0)


@pytest.fixture
def single_store(tmp_path) -> CertificationStore:
    return CertificationStore(tmp_path / "store", approach="single", clock=lambda: 0.0)
