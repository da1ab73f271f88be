"""Benchmark harness for tree generation and proof extraction.

Measures each operation with a monotonic clock, one sample per iteration,
after an untimed warm-up, and aggregates samples with a trimmed mean.
Leaf payloads are generated once per size before any timing starts, from
a seeded generator, so inputs are identical across runs.

The default size schedule interleaves round hundreds with a +57 offset
series up to 1000 and then thins out toward 2000; the default iteration
count (250 000) suits a dedicated machine — pass a smaller value for
desk-scale runs.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from merkcert import kernels
from merkcert.tree import build_tree, extract_proof

__all__ = [
    "PAPER_LEAF_SIZES",
    "BenchConfig",
    "BenchRow",
    "trimmed_mean",
    "generate_payloads",
    "bench_generation",
    "bench_proof_extraction",
    "run_benchmarks",
    "rows_to_csv",
    "write_csv",
]

PAPER_LEAF_SIZES: tuple[int, ...] = (
    10, 57, 100, 157, 200, 257, 300, 357, 400, 457, 500, 557, 600, 657,
    700, 757, 800, 857, 900, 957, 1000, 1100, 1157, 1300, 1357, 1500,
    1557, 1700, 1757, 2000,
)


def trimmed_mean(samples: Sequence[float], fraction: float) -> float:
    """Mean after dropping ``floor(fraction * n)`` samples from each tail."""
    n = len(samples)
    if n == 0:
        raise ValueError("trimmed_mean needs at least one sample")
    if not 0.0 <= fraction < 0.5:
        raise ValueError("trim fraction must lie in [0, 0.5)")
    k = math.floor(fraction * n)
    ordered = sorted(samples)
    kept = ordered[k : n - k]
    return sum(kept) / len(kept)


@dataclass
class BenchConfig:
    leaf_sizes: tuple[int, ...] = PAPER_LEAF_SIZES
    iterations: int = 250_000
    trim_fraction: float = 0.05
    rng_seed: int = 0
    warmup: int = 1_000
    payload_size: int = 32
    kernel: str = "auto"

    def __post_init__(self):
        self.leaf_sizes = tuple(self.leaf_sizes)
        if not self.leaf_sizes or any(n < 1 for n in self.leaf_sizes):
            raise ValueError("leaf sizes must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ValueError("trim fraction must lie in [0, 0.5)")
        if self.warmup < 0:
            raise ValueError("warmup must be non-negative")
        if self.payload_size < 1:
            raise ValueError("payload size must be positive")
        if self.kernel not in kernels.KERNEL_NAMES:
            raise ValueError(f"kernel must be one of {kernels.KERNEL_NAMES}")


@dataclass(frozen=True, slots=True)
class BenchRow:
    op: str
    n_leaves: int
    trimmed_mean_ms: float
    iterations: int
    impl: str


def generate_payloads(config: BenchConfig, n_leaves: int) -> list[bytes]:
    """Deterministic per-size payloads; independent of the rest of the schedule."""
    rng = random.Random(f"{config.rng_seed}:{n_leaves}")
    return [rng.randbytes(config.payload_size) for _ in range(n_leaves)]


def _resolved_impl(config: BenchConfig) -> str:
    return kernels.default_kernel_name() if config.kernel == "auto" else config.kernel


def bench_generation(config: BenchConfig) -> list[BenchRow]:
    """Time full tree construction per leaf size."""
    impl = _resolved_impl(config)
    timer = time.perf_counter_ns
    rows = []
    for n in sorted(config.leaf_sizes):
        items = generate_payloads(config, n)
        for _ in range(config.warmup):
            build_tree(items, kernel=config.kernel)
        samples = []
        for _ in range(config.iterations):
            t0 = timer()
            build_tree(items, kernel=config.kernel)
            samples.append(timer() - t0)
        rows.append(BenchRow(
            op="gen",
            n_leaves=n,
            trimmed_mean_ms=trimmed_mean(samples, config.trim_fraction) / 1e6,
            iterations=config.iterations,
            impl=impl,
        ))
    return rows


def bench_proof_extraction(config: BenchConfig) -> list[BenchRow]:
    """Time proof extraction over uniformly sampled leaves of one tree per size."""
    impl = _resolved_impl(config)
    timer = time.perf_counter_ns
    rows = []
    for n in sorted(config.leaf_sizes):
        items = generate_payloads(config, n)
        tree = build_tree(items, kernel=config.kernel)
        rng = random.Random(f"{config.rng_seed}:{n}:proof")
        indexes = [2 * rng.randint(1, n) - 1 for _ in range(config.iterations)]
        for leaf_index in indexes[: min(config.warmup, config.iterations)]:
            extract_proof(tree, leaf_index, kernel=config.kernel)
        samples = []
        for leaf_index in indexes:
            t0 = timer()
            extract_proof(tree, leaf_index, kernel=config.kernel)
            samples.append(timer() - t0)
        rows.append(BenchRow(
            op="proof",
            n_leaves=n,
            trimmed_mean_ms=trimmed_mean(samples, config.trim_fraction) / 1e6,
            iterations=config.iterations,
            impl=impl,
        ))
    return rows


def run_benchmarks(config: BenchConfig, op: str = "both") -> list[BenchRow]:
    if op not in ("gen", "proof", "both"):
        raise ValueError("op must be one of 'gen', 'proof', 'both'")
    rows = []
    if op in ("gen", "both"):
        rows.extend(bench_generation(config))
    if op in ("proof", "both"):
        rows.extend(bench_proof_extraction(config))
    return rows


def rows_to_csv(rows: Sequence[BenchRow], include_impl: bool = False) -> str:
    header = "op,N,trimmed_mean_ms,iterations"
    if include_impl:
        header += ",impl"
    lines = [header]
    for row in rows:
        line = f"{row.op},{row.n_leaves},{row.trimmed_mean_ms:.6f},{row.iterations}"
        if include_impl:
            line += f",{row.impl}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def write_csv(rows: Sequence[BenchRow], path: str | Path, include_impl: bool = False) -> None:
    Path(path).write_text(rows_to_csv(rows, include_impl))
