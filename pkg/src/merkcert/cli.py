"""Operator CLI: submission, certification, verification, costs, benchmarks.

Exit codes: 0 ok/verified, 1 verification mismatch, 2 input error,
3 empty batch, 4 anchor/tx lookup failure.

State lives under the store directory; the simulated anchor chain is
persisted there as ``chain.json`` so commands across invocations see one
ledger. With ``--deterministic`` stored timestamps are zeroed and timing
fields are left out of the output, making runs byte-replayable.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from merkcert import bench as bench_mod
from merkcert import kernels
from merkcert.anchor import SimulatedChain
from merkcert.costs import CostParams, cost_merkle, cost_single
from merkcert.errors import (
    DuplicateItemError,
    EmptyBatchError,
    MerkcertError,
    StoreError,
    TreeFormatError,
    TxNotFoundError,
    UnknownRefError,
)
from merkcert.pipeline import (
    Approach,
    CertificationStore,
    DataItem,
    RecordStatus,
    Trigger,
    certify_batch,
    certify_single,
    resolve_proof,
    submit,
    verify_record,
)
from merkcert.poa import simulate_poa
from merkcert.tree import serialize_proof

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_EMPTY_BATCH = 3
EXIT_TX_LOOKUP = 4


@dataclass
class CliConfig:
    store_dir: Path
    chain_seed: int
    gas_price: float
    failure_rate: float
    trigger: Trigger
    json_output: bool
    deterministic: bool


def _emit(config: CliConfig, obj: dict, text: str) -> None:
    if config.json_output:
        print(json.dumps(obj, sort_keys=True))
    else:
        print(text)


def _open_store(config: CliConfig, approach: str | None) -> CertificationStore:
    clock = (lambda: 0.0) if config.deterministic else time.time
    return CertificationStore(config.store_dir, approach=approach, clock=clock)


def _chain_path(config: CliConfig) -> Path:
    return config.store_dir / "chain.json"

def _load_chain(config: CliConfig, create: bool = True) -> SimulatedChain:
    path = _chain_path(config)
    if path.exists():
        return SimulatedChain.load(path)
    if not create:
        raise TxNotFoundError("no anchor chain state for this store")
    return SimulatedChain(seed=config.chain_seed, extra_failure_rate=config.failure_rate)


def _save_chain(config: CliConfig, chain: SimulatedChain) -> None:
    chain.save(_chain_path(config))


def _read_payload(path_arg: str | None) -> bytes:
    if path_arg in (None, "-"):
        return sys.stdin.buffer.read()
    return Path(path_arg).read_bytes()


def _auto_id(store: CertificationStore) -> str:
    return f"item-{len(store.items) + 1:06d}"


def _ref_obj(config: CliConfig, item_id: str, record) -> dict:
    obj = {"item_id": item_id, "digest": record.digest.hex(), "status": record.status.value}
    if record.leaf_ref is not None:
        obj["multi_index"] = list(record.leaf_ref.multi_index)
        if not config.deterministic:
            obj["assigned_at"] = record.leaf_ref.assigned_at
    return obj


def cmd_submit(config: CliConfig, args: argparse.Namespace) -> int:
    store = _open_store(config, args.approach)
    submissions: list[tuple[str, bytes]] = []
    if args.jsonl:
        raw = _read_payload(args.file)
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TreeFormatError(f"input line {lineno}: {exc.msg}") from None
            item_id = obj.get("id") or _auto_id_offset(store, len(submissions))
            if "payload_b64" in obj:
                payload = base64.b64decode(obj["payload_b64"])
            elif "payload" in obj:
                payload = str(obj["payload"]).encode("utf-8")
            else:
                raise TreeFormatError(f"input line {lineno}: needs payload or payload_b64")
            submissions.append((item_id, payload))
    else:
        payload = _read_payload(args.file)
        item_id = args.id or f"itm-{hashlib.sha256(payload).hexdigest()[:16]}"
        submissions.append((item_id, payload))

    for item_id, payload in submissions:
        submit(store, DataItem(id=item_id, payload=payload, received_at=store.clock()))
        record = store.records[item_id]
        obj = _ref_obj(config, item_id, record)
        if record.leaf_ref is not None:
            text = f"submitted {item_id}: leaf {list(record.leaf_ref.multi_index)}"
        else:
            text = f"submitted {item_id}: digest {record.digest.hex()}"
        _emit(config, obj, text)
    return EXIT_OK


def _auto_id_offset(store: CertificationStore, offset: int) -> str:
    return f"item-{len(store.items) + offset + 1:06d}"


def cmd_certify(config: CliConfig, args: argparse.Namespace) -> int:
    store = _open_store(config, args.approach)
    chain = _load_chain(config)
    try:
        if store.approach is Approach.SINGLE:
            targets = [r.item_id for r in store.pending_records()]
            if not targets:
                raise EmptyBatchError("no pending items to certify")
            accepted = rejected = 0
            for item_id in targets:
                record = certify_single(store, item_id, chain, gas_price=config.gas_price)
                if record.status is RecordStatus.ANCHORED:
                    accepted += 1
                else:
                    rejected += 1
            obj = {
                "approach": "single",
                "transactions": len(targets),
                "accepted": accepted,
                "rejected": rejected,
            }
            text = f"{len(targets)} transactions ({accepted} accepted, {rejected} rejected)"
            _emit(config, obj, text)
            return EXIT_OK
        records = certify_batch(
            store,
            config.trigger,
            chain,
            gas_price=config.gas_price,
            allow_empty_retry=args.retry,
            materialize_proofs=args.materialize_proofs,
        )
        receipt = store.last_receipt
        root_hex = records[0].anchored_root.hex() if receipt.accepted else None
        obj = {
            "approach": "merkle",
            "transactions": 1,
            "accepted": int(receipt.accepted),
            "covered_records": len(records),
        }
        if receipt.accepted:
            obj["root"] = root_hex
            obj["tx_id"] = receipt.tx_id
            text = f"1 transaction, root {root_hex} ({len(records)} records anchored)"
        else:
            text = (
                f"submission rejected; tree retained over {len(records)} records "
                f"(resubmit after new data or with --retry)"
            )
        _emit(config, obj, text)
        return EXIT_OK
    finally:
        _save_chain(config, chain)


def cmd_verify(config: CliConfig, args: argparse.Namespace) -> int:
    store = _open_store(config, None)
    chain = _load_chain(config, create=False)
    record = store.get_record(args.item_id)
    ok = verify_record(store, record, chain)
    obj = {"item_id": args.item_id, "verified": ok}
    _emit(config, obj, f"{args.item_id}: {'verified' if ok else 'verification FAILED'}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_proof(config: CliConfig, args: argparse.Namespace) -> int:
    store = _open_store(config, None)
    record = store.get_record(args.item_id)
    if record.leaf_ref is None:
        raise StoreError(f"item {args.item_id!r} has no leaf reference (single approach)")
    proof = record.proof or resolve_proof(store, record.leaf_ref)
    blob = serialize_proof(proof)
    if args.out:
        Path(args.out).write_bytes(blob)
        _emit(config, {"item_id": args.item_id, "out": args.out}, f"proof written to {args.out}")
    else:
        print(blob.decode("ascii"))
    return EXIT_OK


def cmd_cost(config: CliConfig, args: argparse.Namespace) -> int:
    ns = _parse_int_list(args.n_list)
    rows = []
    for n in ns:
        params = CostParams(n_items=n, c_hash=args.c_hash, p=args.price, d=args.dimension)
        rows.append((n, cost_single(params), cost_merkle(params)))
    if config.json_output:
        print(json.dumps(
            [{"N": n, "single": s.to_obj(), "merkle": m.to_obj()} for n, s, m in rows],
            sort_keys=True,
        ))
        return EXIT_OK
    if args.csv:
        print("N,approach,generation,storage,transaction,verification,total")
        for n, s, m in rows:
            print(f"{n},single,{s.generation},{s.storage},{s.transaction},{s.verification},{s.total}")
            print(f"{n},merkle,{m.generation},{m.storage},{m.transaction},{m.verification},{m.total}")
        return EXIT_OK
    header = f"{'N':>8} {'approach':>8} {'generation':>12} {'storage':>10} {'transaction':>12} {'verification':>13} {'total':>12}"
    print(header)
    for n, s, m in rows:
        for name, b in (("single", s), ("merkle", m)):
            print(
                f"{n:>8} {name:>8} {b.generation:>12.4f} {b.storage:>10.4f} "
                f"{b.transaction:>12.4f} {b.verification:>13.4f} {b.total:>12.4f}"
            )
    return EXIT_OK


def cmd_bench(config: CliConfig, args: argparse.Namespace) -> int:
    sizes = _parse_int_list(args.sizes) if args.sizes else bench_mod.PAPER_LEAF_SIZES
    if args.impl in ("native", "both") and not kernels.have_native():
        raise StoreError("the compiled kernel is not built; run with --impl python")
    impls = ["native", "python"] if args.impl == "both" else [args.impl]
    all_rows = []
    for impl in impls:
        cfg = bench_mod.BenchConfig(
            leaf_sizes=tuple(sizes),
            iterations=args.iterations,
            trim_fraction=args.trim,
            rng_seed=args.seed,
            kernel=impl,
        )
        all_rows.extend(bench_mod.run_benchmarks(cfg, op=args.op))
    include_impl = args.impl == "both"
    csv_text = bench_mod.rows_to_csv(all_rows, include_impl=include_impl)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"report written to {args.out}")
    else:
        print(csv_text, end="")
    return EXIT_OK


def cmd_poa_sim(config: CliConfig, args: argparse.Namespace) -> int:
    failures = tuple(_parse_int_list(args.failures, allow_zero=True))
    result = simulate_poa(
        n_attractions=args.attractions,
        failures=failures,
        price_per_tx=args.price,
        seed=config.chain_seed,
    )
    if config.json_output:
        print(json.dumps(result.to_obj(), sort_keys=True))
        return EXIT_OK
    print(f"attractions: {result.attractions}, failures: {list(result.failures)}, p = {result.price_per_tx}")
    print(
        f"naive:      {result.naive_accepted} accepted tx "
        f"({result.naive_rejected} refused) -> spend {result.naive_spend:.4f} "
        f"(formula {result.naive_formula:.4f})"
    )
    print(
        f"multilevel: {result.multilevel_accepted} accepted tx "
        f"({result.multilevel_rejected} refused) -> spend {result.multilevel_spend:.4f} "
        f"(formula {result.multilevel_formula:.4f})"
    )
    print(f"anchored root: {result.final_root.hex()}")
    return EXIT_OK


def _parse_int_list(text: str, allow_zero: bool = False) -> list[int]:
    try:
        values = [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError:
        raise TreeFormatError(f"expected a comma-separated integer list, got {text!r}") from None
    if not values:
        raise TreeFormatError("expected a non-empty integer list")
    low = 0 if allow_zero else 1
    if any(v < low for v in values):
        raise TreeFormatError(f"list values must be >= {low}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="merkcert",
        description="Indexed-Merkle-tree data certification pipeline",
    )
    parser.add_argument("--store", default="./certstore", help="store directory (default ./certstore)")
    parser.add_argument("--seed", type=int, default=0, help="anchor chain seed")
    parser.add_argument("--gas-price", type=float, default=1.0, help="gas price for submissions")
    parser.add_argument("--failure-rate", type=float, default=0.0,
                        help="extra congestion failure rate for a freshly created chain")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--deterministic", action="store_true",
                        help="zero stored timestamps and omit timing fields")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("submit", help="submit a payload for certification")
    p.add_argument("file", nargs="?", help="payload file ('-' or omitted: stdin)")
    p.add_argument("--id", help="item id (default: derived from the digest)")
    p.add_argument("--jsonl", action="store_true",
                   help="treat input as JSON lines: {\"id\":..., \"payload\":...}")
    p.add_argument("--approach", choices=["merkle", "single"], default=None,
                   help="certification approach for a freshly created store (default merkle)")
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("certify", help="anchor pending items")
    p.add_argument("--approach", choices=["merkle", "single"], default=None)
    p.add_argument("--trigger", choices=["manual", "time"], default="manual")
    p.add_argument("--retry", action="store_true",
                   help="resubmit a refused root even if no new items arrived")
    p.add_argument("--materialize-proofs", action="store_true",
                   help="store proofs on records instead of resolving on the fly")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="verify a certified item end to end")
    p.add_argument("item_id")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("proof", help="resolve and print an item's Merkle proof")
    p.add_argument("item_id")
    p.add_argument("--out", help="write the proof JSON to this file")
    p.set_defaults(func=cmd_proof)

    p = sub.add_parser("cost", help="compare certification cost models")
    p.add_argument("--n-list", required=True, help="comma-separated item counts")
    p.add_argument("--c-hash", type=float, default=1.0, help="cost per hash digest")
    p.add_argument("--price", type=float, default=1.0, help="cost per transaction (p)")
    p.add_argument("--dimension", type=float, default=0.0, help="storage units per node (d)")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("bench", help="run the measurement protocol")
    p.add_argument("--sizes", help="comma-separated leaf counts (default: full schedule)")
    p.add_argument("--iterations", type=int, default=250_000)
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--seed", dest="seed", type=int, default=0)
    p.add_argument("--op", choices=["gen", "proof", "both"], default="both")
    p.add_argument("--out", help="write CSV report here")
    p.add_argument("--impl", choices=["auto", "native", "python", "both"], default="auto",
                   help="which kernel to time (both = compare)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("poa-sim", help="attendance-certification pricing scenario")
    p.add_argument("--attractions", type=int, default=2)
    p.add_argument("--failures", default="1,1", help="comma-separated failures per attraction")
    p.add_argument("--price", type=float, default=0.6, help="price per transaction (p)")
    p.set_defaults(func=cmd_poa_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = CliConfig(
        store_dir=Path(args.store),
        chain_seed=args.seed,
        gas_price=args.gas_price,
        failure_rate=args.failure_rate,
        trigger=Trigger(getattr(args, "trigger", "manual")),
        json_output=args.json,
        deterministic=args.deterministic,
    )
    try:
        return args.func(config, args)
    except EmptyBatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_BATCH
    except TxNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TX_LOOKUP
    except (DuplicateItemError, UnknownRefError, TreeFormatError, StoreError,
            MerkcertError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
