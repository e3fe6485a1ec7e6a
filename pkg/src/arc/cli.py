"""Scenario runner and benchmark harness.

    arc run --config scenario.toml [--tamper role:idx:field] [--seed N]
    arc bench --backends poly,hash,pedersen --d 64,1024,16384 --seeds 3 --out bench.csv
    arc verify receipt.hex [--config scenario.toml]

The environment variable ARC_FIELD_BACKEND={mock,curve} overrides the
configured group backend.  Bench timing columns come from a deterministic
cost model (rounds * RTT + bytes / bandwidth + counted local operations)
so that identical seeds produce byte-identical CSVs; rounds, byte and
storage columns are measured.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import random
import sys
from dataclasses import dataclass
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .algebra import stable_seed
from .groups import get_backend
from .mpc import Abb, Domain, TrustedDealer
from .pipeline import ArcPipeline, PhaseAbort, Scenario
from .receipts import (
    InferenceReceipt,
    ReceiptError,
    from_hex_armor,
    to_hex_armor,
    verify_inference_receipt,
)
from . import poc

# deterministic cost model (LAN-flavored defaults)
RTT_MS = 0.5
MS_PER_BYTE = 1e-6
MS_PER_GROUP_OP = 0.01
MS_PER_PERMUTATION = 0.005

CSV_COLUMNS = "backend,phase,d,ms_total,ms_mpc,rounds,bytes_per_party,receipt_bytes,seed"


def scenario_from_toml(path: str) -> Scenario:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    parties = data.get("parties", {})
    pocsec = data.get("poc", {})
    model = data.get("model", {})
    conv = data.get("conversion", {})
    auditsec = data.get("audit", {})
    return Scenario(
        n_dh=parties.get("data_holders", 2),
        n_tc=parties.get("training_computers", 3),
        n_ic=parties.get("inference_computers", 3),
        n_ac=parties.get("audit_computers", 3),
        poc_variant=pocsec.get("variant", "poly"),
        field_backend=os.environ.get(
            "ARC_FIELD_BACKEND", pocsec.get("field_backend", "mock")
        ),
        mock_order=pocsec.get("mock_order"),
        dataset=model.get("dataset", "adult-toy"),
        epochs=model.get("epochs", 8),
        learning_rate=model.get("learning_rate", 0.5),
        batch_size=model.get("batch_size", 4),
        ell=conv.get("ell", 40),
        kappa=conv.get("kappa", 40),
        seed=data.get("seed", 7),
        audit_function=auditsec.get("function", "knn-shapley"),
        audit_aux=auditsec.get("aux", {}),
    )


def bundled_scenario_path() -> str:
    import importlib.resources

    path = importlib.resources.files("arc.data").joinpath("adult-toy.toml")
    with importlib.resources.as_file(path) as p:
        return str(p)


def _jsonable(value):
    if isinstance(value, Fraction):
        return {"num": value.numerator, "den": value.denominator}
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def cmd_run(args) -> int:
    config = args.config or bundled_scenario_path()
    scenario = scenario_from_toml(config)
    if args.seed is not None:
        scenario.seed = args.seed
    pipe = ArcPipeline(scenario, tamper=args.tamper)
    outdir = args.out_dir
    os.makedirs(outdir, exist_ok=True)
    try:
        training = pipe.run_training()
        inference = pipe.run_inference(training)
        outcome = pipe.run_audit(training, inference)
    except PhaseAbort as abort:
        print(f"abort: {abort.step} ({abort.phase}) blames {abort.party}: "
              f"{abort.detail}", file=sys.stderr)
        return 2
    receipt_path = os.path.join(outdir, "receipt.hex")
    with open(receipt_path, "w") as fh:
        fh.write(to_hex_armor(inference.receipt.to_bytes()) + "\n")
    with open(os.path.join(outdir, "transcript.json"), "w") as fh:
        fh.write(pipe.dump_transcripts())
    outcome_path = os.path.join(outdir, "audit_outcome.json")
    with open(outcome_path, "w") as fh:
        json.dump(
            {
                "function": scenario.audit_function,
                "malicious": outcome.malicious,
                "result": _jsonable(outcome.result),
            },
            fh,
            indent=2,
        )
    if outcome.malicious is not None:
        print(f"audit identified malicious party {outcome.malicious}",
              file=sys.stderr)
        return 2
    print(f"ok: receipt -> {receipt_path}, outcome -> {outcome_path}")
    return 0


def cmd_verify(args) -> int:
    try:
        with open(args.receipt) as fh:
            data = from_hex_armor(fh.read())
        receipt = InferenceReceipt.from_bytes(data)
    except (OSError, ValueError, ReceiptError, StopIteration) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    config = args.config or bundled_scenario_path()
    scenario = scenario_from_toml(config)
    pipe = ArcPipeline(scenario)
    report = verify_inference_receipt(
        receipt,
        pipe.pki.pks("DH", scenario.n_dh),
        pipe.pki.pks("TC", scenario.n_tc),
        pipe.pki.pks("IC", scenario.n_ic),
        pipe.pki.pk("M_0"),
    )
    if not report.ok:
        print(f"verification failure at: {report.failed_at}", file=sys.stderr)
        return 2
    print("ok: all signatures verify")
    return 0


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


def bench_cell(variant: str, d: int, seed: int, backend_name: str) -> list[dict]:
    """Commit + check cost rows for one (variant, d, seed) cell."""
    from .algebra import BLS12_381_SCALAR_ORDER

    backend = get_backend(backend_name, order=BLS12_381_SCALAR_ORDER)
    rng = random.Random(stable_seed("bench", variant, d, seed))
    pp = poc.poc_setup(variant, backend, d + 1, seed=seed)
    x = [rng.randrange(backend.order) for _ in range(d)]
    r = rng.randrange(backend.order)

    g1_before = backend.g1_op_count
    commitment = poc.poc_commit(pp, x, r)
    commit_group_ops = backend.g1_op_count - g1_before
    receipt_bytes = len(commitment.to_bytes(backend))
    commit_perms = (d + 2) if variant == "hash" else 0
    commit_ms = commit_group_ops * MS_PER_GROUP_OP + commit_perms * MS_PER_PERMUTATION

    dealer = TrustedDealer(3, stable_seed("bench-dealer", variant, d, seed))
    abb = Abb(3, Domain.field(backend.order), dealer=dealer, label="bench")
    shared = abb.input(0, x)
    prover = poc.PocProver(pp, x, r, rng)
    g1_before = backend.g1_op_count
    transcript = poc.poc_check(abb, pp, commitment, shared, prover)
    assert transcript.verdict, "bench check must accept"
    check_group_ops = backend.g1_op_count - g1_before
    bytes_per_party = abb.bytes_per_party[0]
    ms_mpc = abb.rounds * RTT_MS + bytes_per_party * MS_PER_BYTE
    ms_total = ms_mpc + check_group_ops * MS_PER_GROUP_OP

    base = {"backend": variant, "d": d, "seed": seed,
            "receipt_bytes": receipt_bytes}
    return [
        {**base, "phase": "commit", "ms_total": round(commit_ms, 6),
         "ms_mpc": 0.0, "rounds": 0, "bytes_per_party": 0},
        {**base, "phase": "check", "ms_total": round(ms_total, 6),
         "ms_mpc": round(ms_mpc, 6), "rounds": abb.rounds,
         "bytes_per_party": bytes_per_party},
    ]


def bench_rows(backends: list[str], d_grid: list[int], seeds: int,
               backend_name: str = "mock") -> list[dict]:
    rows = []
    for variant in backends:
        for d in d_grid:
            for seed in range(seeds):
                rows.extend(bench_cell(variant, d, seed, backend_name))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(CSV_COLUMNS + "\n")
    for row in rows:
        buf.write(
            f"{row['backend']},{row['phase']},{row['d']},{row['ms_total']},"
            f"{row['ms_mpc']},{row['rounds']},{row['bytes_per_party']},"
            f"{row['receipt_bytes']},{row['seed']}\n"
        )
    return buf.getvalue()


def cmd_bench(args) -> int:
    backends = args.backends.split(",")
    for variant in backends:
        if variant not in poc.VARIANTS:
            print(f"unknown backend {variant!r}", file=sys.stderr)
            return 2
    d_grid = [int(v) for v in args.d.split(",")]
    rows = bench_rows(backends, d_grid, args.seeds,
                      os.environ.get("ARC_FIELD_BACKEND", "mock"))
    csv_text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(csv_text)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arc",
        description="commitment-consistent MPC pipeline for auditable ML",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run train -> infer -> audit end to end")
    p_run.add_argument("--config", help="scenario TOML (default: bundled adult-toy)")
    p_run.add_argument("--tamper", help="fault injection as role:idx:field")
    p_run.add_argument("--seed", type=int, help="override the scenario seed")
    p_run.add_argument("--out-dir", default=".", help="artifact output directory")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="commit/check cost grid as CSV")
    p_bench.add_argument("--backends", default="poly,hash,pedersen")
    p_bench.add_argument("--d", default="64,1024,16384")
    p_bench.add_argument("--seeds", type=int, default=3)
    p_bench.add_argument("--out", help="CSV output path (stdout when omitted)")
    p_bench.set_defaults(func=cmd_bench)

    p_verify = sub.add_parser("verify", help="verify a hex-armored receipt file")
    p_verify.add_argument("receipt")
    p_verify.add_argument("--config", help="scenario TOML for the key registry")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
