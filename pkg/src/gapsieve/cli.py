"""Command-line interface: construct, verify, gap, oracle, nibble-bench, weights.

Every run is reproducible from its master seed: outputs are byte-identical
across repeated invocations and across --threads settings (execution is
serial; the flag only caps worker pools and is deliberately excluded from
output manifests).  Exit codes: 0 success, 2 usage, 3 verification failure,
4 infeasible or budget exhausted.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import nibble as nib
from .oracle import InfeasibleError, exact_Y, jacobsthal
from .pipeline import (
    BudgetError,
    StagedConfig,
    VerificationError,
    run_pipeline,
)
from .primes import admissible_tuple, primorial, sieve_interval
from .residues import (
    CoverageError,
    assemble_gap,
    covered_prefix_length,
    read_system_file,
    sift,
    system_to_json,
    write_system_file,
)
from .rng import stream
from .weights import FormSystem, LinearForm, WeightSystem, integrals_IJ, tau_u

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_INFEASIBLE = 4

GAP_SCAN_LIMIT = 10**8


def _manifest(command: str, config: dict) -> dict:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return {
        "tool": "gapsieve",
        "version": __version__,
        "command": command,
        "config": config,
        "input_hash": hashlib.sha256(canonical.encode()).hexdigest(),
    }


def _dump(doc: dict, path=None) -> None:
    text = json.dumps(doc, sort_keys=False, separators=(",", ":")) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_construct(args) -> int:
    try:
        cfg = StagedConfig(
            x=args.x,
            c=args.c,
            mode=args.mode,
            seed=args.seed,
            stage3_method=args.stage3,
            C_extra=args.c_extra,
            weights=args.weights,
        )
        cfg.validate()
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report, system = run_pipeline(cfg)
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except VerificationError as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_VERIFY

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system_path = out / "system.json"
    write_system_file(system_path, cfg.x, system)
    manifest = _manifest(
        "construct",
        {
            "x": cfg.x,
            "c": cfg.c,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "stage3": cfg.stage3_method,
            "C_extra": cfg.C_extra,
            "weights": cfg.weights,
        },
    )
    manifest["system_sha256"] = hashlib.sha256(
        system_path.read_bytes()
    ).hexdigest()
    doc = {"manifest": manifest, "report": report.__dict__}
    _dump(doc, out / "report.json")
    print(f"wrote {system_path} and {out / 'report.json'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    x, system = read_system_file(args.system)
    if args.interval:
        lo, hi = args.interval
    else:
        lo, hi = 1, max(covered_prefix_length(system), 1)
    res = sift(system, lo, hi)
    first = res.first_survivor()
    doc = {
        "manifest": _manifest("verify", {"system": str(args.system), "lo": lo, "hi": hi}),
        "x": x,
        "interval": [lo, hi],
        "survivors": res.count(),
        "first_uncovered": first,
        "covered": first is None,
    }
    _dump(doc, args.out)
    if first is not None:
        print(f"uncovered position: {first}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_gap(args) -> int:
    x, system = read_system_file(args.system)
    if args.x:
        x = args.x
    try:
        cert = assemble_gap(system, x)
    except CoverageError as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    doc = {
        "manifest": _manifest("gap", {"system": str(args.system), "x": x}),
        "x": x,
        "m": cert.m,
        "run_length": cert.run_length,
    }
    P = primorial(x)
    if P <= GAP_SCAN_LIMIT:
        window = 2 * max(cert.run_length, 10)
        below = above = None
        while below is None or above is None:
            lo_scan = max(2, cert.m - window)
            hi_scan = cert.m + window
            ps = [int(p) for p in sieve_interval(lo_scan, hi_scan)]
            lower = [p for p in ps if p <= cert.m]
            upper = [p for p in ps if p > cert.m + cert.run_length]
            below = lower[-1] if lower else None
            above = upper[0] if upper else None
            window *= 2
        gap_len = above - below
        doc["enclosing_gap"] = [below, above]
        doc["enclosing_gap_length"] = gap_len
        doc["gap_at_least_run"] = gap_len >= cert.run_length + (1 if cert.run_length else 0)
    else:
        doc["gap_scan"] = f"skipped: primorial({x}) exceeds {GAP_SCAN_LIMIT}"
    _dump(doc, args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        res = exact_Y(args.x, cutoff=args.cutoff)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    doc = {
        "manifest": _manifest("oracle", {"x": args.x}),
        "x": args.x,
        "Y": res.Y,
        "nodes_explored": res.nodes_explored,
    }
    if args.witness:
        text = system_to_json(args.x, res.witness)
        Path(args.witness).write_text(text)
        doc["witness_file"] = str(args.witness)
        doc["witness_sha256"] = hashlib.sha256(text.encode()).hexdigest()
    if args.cross_check:
        doc["jacobsthal_primorial"] = jacobsthal(primorial(args.x))
        doc["cross_check_ok"] = doc["jacobsthal_primorial"] - 1 == res.Y
    _dump(doc, args.out)
    return EXIT_OK


def cmd_nibble_bench(args) -> int:
    inst = nib.instance_from_json(Path(args.instance).read_text())
    lines = ["seed,leftover,edges_used"]
    stats_run = None
    for seed in range(args.seeds):
        result = nib.run_cover(inst, stream(seed, "nibble-bench"), tol=args.tol)
        used = sum(1 for e in result.chosen.values() if e)
        lines.append(f"{seed},{len(result.leftover)},{used}")
        if seed == 0:
            stats_run = result
    csv_text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.stats and stats_run is not None:
        Path(args.stats).write_text(nib.stats_to_csv(stats_run.stats))
    return EXIT_OK


def cmd_weights(args) -> int:
    offsets = admissible_tuple(args.k).offsets
    system = FormSystem([LinearForm(1, h) for h in offsets], B=args.B)
    ws = WeightSystem(system, R=args.R)
    doc = {
        "manifest": _manifest(
            "weights", {"k": args.k, "R": args.R, "x": args.x, "B": args.B, "seed": args.seed}
        ),
        "k": args.k,
        "offsets": list(offsets),
        "R": args.R,
        "singular_series": ws.S,
        "table_size": len(ws.table),
    }
    ij = integrals_IJ(ws.F, args.k, args.samples, args.seed)
    tau, u = tau_u(ws, args.x, ij)
    doc["I_k"] = ij.I
    doc["J_k"] = ij.J
    doc["tau_F_relative"] = tau
    doc["u_F_relative"] = u
    if args.dump:
        table_doc = {
            "k": args.k,
            "forms": [[f.l1, f.l2] for f in system.forms],
            "B": args.B,
            "R": args.R,
            "lambda": [[list(d), val] for d, val in sorted(ws.table.items())],
        }
        text = json.dumps(table_doc, sort_keys=False, separators=(",", ":")) + "\n"
        Path(args.dump).write_text(text)
        doc["dump_file"] = str(args.dump)
        doc["dump_sha256"] = hashlib.sha256(text.encode()).hexdigest()
    _dump(doc, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gapsieve",
        description="Covering systems of residue classes for long composite runs",
    )
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get("GAPSIEVE_THREADS", "0")),
                    help="cap worker pools (execution is serial; accepted for "
                         "interface stability, outputs never depend on it)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="run the staged pipeline and save the system")
    p.add_argument("x", type=int)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--mode", choices=["desk-preset", "paper-formula"], default="desk-preset")
    p.add_argument("--stage3", choices=["independent", "greedy", "nibble", "none"],
                   default="nibble")
    p.add_argument("--weights", choices=["uniform", "sieve"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-extra", type=float, default=10.0)
    p.add_argument("--out", default="gapsieve-out")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="check a residue-system file covers an interval")
    p.add_argument("system")
    p.add_argument("--interval", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gap", help="assemble the composite run a system certifies")
    p.add_argument("system")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("oracle", help="exact longest coverable prefix for primes <= x")
    p.add_argument("x", type=int)
    p.add_argument("--cutoff", type=int, default=17)
    p.add_argument("--witness", help="write the witness system to this file")
    p.add_argument("--cross-check", action="store_true",
                   help="also scan one primorial period for the coprime-gap value")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("nibble-bench", help="run the covering engine over many seeds")
    p.add_argument("instance")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out")
    p.add_argument("--stats", help="per-round stats CSV for seed 0")
    p.set_defaults(func=cmd_nibble_bench)

    p = sub.add_parser("weights", help="build a sieve-weight table and diagnostics")
    p.add_argument("k", type=int)
    p.add_argument("R", type=float)
    p.add_argument("x", type=int)
    p.add_argument("--B", type=int, default=1)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump", help="write the lambda table to this file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BudgetError, InfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
