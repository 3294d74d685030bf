"""Command-line entry points."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .arch import load_topology_file
from .bench import (
    format_csv,
    format_markdown,
    generate_benchmark,
    load_suite,
    relative_row,
    run_suite,
)
from .blockform import CostParams
from .circuit import emit_circuit, parse_circuit
from .errors import AthenaError
from .instructions import Schedule
from .oracle import optimal_teff
from .pipeline import compile_circuit
from .validate import validate


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_circuit(path: str, fmt: str | None):
    if fmt is None:
        fmt = "qasm" if path.endswith((".qasm", ".qasm2")) else "json"
    return parse_circuit(_read(path), fmt)


def cmd_compile(args: argparse.Namespace) -> int:
    dag = _load_circuit(args.circuit, args.format)
    topology = load_topology_file(args.arch)
    params = CostParams(
        alpha=args.alpha,
        beta=args.beta,
        beam_width=args.beam,
        window=args.window,
        max_block=args.max_block,
    )
    result = compile_circuit(
        dag,
        topology,
        scheduler=args.scheduler,
        mapper=args.mapper,
        params=params,
        use_ees=args.ees,
        epr_hide=args.epr_hide,
        seed=args.seed,
        collect_trace=args.trace is not None,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schedule.json").write_text(result.schedule.to_json(), encoding="utf-8")
    stats = result.metrics.to_dict()
    (out / "stats.json").write_text(
        json.dumps(stats, sort_keys=True, indent=1), encoding="utf-8"
    )
    (out / "gantt.csv").write_text(result.schedule.gantt_csv(), encoding="utf-8")
    if args.dump_blocks and result.blocks is not None:
        blocks_doc = [
            {
                "id": b.id,
                "gates": b.gates,
                "cnot_gates": b.cnot_gates,
                "qubits": sorted(b.qubits),
                "exec_chip": b.exec_chip,
                "cost_by_chip": {
                    str(c): (None if cost == float("inf") else cost)
                    for c, cost in sorted(b.cost_by_chip.items())
                },
            }
            for b in result.blocks
        ]
        (out / args.dump_blocks).write_text(
            json.dumps({"schema": 1, "blocks": blocks_doc}, sort_keys=True, indent=1),
            encoding="utf-8",
        )
    if args.trace is not None and result.trace is not None:
        with open(out / args.trace, "w", encoding="utf-8") as fh:
            for record in result.trace:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    if result.violation is not None:
        print(f"INVALID: {result.violation}", file=sys.stderr)
        return 1
    print(
        f"ok: t_eff={result.metrics.t_eff:.2f} "
        f"makespan={result.metrics.makespan_ns / 1e6:.3f}ms "
        f"({result.metrics.n_relocate} relocates, {result.metrics.n_recnot} re-cnots)"
    )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    suite = load_suite(
        _read(args.suite), "json" if args.suite.endswith(".json") else "toml"
    )
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("ATHENA_THREADS", "1"))
    rows = run_suite(suite, workers=workers)
    relative = relative_row(rows, baseline=args.baseline)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(format_csv(rows, relative), encoding="utf-8")
    (out / "bench.md").write_text(format_markdown(rows, relative), encoding="utf-8")
    print(format_markdown(rows, relative))
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    schedule = Schedule.from_json(_read(args.schedule))
    dag = _load_circuit(args.circuit, args.format) if args.circuit else None
    topology = load_topology_file(args.arch)
    violation = validate(schedule, dag, topology)
    if violation is None:
        print("ok")
        return 0
    print(f"INVALID: {violation}", file=sys.stderr)
    return 1


def cmd_oracle(args: argparse.Namespace) -> int:
    dag = _load_circuit(args.circuit, args.format)
    topology = load_topology_file(args.arch)
    params = CostParams(alpha=args.alpha)
    from .mapping import map_circuit

    layout = map_circuit(dag, topology, mapper=args.mapper, seed=args.seed)
    best, witness = optimal_teff(dag, layout, topology, alpha=args.alpha)
    print(f"optimal t_eff: {best:.2f}")
    for scheduler in ("pergate", "blockgreedy", "ums"):
        result = compile_circuit(
            dag,
            topology,
            scheduler=scheduler,
            mapper=args.mapper,
            params=params,
            seed=args.seed,
        )
        teff = result.metrics.t_eff
        gap = teff - best
        print(f"  {scheduler:12s} t_eff={teff:8.2f}  gap={gap:+.2f}")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    dag = generate_benchmark(args.family, args.qubits, args.seed)
    text = emit_circuit(dag, "json")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="athena", description="DQC teleportation-aware scheduling compiler"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("compile", help="compile a circuit to a timed schedule")
    pc.add_argument("--circuit", required=True)
    pc.add_argument("--arch", required=True)
    pc.add_argument("--format", choices=["json", "qasm"], default=None)
    pc.add_argument("--mapper", choices=["mincut", "trivial"], default="mincut")
    pc.add_argument(
        "--scheduler", choices=["ums", "blockgreedy", "pergate"], default="ums"
    )
    pc.add_argument("--beam", type=int, default=16)
    pc.add_argument("--window", type=int, default=4)
    pc.add_argument("--alpha", type=float, default=1.77)
    pc.add_argument("--beta", type=float, default=0.871)
    pc.add_argument("--max-block", type=int, default=64)
    pc.add_argument(
        "--ees",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="early scheduling pass (default: on for ums, off for baselines)",
    )
    pc.add_argument("--epr-hide", type=float, default=1.0)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--out-dir", default="out")
    pc.add_argument("--dump-blocks", default=None, metavar="FILE")
    pc.add_argument("--trace", default=None, metavar="FILE")
    pc.set_defaults(func=cmd_compile)

    pb = sub.add_parser("bench", help="run a benchmark suite comparison")
    pb.add_argument("--suite", required=True)
    pb.add_argument("--out-dir", default="out")
    pb.add_argument("--baseline", default="blockgreedy")
    pb.add_argument("--workers", type=int, default=None)
    pb.set_defaults(func=cmd_bench)

    pv = sub.add_parser("validate", help="check a schedule against the rules")
    pv.add_argument("--schedule", required=True)
    pv.add_argument("--circuit", default=None)
    pv.add_argument("--arch", required=True)
    pv.add_argument("--format", choices=["json", "qasm"], default=None)
    pv.set_defaults(func=cmd_validate)

    po = sub.add_parser("oracle", help="brute-force optimum for tiny instances")
    po.add_argument("--circuit", required=True)
    po.add_argument("--arch", required=True)
    po.add_argument("--format", choices=["json", "qasm"], default=None)
    po.add_argument("--mapper", choices=["mincut", "trivial"], default="mincut")
    po.add_argument("--alpha", type=float, default=1.77)
    po.add_argument("--seed", type=int, default=0)
    po.set_defaults(func=cmd_oracle)

    pg = sub.add_parser("gen", help="generate a benchmark circuit")
    pg.add_argument(
        "--family",
        choices=["qaoa-3reg", "qaoa-fc", "qft-like", "qv-like", "bv-like"],
        required=True,
    )
    pg.add_argument("--qubits", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", default=None)
    pg.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AthenaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
