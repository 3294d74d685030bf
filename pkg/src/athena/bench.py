"""Benchmark circuit generators and the suite runner."""
from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor

from .arch import Topology, topology_from_dict
from .blockform import CostParams
from .circuit import CNOT, Gate, GateDag, UNARY, build_dag
from .errors import ConfigError, InfeasibleError
from .pipeline import compile_circuit

FAMILIES = ("qaoa-3reg", "qaoa-fc", "qft-like", "qv-like", "bv-like")


def generate_benchmark(family: str, qubits: int, seed: int = 0) -> GateDag:
    """Deterministic structural analog of a benchmark family."""
    if qubits < 4:
        raise InfeasibleError("benchmark generation needs at least 4 qubits")
    rng = random.Random(f"{family}:{qubits}:{seed}")
    gates: list[Gate] = []

    def u(q: int, label: str) -> None:
        gates.append(Gate(len(gates), UNARY, (q,), label=label))

    def cx(a: int, b: int) -> None:
        gates.append(Gate(len(gates), CNOT, (a, b)))

    if family == "qaoa-3reg":
        if qubits % 2:
            raise InfeasibleError("3-regular graphs need an even qubit count")
        edges = _random_regular_edges(qubits, 3, rng)
        for q in range(qubits):
            u(q, "h")
        for _ in range(2):
            for a, b in edges:
                cx(a, b)
    elif family == "qaoa-fc":
        for q in range(qubits):
            u(q, "h")
        for _ in range(2):
            for a in range(qubits):
                for b in range(a + 1, qubits):
                    cx(a, b)
    elif family == "qft-like":
        for i in range(qubits):
            u(i, "h")
            for j in range(i + 1, qubits):
                cx(j, i)
    elif family == "qv-like":
        for _ in range(qubits):
            perm = list(range(qubits))
            rng.shuffle(perm)
            for i in range(0, qubits - 1, 2):
                cx(perm[i], perm[i + 1])
    elif family == "bv-like":
        secret = [rng.random() < 0.5 for _ in range(1, qubits)]
        if not any(secret):
            secret[0] = True
        for q in range(qubits):
            u(q, "h")
        for i, bit in enumerate(secret, start=1):
            if bit:
                cx(i, 0)
        for q in range(qubits):
            u(q, "h")
    else:
        raise ValueError(f"unknown benchmark family {family!r}")
    return build_dag(gates, qubits)


def _random_regular_edges(
    n: int, d: int, rng: random.Random
) -> list[tuple[int, int]]:
    """Configuration-model d-regular graph; circulant fallback."""
    for _ in range(200):
        stubs = [v for v in range(n) for _ in range(d)]
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for i in range(0, len(stubs), 2):
            a, b = stubs[i], stubs[i + 1]
            if a == b or (min(a, b), max(a, b)) in edges:
                ok = False
                break
            edges.add((min(a, b), max(a, b)))
        if ok:
            return sorted(edges)
    ring = [(i, (i + 1) % n) for i in range(n)]
    chords = [(i, i + n // 2) for i in range(n // 2)]
    return sorted((min(a, b), max(a, b)) for a, b in ring + chords)


# --- suite runner -------------------------------------------------------------

def default_suite() -> dict:
    return {
        "arch": {"rows": 2, "cols": 2, "qubits_per_chip": 10, "compute_fraction": 0.8},
        "params": {"alpha": 1.77, "beta": 0.871, "beam": 16, "window": 4},
        "run": {"schedulers": ["blockgreedy", "ums"], "ees": True, "epr_hide": 1.0, "seed": 7},
        "instances": [
            {"family": "qaoa-3reg", "qubits": 16, "seed": 0},
            {"family": "qft-like", "qubits": 16, "seed": 0},
            {"family": "qv-like", "qubits": 16, "seed": 0},
        ],
    }


def _run_one(job: dict) -> dict:
    suite, inst, scheduler = job["suite"], job["instance"], job["scheduler"]
    topology = topology_from_dict(suite["arch"])
    p = suite.get("params", {})
    params = CostParams(
        alpha=p.get("alpha", 1.77),
        beta=p.get("beta", 0.871),
        beam_width=p.get("beam", 16),
        window=p.get("window", 4),
        max_block=p.get("max_block", 64),
    )
    run = suite.get("run", {})
    dag = generate_benchmark(inst["family"], inst["qubits"], inst.get("seed", 0))
    base = scheduler.replace("-noees", "")
    use_ees = (
        base == "ums" and run.get("ees", True) and not scheduler.endswith("-noees")
    )
    result = compile_circuit(
        dag,
        topology,
        scheduler=base,
        mapper=run.get("mapper", "mincut"),
        params=params,
        use_ees=use_ees,
        epr_hide=run.get("epr_hide", 1.0),
        seed=run.get("seed", 0),
    )
    if result.violation is not None:
        raise RuntimeError(f"invalid schedule: {result.violation}")
    m = result.metrics
    return {
        "benchmark": f"{inst['family']}-{inst['qubits']}-s{inst.get('seed', 0)}",
        "scheduler": scheduler,
        "t_eff": m.t_eff,
        "latency_s": m.makespan_ns / 1e9,
        "n_relocate": m.n_relocate,
        "n_recnot": m.n_recnot,
        "relocate_concurrency_per_ms": m.relocate_concurrency_per_ms,
    }


def run_suite(suite: dict, workers: int | None = None) -> list[dict]:
    """One row per (instance, scheduler), in suite order."""
    instances = suite.get("instances", [])
    schedulers = suite.get("run", {}).get("schedulers", ["blockgreedy", "ums"])
    jobs = [
        {"suite": suite, "instance": inst, "scheduler": s}
        for inst in instances
        for s in schedulers
    ]
    if workers is None:
        workers = int(os.environ.get("ATHENA_THREADS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def relative_row(rows: list[dict], baseline: str = "blockgreedy") -> dict:
    """Mean per-instance ratios against the baseline scheduler."""
    by_bench: dict[str, dict[str, dict]] = {}
    for row in rows:
        by_bench.setdefault(row["benchmark"], {})[row["scheduler"]] = row
    schedulers = sorted({row["scheduler"] for row in rows})
    out: dict[str, dict[str, float]] = {}
    for s in schedulers:
        teff_ratios, lat_ratios = [], []
        for bench, per in sorted(by_bench.items()):
            if baseline not in per or s not in per:
                continue
            bt, st = per[baseline]["t_eff"], per[s]["t_eff"]
            bl, sl = per[baseline]["latency_s"], per[s]["latency_s"]
            if bt > 0:
                teff_ratios.append(st / bt)
            if bl > 0:
                lat_ratios.append(sl / bl)
        out[s] = {
            "t_eff": sum(teff_ratios) / len(teff_ratios) if teff_ratios else 1.0,
            "latency": sum(lat_ratios) / len(lat_ratios) if lat_ratios else 1.0,
        }
    return out


def format_csv(rows: list[dict], relative: dict) -> str:
    lines = ["benchmark,scheduler,t_eff,latency_s,n_relocate,n_recnot,relocate_concurrency_per_ms"]
    for r in rows:
        lines.append(
            f"{r['benchmark']},{r['scheduler']},{r['t_eff']:.2f},{r['latency_s']:.6f},"
            f"{r['n_relocate']},{r['n_recnot']},{r['relocate_concurrency_per_ms']:.4f}"
        )
    for s, ratios in sorted(relative.items()):
        lines.append(f"relative,{s},{ratios['t_eff']:.4f},{ratios['latency']:.4f},,,")
    return "\n".join(lines) + "\n"


def format_markdown(rows: list[dict], relative: dict) -> str:
    lines = [
        "| benchmark | scheduler | t_eff | latency (s) | relocates | re-cnots |",
        "|---|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {r['benchmark']} | {r['scheduler']} | {r['t_eff']:.2f} "
            f"| {r['latency_s']:.4f} | {r['n_relocate']} | {r['n_recnot']} |"
        )
    for s, ratios in sorted(relative.items()):
        lines.append(
            f"| relative | {s} | {ratios['t_eff']:.4f} | {ratios['latency']:.4f} | | |"
        )
    return "\n".join(lines) + "\n"


def load_suite(source: str, fmt: str = "toml") -> dict:
    if fmt == "toml":
        try:
            import tomllib as toml
        except ImportError:  # pragma: no cover
            import tomli as toml
        doc = toml.loads(source)
    else:
        import json

        doc = json.loads(source)
    if "arch" not in doc or "instances" not in doc:
        raise ConfigError("suite needs [arch] and [[instances]]")
    return doc
