"""Circuit ingestion, IR, and dependency-DAG construction.

The IR keeps CNOTs and opaque single-qubit gates only. Two-qubit structure
drives every downstream pass; unary gates ride along for timing.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import CircuitSyntaxError

CNOT = "cnot"
UNARY = "u"


@dataclass(frozen=True)
class Gate:
    """One circuit operation. ``qubits`` is (control, target) for a CNOT."""

    id: int
    kind: str  # CNOT or UNARY
    qubits: tuple[int, ...]
    label: str | None = None

    @property
    def is_cnot(self) -> bool:
        return self.kind == CNOT


@dataclass
class GateDag:
    """Dependency DAG over gates: immediate last-writer edges per qubit.

    ``preds[i]`` holds the ids of the gates gate ``i`` directly depends on.
    Gate ids are dense, assigned in textual order, and stable across the
    whole pipeline. Immutable after construction.
    """

    gates: list[Gate]
    qubit_count: int
    preds: list[tuple[int, ...]] = field(default_factory=list)
    succs: list[tuple[int, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.is_cnot)

    def cnots(self) -> list[Gate]:
        return [g for g in self.gates if g.is_cnot]


def build_dag(gates: list[Gate], qubit_count: int) -> GateDag:
    """Chain gates by last writer per qubit; edges point at predecessors."""
    last: dict[int, int] = {}
    preds: list[tuple[int, ...]] = []
    succs: list[list[int]] = [[] for _ in gates]
    for g in gates:
        ps = sorted({last[q] for q in g.qubits if q in last})
        preds.append(tuple(ps))
        for p in ps:
            succs[p].append(g.id)
        for q in g.qubits:
            last[q] = g.id
    return GateDag(
        gates=list(gates),
        qubit_count=qubit_count,
        preds=preds,
        succs=[tuple(s) for s in succs],
    )


def frontier(dag: GateDag, done: set[int]) -> set[int]:
    """Gates whose predecessors are all in ``done``, excluding ``done``.

    ``done`` must be dependency-closed.
    """
    for gid in done:
        for p in dag.preds[gid]:
            if p not in done:
                raise ValueError(f"done set is not dependency-closed: {gid} needs {p}")
    return {
        g.id
        for g in dag.gates
        if g.id not in done and all(p in done for p in dag.preds[g.id])
    }


# --- json format -----------------------------------------------------------

def _parse_json(source: str) -> tuple[list[Gate], int]:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CircuitSyntaxError(f"invalid json: {exc}") from exc
    if not isinstance(doc, dict):
        raise CircuitSyntaxError("circuit json must be an object")
    n = doc.get("qubits")
    if n is not None and (not isinstance(n, int) or n < 0):
        raise CircuitSyntaxError("'qubits' must be a nonnegative integer")
    gates: list[Gate] = []
    used: set[int] = set()
    for i, spec in enumerate(doc.get("gates", [])):
        kind = spec.get("kind")
        qs = spec.get("q", [])
        if any(not isinstance(q, int) or q < 0 for q in qs):
            raise CircuitSyntaxError(f"gate {i}: qubit ids must be nonnegative integers")
        if n is not None and any(q >= n for q in qs):
            raise CircuitSyntaxError(f"gate {i}: qubit index {max(qs)} >= register size {n}")
        if kind == "cnot":
            if len(qs) != 2 or qs[0] == qs[1]:
                raise CircuitSyntaxError(f"gate {i}: cnot needs two distinct qubits")
            gates.append(Gate(i, CNOT, (qs[0], qs[1])))
        elif kind == "u":
            if len(qs) != 1:
                raise CircuitSyntaxError(f"gate {i}: unary gate needs one qubit")
            gates.append(Gate(i, UNARY, (qs[0],), label=spec.get("label")))
        else:
            raise CircuitSyntaxError(f"gate {i}: unknown kind {kind!r}")
        used.update(qs)
    if n is None:
        # Without a declared register, gate operands must be dense 0..V-1.
        n = max(used) + 1 if used else 0
        if used != set(range(n)):
            raise CircuitSyntaxError("non-dense qubit ids and no 'qubits' field")
    return gates, n


# --- qasm-lite format -------------------------------------------------------

_QREG_RE = re.compile(r"^(qreg|creg)\s+([A-Za-z_][\w]*)\s*\[\s*(\d+)\s*\]$")
_ARG_RE = re.compile(r"^([A-Za-z_][\w]*)\s*\[\s*(\d+)\s*\]$")
_GATE_RE = re.compile(r"^([A-Za-z_][\w]*)\s*(\(([^)]*)\))?\s+(.*)$")


def _parse_qasm(source: str) -> tuple[list[Gate], int]:
    """OpenQASM 2.0 subset: qreg/creg, cx, named 1q gates; measure ignored."""
    qregs: dict[str, tuple[int, int]] = {}  # name -> (base offset, size)
    total = 0
    gates: list[Gate] = []

    def resolve(arg: str, lineno: int) -> int:
        m = _ARG_RE.match(arg.strip())
        if not m:
            raise CircuitSyntaxError(f"bad qubit reference {arg.strip()!r}", lineno)
        name, idx = m.group(1), int(m.group(2))
        if name not in qregs:
            raise CircuitSyntaxError(f"unknown register {name!r}", lineno)
        base, size = qregs[name]
        if idx >= size:
            raise CircuitSyntaxError(f"qubit index {idx} >= register size {size}", lineno)
        return base + idx

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        for stmt in line.split(";"):
            stmt = stmt.strip()
            if not stmt:
                continue
            if stmt.startswith("OPENQASM") or stmt.startswith("include"):
                continue
            m = _QREG_RE.match(stmt)
            if m:
                if m.group(1) == "qreg":
                    qregs[m.group(2)] = (total, int(m.group(3)))
                    total += int(m.group(3))
                continue
            if stmt.startswith("measure") or stmt.startswith("barrier"):
                continue
            m = _GATE_RE.match(stmt)
            if not m:
                raise CircuitSyntaxError(f"cannot parse statement {stmt!r}", lineno)
            name, args = m.group(1), m.group(4)
            operands = [a for a in (s.strip() for s in args.split(",")) if a]
            if name == "cx":
                if len(operands) != 2:
                    raise CircuitSyntaxError("cx needs two operands", lineno)
                a, b = (resolve(x, lineno) for x in operands)
                if a == b:
                    raise CircuitSyntaxError("cx operands must be distinct", lineno)
                gates.append(Gate(len(gates), CNOT, (a, b)))
            else:
                if len(operands) != 1:
                    raise CircuitSyntaxError(
                        f"unsupported multi-qubit gate {name!r}", lineno
                    )
                q = resolve(operands[0], lineno)
                gates.append(Gate(len(gates), UNARY, (q,), label=name))
    return gates, total


def parse_circuit(source: str, fmt: str = "json") -> GateDag:
    """Parse ``source`` in the given format and build its dependency DAG."""
    if fmt == "json":
        gates, n = _parse_json(source)
    elif fmt in ("qasm", "qasm-lite"):
        gates, n = _parse_qasm(source)
    else:
        raise ValueError(f"unknown circuit format {fmt!r}")
    return build_dag(gates, n)


def emit_circuit(dag: GateDag, fmt: str = "json") -> str:
    """Serialize back to source; parse(emit(dag)) round-trips the gate list."""
    if fmt == "json":
        out = {"qubits": dag.qubit_count, "gates": []}
        for g in dag.gates:
            spec: dict = {"kind": "cnot" if g.is_cnot else "u", "q": list(g.qubits)}
            if g.label is not None:
                spec["label"] = g.label
            out["gates"].append(spec)
        return json.dumps(out, indent=1)
    if fmt in ("qasm", "qasm-lite"):
        lines = ["OPENQASM 2.0;", f"qreg q[{dag.qubit_count}];"]
        for g in dag.gates:
            if g.is_cnot:
                lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];")
            else:
                lines.append(f"{g.label or 'id'} q[{g.qubits[0]}];")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown circuit format {fmt!r}")
