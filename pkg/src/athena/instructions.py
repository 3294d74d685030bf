"""Timed instruction stream emitted by the schedulers.

Dependencies are explicit per instruction (previous instruction on each
operand qubit, plus the departure that freed a communication slot), so the
latency simulator is independent of how the list happens to be ordered.
Relocations carry the gate that triggered them only as provenance; their
timing is decoupled from that gate's data dependencies.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .arch import TimingModel, effective_epr_overhead

RELOCATE = "relocate"
RECNOT = "recnot"
LOCAL_CNOT = "local_cnot"
UNARY = "unary"
EPR_GEN = "epr_gen"
MEASURE = "measure"

TELEPORT_KINDS = (RELOCATE, RECNOT)


@dataclass(eq=False)
class Instr:
    kind: str
    qubits: tuple[int, ...]
    chips: tuple[int, ...]
    gate: int | None = None       # gate this instruction executes
    for_gate: int | None = None   # gate a teleport was planned for (provenance)
    block: int | None = None
    eviction: bool = False
    adjacent_slots: bool = True
    deps: tuple["Instr", ...] = ()
    index: int = -1
    start: int = 0
    duration: int = 0

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def is_teleport(self) -> bool:
        return self.kind in TELEPORT_KINDS

    def link(self) -> tuple[int, int] | None:
        """Chip pair whose photonic link this instruction occupies."""
        if self.kind in TELEPORT_KINDS:
            a, b = self.chips
            return (a, b) if a < b else (b, a)
        return None


def instr_duration(instr: Instr, timing: TimingModel, h: float | None = None) -> int:
    overhead = effective_epr_overhead(timing, h)
    if instr.kind == RELOCATE:
        return timing.t_relocate + overhead
    if instr.kind == RECNOT:
        return timing.t_recnot + overhead
    if instr.kind == LOCAL_CNOT:
        return timing.t_2q + (0 if instr.adjacent_slots else timing.t_atom_move)
    if instr.kind == UNARY:
        return timing.t_1q
    if instr.kind == EPR_GEN:
        return timing.t_epr_gen
    if instr.kind == MEASURE:
        return timing.t_measure
    raise ValueError(f"unknown instruction kind {instr.kind!r}")


@dataclass
class Schedule:
    """Instruction stream plus everything needed to replay it."""

    instrs: list[Instr]
    qubit_count: int
    home: tuple[int, ...]
    alpha: float
    epr_hide_fraction: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, instr in enumerate(self.instrs):
            instr.index = i

    @property
    def makespan(self) -> int:
        return max((i.end for i in self.instrs), default=0)

    def teleports(self) -> list[Instr]:
        return [i for i in self.instrs if i.is_teleport]

    @property
    def n_relocate(self) -> int:
        return sum(1 for i in self.instrs if i.kind == RELOCATE)

    @property
    def n_recnot(self) -> int:
        return sum(1 for i in self.instrs if i.kind == RECNOT)

    @property
    def t_eff(self) -> float:
        return self.n_relocate + self.alpha * self.n_recnot

    def to_json(self) -> str:
        body = {
            "schema": 1,
            "qubits": self.qubit_count,
            "alpha": self.alpha,
            "epr_hide_fraction": self.epr_hide_fraction,
            "home": list(self.home),
            "instructions": [
                {
                    "kind": i.kind,
                    "qubits": list(i.qubits),
                    "chips": list(i.chips),
                    "gate": i.gate,
                    "for_gate": i.for_gate,
                    "block": i.block,
                    "eviction": i.eviction,
                    "adjacent_slots": i.adjacent_slots,
                    "deps": [d.index for d in i.deps],
                    "start_ns": i.start,
                    "duration_ns": i.duration,
                }
                for i in self.instrs
            ],
        }
        return json.dumps(body, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, source: str) -> "Schedule":
        doc = json.loads(source)
        instrs: list[Instr] = []
        for spec in doc["instructions"]:
            instrs.append(
                Instr(
                    kind=spec["kind"],
                    qubits=tuple(spec["qubits"]),
                    chips=tuple(spec["chips"]),
                    gate=spec.get("gate"),
                    for_gate=spec.get("for_gate"),
                    block=spec.get("block"),
                    eviction=spec.get("eviction", False),
                    adjacent_slots=spec.get("adjacent_slots", True),
                    start=spec.get("start_ns", 0),
                    duration=spec.get("duration_ns", 0),
                )
            )
        for spec, instr in zip(doc["instructions"], instrs):
            instr.deps = tuple(instrs[d] for d in spec.get("deps", []))
        return cls(
            instrs=instrs,
            qubit_count=doc["qubits"],
            home=tuple(doc["home"]),
            alpha=doc["alpha"],
            epr_hide_fraction=doc.get("epr_hide_fraction", 1.0),
        )

    def gantt_csv(self) -> str:
        lines = ["index,kind,qubits,chips,start_ns,duration_ns,gate,block"]
        for i in self.instrs:
            lines.append(
                f"{i.index},{i.kind},{' '.join(map(str, i.qubits))},"
                f"{' '.join(map(str, i.chips))},{i.start},{i.duration},"
                f"{'' if i.gate is None else i.gate},"
                f"{'' if i.block is None else i.block}"
            )
        return "\n".join(lines) + "\n"
