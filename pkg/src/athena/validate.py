"""Schedule checking, latency simulation, metrics, and a fidelity model.

The simulator assigns ASAP start times under explicit instruction
dependencies, per-edge link capacity, and per-commit-unit start lines
(instructions of block i cannot start before earlier blocks finished on
the chips block i touches -- the on-demand commit behavior early
scheduling later relaxes). The validator replays a timed schedule against
the physical rules only; commit lines are compiler policy, not hardware.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .arch import Topology
from .circuit import GateDag
from .instructions import (
    Instr,
    LOCAL_CNOT,
    RECNOT,
    RELOCATE,
    Schedule,
    UNARY,
    instr_duration,
)

GATE_KINDS = (LOCAL_CNOT, RECNOT, UNARY)


# --- latency simulation -------------------------------------------------------

def simulate_latency(
    schedule: Schedule,
    dag: GateDag | None,
    topology: Topology,
    h: float | None = None,
    block_commit: bool = True,
) -> int:
    """Assign ASAP start times; returns the makespan (ns).

    Start times depend only on the dependency/resource structure, not on
    how the instruction list is ordered (instructions are processed by
    their emission index).
    """
    timing = topology.timing
    if h is None:
        h = timing.epr_hide_fraction
    schedule.epr_hide_fraction = h
    instrs = sorted(schedule.instrs, key=lambda i: i.index)

    gate_instr: dict[int, Instr] = {}
    for i in instrs:
        if i.gate is not None and i.kind in GATE_KINDS:
            gate_instr[i.gate] = i

    links: dict[tuple[int, int], list[int]] = {}
    chip_cursor = [0] * topology.n_chips
    block_chips: dict[int, set[int]] = {}
    for i in instrs:
        if i.block is not None:
            block_chips.setdefault(i.block, set()).update(i.chips)

    current_block: int | None = None
    line = 0
    running_max_end = 0
    for i in instrs:
        i.duration = instr_duration(i, timing, h)
        start = 0
        if block_commit and i.block is not None:
            if i.block != current_block:
                current_block = i.block
                line = max(
                    (chip_cursor[c] for c in block_chips[i.block]), default=0
                )
            start = line
        for dep in i.deps:
            start = max(start, dep.end)
        if dag is not None and i.gate is not None and i.kind in GATE_KINDS:
            for p in dag.preds[i.gate]:
                pi = gate_instr.get(p)
                if pi is not None:
                    start = max(start, pi.end)
        edge = i.link()
        chan_idx = None
        if edge is not None:
            chans = links.setdefault(edge, [0] * topology.links_per_edge)
            chan_idx = min(range(len(chans)), key=lambda j: (chans[j], j))
            start = max(start, chans[chan_idx])
        i.start = start
        if chan_idx is not None:
            links[edge][chan_idx] = i.end
        for c in i.chips:
            chip_cursor[c] = max(chip_cursor[c], i.end)
        running_max_end = max(running_max_end, i.end)
    return running_max_end


# --- validation ---------------------------------------------------------------

EPR_CAPACITY = "epr_capacity"
DEPENDENCY = "dependency"
NONLOCAL_CNOT = "nonlocal_cnot"
BAD_SOURCE = "bad_source"
BAD_CHIPS = "bad_chips"
QUBIT_OVERLAP = "qubit_overlap"
LINK_OVERLAP = "link_overlap"


@dataclass
class Violation:
    code: str
    message: str
    instr: int | None = None
    time: int | None = None

    def __str__(self) -> str:
        at = f" at t={self.time}ns" if self.time is not None else ""
        which = f" (instruction {self.instr})" if self.instr is not None else ""
        return f"{self.code}{which}{at}: {self.message}"


def validate(
    schedule: Schedule, dag: GateDag | None, topology: Topology
) -> Violation | None:
    """Replay a timed schedule against the hardware rules.

    Returns the first violation found, or None when the schedule is clean.
    """
    instrs = sorted(schedule.instrs, key=lambda i: (i.start, i.index))
    home = schedule.home
    chip_of = list(home)

    gate_instr: dict[int, Instr] = {}
    for i in instrs:
        if i.gate is not None and i.kind in GATE_KINDS:
            gate_instr[i.gate] = i

    # structural checks
    for i in instrs:
        if i.kind == RELOCATE:
            if len(i.chips) != 2 or topology.hops(*i.chips) != 1:
                return Violation(BAD_CHIPS, f"relocate chips {i.chips} not adjacent", i.index)
        elif i.kind == RECNOT:
            if len(i.chips) != 2 or topology.hops(*i.chips) != 1:
                return Violation(BAD_CHIPS, f"re-cnot chips {i.chips} not adjacent", i.index)

    # dependency order
    for i in instrs:
        for dep in i.deps:
            if dep.end > i.start:
                return Violation(
                    DEPENDENCY,
                    f"instruction {i.index} starts before its dependency {dep.index} ends",
                    i.index,
                    i.start,
                )
        if dag is not None and i.gate is not None and i.kind in GATE_KINDS:
            for p in dag.preds[i.gate]:
                pi = gate_instr.get(p)
                if pi is not None and pi.end > i.start:
                    return Violation(
                        DEPENDENCY,
                        f"gate {i.gate} starts before predecessor gate {p} ends",
                        i.index,
                        i.start,
                    )

    # positional replay in time order
    for i in instrs:
        if i.kind == RELOCATE:
            q = i.qubits[0]
            if chip_of[q] != i.chips[0]:
                return Violation(
                    BAD_SOURCE,
                    f"qubit {q} is on chip {chip_of[q]}, not {i.chips[0]}",
                    i.index,
                    i.start,
                )
            chip_of[q] = i.chips[1]
        elif i.kind == RECNOT:
            a, b = i.qubits
            if chip_of[a] != i.chips[0] or chip_of[b] != i.chips[1]:
                return Violation(
                    NONLOCAL_CNOT,
                    f"re-cnot operands not on chips {i.chips}",
                    i.index,
                    i.start,
                )
        elif i.kind == LOCAL_CNOT:
            a, b = i.qubits
            if chip_of[a] != chip_of[b] or chip_of[a] != i.chips[0]:
                return Violation(
                    NONLOCAL_CNOT,
                    f"cnot {i.qubits} operands on chips "
                    f"{(chip_of[a], chip_of[b])}, expected {i.chips[0]}",
                    i.index,
                    i.start,
                )

    # per-qubit non-overlap
    per_qubit: dict[int, list[Instr]] = {}
    for i in instrs:
        for q in i.qubits:
            per_qubit.setdefault(q, []).append(i)
    for q, stream in sorted(per_qubit.items()):
        for prev, cur in zip(stream, stream[1:]):
            if cur.start < prev.end:
                return Violation(
                    QUBIT_OVERLAP,
                    f"qubit {q} used by {prev.index} and {cur.index} concurrently",
                    cur.index,
                    cur.start,
                )

    # EPR capacity over time: external residents only
    events: list[tuple[int, int, int, int]] = []  # (time, delta, chip, instr)
    for i in instrs:
        if i.kind != RELOCATE:
            continue
        q = i.qubits[0]
        src, dst = i.chips
        if dst != home[q]:
            events.append((i.start, 1, dst, i.index))
        if src != home[q]:
            events.append((i.end, -1, src, i.index))
    counts = [0] * topology.n_chips
    for time, delta, chip, index in sorted(events):
        counts[chip] += delta
        if counts[chip] > topology.epr_capacity:
            return Violation(
                EPR_CAPACITY,
                f"chip {chip} holds {counts[chip]} external qubits "
                f"(capacity {topology.epr_capacity})",
                index,
                time,
            )

    # link capacity
    link_events: list[tuple[int, int, tuple[int, int], int]] = []
    for i in instrs:
        edge = i.link()
        if edge is not None:
            link_events.append((i.start, 1, edge, i.index))
            link_events.append((i.end, -1, edge, i.index))
    load: dict[tuple[int, int], int] = {}
    for time, delta, edge, index in sorted(link_events):
        load[edge] = load.get(edge, 0) + delta
        if load[edge] > topology.links_per_edge:
            return Violation(
                LINK_OVERLAP,
                f"link {edge} carries {load[edge]} concurrent teleports",
                index,
                time,
            )
    return None


# --- metrics ------------------------------------------------------------------

@dataclass
class InterRelocateStats:
    cnots: float = 0.0
    blocks: float = 0.0
    local_only_blocks: float = 0.0
    epr_releases: float = 0.0
    samples: int = 0


@dataclass
class Metrics:
    n_relocate: int
    n_recnot: int
    t_eff: float
    makespan_ns: int
    relocate_concurrency_per_ms: float
    delayed_teleport_fraction: float
    mean_wait_ns: float
    inter_relocate: InterRelocateStats
    fidelity: dict | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema": 1,
            "n_relocate": self.n_relocate,
            "n_recnot": self.n_recnot,
            "t_eff": self.t_eff,
            "makespan_ns": self.makespan_ns,
            "relocate_concurrency_per_ms": self.relocate_concurrency_per_ms,
            "delayed_teleport_fraction": self.delayed_teleport_fraction,
            "mean_wait_ns": self.mean_wait_ns,
            "inter_relocate": {
                "cnots": self.inter_relocate.cnots,
                "blocks": self.inter_relocate.blocks,
                "local_only_blocks": self.inter_relocate.local_only_blocks,
                "epr_releases": self.inter_relocate.epr_releases,
                "samples": self.inter_relocate.samples,
            },
            "fidelity": self.fidelity,
        }
        out.update(self.extras)
        return out


def dependency_ready_time(instr: Instr, dag: GateDag | None, gate_instr: dict) -> int:
    ready = 0
    for dep in instr.deps:
        ready = max(ready, dep.end)
    if dag is not None and instr.gate is not None and instr.kind in GATE_KINDS:
        for p in dag.preds[instr.gate]:
            pi = gate_instr.get(p)
            if pi is not None:
                ready = max(ready, pi.end)
    return ready


def compute_metrics(
    schedule: Schedule,
    dag: GateDag | None = None,
    alpha: float | None = None,
    error_config: "ErrorConfig | None" = None,
) -> Metrics:
    alpha = schedule.alpha if alpha is None else alpha
    n_rel = schedule.n_relocate
    n_re = schedule.n_recnot
    makespan = schedule.makespan

    gate_instr: dict[int, Instr] = {}
    for i in schedule.instrs:
        if i.gate is not None and i.kind in GATE_KINDS:
            gate_instr[i.gate] = i

    teleports = schedule.teleports()
    delayed = []
    for t in teleports:
        ready = dependency_ready_time(t, dag, gate_instr)
        if t.start > ready:
            delayed.append(t.start - ready)
    frac = len(delayed) / len(teleports) if teleports else 0.0
    mean_wait = sum(delayed) / len(delayed) if delayed else 0.0

    fidelity = (
        fidelity_estimate(schedule, error_config) if error_config is not None else None
    )
    return Metrics(
        n_relocate=n_rel,
        n_recnot=n_re,
        t_eff=n_rel + alpha * n_re,
        makespan_ns=makespan,
        relocate_concurrency_per_ms=(
            n_rel / (makespan / 1e6) if makespan > 0 else 0.0
        ),
        delayed_teleport_fraction=frac,
        mean_wait_ns=mean_wait,
        inter_relocate=inter_relocate_stats(schedule),
        fidelity=fidelity,
    )


def inter_relocate_stats(schedule: Schedule) -> InterRelocateStats:
    """Averages between consecutive relocation events on the same qubit:
    CNOTs executed in between, block span, local-only blocks, evictions."""
    by_start = sorted(schedule.instrs, key=lambda i: (i.start, i.index))
    cnot_starts = [i.start for i in by_start if i.kind in (LOCAL_CNOT, RECNOT)]
    cnot_blocks = [i.block for i in by_start if i.kind in (LOCAL_CNOT, RECNOT)]
    evict_starts = [i.start for i in by_start if i.kind == RELOCATE and i.eviction]
    teleport_blocks = {i.block for i in schedule.instrs if i.is_teleport}

    per_qubit_rel: dict[int, list[Instr]] = {}
    for i in by_start:
        if i.kind == RELOCATE:
            per_qubit_rel.setdefault(i.qubits[0], []).append(i)

    stats = InterRelocateStats()
    totals = [0.0, 0.0, 0.0, 0.0]
    samples = 0
    for q, rels in sorted(per_qubit_rel.items()):
        # merge chained hops of one logical move into a single event
        events: list[Instr] = []
        for r in rels:
            if events and events[-1].chips[1] == r.chips[0] and events[-1].end >= r.start:
                events[-1] = r
                continue
            events.append(r)
        for prev, cur in zip(events, events[1:]):
            lo, hi = prev.start, cur.start
            i0, i1 = bisect_right(cnot_starts, lo), bisect_right(cnot_starts, hi)
            totals[0] += i1 - i0
            blocks_between = {
                b for b in cnot_blocks[i0:i1] if b is not None
            }
            totals[1] += len(blocks_between)
            totals[2] += sum(1 for b in blocks_between if b not in teleport_blocks)
            e0 = bisect_right(evict_starts, lo)
            e1 = bisect_right(evict_starts, hi)
            totals[3] += e1 - e0
            samples += 1
    if samples:
        stats.cnots = totals[0] / samples
        stats.blocks = totals[1] / samples
        stats.local_only_blocks = totals[2] / samples
        stats.epr_releases = totals[3] / samples
        stats.samples = samples
    return stats


# --- fidelity -----------------------------------------------------------------

@dataclass(frozen=True)
class ErrorConfig:
    """Per-operation error rates and coherence time.

    The defaults are assumptions, not measured values: teleports are 4x as
    error-prone as local CNOTs, and coherence is 1.5 s.
    """

    eps_unary: float = 2e-4
    eps_local_cnot: float = 5e-3
    eps_teleport: float = 2e-2
    eps_atom_transfer: float = 2e-4
    transfers_per_teleport: int = 2
    t_coherence_ns: float = 1.5e9


def fidelity_estimate(schedule: Schedule, config: ErrorConfig) -> dict:
    """Multiplicative success model: gates error-free and no decoherence."""
    counts = {LOCAL_CNOT: 0, RECNOT: 0, RELOCATE: 0, UNARY: 0}
    for i in schedule.instrs:
        if i.kind in counts:
            counts[i.kind] += 1
    teleports = counts[RECNOT] + counts[RELOCATE]
    f_unary = (1.0 - config.eps_unary) ** counts[UNARY]
    f_cnot = (1.0 - config.eps_local_cnot) ** counts[LOCAL_CNOT]
    f_tele = (1.0 - config.eps_teleport) ** teleports
    f_transfer = (1.0 - config.eps_atom_transfer) ** (
        teleports * config.transfers_per_teleport
    )
    makespan = schedule.makespan
    busy = [0] * schedule.qubit_count
    for i in schedule.instrs:
        for q in i.qubits:
            busy[q] += i.duration
    idle_total = sum(max(0, makespan - b) for b in busy)
    f_idle = math.exp(-idle_total / config.t_coherence_ns) if makespan else 1.0
    return {
        "unary": f_unary,
        "local_cnot": f_cnot,
        "teleport": f_tele,
        "atom_transfer": f_transfer,
        "decoherence": f_idle,
        "total": f_unary * f_cnot * f_tele * f_transfer * f_idle,
    }
