"""EPR-capacity-aware early scheduling over a completed timed schedule.

Candidate instructions are found by tracing dependency chains: an
instruction joins E when the transitive dependency-only earliest start is
before its scheduled start. Processing ascends that time, which is a
topological order, so one pass cascades: parents shift first, children
follow. A shift walks earlier along resource-event boundaries and stops at
the first violation: its own dependencies, overlap on its qubits (which
also preserves per-qubit order, so no CNOT can change locality), photonic
link contention, or -- for relocations landing on a foreign chip --
leaving the destination without a free communication slot. Only start
times change; the instruction multiset, in particular every
teleportation, stays identical.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right, insort

from .arch import Topology
from .circuit import GateDag
from .instructions import Instr, RELOCATE, Schedule
from .validate import GATE_KINDS, dependency_ready_time


class _ChipOccupancy:
    """External-resident counts per chip as mutable sorted event lists."""

    def __init__(self, schedule: Schedule, n_chips: int):
        self.arrivals: list[list[int]] = [[] for _ in range(n_chips)]
        self.departures: list[list[int]] = [[] for _ in range(n_chips)]
        home = schedule.home
        for i in schedule.instrs:
            if i.kind != RELOCATE:
                continue
            q = i.qubits[0]
            src, dst = i.chips
            if dst != home[q]:
                insort(self.arrivals[dst], i.start)
            if src != home[q]:
                insort(self.departures[src], i.end)

    def count_at(self, chip: int, t: int) -> int:
        return bisect_right(self.arrivals[chip], t) - bisect_right(
            self.departures[chip], t
        )

    def max_count(self, chip: int, t0: int, t1: int) -> int:
        """Max simultaneous externals over [t0, t1)."""
        if t1 <= t0:
            return self.count_at(chip, t0)
        peak = self.count_at(chip, t0)
        arr = self.arrivals[chip]
        for idx in range(bisect_right(arr, t0), len(arr)):
            t = arr[idx]
            if t >= t1:
                break
            peak = max(peak, self.count_at(chip, t))
        return peak

    def shift_arrival(self, chip: int, old: int, new: int) -> None:
        self.arrivals[chip].pop(bisect_left(self.arrivals[chip], old))
        insort(self.arrivals[chip], new)

    def shift_departure(self, chip: int, old: int, new: int) -> None:
        self.departures[chip].pop(bisect_left(self.departures[chip], old))
        insort(self.departures[chip], new)


def _gate_instr_map(schedule: Schedule) -> dict[int, Instr]:
    return {
        i.gate: i
        for i in schedule.instrs
        if i.gate is not None and i.kind in GATE_KINDS
    }


def dependency_chain_times(schedule: Schedule, dag: GateDag | None) -> dict[int, int]:
    """Earliest start of each instruction under dependencies alone.

    Forward pass over emission order (dependencies always point backwards);
    resources and commit order are deliberately ignored.
    """
    gate_instr = _gate_instr_map(schedule)
    earliest: dict[int, int] = {}
    for i in sorted(schedule.instrs, key=lambda x: x.index):
        t = 0
        for dep in i.deps:
            t = max(t, earliest[dep.index] + dep.duration)
        if dag is not None and i.gate is not None and i.kind in GATE_KINDS:
            for p in dag.preds[i.gate]:
                pi = gate_instr.get(p)
                if pi is not None:
                    t = max(t, earliest[pi.index] + pi.duration)
        earliest[i.index] = t
    return earliest


def collect_early(
    schedule: Schedule, dag: GateDag | None
) -> list[tuple[int, Instr]]:
    """Instructions whose dependency-chain earliest start precedes their
    scheduled start, in ascending (and hence topological) processing order."""
    earliest = dependency_chain_times(schedule, dag)
    out = [
        (earliest[i.index], i)
        for i in schedule.instrs
        if earliest[i.index] < i.start
    ]
    out.sort(key=lambda pair: (pair[0], pair[1].index))
    return out


class _EesState:
    def __init__(self, schedule: Schedule, dag: GateDag | None, topology: Topology):
        self.schedule = schedule
        self.dag = dag
        self.topology = topology
        self.gate_instr = _gate_instr_map(schedule)
        self.timelines: dict[int, list[Instr]] = {}
        self.by_edge: dict[tuple[int, int], list[Instr]] = {}
        for i in sorted(schedule.instrs, key=lambda x: (x.start, x.index)):
            for q in i.qubits:
                self.timelines.setdefault(q, []).append(i)
            edge = i.link()
            if edge is not None:
                self.by_edge.setdefault(edge, []).append(i)
        self.occupancy = _ChipOccupancy(schedule, topology.n_chips)


def _legal_at(e: Instr, t: int, state: _EesState, foreign_dst: bool) -> bool:
    end = t + e.duration
    for q in e.qubits:
        for other in state.timelines[q]:
            if other is not e and other.start < end and t < other.end:
                return False
    edge = e.link()
    if edge is not None:
        concurrent = sum(
            1
            for other in state.by_edge[edge]
            if other is not e and other.start < end and t < other.end
        )
        if concurrent >= state.topology.links_per_edge:
            return False
    if foreign_dst:
        # the chip must retain a free slot after the earlier placement
        peak = state.occupancy.max_count(e.chips[1], t, e.start)
        if peak + 1 > state.topology.epr_capacity - 1:
            return False
    return True


def _shift_one(e: Instr, state: _EesState) -> bool:
    """Walk ``e`` earlier along event boundaries; stop at the first violation."""
    ready = dependency_ready_time(e, state.dag, state.gate_instr)
    if ready >= e.start:
        return False
    dur = e.duration
    old_start = e.start
    schedule = state.schedule

    boundaries = {ready}
    for q in e.qubits:
        for other in state.timelines[q]:
            if other is not e and ready <= other.end < old_start:
                boundaries.add(other.end)
    edge = e.link()
    if edge is not None:
        for other in state.by_edge[edge]:
            if other is e:
                continue
            for t in (other.end, other.start - dur):
                if ready <= t < old_start:
                    boundaries.add(t)
    foreign_dst = e.kind == RELOCATE and e.chips[1] != schedule.home[e.qubits[0]]
    if foreign_dst:
        dst = e.chips[1]
        for t in state.occupancy.arrivals[dst] + state.occupancy.departures[dst]:
            if ready <= t < old_start:
                boundaries.add(t)

    best = None
    for t in sorted(boundaries, reverse=True):
        if not _legal_at(e, t, state, foreign_dst):
            break
        best = t
    if best is None or best >= old_start:
        return False

    if e.kind == RELOCATE:
        q = e.qubits[0]
        src, dst = e.chips
        if dst != schedule.home[q]:
            state.occupancy.shift_arrival(dst, old_start, best)
        if src != schedule.home[q]:
            state.occupancy.shift_departure(src, old_start + dur, best + dur)
    e.start = best
    return True


def shift_early(
    e: Instr, schedule: Schedule, dag: GateDag | None, topology: Topology
) -> bool:
    """Standalone single-instruction shift (rebuilds the resource view)."""
    return _shift_one(e, _EesState(schedule, dag, topology))


def run_ees(schedule: Schedule, dag: GateDag | None, topology: Topology) -> Schedule:
    """Single pass over all early-executable instructions, soonest first."""
    state = _EesState(schedule, dag, topology)
    for _, e in collect_early(schedule, dag):
        _shift_one(e, state)
    return schedule
