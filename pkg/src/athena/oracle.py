"""Exhaustive minimal-teleportation-cost search for tiny instances.

The search runs over primitive actions: single-hop relocations (legal when
the destination is the qubit's home chip or has a free communication slot),
Re-CNOTs across adjacent chips, and free local executions. Every schedule
the compiler can emit is a sequence of these primitives, so the optimum
here lower-bounds every scheduler. A* over (done-set, chip vector) states
with an admissible per-gate distance bound keeps it fast.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from .arch import Topology
from .blockform import _cnot_preds
from .circuit import GateDag
from .errors import InfeasibleError
from .instructions import Instr, RECNOT, Schedule, UNARY
from .mapping import Layout
from .umschedule import Candidate, _emit_local


@dataclass(frozen=True)
class OracleLimits:
    max_chips: int = 3
    max_qubits: int = 8
    max_cnots: int = 12
    max_capacity: int = 2


def optimal_teff(
    dag: GateDag,
    layout: Layout,
    topology: Topology,
    alpha: float = 1.77,
    limits: OracleLimits = OracleLimits(),
) -> tuple[float, Schedule]:
    """Globally minimal effective teleportation cost, with a witness."""
    cnot_ids = [g.id for g in dag.gates if g.is_cnot]
    if topology.n_chips > limits.max_chips:
        raise InfeasibleError(f"{topology.n_chips} chips exceed oracle limits")
    if dag.qubit_count > limits.max_qubits:
        raise InfeasibleError(f"{dag.qubit_count} qubits exceed oracle limits")
    if len(cnot_ids) > limits.max_cnots:
        raise InfeasibleError(f"{len(cnot_ids)} CNOTs exceed oracle limits")
    if topology.epr_capacity > limits.max_capacity:
        raise InfeasibleError("EPR capacity exceeds oracle limits")

    bit_of = {gid: i for i, gid in enumerate(cnot_ids)}
    preds = _cnot_preds(dag)
    home = layout.home
    nq = dag.qubit_count
    cap = topology.epr_capacity
    all_done = (1 << len(cnot_ids)) - 1
    qubits_of = {gid: dag.gates[gid].qubits for gid in cnot_ids}

    def closure(done: int, chips: tuple[int, ...]) -> tuple[int, tuple]:
        """Execute every ready co-located gate; records (gid, chip) actions."""
        acts = []
        changed = True
        while changed:
            changed = False
            for gid in cnot_ids:
                bit = 1 << bit_of[gid]
                if done & bit:
                    continue
                if any(not (done >> bit_of[p]) & 1 for p in preds[gid] if p in bit_of):
                    continue
                a, b = qubits_of[gid]
                if chips[a] == chips[b]:
                    done |= bit
                    acts.append(("local", gid, chips[a]))
                    changed = True
        return done, tuple(acts)

    def heuristic(done: int, chips: tuple[int, ...]) -> float:
        worst = 0
        for gid in cnot_ids:
            if (done >> bit_of[gid]) & 1:
                continue
            a, b = qubits_of[gid]
            worst = max(worst, topology.hops(chips[a], chips[b]))
        return float(worst)

    def externals(chips: tuple[int, ...], chip: int) -> int:
        return sum(1 for q in range(nq) if chips[q] == chip and home[q] != chip)

    start_chips = tuple(layout.chip[q] for q in range(nq))
    done0, acts0 = closure(0, start_chips)
    start_state = (done0, start_chips)

    dist: dict[tuple, float] = {start_state: 0.0}
    parent: dict[tuple, tuple] = {start_state: (None, acts0)}
    heap: list[tuple[float, float, tuple]] = []
    heapq.heappush(heap, (heuristic(*start_state), 0.0, start_state))

    goal = None
    while heap:
        _, cost, state = heapq.heappop(heap)
        if cost > dist.get(state, float("inf")):
            continue
        done, chips = state
        if done == all_done:
            goal = state
            break

        moves: list[tuple[float, tuple, tuple]] = []
        # single-hop relocations
        for q in range(nq):
            for dst in topology.neighbors(chips[q]):
                if dst != home[q] and externals(chips, dst) >= cap:
                    continue
                new_chips = list(chips)
                new_chips[q] = dst
                new_chips = tuple(new_chips)
                nd, acts = closure(done, new_chips)
                moves.append(
                    (1.0, (nd, new_chips), (("relocate", q, chips[q], dst),) + acts)
                )
        # Re-CNOTs for ready gates on adjacent chips
        for gid in cnot_ids:
            bit = 1 << bit_of[gid]
            if done & bit:
                continue
            if any(not (done >> bit_of[p]) & 1 for p in preds[gid] if p in bit_of):
                continue
            a, b = qubits_of[gid]
            if topology.hops(chips[a], chips[b]) == 1:
                nd, acts = closure(done | bit, chips)
                moves.append(
                    (
                        alpha,
                        (nd, chips),
                        (("recnot", gid, chips[a], chips[b]),) + acts,
                    )
                )

        for step_cost, nxt, acts in moves:
            new_cost = cost + step_cost
            if new_cost < dist.get(nxt, float("inf")) - 1e-12:
                dist[nxt] = new_cost
                parent[nxt] = (state, acts)
                heapq.heappush(heap, (new_cost + heuristic(*nxt), new_cost, nxt))

    if goal is None:
        raise InfeasibleError("oracle search exhausted without completing the DAG")

    actions: list[tuple] = []
    state = goal
    while state is not None:
        prev, acts = parent[state]
        actions = list(acts) + actions
        state = prev
    return dist[goal], _witness(dag, layout, actions, alpha)


def _witness(dag: GateDag, layout: Layout, actions: list[tuple], alpha: float) -> Schedule:
    cand = Candidate(layout.clone())
    done: set[int] = set()

    def flush_unaries() -> None:
        # a unary is emitted as soon as all its predecessors have executed
        changed = True
        while changed:
            changed = False
            for g in dag.gates:
                if g.is_cnot or g.id in done:
                    continue
                if all(p in done for p in dag.preds[g.id]):
                    chip = cand.layout.chip_of(g.qubits[0])
                    cand.emit(Instr(UNARY, g.qubits, (chip,), gate=g.id))
                    done.add(g.id)
                    changed = True

    flush_unaries()
    for act in actions:
        if act[0] == "relocate":
            _, q, _src, dst = act
            cand.relocate_hop(q, dst, None, None, eviction=False)
            continue
        if act[0] == "recnot":
            _, gid, ca, cb = act
            g = dag.gates[gid]
            cand.emit(Instr(RECNOT, g.qubits, (ca, cb), gate=gid))
            cand.teff += alpha
        else:
            _, gid, _chip = act
            _emit_local(cand, dag.gates[gid], None)
        done.add(gid)
        flush_unaries()
    return Schedule(
        instrs=cand.instructions(),
        qubit_count=dag.qubit_count,
        home=layout.home,
        alpha=alpha,
        meta={"scheduler_teff": cand.teff},
    )
