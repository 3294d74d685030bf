"""Group CNOTs into blocks by iterative fusion under the block cost rule.

A block grows while merging stays no more expensive than scheduling the
pieces separately and while the block still fits the EPR capacity of the
chip it is expected to execute on. Unary gates are attached afterwards for
timing purposes only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .arch import Topology
from .circuit import GateDag
from .mapping import Layout

INF = math.inf


@dataclass
class CostParams:
    alpha: float = 1.77
    beta: float = 0.871
    beam_width: int = 16
    window: int = 4
    max_block: int = 64
    scan_limit: int = 512

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
        if self.window < 0:
            raise ValueError("lookahead window must be >= 0")


@dataclass
class Block:
    id: int
    gates: list[int]                      # gate ids in program order, unaries included
    cnot_gates: list[int]
    qubits: frozenset[int]                # CNOT operands only
    exec_chip: int | None = None          # filled during scheduling
    cost_by_chip: dict[int, float] = field(default_factory=dict)

    def is_local_only(self, relocated: set[int]) -> bool:
        return not (self.qubits & relocated)


def overlap_qubits(block_a: Block, block_b: Block) -> frozenset[int]:
    return block_a.qubits & block_b.qubits


def _chip_plan(
    block_qubits, layout: Layout, chip: int, topology: Topology, alpha: float, gates
) -> tuple[float, int]:
    """(cost, external need) of the cheapest plan executing on ``chip``.

    Relocation pays one unit per hop; a qubit may instead stay put and pay
    alpha per gate when all its gates pair with a chip-resident operand
    across an adjacent link.
    """
    cost = 0.0
    need = len(layout.externals[chip])
    moved: set[int] = set()
    gates_on: dict[int, list] = {}
    if gates is not None:
        for g in gates:
            if g.is_cnot:
                for q in g.qubits:
                    gates_on.setdefault(q, []).append(g)
    for q in sorted(block_qubits):
        src = layout.chip_of(q)
        if src == chip:
            continue
        reloc = topology.hops(src, chip)
        stay = INF
        if gates is not None and reloc == 1:
            mine = gates_on.get(q, [])
            if mine and all(
                layout.chip_of(other) == chip
                for g in mine
                for other in g.qubits
                if other != q
            ):
                stay = alpha * len(mine)
        if stay < reloc:
            cost += stay
            need += 1  # the Re-CNOT halves hold a communication slot too
        else:
            cost += reloc
            moved.add(q)
            if layout.home[q] != chip:
                need += 1
    return cost, need, moved


def block_cost(
    block_qubits,
    layout: Layout,
    chip: int,
    topology: Topology,
    alpha: float,
    gates=None,
) -> float:
    """Cheapest execution cost on ``chip``; infinity when the arriving
    external qubits would not fit the chip's EPR capacity."""
    cost, need, _ = _chip_plan(block_qubits, layout, chip, topology, alpha, gates)
    if need > topology.epr_capacity:
        return INF
    return cost


def best_chip_cost(
    block_qubits, layout: Layout, topology: Topology, alpha: float, gates=None
) -> tuple[float, int, int, set[int]]:
    """(cost, chip, need, relocated qubits) of the cheapest feasible chip."""
    best = (INF, -1, 0, set())
    for chip in topology.chips():
        cost, need, moved = _chip_plan(
            block_qubits, layout, chip, topology, alpha, gates
        )
        if need <= topology.epr_capacity and cost < best[0]:
            best = (cost, chip, need, moved)
    return best


def _cnot_preds(dag: GateDag) -> list[tuple[int, ...]]:
    """Immediate CNOT ancestors, looking through unary chains."""
    out: list[tuple[int, ...]] = []
    for g in dag.gates:
        acc: set[int] = set()
        for p in dag.preds[g.id]:
            if dag.gates[p].is_cnot:
                acc.add(p)
            else:
                acc.update(out[p])
        out.append(tuple(sorted(acc)))
    return out


def form_blocks(
    dag: GateDag, layout: Layout, topology: Topology, params: CostParams
) -> list[Block]:
    """Block Formation: fuse overlapping CNOTs while cost and capacity allow."""
    cnot_preds = _cnot_preds(dag)
    cnot_ids = [g.id for g in dag.gates if g.is_cnot]
    assigned: set[int] = set()
    blocks: list[Block] = []
    alpha = params.alpha

    def gather(
        c_gates: list[int], c_qubits: set[int], moved: set[int]
    ) -> list[int]:
        """Next candidate gate: the first non-local CNOT sharing a qubit
        with C, or local CNOT touching a qubit the current plan relocates
        (merging keeps it local). Fusion proceeds one gate per round."""
        in_c = set(c_gates)
        scanned = 0
        for gid in cnot_ids:
            if gid in assigned or gid in in_c:
                continue
            scanned += 1
            if scanned > params.scan_limit:
                break
            g = dag.gates[gid]
            qs = set(g.qubits)
            if not (c_qubits & qs):
                continue
            a, b = g.qubits
            if layout.chip_of(a) == layout.chip_of(b) and not (moved & qs):
                continue
            if all(p in assigned or p in in_c for p in cnot_preds[gid]):
                return [gid]
        return []

    def cost_of(gids: list[int]) -> float:
        qubits = {q for gid in gids for q in dag.gates[gid].qubits}
        gates = [dag.gates[gid] for gid in gids]
        return best_chip_cost(qubits, layout, topology, alpha, gates)[0]

    pos = 0
    while True:
        while pos < len(cnot_ids) and cnot_ids[pos] in assigned:
            pos += 1
        if pos >= len(cnot_ids):
            break
        c_gates = [cnot_ids[pos]]
        c_qubits = set(dag.gates[cnot_ids[pos]].qubits)

        while len(c_gates) < params.max_block:
            c_cost, c_chip, c_need, c_moved = best_chip_cost(
                c_qubits, layout, topology, alpha, [dag.gates[i] for i in c_gates]
            )
            if c_need >= topology.epr_capacity:
                break  # expected chip is already at capacity
            d_gates = gather(c_gates, c_qubits, c_moved)
            if not d_gates:
                break
            merged = False
            while d_gates:
                merged_ids = c_gates + d_gates
                merged_qubits = c_qubits | {
                    q for gid in d_gates for q in dag.gates[gid].qubits
                }
                m_cost = best_chip_cost(
                    merged_qubits,
                    layout,
                    topology,
                    alpha,
                    [dag.gates[i] for i in merged_ids],
                )[0]
                if m_cost <= c_cost + cost_of(d_gates):
                    c_gates = merged_ids
                    c_qubits = merged_qubits
                    merged = True
                    break
                d_gates.pop()
            if not merged:
                break

        c_gates.sort()
        assigned.update(c_gates)
        blocks.append(
            Block(
                id=len(blocks),
                gates=list(c_gates),
                cnot_gates=list(c_gates),
                qubits=frozenset(
                    q for gid in c_gates for q in dag.gates[gid].qubits
                ),
            )
        )

    _attach_unaries(dag, blocks)
    for b in blocks:
        b.cost_by_chip = {
            chip: block_cost(
                b.qubits, layout, chip, topology, alpha,
                [dag.gates[i] for i in b.cnot_gates],
            )
            for chip in topology.chips()
        }
    return blocks


def _attach_unaries(dag: GateDag, blocks: list[Block]) -> None:
    if not blocks:
        if any(not g.is_cnot for g in dag.gates):
            blocks.append(
                Block(
                    id=0,
                    gates=[g.id for g in dag.gates],
                    cnot_gates=[],
                    qubits=frozenset(),
                )
            )
        return
    block_of: dict[int, int] = {}
    for b in blocks:
        for gid in b.cnot_gates:
            block_of[gid] = b.id
    cnots_by_qubit: dict[int, list[int]] = {}
    for g in dag.gates:
        if g.is_cnot:
            for q in g.qubits:
                cnots_by_qubit.setdefault(q, []).append(g.id)
    for g in dag.gates:
        if g.is_cnot:
            continue
        q = g.qubits[0]
        chain = cnots_by_qubit.get(q, [])
        nxt = next((c for c in chain if c > g.id), None)
        if nxt is not None:
            target = block_of[nxt]
        else:
            prev = next((c for c in reversed(chain) if c < g.id), None)
            target = block_of[prev] if prev is not None else blocks[-1].id
        blocks[target].gates.append(g.id)
    for b in blocks:
        b.gates.sort()
