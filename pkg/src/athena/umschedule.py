"""Utility-driven lookahead with multi-candidate block scheduling.

The engine keeps up to ``w`` candidate schedules. Each candidate owns a
layout, a persistent (cons-list) instruction trail, and its realized
teleportation cost. Non-local gates branch candidates across relocation
targets and Re-CNOT; pruning ranks by realized cost plus the decayed
estimate of what the remaining gates in the scheduling group will cost.

Everything here is deterministic: sets are iterated sorted and ties break
on the canonical layout key.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .arch import Topology
from .blockform import Block, CostParams
from .circuit import Gate, GateDag
from .errors import DeadlockError
from .instructions import (
    LOCAL_CNOT,
    RECNOT,
    RELOCATE,
    UNARY,
    Instr,
    Schedule,
)
from .mapping import Layout


@dataclass(frozen=True)
class Plan:
    """One way to make a gate executable: relocate operands or Re-CNOT."""

    kind: str  # "local" | "reloc" | "recnot"
    target: int | None = None


@dataclass
class SchedulingGroup:
    current: Block
    lookahead: list[Block]

    def __len__(self) -> int:
        return 1 + len(self.lookahead)


class Candidate:
    """One node of the solution tree: layout + schedule trail + costs.

    ``teff`` is the realized teleportation cost of the trail; ``score``
    additionally accumulates each scheduled gate's decayed future estimate
    and is what pruning ranks by.
    """

    __slots__ = (
        "layout", "cell", "last_on", "tokens", "teff", "score", "future", "length",
    )

    def __init__(self, layout: Layout):
        self.layout = layout
        self.cell = None  # cons list: (Instr, prev_cell)
        self.last_on: dict[int, Instr] = {}
        self.tokens: list[list[Instr | None]] = [
            [None] * layout.topology.epr_capacity for _ in layout.topology.chips()
        ]
        self.teff = 0.0
        self.score = 0.0
        self.future = 0.0
        self.length = 0

    def clone(self) -> "Candidate":
        other = Candidate.__new__(Candidate)
        other.layout = self.layout.clone()
        other.cell = self.cell
        other.last_on = dict(self.last_on)
        other.tokens = [list(t) for t in self.tokens]
        other.teff = self.teff
        other.score = self.score
        other.future = self.future
        other.length = self.length
        return other

    def key(self) -> tuple[int, ...]:
        return self.layout.key()

    def rank(self) -> tuple:
        return (self.score, self.key())

    def emit(self, instr: Instr, extra_deps: tuple = ()) -> Instr:
        deps = []
        for q in instr.qubits:
            prev = self.last_on.get(q)
            if prev is not None and prev not in deps:
                deps.append(prev)
        for d in extra_deps:
            if d is not None and d not in deps:
                deps.append(d)
        instr.deps = tuple(deps)
        for q in instr.qubits:
            self.last_on[q] = instr
        self.cell = (instr, self.cell)
        self.length += 1
        return instr

    def relocate_hop(
        self, q: int, dst: int, block: int | None, for_gate: int | None, eviction: bool
    ) -> Instr:
        lay = self.layout
        src = lay.chip_of(q)
        token_dep = None
        if dst != lay.home[q]:
            token = self.tokens[dst].pop(0)
            token_dep = token
        instr = Instr(
            RELOCATE, (q,), (src, dst),
            for_gate=for_gate, block=block, eviction=eviction,
        )
        self.emit(instr, (token_dep,))
        if src != lay.home[q]:
            self.tokens[src].append(instr)
        lay.move(q, dst)
        self.teff += 1.0
        return instr

    def instructions(self) -> list[Instr]:
        out = []
        cell = self.cell
        while cell is not None:
            out.append(cell[0])
            cell = cell[1]
        out.reverse()
        return out


class RunCtx:
    """Shared immutable state for one scheduling run."""

    def __init__(
        self, dag: GateDag, blocks: list[Block], topology: Topology, params: CostParams
    ):
        self.dag = dag
        self.blocks = blocks
        self.topology = topology
        self.params = params
        # per-qubit CNOT use positions in scheduling order, for eviction policy
        self.uses: dict[int, list[tuple[int, int]]] = {}
        for b in blocks:
            for idx, gid in enumerate(b.gates):
                g = dag.gates[gid]
                if g.is_cnot:
                    for q in g.qubits:
                        self.uses.setdefault(q, []).append((b.id, idx))

    def next_use(self, q: int, pos: tuple[int, int]) -> tuple[int, int] | None:
        uses = self.uses.get(q)
        if not uses:
            return None
        i = bisect_right(uses, pos)
        return uses[i] if i < len(uses) else None


def lookahead_window(current: Block, blocks: list[Block], k: int) -> SchedulingGroup:
    """Scan forward, collecting up to k future blocks that overlap ``current``."""
    out: list[Block] = []
    for b in blocks[current.id + 1:]:
        if len(out) >= k:
            break
        if current.qubits & b.qubits:
            out.append(b)
    return SchedulingGroup(current, out)


def future_cost(
    layout: Layout, remaining: list[tuple[Gate, int]], topology: Topology, beta: float
) -> float:
    """Decay-weighted estimate of the remaining group gates' teleport costs."""
    total = 0.0
    for gate, d in remaining:
        a, b = gate.qubits
        hop = topology.hops(layout.chip_of(a), layout.chip_of(b))
        if hop:
            total += (beta ** d) * hop
    return total


def enumerate_plans(
    g: Gate, remaining: list[tuple[Gate, int]], layout: Layout, topology: Topology
) -> list[Plan]:
    """Candidate execution plans for ``g`` under ``layout``."""
    ca, cb = layout.chip_of(g.qubits[0]), layout.chip_of(g.qubits[1])
    if ca == cb:
        return [Plan("local")]
    targets = {ca, cb}
    for gate, _ in remaining:
        for q in gate.qubits:
            targets.add(layout.chip_of(q))
    plans = [Plan("reloc", t) for t in sorted(targets)]
    if topology.hops(ca, cb) == 1:
        plans.append(Plan("recnot"))
    return plans


def _feasible_victim_path(
    layout: Layout, v: int, target: int
) -> tuple[int, ...] | None:
    """First shortest path along which ``v`` can move with no evictions."""
    for path in layout.topology.shortest_paths(layout.chip_of(v), target):
        if all(
            dst == layout.home[v] or layout.free_comm(dst) >= 1 for dst in path[1:]
        ):
            return path
    return None


def epr_release(
    cand: Candidate,
    chip: int,
    ctx: RunCtx,
    remaining: list[tuple[Gate, int]],
    pos: tuple[int, int],
    block: int | None,
    for_gate: int | None,
    exclude: frozenset[int] = frozenset(),
    benefit: bool = True,
    cascade: bool = True,
) -> Instr | None:
    """Evict one external resident of ``chip`` to free a communication slot.

    Prefers a qubit whose relocation lands where its next gate in the group
    needs it; falls back to the resident with the farthest next use, sent
    home; as a last resort any resident goes to the nearest chip that can
    take it, releasing one blocked transit chip on the way if required.
    Returns the first eviction instruction, or None on deadlock (the caller
    discards the candidate, so partial moves are harmless).
    """
    lay = cand.layout
    residents = [q for q in sorted(lay.externals[chip]) if q not in exclude]
    if not residents:
        return None

    if benefit:
        scored = []
        for v in residents:
            for order, (gate, _) in enumerate(remaining):
                if v in gate.qubits:
                    other = gate.qubits[0] if gate.qubits[1] == v else gate.qubits[1]
                    target = lay.chip_of(other)
                    if target != chip:
                        scored.append((order, v, target))
                    break
        for _, v, target in sorted(scored):
            path = _feasible_victim_path(lay, v, target)
            if path is not None:
                return _evict_along(cand, v, path, block, for_gate)

    def farthest_key(v: int):
        nxt = ctx.next_use(v, pos)
        if nxt is None:
            return (0, (0, 0), v)
        return (1, (-nxt[0], -nxt[1]), v)

    victims = sorted(residents, key=farthest_key)
    for v in victims:
        path = _feasible_victim_path(lay, v, lay.home[v])
        if path is not None:
            return _evict_along(cand, v, path, block, for_gate)
    # last resort: any resident, nearest chip that can take it
    for v in victims:
        for dest in sorted(
            (c for c in lay.topology.chips() if c != chip),
            key=lambda c: (lay.topology.hops(chip, c), c),
        ):
            if dest != lay.home[v] and lay.free_comm(dest) < 1:
                continue
            path = _feasible_victim_path(lay, v, dest)
            if path is not None:
                return _evict_along(cand, v, path, block, for_gate)
    if not cascade:
        return None
    # gridlock: clear one transit chip with a nested release, then retry
    for v in victims:
        for dest in sorted(
            (c for c in lay.topology.chips() if c != chip),
            key=lambda c: (lay.topology.hops(chip, c), c),
        ):
            if dest != lay.home[v] and lay.free_comm(dest) < 1:
                continue
            for path in lay.topology.shortest_paths(chip, dest):
                blocked = [
                    d for d in path[1:] if d != lay.home[v] and lay.free_comm(d) < 1
                ]
                if len(blocked) != 1:
                    continue
                inner = epr_release(
                    cand, blocked[0], ctx, remaining, pos, block, for_gate,
                    exclude=exclude | {v}, benefit=False, cascade=False,
                )
                if inner is not None:
                    return _evict_along(cand, v, path, block, for_gate)
    return None


def _evict_along(
    cand: Candidate,
    q: int,
    path: tuple[int, ...],
    block: int | None,
    for_gate: int | None,
) -> Instr:
    first = None
    for dst in path[1:]:
        instr = cand.relocate_hop(q, dst, block, for_gate, eviction=True)
        if first is None:
            first = instr
    return first


def _pick_route(layout: Layout, q: int, target: int) -> tuple[int, ...]:
    """Shortest path needing the fewest EPR releases from the current layout."""
    paths = layout.topology.shortest_paths(layout.chip_of(q), target)
    if len(paths) == 1:
        return paths[0]
    home = layout.home[q]

    def releases(path: tuple[int, ...]) -> int:
        return sum(
            1 for dst in path[1:] if dst != home and layout.free_comm(dst) == 0
        )

    return min(paths, key=lambda p: (releases(p), p))


def move_qubit(
    cand: Candidate,
    q: int,
    target: int,
    ctx: RunCtx,
    remaining: list[tuple[Gate, int]],
    pos: tuple[int, int],
    block: int | None,
    for_gate: int | None,
    exclude: frozenset[int],
    benefit: bool = True,
) -> int | None:
    """Relocate ``q`` to ``target`` hop by hop, evicting when a chip is full.

    Full chips along the route are released before the move starts, while
    the network still has slack for the victims. Returns None on success,
    or the chip id that deadlocked.
    """
    lay = cand.layout
    path = _pick_route(lay, q, target)
    for _ in range(2):
        for dst in path[1:]:
            if dst != lay.home[q] and lay.free_comm(dst) == 0:
                freed = epr_release(
                    cand, dst, ctx, remaining, pos, block, for_gate,
                    exclude=exclude | {q}, benefit=benefit,
                )
                if freed is None:
                    return dst
        if all(
            dst == lay.home[q] or lay.free_comm(dst) >= 1 for dst in path[1:]
        ):
            break
    for dst in path[1:]:
        if dst != lay.home[q] and lay.free_comm(dst) == 0:
            return dst  # a victim re-filled the route
        cand.relocate_hop(q, dst, block, for_gate, eviction=False)
    return None


def expand_plan(
    parent: Candidate,
    g: Gate,
    plan: Plan,
    ctx: RunCtx,
    remaining: list[tuple[Gate, int]],
    pos: tuple[int, int],
    block: int,
    benefit_eviction: bool = True,
) -> tuple[Candidate, float] | int:
    """Apply ``plan`` on a clone of ``parent``.

    Returns (child, total cost) where total cost is the realized teleport
    cost of the plan (including evictions) plus the decayed future estimate;
    or the deadlocked chip id when the plan is infeasible.
    """
    child = parent.clone()
    lay = child.layout
    a, b = g.qubits
    if plan.kind == "recnot":
        ca, cb = lay.chip_of(a), lay.chip_of(b)
        child.emit(Instr(RECNOT, (a, b), (ca, cb), gate=g.id, block=block))
        child.teff += ctx.params.alpha
    elif plan.kind == "reloc":
        exclude = frozenset(g.qubits)
        for q in (a, b):
            if lay.chip_of(q) != plan.target:
                blocked = move_qubit(
                    child, q, plan.target, ctx, remaining, pos, block, g.id,
                    exclude, benefit=benefit_eviction,
                )
                if blocked is not None:
                    return blocked
        _emit_local(child, g, block)
    else:
        _emit_local(child, g, block)
    child.future = future_cost(lay, remaining, ctx.topology, ctx.params.beta)
    total = (child.teff - parent.teff) + child.future
    child.score = child.teff + child.future
    return child, total


def gate_cost(
    parent: Candidate,
    g: Gate,
    plan: Plan,
    ctx: RunCtx,
    remaining: list[tuple[Gate, int]],
    pos: tuple[int, int] = (0, 0),
    block: int = 0,
) -> float:
    """Total scheduling cost of one plan: C_g + C_EPR + C_R."""
    result = expand_plan(parent, g, plan, ctx, remaining, pos, block)
    if isinstance(result, int):
        return float("inf")
    return result[1]


def _emit_local(cand: Candidate, g: Gate, block: int) -> None:
    lay = cand.layout
    a, b = g.qubits
    chip = lay.chip_of(a)
    if lay.chip_of(b) != chip:
        raise RuntimeError(f"gate {g.id} is not local after plan application")
    cand.emit(
        Instr(
            LOCAL_CNOT, (a, b), (chip,), gate=g.id, block=block,
            adjacent_slots=abs(lay.slot[a] - lay.slot[b]) == 1,
        )
    )


def schedule_block(
    group: SchedulingGroup,
    layer: list[Candidate],
    ctx: RunCtx,
    w: int,
    trace: list | None = None,
    benefit_eviction: bool = True,
) -> list[Candidate]:
    """Schedule every gate of the current block across all candidates."""
    C = group.current
    dag = ctx.dag
    la_rem = [
        (dag.gates[gid], b.id - C.id) for b in group.lookahead for gid in b.cnot_gates
    ]
    later_cnots = [gid for gid in C.gates if dag.gates[gid].is_cnot]

    for idx, gid in enumerate(C.gates):
        g = dag.gates[gid]
        if not g.is_cnot:
            for cand in layer:
                chip = cand.layout.chip_of(g.qubits[0])
                cand.emit(Instr(UNARY, g.qubits, (chip,), gate=gid, block=C.id))
            continue
        later_cnots.remove(gid)
        remaining = [(dag.gates[x], 0) for x in later_cnots] + la_rem
        pos = (C.id, idx)

        plan_sets = [
            enumerate_plans(g, remaining, cand.layout, ctx.topology) for cand in layer
        ]
        if all(len(ps) == 1 and ps[0].kind == "local" for ps in plan_sets):
            for cand in layer:
                _emit_local(cand, g, C.id)
            continue

        children: list[tuple[Candidate, float]] = []
        blocked_chips: list[int] = []
        for cand, plans in zip(layer, plan_sets):
            for plan in plans:
                result = expand_plan(
                    cand, g, plan, ctx, remaining, pos, C.id, benefit_eviction
                )
                if isinstance(result, int):
                    blocked_chips.append(result)
                else:
                    children.append(result)
        if not children:
            raise DeadlockError(min(blocked_chips) if blocked_chips else -1)

        by_key: dict[tuple, Candidate] = {}
        for child, _ in children:
            key = child.key()
            held = by_key.get(key)
            if held is None or child.rank() < held.rank():
                by_key[key] = child
        pruned = sorted(by_key.values(), key=Candidate.rank)[:w]
        if trace is not None:
            trace.append(
                {
                    "block": C.id,
                    "gate": gid,
                    "width": len(pruned),
                    "costs": [round(c.score, 6) for c in pruned],
                    "teff": [round(c.teff, 6) for c in pruned],
                }
            )
        layer = pruned
    return layer


def best_schedule(layer: list[Candidate]) -> Candidate:
    if not layer:
        raise ValueError("empty solution tree")
    return min(layer, key=lambda c: (c.teff, c.key()))


def run_ums(
    dag: GateDag,
    blocks: list[Block],
    layout0: Layout,
    topology: Topology,
    params: CostParams,
    w: int | None = None,
    k: int | None = None,
    trace: list | None = None,
    benefit_eviction: bool = True,
) -> Schedule:
    """Schedule all blocks; returns the cheapest retained candidate's stream."""
    w = params.beam_width if w is None else w
    k = params.window if k is None else k
    ctx = RunCtx(dag, blocks, topology, params)
    layer = [Candidate(layout0.clone())]
    for C in blocks:
        group = lookahead_window(C, blocks, k)
        layer = schedule_block(group, layer, ctx, w, trace, benefit_eviction)
    winner = best_schedule(layer)
    instrs = winner.instructions()
    _fill_exec_chips(blocks, instrs)
    return Schedule(
        instrs=instrs,
        qubit_count=dag.qubit_count,
        home=layout0.home,
        alpha=params.alpha,
        meta={"scheduler_teff": winner.teff},
    )


def _fill_exec_chips(blocks: list[Block], instrs: list[Instr]) -> None:
    votes: dict[int, dict[int, int]] = {}
    for i in instrs:
        if i.kind == LOCAL_CNOT and i.block is not None:
            tally = votes.setdefault(i.block, {})
            tally[i.chips[0]] = tally.get(i.chips[0], 0) + 1
    for b in blocks:
        tally = votes.get(b.id)
        if tally:
            b.exec_chip = min(
                sorted(tally), key=lambda c: (-tally[c], c)
            )
