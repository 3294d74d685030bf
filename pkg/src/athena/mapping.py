"""Initial qubit placement: partitioning, chip assignment, slot packing.

Partitioning is multilevel recursive bisection with KL/FM-style refinement;
chip assignment is exact (branch and bound over injections) for small grids
and simulated annealing beyond. Everything is deterministic under a seed.
"""
from __future__ import annotations

import random
from bisect import insort
from dataclasses import dataclass

from .arch import Topology
from .circuit import GateDag
from .errors import InfeasibleError


@dataclass
class InteractionGraph:
    """Program qubits with CNOT-count edge weights (symmetric)."""

    n: int
    weights: dict[tuple[int, int], int]

    def neighbors(self) -> list[dict[int, int]]:
        adj: list[dict[int, int]] = [{} for _ in range(self.n)]
        for (u, v), w in self.weights.items():
            adj[u][v] = w
            adj[v][u] = w
        return adj


def interaction_graph(dag: GateDag) -> InteractionGraph:
    weights: dict[tuple[int, int], int] = {}
    for g in dag.gates:
        if g.is_cnot:
            a, b = sorted(g.qubits)
            weights[(a, b)] = weights.get((a, b), 0) + 1
    return InteractionGraph(dag.qubit_count, weights)


class Layout:
    """Time-varying map from program qubits to (chip, slot).

    A qubit away from its home chip occupies one communication slot there
    (an *external resident*); its home compute slot stays reserved. Only
    external residents count against a chip's EPR capacity.
    """

    __slots__ = ("topology", "home", "home_slot", "chip", "slot", "externals", "_free")

    def __init__(self, topology: Topology, assignment: list[int]):
        loads: dict[int, int] = {}
        for q, c in enumerate(assignment):
            loads[c] = loads.get(c, 0) + 1
        for c, load in loads.items():
            if load > topology.compute_qubits:
                raise InfeasibleError(
                    f"chip {c} holds {load} qubits but has "
                    f"{topology.compute_qubits} compute slots"
                )
        self.topology = topology
        self.home = tuple(assignment)
        self.chip = list(assignment)
        slots: list[int] = [0] * len(assignment)
        counter: dict[int, int] = {}
        for q in range(len(assignment)):
            c = assignment[q]
            slots[q] = counter.get(c, 0)
            counter[c] = slots[q] + 1
        self.home_slot = tuple(slots)
        self.slot = list(slots)
        self.externals: list[set[int]] = [set() for _ in topology.chips()]
        comm0 = topology.compute_qubits
        self._free: list[list[int]] = [
            list(range(comm0, comm0 + topology.epr_capacity)) for _ in topology.chips()
        ]

    def clone(self) -> "Layout":
        other = Layout.__new__(Layout)
        other.topology = self.topology
        other.home = self.home
        other.home_slot = self.home_slot
        other.chip = list(self.chip)
        other.slot = list(self.slot)
        other.externals = [set(s) for s in self.externals]
        other._free = [list(f) for f in self._free]
        return other

    def chip_of(self, q: int) -> int:
        return self.chip[q]

    def is_external(self, q: int) -> bool:
        return self.chip[q] != self.home[q]

    def free_comm(self, chip: int) -> int:
        return len(self._free[chip])

    def key(self) -> tuple[int, ...]:
        """Canonical layout identity; comm-slot identity is folded out."""
        return tuple(self.chip)

    def move(self, q: int, dst: int) -> None:
        src = self.chip[q]
        if dst == src:
            return
        if src != self.home[q]:
            self.externals[src].remove(q)
            insort(self._free[src], self.slot[q])
        if dst == self.home[q]:
            self.slot[q] = self.home_slot[q]
        else:
            if not self._free[dst]:
                raise RuntimeError(f"no free communication slot on chip {dst}")
            self.externals[dst].add(q)
            self.slot[q] = self._free[dst].pop(0)
        self.chip[q] = dst


# --- partitioning ------------------------------------------------------------

def _cut_weight(weights: dict[tuple[int, int], int], side: list[int]) -> int:
    return sum(w for (u, v), w in weights.items() if side[u] != side[v])


class _Graph:
    """Coarsenable weighted graph for one bisection problem."""

    def __init__(self, node_weights: list[int], adj: list[dict[int, int]]):
        self.node_weights = node_weights
        self.adj = adj

    @property
    def n(self) -> int:
        return len(self.node_weights)


def _coarsen(g: _Graph, rng: random.Random) -> tuple[_Graph, list[int]]:
    """Heavy-edge matching; returns coarse graph and node->coarse map."""
    order = list(range(g.n))
    rng.shuffle(order)
    matched = [-1] * g.n
    coarse_of = [-1] * g.n
    nxt = 0
    for u in order:
        if matched[u] >= 0:
            continue
        best, best_w = -1, 0
        for v, w in sorted(g.adj[u].items()):
            if matched[v] < 0 and w > best_w:
                best, best_w = v, w
        matched[u] = u
        coarse_of[u] = nxt
        if best >= 0:
            matched[best] = u
            coarse_of[best] = nxt
        nxt += 1
    node_weights = [0] * nxt
    adj: list[dict[int, int]] = [{} for _ in range(nxt)]
    for u in range(g.n):
        node_weights[coarse_of[u]] += g.node_weights[u]
        for v, w in g.adj[u].items():
            cu, cv = coarse_of[u], coarse_of[v]
            if cu != cv:
                adj[cu][cv] = adj[cu].get(cv, 0) + w
    # each undirected edge was visited twice
    for d in adj:
        for v in d:
            d[v] //= 2
    return _Graph(node_weights, adj), coarse_of


def _grow_bisection(g: _Graph, cap_l: int, cap_r: int, rng: random.Random) -> list[int]:
    """Greedy region growing from a random seed node; 0 = left side."""
    side = [1] * g.n
    seed = rng.randrange(g.n)
    size_l = 0
    gain = {seed: 0}
    while gain:
        u = max(sorted(gain), key=lambda x: gain[x])
        del gain[u]
        if size_l + g.node_weights[u] > cap_l:
            continue
        side[u] = 0
        size_l += g.node_weights[u]
        for v, w in g.adj[u].items():
            if side[v] == 1:
                gain[v] = gain.get(v, 0) + w
        if size_l >= cap_l:
            break
    if sum(g.node_weights[u] for u in range(g.n) if side[u] == 1) > cap_r:
        # force-feed left side with the smallest remaining nodes
        rest = sorted((u for u in range(g.n) if side[u] == 1), key=lambda u: g.node_weights[u])
        size_r = sum(g.node_weights[u] for u in rest)
        for u in rest:
            if size_r <= cap_r:
                break
            if size_l + g.node_weights[u] <= cap_l:
                side[u] = 0
                size_l += g.node_weights[u]
                size_r -= g.node_weights[u]
    return side


def _refine(g: _Graph, side: list[int], cap_l: int, cap_r: int) -> None:
    """KL-style passes: best move-or-swap sequence, keep the best prefix."""
    sizes = [0, 0]
    for u in range(g.n):
        sizes[side[u]] += g.node_weights[u]

    def move_gain(u: int) -> int:
        ext = intw = 0
        for v, w in g.adj[u].items():
            if side[v] == side[u]:
                intw += w
            else:
                ext += w
        return ext - intw

    caps = [cap_l, cap_r]
    for _ in range(8):  # pass limit; loop exits early when no gain
        locked = [False] * g.n
        trail: list[tuple[int, ...]] = []
        delta = best_delta = 0
        best_len = 0
        while True:
            gains = [(move_gain(u), u) for u in range(g.n) if not locked[u]]
            if not gains:
                break
            best_action = None  # (gain, kind, nodes)
            for gain, u in sorted(gains, reverse=True)[:12]:
                other = 1 - side[u]
                if sizes[other] + g.node_weights[u] <= caps[other]:
                    best_action = (gain, "move", (u,))
                    break
            top = sorted(gains, reverse=True)[:12]
            for g1, u in top:
                for g2, v in top:
                    if side[u] == side[v] or u == v:
                        continue
                    pair_gain = g1 + g2 - 2 * g.adj[u].get(v, 0)
                    su, sv = side[u], side[v]
                    ok = (
                        sizes[su] - g.node_weights[u] + g.node_weights[v] <= caps[su]
                        and sizes[sv] - g.node_weights[v] + g.node_weights[u] <= caps[sv]
                    )
                    if ok and (best_action is None or pair_gain > best_action[0]):
                        best_action = (pair_gain, "swap", (u, v))
            if best_action is None:
                break
            gain, kind, nodes = best_action
            for u in nodes:
                sizes[side[u]] -= g.node_weights[u]
                side[u] = 1 - side[u]
                sizes[side[u]] += g.node_weights[u]
                locked[u] = True
            trail.append(nodes)
            delta += gain
            if delta > best_delta:
                best_delta = delta
                best_len = len(trail)
        # roll back past the best prefix
        for nodes in reversed(trail[best_len:]):
            for u in nodes:
                sizes[side[u]] -= g.node_weights[u]
                side[u] = 1 - side[u]
                sizes[side[u]] += g.node_weights[u]
        if best_delta <= 0:
            break


def _bisect(g: _Graph, cap_l: int, cap_r: int, rng: random.Random) -> list[int]:
    if sum(g.node_weights) > cap_l + cap_r:
        raise InfeasibleError("partition capacities are too small")
    levels: list[tuple[_Graph, list[int]]] = []
    cur = g
    while cur.n > 24:
        coarse, mapping = _coarsen(cur, rng)
        if coarse.n >= cur.n:
            break
        levels.append((cur, mapping))
        cur = coarse

    best_side: list[int] | None = None
    best_cut = None
    for _ in range(4):
        side = _grow_bisection(cur, cap_l, cap_r, rng)
        _refine(cur, side, cap_l, cap_r)
        cut = sum(
            w
            for u in range(cur.n)
            for v, w in cur.adj[u].items()
            if u < v and side[u] != side[v]
        )
        if best_cut is None or cut < best_cut:
            best_cut, best_side = cut, side
    side = best_side or []

    for fine, mapping in reversed(levels):
        side = [side[mapping[u]] for u in range(fine.n)]
        _refine(fine, side, cap_l, cap_r)
    return side


def partition_mincut(
    graph: InteractionGraph, parts: int, capacity: int, seed: int = 0
) -> list[int]:
    """Balanced min-cut partition into ``parts`` parts of <= ``capacity``."""
    if parts * capacity < graph.n:
        raise InfeasibleError(
            f"{parts} parts of {capacity} cannot hold {graph.n} qubits"
        )
    rng = random.Random(f"mincut:{seed}")
    assignment = [0] * graph.n
    adj = graph.neighbors()

    def recurse(nodes: list[int], part_lo: int, part_hi: int) -> None:
        k = part_hi - part_lo
        if not nodes:
            return
        if k == 1:
            for u in nodes:
                assignment[u] = part_lo
            return
        kl = (k + 1) // 2
        kr = k - kl
        index = {u: i for i, u in enumerate(nodes)}
        sub_adj: list[dict[int, int]] = [{} for _ in nodes]
        for u in nodes:
            for v, w in adj[u].items():
                if v in index:
                    sub_adj[index[u]][index[v]] = w
        sub = _Graph([1] * len(nodes), sub_adj)
        side = _bisect(sub, kl * capacity, kr * capacity, rng)
        left = [u for u in nodes if side[index[u]] == 0]
        right = [u for u in nodes if side[index[u]] == 1]
        recurse(left, part_lo, part_lo + kl)
        recurse(right, part_lo + kl, part_hi)

    recurse(list(range(graph.n)), 0, parts)
    return assignment


def partition_trivial(graph: InteractionGraph, parts: int, capacity: int) -> list[int]:
    """Pack qubits into parts in id order (baseline mapper)."""
    if parts * capacity < graph.n:
        raise InfeasibleError(
            f"{parts} parts of {capacity} cannot hold {graph.n} qubits"
        )
    return [min(q // capacity, parts - 1) for q in range(graph.n)]


# --- chip assignment ---------------------------------------------------------

def part_graph(graph: InteractionGraph, assignment: list[int]) -> dict[tuple[int, int], int]:
    """Inter-part CNOT weights under a qubit->part assignment."""
    out: dict[tuple[int, int], int] = {}
    for (u, v), w in graph.weights.items():
        pu, pv = assignment[u], assignment[v]
        if pu != pv:
            key = (min(pu, pv), max(pu, pv))
            out[key] = out.get(key, 0) + w
    return out


def _assignment_cost(
    weights: dict[tuple[int, int], int], chip_of: dict[int, int], topology: Topology
) -> int:
    return sum(
        w * topology.hops(chip_of[p], chip_of[q]) for (p, q), w in weights.items()
    )


def assign_chips(
    weights: dict[tuple[int, int], int],
    parts: int,
    topology: Topology,
    seed: int = 0,
) -> list[int]:
    """Map parts to chips minimizing sum(w * hops); exact for <= 9 chips."""
    chips = list(topology.chips())
    if parts > len(chips):
        raise InfeasibleError(f"{parts} parts > {len(chips)} chips")
    if len(chips) <= 9:
        return _assign_exact(weights, parts, topology)
    return _assign_anneal(weights, parts, topology, seed)


def _assign_exact(
    weights: dict[tuple[int, int], int], parts: int, topology: Topology
) -> list[int]:
    incident: list[list[tuple[int, int]]] = [[] for _ in range(parts)]
    for (p, q), w in weights.items():
        incident[p].append((q, w))
        incident[q].append((p, w))
    order = sorted(
        range(parts), key=lambda p: -sum(w for _, w in incident[p])
    )
    best_cost = None
    best: list[int] = []
    chip_of = [-1] * parts
    used = [False] * topology.n_chips

    def dfs(i: int, cost: int) -> None:
        nonlocal best_cost, best
        if best_cost is not None and cost >= best_cost:
            return
        if i == parts:
            best_cost, best = cost, chip_of.copy()
            return
        p = order[i]
        for c in topology.chips():
            if used[c]:
                continue
            extra = sum(
                w * topology.hops(c, chip_of[q])
                for q, w in incident[p]
                if chip_of[q] >= 0
            )
            used[c] = True
            chip_of[p] = c
            dfs(i + 1, cost + extra)
            chip_of[p] = -1
            used[c] = False

    dfs(0, 0)
    return best


def _assign_anneal(
    weights: dict[tuple[int, int], int], parts: int, topology: Topology, seed: int
) -> list[int]:
    rng = random.Random(f"assign:{seed}")
    chips = list(topology.chips())
    chip_of = {p: chips[p] for p in range(parts)}
    spare = chips[parts:]
    cost = _assignment_cost(weights, chip_of, topology)
    best = dict(chip_of)
    best_cost = cost
    temp = max(1.0, cost / 4)
    for step in range(4000):
        p = rng.randrange(parts)
        if spare and rng.random() < 0.3:
            c_new = spare[rng.randrange(len(spare))]
            swap_with = None
        else:
            q = rng.randrange(parts)
            if q == p:
                continue
            swap_with = q
            c_new = chip_of[q]
        old = dict(chip_of)
        if swap_with is None:
            spare.remove(c_new)
            spare.append(chip_of[p])
            chip_of[p] = c_new
        else:
            chip_of[p], chip_of[swap_with] = chip_of[swap_with], chip_of[p]
        new_cost = _assignment_cost(weights, chip_of, topology)
        accept = new_cost <= cost or rng.random() < pow(
            2.718281828, -(new_cost - cost) / max(temp, 1e-9)
        )
        if accept:
            cost = new_cost
            if cost < best_cost:
                best_cost, best = cost, dict(chip_of)
        else:
            if swap_with is None:
                spare.remove(old[p])
                spare.append(chip_of[p])
            chip_of = old
        temp *= 0.999
    return [best[p] for p in range(parts)]


def initial_layout(qubit_part: list[int], part_chip: list[int], topology: Topology) -> Layout:
    """Pack qubits into compute slots of their assigned chips, in id order."""
    return Layout(topology, [part_chip[qubit_part[q]] for q in range(len(qubit_part))])


def map_circuit(
    dag: GateDag, topology: Topology, mapper: str = "mincut", seed: int = 0
) -> Layout:
    """Full mapping pipeline: partition, assign chips, pack slots."""
    graph = interaction_graph(dag)
    parts = topology.n_chips
    cap = topology.compute_qubits
    if mapper == "mincut":
        qubit_part = partition_mincut(graph, parts, cap, seed)
        part_chip = assign_chips(part_graph(graph, qubit_part), parts, topology, seed)
    elif mapper == "trivial":
        # id-order packing onto chips in index order, no optimization
        qubit_part = partition_trivial(graph, parts, cap)
        part_chip = list(range(parts))
    else:
        raise ValueError(f"unknown mapper {mapper!r}")
    return initial_layout(qubit_part, part_chip, topology)
