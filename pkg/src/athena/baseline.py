"""Comparison schedulers.

``blockgreedy`` reimplements the block-committing greedy scheduler the
multi-candidate engine generalizes: one candidate, no lookahead past the
current block. ``pergate`` resolves every non-local CNOT independently
along the shortest relocation path.
"""
from __future__ import annotations

from .arch import Topology
from .blockform import Block, CostParams
from .circuit import GateDag
from .errors import DeadlockError
from .instructions import Instr, Schedule, UNARY
from .mapping import Layout
from .umschedule import Candidate, RunCtx, _emit_local, move_qubit, run_ums


def schedule_blockgreedy(
    dag: GateDag,
    blocks: list[Block],
    layout0: Layout,
    topology: Topology,
    params: CostParams,
) -> Schedule:
    """Greedy single-candidate block scheduling: the engine with w=1, k=0."""
    return run_ums(dag, blocks, layout0, topology, params, w=1, k=0)


def schedule_pergate(
    dag: GateDag, layout0: Layout, topology: Topology, params: CostParams
) -> Schedule:
    """Schedule each non-local CNOT independently.

    The lower-id operand relocates to the other operand's chip (hop counts
    tie by symmetry); evictions pick the resident with the farthest next
    use. Each gate is its own commit unit.
    """
    ctx = RunCtx(dag, _gate_blocks(dag), topology, params)
    cand = Candidate(layout0.clone())
    for g in dag.gates:
        block = g.id
        if not g.is_cnot:
            chip = cand.layout.chip_of(g.qubits[0])
            cand.emit(Instr(UNARY, g.qubits, (chip,), gate=g.id, block=block))
            continue
        a, b = g.qubits
        ca, cb = cand.layout.chip_of(a), cand.layout.chip_of(b)
        if ca != cb:
            lo, hi = (a, b) if a < b else (b, a)
            attempts = (
                (lo, cand.layout.chip_of(hi)),
                (hi, cand.layout.chip_of(lo)),
            )
            blocked = None
            for mover, target in attempts:
                trial = cand.clone()
                blocked = move_qubit(
                    trial, mover, target, ctx, [], (block, 0), block, g.id,
                    frozenset(g.qubits), benefit=False,
                )
                if blocked is None:
                    cand = trial
                    break
            if blocked is not None:
                raise DeadlockError(blocked)
        _emit_local(cand, g, block)
    return Schedule(
        instrs=cand.instructions(),
        qubit_count=dag.qubit_count,
        home=layout0.home,
        alpha=params.alpha,
        meta={"scheduler_teff": cand.teff},
    )


def _gate_blocks(dag: GateDag) -> list[Block]:
    """One single-gate block per gate, for next-use bookkeeping."""
    blocks = []
    for g in dag.gates:
        blocks.append(
            Block(
                id=g.id,
                gates=[g.id],
                cnot_gates=[g.id] if g.is_cnot else [],
                qubits=frozenset(g.qubits if g.is_cnot else ()),
            )
        )
    return blocks
