"""End-to-end compilation: mapping, block formation, scheduling, timing."""
from __future__ import annotations

from dataclasses import dataclass

from .arch import Topology
from .baseline import schedule_blockgreedy, schedule_pergate
from .blockform import Block, CostParams, form_blocks
from .circuit import GateDag
from .ees import run_ees
from .instructions import Schedule
from .mapping import Layout, map_circuit
from .umschedule import run_ums
from .validate import ErrorConfig, Metrics, Violation, compute_metrics, simulate_latency, validate

SCHEDULERS = ("ums", "blockgreedy", "pergate")


@dataclass
class CompileResult:
    schedule: Schedule
    metrics: Metrics
    layout: Layout
    blocks: list[Block] | None
    violation: Violation | None
    trace: list | None = None


def compile_circuit(
    dag: GateDag,
    topology: Topology,
    scheduler: str = "ums",
    mapper: str = "mincut",
    params: CostParams | None = None,
    use_ees: bool | None = None,
    epr_hide: float | None = None,
    seed: int = 0,
    error_config: ErrorConfig | None = ErrorConfig(),
    collect_trace: bool = False,
) -> CompileResult:
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    if use_ees is None:
        # baselines schedule teleports on demand; early scheduling is ours
        use_ees = scheduler == "ums"
    params = params or CostParams()
    layout = map_circuit(dag, topology, mapper=mapper, seed=seed)
    trace: list | None = [] if collect_trace else None

    blocks: list[Block] | None = None
    if scheduler == "pergate":
        schedule = schedule_pergate(dag, layout, topology, params)
    else:
        blocks = form_blocks(dag, layout, topology, params)
        if scheduler == "blockgreedy":
            schedule = schedule_blockgreedy(dag, blocks, layout, topology, params)
        else:
            schedule = run_ums(dag, blocks, layout, topology, params, trace=trace)

    simulate_latency(schedule, dag, topology, h=epr_hide)
    extras = {"scheduler": scheduler, "seed": seed}
    if use_ees:
        pre = compute_metrics(schedule, dag)
        extras["pre_ees_makespan_ns"] = pre.makespan_ns
        extras["pre_ees_relocate_concurrency_per_ms"] = (
            pre.relocate_concurrency_per_ms
        )
        run_ees(schedule, dag, topology)

    violation = validate(schedule, dag, topology)
    metrics = compute_metrics(schedule, dag, error_config=error_config)
    metrics.extras.update(extras)
    return CompileResult(
        schedule=schedule,
        metrics=metrics,
        layout=layout,
        blocks=blocks,
        violation=violation,
        trace=trace,
    )
