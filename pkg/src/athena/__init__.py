"""Teleportation-aware scheduling compiler for distributed quantum computers."""

from .arch import EprModel, TimingModel, Topology, load_topology
from .blockform import Block, CostParams, form_blocks
from .circuit import Gate, GateDag, build_dag, frontier, parse_circuit
from .instructions import Instr, Schedule
from .mapping import Layout, map_circuit, partition_mincut
from .pipeline import CompileResult, compile_circuit
from .validate import Metrics, compute_metrics, simulate_latency, validate

__version__ = "0.1.0"

__all__ = [
    "Block",
    "CompileResult",
    "CostParams",
    "EprModel",
    "Gate",
    "GateDag",
    "Instr",
    "Layout",
    "Metrics",
    "Schedule",
    "TimingModel",
    "Topology",
    "build_dag",
    "compile_circuit",
    "compute_metrics",
    "form_blocks",
    "frontier",
    "load_topology",
    "map_circuit",
    "parse_circuit",
    "partition_mincut",
    "simulate_latency",
    "validate",
]
