"""DQC topology, resource budgets, and the hardware timing model.

All durations are integer nanoseconds internally; config files use
microseconds. Chips form a rows x cols nearest-neighbor grid, indexed
row-major. Each chip splits its qubits into compute slots (program qubits)
and communication slots (EPR halves / external residents).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

try:  # py3.11+
    import tomllib as _toml
except ImportError:  # pragma: no cover
    import tomli as _toml

US = 1_000  # microseconds -> ns


def _us(x: float) -> int:
    return round(x * US)


@dataclass(frozen=True)
class EprModel:
    """Bernoulli repeat-until-success entanglement generation."""

    p_attempt: float = 1 / 8
    n_attempts: int = 52
    t_load_ns: int = _us(100)
    t_pump_ns: int = _us(1.1)
    t_bsm_attempt_ns: int = _us(1)
    t_depump_ns: int = _us(6)
    t_unload_ns: int = _us(100)


def epr_success_prob(model: EprModel, n: int | None = None) -> float:
    """1 - (1-p)^n after n attempts."""
    if n is None:
        n = model.n_attempts
    if n < 0:
        raise ValueError("attempt count must be >= 0")
    return 1.0 - (1.0 - model.p_attempt) ** n


def epr_generation_latency(model: EprModel) -> int:
    """Load + pump + n BSM attempts + depump + unload, in ns."""
    return (
        model.t_load_ns
        + model.t_pump_ns
        + model.n_attempts * model.t_bsm_attempt_ns
        + model.t_depump_ns
        + model.t_unload_ns
    )


@dataclass(frozen=True)
class TimingModel:
    """Operation latencies for a neutral-atom style DQC (ns)."""

    t_1q: int = _us(52)
    t_2q: int = 360
    t_atom_transfer: int = _us(15)
    t_atom_move: int = _us(300)
    t_measure: int = _us(1000)
    t_epr_gen: int = _us(259.1)
    t_relocate: int = _us(1300)
    t_recnot: int = _us(2300)
    epr_hide_fraction: float = 1.0

    def __post_init__(self):
        for name in (
            "t_1q", "t_2q", "t_atom_transfer", "t_atom_move",
            "t_measure", "t_epr_gen", "t_relocate", "t_recnot",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"timing.{name} must be > 0")
        if not 0.0 <= self.epr_hide_fraction <= 1.0:
            raise ConfigError("epr hide fraction must be in [0, 1]")

    @property
    def alpha_derived(self) -> float:
        return self.t_recnot / self.t_relocate


def effective_epr_overhead(timing: TimingModel, h: float | None = None) -> int:
    """Unhidden EPR-generation time prepended to each teleportation (ns)."""
    if h is None:
        h = timing.epr_hide_fraction
    if not 0.0 <= h <= 1.0:
        raise ValueError("h must be in [0, 1]")
    return round((1.0 - h) * timing.t_epr_gen)


@dataclass(frozen=True)
class Topology:
    rows: int
    cols: int
    chip_qubits: int
    compute_fraction: float = 0.90
    links_per_edge: int = 1
    timing: TimingModel = field(default_factory=TimingModel)
    epr: EprModel = field(default_factory=EprModel)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid must have at least one chip")
        if self.compute_qubits < 1:
            raise ConfigError("compute capacity per chip must be >= 1")
        if self.epr_capacity < 1:
            raise ConfigError("EPR capacity per chip is zero")
        if self.links_per_edge < 1:
            raise ConfigError("links_per_edge must be >= 1")
        object.__setattr__(self, "_dist", _bfs_distances(self.rows, self.cols))
        object.__setattr__(self, "_paths", {})

    @property
    def n_chips(self) -> int:
        return self.rows * self.cols

    @property
    def compute_qubits(self) -> int:
        return math.floor(self.compute_fraction * self.chip_qubits)

    @property
    def epr_capacity(self) -> int:
        return self.chip_qubits - self.compute_qubits

    def chips(self) -> range:
        return range(self.n_chips)

    def neighbors(self, chip: int) -> list[int]:
        r, c = divmod(chip, self.cols)
        out = []
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < self.rows and 0 <= nc < self.cols:
                out.append(nr * self.cols + nc)
        return out

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for chip in self.chips():
            for nb in self.neighbors(chip):
                if nb > chip:
                    out.append((chip, nb))
        return out

    def hops(self, a: int, b: int) -> int:
        return self._dist[a][b]

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Canonical shortest chip path a..b (lowest-index neighbor first)."""
        path = [a]
        cur = a
        while cur != b:
            cur = min(
                (nb for nb in self.neighbors(cur) if self.hops(nb, b) < self.hops(cur, b))
            )
            path.append(cur)
        return path

    def shortest_paths(self, a: int, b: int) -> tuple[tuple[int, ...], ...]:
        """All shortest chip paths a..b, lexicographically ordered."""
        cached = self._paths.get((a, b))
        if cached is not None:
            return cached
        out: list[tuple[int, ...]] = []

        def walk(prefix: list[int]) -> None:
            cur = prefix[-1]
            if cur == b:
                out.append(tuple(prefix))
                return
            for nb in self.neighbors(cur):
                if self.hops(nb, b) < self.hops(cur, b):
                    walk(prefix + [nb])

        walk([a])
        result = tuple(sorted(out))
        self._paths[(a, b)] = result
        return result


def _bfs_distances(rows: int, cols: int) -> tuple[tuple[int, ...], ...]:
    # Manhattan distance on a full grid; kept as a table for fast lookups.
    n = rows * cols
    out = []
    for a in range(n):
        ra, ca = divmod(a, cols)
        out.append(
            tuple(abs(ra - rb) + abs(ca - cb) for rb, cb in (divmod(b, cols) for b in range(n)))
        )
    return tuple(out)


def hops(topology: Topology, chip_a: int, chip_b: int) -> int:
    return topology.hops(chip_a, chip_b)


# --- configuration ----------------------------------------------------------

_TIMING_KEYS = {
    "t_1q": "t_1q", "t_2q": "t_2q", "t_atom_transfer": "t_atom_transfer",
    "t_atom_move": "t_atom_move", "t_measure": "t_measure",
    "t_epr_gen": "t_epr_gen", "t_relocate": "t_relocate", "t_recnot": "t_recnot",
}


def topology_from_dict(doc: dict) -> Topology:
    timing_doc = doc.get("timing", {})
    kwargs = {}
    for key, attr in _TIMING_KEYS.items():
        if key in timing_doc:
            kwargs[attr] = _us(timing_doc[key])
    if "epr_hide_fraction" in timing_doc:
        kwargs["epr_hide_fraction"] = timing_doc["epr_hide_fraction"]

    epr_doc = doc.get("epr", {})
    epr_kwargs = {}
    if "p_attempt" in epr_doc:
        epr_kwargs["p_attempt"] = epr_doc["p_attempt"]
    if "n_attempts" in epr_doc:
        epr_kwargs["n_attempts"] = epr_doc["n_attempts"]
    for key in ("t_load", "t_pump", "t_bsm_attempt", "t_depump", "t_unload"):
        if key in epr_doc:
            epr_kwargs[key + "_ns"] = _us(epr_doc[key])
    epr = EprModel(**epr_kwargs)
    if "t_epr_gen" not in timing_doc and epr_kwargs:
        kwargs["t_epr_gen"] = epr_generation_latency(epr)

    try:
        return Topology(
            rows=doc["rows"],
            cols=doc["cols"],
            chip_qubits=doc["qubits_per_chip"],
            compute_fraction=doc.get("compute_fraction", 0.90),
            links_per_edge=doc.get("links_per_edge", 1),
            timing=TimingModel(**kwargs),
            epr=epr,
        )
    except KeyError as exc:
        raise ConfigError(f"topology config missing key {exc}") from exc


def load_topology(source: str, fmt: str | None = None) -> Topology:
    """Parse a TOML or JSON topology config string."""
    if fmt is None:
        fmt = "json" if source.lstrip().startswith("{") else "toml"
    if fmt == "json":
        doc = json.loads(source)
    elif fmt == "toml":
        doc = _toml.loads(source)
    else:
        raise ValueError(f"unknown config format {fmt!r}")
    return topology_from_dict(doc)


def load_topology_file(path: str) -> Topology:
    fmt = "json" if str(path).endswith(".json") else "toml"
    with open(path, "rb") as fh:
        return load_topology(fh.read().decode("utf-8"), fmt)
