"""Hardware description and per-weight cost derivation for MRAM/SRAM PIM clusters.

Latencies are in ns, powers in mW, energies in pJ (mW x ns = pJ).
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


SPACE_ORDER = ("HP-MRAM", "HP-SRAM", "LP-MRAM", "LP-SRAM")
CLUSTER_ORDER = ("HP", "LP")
DEFAULT_ARCHS = ("baseline", "hetero", "hybrid", "hhpim")


class ConfigError(ValueError):
    """Raised for malformed or physically invalid hardware descriptions."""


class MemoryKind(str, Enum):
    MRAM = "MRAM"
    SRAM = "SRAM"


@dataclass(frozen=True)
class MemoryTech:
    kind: MemoryKind
    read_latency_ns: float
    write_latency_ns: float
    dynamic_read_mw: float
    dynamic_write_mw: float
    static_mw: float
    # per module; a cluster holds module_count banks of this size
    capacity_bytes: int

    def __post_init__(self):
        if self.read_latency_ns <= 0 or self.write_latency_ns <= 0:
            raise ConfigError(f"{self.kind.value}: latencies must be > 0")
        if self.dynamic_read_mw < 0 or self.dynamic_write_mw < 0 or self.static_mw < 0:
            raise ConfigError(f"{self.kind.value}: powers must be >= 0")
        if self.capacity_bytes <= 0:
            raise ConfigError(f"{self.kind.value}: capacity must be > 0")

    @property
    def read_energy_pj(self) -> float:
        return self.dynamic_read_mw * self.read_latency_ns

    @property
    def write_energy_pj(self) -> float:
        return self.dynamic_write_mw * self.write_latency_ns


@dataclass(frozen=True)
class PeSpec:
    op_latency_ns: float
    dynamic_mw: float
    static_mw: float

    def __post_init__(self):
        if self.op_latency_ns <= 0:
            raise ConfigError("PE op latency must be > 0")
        if self.dynamic_mw < 0 or self.static_mw < 0:
            raise ConfigError("PE powers must be >= 0")


@dataclass(frozen=True)
class ClusterSpec:
    name: str
    vdd_volts: float
    module_count: int
    mram: MemoryTech
    sram: MemoryTech
    pe: PeSpec

    def __post_init__(self):
        if self.name not in CLUSTER_ORDER:
            raise ConfigError(f"unknown cluster {self.name!r}")
        if self.module_count < 1:
            raise ConfigError(f"{self.name}: module_count must be >= 1")
        if self.vdd_volts <= 0:
            raise ConfigError(f"{self.name}: vdd must be > 0")

    def memory(self, kind: MemoryKind | str) -> MemoryTech:
        return self.mram if MemoryKind(kind) is MemoryKind.MRAM else self.sram

    @property
    def pe_static_mw(self) -> float:
        """PE standby power of the whole cluster."""
        return self.pe.static_mw * self.module_count


@dataclass(frozen=True)
class MoveCost:
    time_ns: float
    energy_pj: float


@dataclass(frozen=True)
class StorageSpace:
    """One placeable target with the per-weight costs the optimizer works on.

    ``t_per_weight_ns`` is the serviceable time of one weight-MAC in the
    cluster (modules work in parallel), ``e_per_weight_pj`` the dynamic
    energy of one memory read plus one PE MAC.
    """

    id: str
    cluster: str
    t_per_weight_ns: float
    e_per_weight_pj: float
    static_mw_when_active: float
    capacity_weights: int
    move_read: MoveCost
    move_write: MoveCost

    def __post_init__(self):
        if self.t_per_weight_ns <= 0 or self.e_per_weight_pj <= 0:
            raise ConfigError(f"{self.id}: per-weight time and energy must be > 0")
        if self.capacity_weights <= 0:
            raise ConfigError(f"{self.id}: capacity of zero weights")

    @property
    def kind(self) -> MemoryKind:
        return MemoryKind(self.id.split("-")[1])


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    clusters: tuple[ClusterSpec, ...]
    available_spaces: tuple[str, ...]
    weight_bytes: int = 1
    source: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if not 1 <= len(self.clusters) <= 2:
            raise ConfigError(f"{self.name}: need 1 or 2 clusters")
        names = [c.name for c in self.clusters]
        if len(set(names)) != len(names):
            raise ConfigError(f"{self.name}: duplicate cluster names")
        if not self.available_spaces:
            raise ConfigError(f"{self.name}: no available spaces")
        for sid in self.available_spaces:
            if sid not in SPACE_ORDER:
                raise ConfigError(f"{self.name}: unknown space {sid!r}")
            if sid.split("-")[0] not in names:
                raise ConfigError(f"{self.name}: space {sid} has no {sid.split('-')[0]} cluster")
        if len(set(self.available_spaces)) != len(self.available_spaces):
            raise ConfigError(f"{self.name}: duplicate spaces")
        if self.weight_bytes <= 0:
            raise ConfigError(f"{self.name}: weight_bytes must be > 0")

    def cluster(self, name: str) -> ClusterSpec:
        for c in self.clusters:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def spaces_in_order(self) -> tuple[str, ...]:
        return tuple(s for s in SPACE_ORDER if s in self.available_spaces)

    def config_hash(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:12]


def derive_cost_model(arch: ArchitectureSpec) -> list[StorageSpace]:
    """Build one :class:`StorageSpace` per available space, in canonical order."""
    spaces = []
    for sid in arch.spaces_in_order:
        cname, kind = sid.split("-")
        cluster = arch.cluster(cname)
        mem = cluster.memory(kind)
        m = cluster.module_count
        pe = cluster.pe
        spaces.append(StorageSpace(
            id=sid,
            cluster=cname,
            t_per_weight_ns=(mem.read_latency_ns + pe.op_latency_ns) / m,
            e_per_weight_pj=mem.read_energy_pj + pe.dynamic_mw * pe.op_latency_ns,
            static_mw_when_active=mem.static_mw * m,
            capacity_weights=(mem.capacity_bytes * m) // arch.weight_bytes,
            move_read=MoveCost(mem.read_latency_ns / m, mem.read_energy_pj),
            move_write=MoveCost(mem.write_latency_ns / m, mem.write_energy_pj),
        ))
    return spaces


def static_power(allocation, spaces: list[StorageSpace], arch: ArchitectureSpec) -> float:
    """Standby power (mW) of an allocation with power gating.

    Spaces holding no weights are gated; a cluster's PEs are gated when the
    cluster holds nothing.
    """
    if len(allocation) != len(spaces):
        raise ValueError("allocation length does not match spaces")
    total = 0.0
    active_clusters = set()
    for x, sp in zip(allocation, spaces):
        if x < 0:
            raise ValueError("negative allocation")
        if x > 0:
            total += sp.static_mw_when_active
            active_clusters.add(sp.cluster)
    for c in arch.clusters:
        if c.name in active_clusters:
            total += c.pe_static_mw
    return total


# -- config files -----------------------------------------------------------

def _memory_from(d: dict, kind: MemoryKind, where: str) -> MemoryTech:
    try:
        return MemoryTech(
            kind=kind,
            read_latency_ns=float(d["read_latency_ns"]),
            write_latency_ns=float(d["write_latency_ns"]),
            dynamic_read_mw=float(d["dynamic_read_mw"]),
            dynamic_write_mw=float(d["dynamic_write_mw"]),
            static_mw=float(d["static_mw"]),
            capacity_bytes=int(d["capacity_bytes"]),
        )
    except KeyError as e:
        raise ConfigError(f"{where}: missing key {e.args[0]!r}") from None


def arch_from_dict(doc: dict, source: str = "") -> ArchitectureSpec:
    where = source or "<config>"
    try:
        arch = doc["architecture"]
        cluster_docs = doc["cluster"]
    except KeyError as e:
        raise ConfigError(f"{where}: missing section [{e.args[0]}]") from None
    clusters = []
    for cname in CLUSTER_ORDER:
        if cname not in cluster_docs:
            continue
        cd = cluster_docs[cname]
        w = f"{where} [cluster.{cname}]"
        try:
            pe = cd["pe"]
            clusters.append(ClusterSpec(
                name=cname,
                vdd_volts=float(cd["vdd_volts"]),
                module_count=int(cd["module_count"]),
                mram=_memory_from(cd["mram"], MemoryKind.MRAM, w + ".mram"),
                sram=_memory_from(cd["sram"], MemoryKind.SRAM, w + ".sram"),
                pe=PeSpec(float(pe["op_latency_ns"]), float(pe["dynamic_mw"]), float(pe["static_mw"])),
            ))
        except KeyError as e:
            raise ConfigError(f"{w}: missing key {e.args[0]!r}") from None
    extra = set(cluster_docs) - set(CLUSTER_ORDER)
    if extra:
        raise ConfigError(f"{where}: unknown cluster section(s) {sorted(extra)}")
    try:
        return ArchitectureSpec(
            name=str(arch["name"]),
            clusters=tuple(clusters),
            available_spaces=tuple(arch["available_spaces"]),
            weight_bytes=int(arch.get("weight_bytes", 1)),
            source=source,
        )
    except KeyError as e:
        raise ConfigError(f"{where}: missing key {e.args[0]!r} in [architecture]") from None


def loads_arch(text: str, source: str = "") -> ArchitectureSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # message carries "(at line N, column M)"
        raise ConfigError(f"{source or '<config>'}: {e}") from None
    return arch_from_dict(doc, source)


def load_arch(path_or_name: str | Path) -> ArchitectureSpec:
    """Load an architecture file, or one of the bundled defaults by name."""
    p = Path(path_or_name)
    if p.suffix != ".toml" and str(path_or_name) in DEFAULT_ARCHS:
        text = resources.files("hhpim.configs").joinpath(f"{path_or_name}.toml").read_text()
        return loads_arch(text, source=f"{path_or_name}.toml")
    if not p.exists():
        raise ConfigError(f"{p}: no such architecture file")
    return loads_arch(p.read_text(), source=str(p))


def default_archs() -> list[ArchitectureSpec]:
    return [load_arch(name) for name in DEFAULT_ARCHS]
