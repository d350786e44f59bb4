"""Time-slice execution of a task stream on one architecture.

Tasks arriving during slice ``j`` are buffered and run back to back in
slice ``j + 1``.  At the start of each slice the placement is looked up
for the per-task budget, weights are moved, and energy is booked as
migration + dynamic (per task) + standby (per slice, with power gating).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from hhpim.model import SPACE_ORDER, ArchitectureSpec, derive_cost_model, static_power
from hhpim.placement import (AllocationLut, PerformanceUnattainable, TimeGrid,
                             build_lut, lookup_allocation, solve, task_time_ns)
from hhpim.workload import ModelProfile, TaskStream

# share of the slice kept free for weight movement when sizing slices
MIGRATION_RESERVE = 0.02
FIXED_POINT_ITERS = 6


class SliceOverrun(ValueError):
    """Fixed overheads alone fill the slice."""


@dataclass(frozen=True)
class SliceConfig:
    T_ns: float
    max_inferences: int = 10
    slice_count: int = 50
    budget_fraction: float = 0.01

    def __post_init__(self):
        if not self.T_ns > 0:
            raise ValueError("T_ns must be > 0")
        if self.max_inferences < 1 or self.slice_count < 1:
            raise ValueError("max_inferences and slice_count must be >= 1")
        if not 0 <= self.budget_fraction < 1:
            raise ValueError("budget_fraction must be in [0, 1)")

    @property
    def solver_budget_ns(self) -> float:
        return self.budget_fraction * self.T_ns


def derive_t_constraint(n_tasks: int, T_ns: float, migration_ns: float = 0.0,
                        solver_budget_ns: float = 0.0) -> float:
    if n_tasks < 0:
        raise ValueError("negative task count")
    if migration_ns < 0 or solver_budget_ns < 0:
        raise ValueError("negative overhead")
    if migration_ns + solver_budget_ns >= T_ns:
        raise SliceOverrun(f"overheads {migration_ns + solver_budget_ns:.4g} ns fill slice of {T_ns:.4g} ns")
    if n_tasks == 0:
        return math.inf
    return (T_ns - migration_ns - solver_budget_ns) / n_tasks


@dataclass(frozen=True)
class MigrationPlan:
    moves: tuple[tuple[str, str, int], ...]  # (source, destination, weights)
    time_ns: float
    energy_pj: float

    @property
    def moved(self) -> int:
        return sum(n for _, _, n in self.moves)


def plan_migration(old: Sequence[int], new: Sequence[int], spaces) -> MigrationPlan:
    """Move surplus weights to spaces that lack them, cheapest pairs first.

    A move costs one read at the source and one write at the destination.
    Each cluster serializes its own reads and writes; clusters overlap.
    """
    if len(old) != len(spaces) or len(new) != len(spaces):
        raise ValueError("placement length does not match spaces")
    if sum(old) != sum(new):
        raise ValueError(f"weight count mismatch: {sum(old)} vs {sum(new)}")
    if any(v < 0 for v in old) or any(v < 0 for v in new):
        raise ValueError("negative placement")
    surplus = {p: o - n for p, (o, n) in enumerate(zip(old, new)) if o > n}
    deficit = {p: n - o for p, (o, n) in enumerate(zip(old, new)) if n > o}
    pairs = sorted(((spaces[s].move_read.energy_pj + spaces[d].move_write.energy_pj, s, d)
                    for s in surplus for d in deficit))
    moves = []
    busy: dict[str, float] = {}
    energy = 0.0
    for cost, s, d in pairs:
        n = min(surplus[s], deficit[d])
        if n == 0:
            continue
        surplus[s] -= n
        deficit[d] -= n
        moves.append((spaces[s].id, spaces[d].id, n))
        energy += n * cost
        busy[spaces[s].cluster] = busy.get(spaces[s].cluster, 0.0) + n * spaces[s].move_read.time_ns
        busy[spaces[d].cluster] = busy.get(spaces[d].cluster, 0.0) + n * spaces[d].move_write.time_ns
    return MigrationPlan(tuple(moves), max(busy.values(), default=0.0), energy)


@dataclass(frozen=True)
class SliceTrace:
    slice_idx: int
    arrivals: int
    n_tasks: int
    t_constraint_ns: float
    x: tuple[int, ...]
    migration: MigrationPlan
    e_dyn_pj: float
    e_static_pj: float
    deadline_met: bool
    busy_ns: float      # migration + solver budget + task execution
    latency_ns: float   # worst arrival-to-completion for the tasks run here

    @property
    def e_mig_pj(self) -> float:
        return self.migration.energy_pj

    @property
    def e_total_pj(self) -> float:
        return self.e_mig_pj + self.e_dyn_pj + self.e_static_pj


@dataclass
class SimResult:
    arch: str
    scenario: str
    space_ids: tuple[str, ...]
    T_ns: float
    slices: list[SliceTrace] = field(default_factory=list)

    @property
    def total_pj(self) -> float:
        return sum(s.e_total_pj for s in self.slices)

    @property
    def misses(self) -> int:
        return sum(not s.deadline_met for s in self.slices)

    @property
    def max_latency_ns(self) -> float:
        return max((s.latency_ns for s in self.slices), default=0.0)

    def totals(self) -> dict[str, float]:
        return {
            "E_mig_pJ": sum(s.e_mig_pj for s in self.slices),
            "E_dyn_pJ": sum(s.e_dyn_pj for s in self.slices),
            "E_stat_pJ": sum(s.e_static_pj for s in self.slices),
            "E_total_pJ": self.total_pj,
        }


@dataclass
class Prepared:
    """An architecture with its cost model and LUT for one model and slice length."""

    arch: ArchitectureSpec
    model: ModelProfile
    grid: TimeGrid
    lut: AllocationLut
    spaces: list = field(default_factory=list)

    @property
    def pe_static(self) -> dict[str, float]:
        return {c.name: c.pe_static_mw for c in self.arch.clusters}


def prepare(arch: ArchitectureSpec, model: ModelProfile, T_ns: float, *,
            budget_fraction: float = 0.01, static_weight: float = 0.0,
            weight_groups: int | None = None, throughput=None, kernel=None,
            grid: TimeGrid | None = None) -> Prepared:
    spaces = derive_cost_model(arch)
    pe_static = {c.name: c.pe_static_mw for c in arch.clusters}
    ops = model.ops_per_weight
    if grid is not None:
        lut = build_lut(spaces, model.param_count, grid, ops_per_weight=ops,
                        static_weight=static_weight, pe_static=pe_static, kernel=kernel)
    else:
        grid, lut = solve(spaces, model.param_count, T_ns, budget_fraction=budget_fraction,
                          ops_per_weight=ops, static_weight=static_weight, pe_static=pe_static,
                          throughput=throughput, weight_groups=weight_groups, kernel=kernel)
    return Prepared(arch, model, grid, lut, spaces)


def ideal_peak_ns(arch: ArchitectureSpec, model: ModelProfile) -> float:
    """Task time with weights split continuously over each cluster's fastest space."""
    spaces = derive_cost_model(arch)
    rate = 0.0
    for c in arch.clusters:
        ts = [sp.t_per_weight_ns for sp in spaces if sp.cluster == c.name]
        if ts:
            rate += 1.0 / min(ts)
    return model.param_count * model.ops_per_weight / rate


def size_slice(arch: ArchitectureSpec, model: ModelProfile, *, max_inferences: int = 10,
               budget_fraction: float = 0.01, reserve: float = MIGRATION_RESERVE,
               **prep_kw) -> tuple[float, Prepared]:
    """Slice length that fits ``max_inferences`` tasks at the architecture's peak.

    The grid is calibrated for the ideal (unquantized) peak first; the slice
    is then stretched to the peak the LUT can actually reach, so a full
    buffer is always schedulable.  Returns ``(T_ns, prepared)``.
    """
    scale = max_inferences / (1.0 - budget_fraction - reserve)
    T0 = scale * ideal_peak_ns(arch, model)
    prep = prepare(arch, model, T0, budget_fraction=budget_fraction, **prep_kw)
    i = prep.lut.min_feasible_index
    if i is None:
        raise PerformanceUnattainable(f"{arch.name}: no feasible placement on the grid")
    return max(T0, scale * i * prep.grid.unit_ns), prep


def prepare_all(archs: Sequence[ArchitectureSpec], model: ModelProfile, *,
                reference: int = -1, max_inferences: int = 10, budget_fraction: float = 0.01,
                T_ns: float | None = None, **prep_kw) -> tuple[float, list[Prepared]]:
    """Size the slice on the reference architecture and reuse its grid for all.

    A shared grid keeps quantization identical across architectures, so a
    superset of spaces can never place worse than a subset.
    """
    ref = archs[reference]
    if T_ns is None:
        T_ns, ref_prep = size_slice(ref, model, max_inferences=max_inferences,
                                    budget_fraction=budget_fraction, **prep_kw)
    else:
        ref_prep = prepare(ref, model, T_ns, budget_fraction=budget_fraction, **prep_kw)
    prep_kw.pop("weight_groups", None)
    prep_kw.pop("throughput", None)
    preps = [ref_prep if a is ref else
             prepare(a, model, T_ns, budget_fraction=budget_fraction, grid=ref_prep.grid, **prep_kw)
             for a in archs]
    return T_ns, preps


def _peak(lut):
    i = lut.min_feasible_index
    if i is None:
        raise PerformanceUnattainable("no feasible placement")
    return lookup_allocation(lut, i * lut.unit_ns)


def simulate(prep: Prepared, stream: TaskStream, cfg: SliceConfig) -> SimResult:
    spaces, lut, arch = prep.spaces, prep.lut, prep.arch
    ops = prep.model.ops_per_weight
    T = cfg.T_ns
    budget = cfg.solver_budget_ns
    e_weight = [sp.e_per_weight_pj * ops for sp in spaces]
    res = SimResult(arch.name, stream.scenario, tuple(sp.id for sp in spaces), T)
    prev = lookup_allocation(lut, math.inf).x  # start from the idle placement
    buffered = 0
    n_slices = min(cfg.slice_count, len(stream.arrivals))
    for j in range(n_slices):
        N = buffered
        mig_ns = 0.0
        x = prev
        plan = plan_migration(prev, prev, spaces)
        t_c = math.inf
        for _ in range(FIXED_POINT_ITERS):
            try:
                t_c = derive_t_constraint(N, T, mig_ns, budget)
                x = lookup_allocation(lut, t_c).x
            except SliceOverrun:
                t_c = 0.0
                x = _peak(lut).x
            except PerformanceUnattainable:
                x = _peak(lut).x
            plan = plan_migration(prev, x, spaces)
            if plan.time_ns <= mig_ns:
                break
            mig_ns = plan.time_ns
        t_task = task_time_ns(x, spaces, ops)
        busy = plan.time_ns + budget + N * t_task
        met = busy <= T * (1 + 1e-12) if N else plan.time_ns + budget <= T
        e_dyn = N * sum(xi * e for xi, e in zip(x, e_weight))
        e_stat = static_power(x, spaces, arch) * T
        res.slices.append(SliceTrace(
            slice_idx=j, arrivals=stream.arrivals[j], n_tasks=N, t_constraint_ns=t_c, x=tuple(x),
            migration=plan, e_dyn_pj=e_dyn, e_static_pj=e_stat, deadline_met=met,
            busy_ns=busy, latency_ns=(T + busy) if N else 0.0))
        prev = x
        buffered = stream.arrivals[j]
    return res


def savings(e_hh: float, e_base: float) -> float:
    """ES = 1 - E_hh / E_base."""
    if e_base <= 0:
        return 0.0
    return 1.0 - e_hh / e_base


def compare_architectures(preps: Sequence[Prepared], stream: TaskStream, cfg: SliceConfig,
                          reference: str | None = None) -> dict:
    """Run every architecture on the same stream; savings of ``reference`` over the rest.

    ``reference`` defaults to the last architecture given.
    """
    results = {p.arch.name: simulate(p, stream, cfg) for p in preps}
    ref = reference or preps[-1].arch.name
    e_ref = results[ref].total_pj
    return {
        "results": results,
        "reference": ref,
        "savings": {name: savings(e_ref, r.total_pj) for name, r in results.items()},
    }


TRACE_HEADER = (["slice_idx", "arch", "scenario", "arrivals", "N", "t_constraint_ns"]
                + [f"x_{s}" for s in SPACE_ORDER]
                + ["moved_weights", "t_mig_ns", "E_mig_pJ", "E_dyn_pJ", "E_stat_pJ",
                   "E_total_pJ", "latency_ns", "miss_flag"])


def trace_rows(res: SimResult):
    for s in res.slices:
        by_id = dict(zip(res.space_ids, s.x))
        yield ([s.slice_idx, res.arch, res.scenario, s.arrivals, s.n_tasks,
                "inf" if math.isinf(s.t_constraint_ns) else f"{s.t_constraint_ns:.6g}"]
               + [by_id.get(sid, 0) for sid in SPACE_ORDER]
               + [s.migration.moved, f"{s.migration.time_ns:.6g}", f"{s.e_mig_pj:.9g}",
                  f"{s.e_dyn_pj:.9g}", f"{s.e_static_pj:.9g}", f"{s.e_total_pj:.9g}",
                  f"{s.latency_ns:.6g}", int(not s.deadline_met)])


def write_traces(results: Sequence[SimResult], fh, meta: Mapping[str, object] | None = None):
    for key, val in (meta or {}).items():
        fh.write(f"# {key}: {val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for res in results:
        for row in trace_rows(res):
            w.writerow(row)
