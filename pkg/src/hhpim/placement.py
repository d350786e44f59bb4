"""Minimum-energy weight placement under a per-task time budget.

Each cluster gets its own table ``dp[i][t][k]``: the least energy that puts
exactly ``k`` items into the cluster's first ``i`` spaces while their serial
service time stays within ``t`` grid units.  Clusters run in parallel, so
the tables are combined by scanning every split of the items between them
and keeping the cheapest split whose clusters both fit.  The combined
result is a look-up table indexed by time budget.

Items are fixed-size groups of weights (``TimeGrid.weight_unit``); with
``weight_unit == 1`` an item is a single weight.
"""

from __future__ import annotations

import csv
import functools
import itertools
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from hhpim import kernel as _kernel

log = logging.getLogger(__name__)

# guard against tables that would not fit in memory
MAX_TABLE_CELLS = 60_000_000
BRUTE_FORCE_LIMIT = 10**7
# reference solver speed used when no measurement is requested, so grids
# (and every output derived from them) do not depend on machine load
NOMINAL_THROUGHPUT = (1e-4, 1.1e8)
# grid units spanned by one weight group in the fastest space
RESOLVE = 16


class PlacementError(Exception):
    pass


class PerformanceUnattainable(PlacementError):
    """The requested time budget is below what the hardware can deliver."""


class GridOverflow(PlacementError):
    pass


class InstanceTooLarge(PlacementError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    unit_ns: float
    steps: int
    budget_fraction: float = 0.01
    weight_unit: int = 1

    def __post_init__(self):
        if not self.unit_ns > 0:
            raise ValueError("unit_ns must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0 < self.budget_fraction <= 1:
            raise ValueError("budget_fraction must be in (0, 1]")
        if self.weight_unit < 1:
            raise ValueError("weight_unit must be >= 1")

    @property
    def span_ns(self) -> float:
        return self.unit_ns * self.steps

    def units(self, k_weights: int) -> int:
        return -(-k_weights // self.weight_unit)


@dataclass(frozen=True)
class DpItem:
    """A storage space as the solver sees it: integer time, energy per item."""

    id: str
    cluster: str
    t_units: int
    energy: float
    capacity: int | None = None
    static_mw: float = 0.0

    def __post_init__(self):
        if self.t_units < 1:
            raise ValueError(f"{self.id}: t_units must be >= 1")
        if not self.energy >= 0:
            raise ValueError(f"{self.id}: energy must be >= 0")
        if self.capacity is not None and self.capacity < 0:
            raise ValueError(f"{self.id}: negative capacity")


def quantize_spaces(spaces, grid: TimeGrid, ops_per_weight: float = 1.0,
                    honor_capacity: bool = True) -> list[DpItem]:
    """Map physical spaces onto the grid; item times are rounded up."""
    w = grid.weight_unit
    items = []
    for sp in spaces:
        t = sp.t_per_weight_ns * ops_per_weight * w / grid.unit_ns
        items.append(DpItem(
            id=sp.id,
            cluster=sp.cluster,
            t_units=max(1, math.ceil(t)),
            energy=sp.e_per_weight_pj * ops_per_weight * w,
            capacity=sp.capacity_weights // w if honor_capacity else None,
            static_mw=sp.static_mw_when_active,
        ))
    return items


@dataclass
class DpTable:
    items: tuple[DpItem, ...]
    K: int
    steps: int
    table: np.ndarray  # [i][k][t]
    counts: np.ndarray  # [i][k][t], items of space i taken
    subsets: dict = field(default_factory=dict)

    @property
    def dp(self) -> np.ndarray:
        """``dp[i][t][k]`` view."""
        return self.table.transpose(0, 2, 1)

    @property
    def count(self) -> np.ndarray:
        return self.counts.transpose(0, 2, 1)

    @property
    def final(self) -> np.ndarray:
        """``[k][t]`` slice over all spaces of the cluster."""
        return self.table[-1]

    def trace(self, t: int, k: int) -> list[int]:
        x = [0] * len(self.items)
        for i in range(len(self.items), 0, -1):
            c = int(self.counts[i, k, t])
            x[i - 1] = c
            t -= c * self.items[i - 1].t_units
            k -= c
        if k != 0 or t < 0:
            raise PlacementError("inconsistent path trace")
        return x

    def trace_many(self, t: np.ndarray, k: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.int64).copy()
        k = np.asarray(k, dtype=np.int64).copy()
        x = np.zeros((len(t), len(self.items)), dtype=np.int64)
        for i in range(len(self.items), 0, -1):
            c = self.counts[i, k, t].astype(np.int64)
            x[:, i - 1] = c
            t -= c * self.items[i - 1].t_units
            k -= c
        if np.any(k != 0) or np.any(t < 0):
            raise PlacementError("inconsistent path trace")
        return x


def build_dp_table(items: Sequence[DpItem], K: int, steps: int, *,
                   subsets: bool = False, kernel: str | None = None) -> DpTable:
    """Fill the min-energy table for one cluster's spaces.

    With ``subsets`` a table is also built for every proper subset of the
    spaces; combining with standby-power charges needs them.
    """
    items = tuple(items)
    if not items:
        raise ValueError("no spaces")
    if len({it.cluster for it in items}) != 1:
        raise ValueError("spaces span more than one cluster")
    if K < 0:
        raise ValueError("K must be >= 0")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cells = (len(items) + 1) * (K + 1) * (steps + 1)
    if cells > MAX_TABLE_CELLS:
        raise GridOverflow(f"table of {cells} cells exceeds {MAX_TABLE_CELLS}")
    caps = [K if it.capacity is None else it.capacity for it in items]
    dp, cnt = _kernel.build_table([it.t_units for it in items],
                                  [it.energy for it in items], caps, K, steps, kernel=kernel)
    tab = DpTable(items, K, steps, dp, cnt)
    if subsets and len(items) > 1:
        for r in range(1, len(items)):
            for pos in itertools.combinations(range(len(items)), r):
                tab.subsets[pos] = build_dp_table([items[p] for p in pos], K, steps, kernel=kernel)
    return tab


def _cluster_frontier(tab: DpTable, unit_ns: float, static_weight: float, pe_static: float):
    """Best objective per (k, t) for one cluster and which subset achieves it."""
    full = tuple(range(len(tab.items)))
    if static_weight == 0:
        return tab.final, np.zeros(tab.final.shape, dtype=np.int64), [(full, tab)]
    cands = [(full, tab)] + sorted(tab.subsets.items())
    horizon = static_weight * unit_ns * np.arange(tab.steps + 1)
    best = choice = None
    for n, (pos, sub) in enumerate(cands):
        power = sum(tab.items[p].static_mw for p in pos) + pe_static
        val = sub.final + horizon[None, :] * power
        val[0] = 0.0  # nothing stored: gated
        if best is None:
            best, choice = val.copy(), np.zeros(val.shape, dtype=np.int64)
        else:
            better = val < best
            best[better] = val[better]
            choice[better] = n
    return best, choice, cands


def _combine_charged(tables, K, unit_ns, static_weight, pe_static):
    fronts = [_cluster_frontier(tab, unit_ns, static_weight,
                                pe_static.get(tab.items[0].cluster, 0.0)) for tab in tables]
    T = tables[0].steps + 1
    cols = np.arange(T)
    if len(tables) == 1:
        k_first = np.full(T, K, dtype=np.int64)
        total = fronts[0][0][K].copy()
        ks = [k_first]
    else:
        summed = fronts[0][0] + fronts[1][0][::-1]
        # first minimum = fewest items on the first (HP) cluster
        k_first = np.argmin(summed, axis=0).astype(np.int64)
        total = summed[k_first, cols]
        ks = [k_first, K - k_first]
    feasible = np.isfinite(total)
    x = np.zeros((T, sum(len(tab.items) for tab in tables)), dtype=np.int64)
    offset = 0
    for tab, (best, choice, cands), kc in zip(tables, fronts, ks):
        chosen = choice[kc, cols]
        for n, (pos, sub) in enumerate(cands):
            sel = np.flatnonzero(feasible & (chosen == n))
            if len(sel):
                part = sub.trace_many(sel, kc[sel])
                for j, p in enumerate(pos):
                    x[sel, offset + p] = part[:, j]
        offset += len(tab.items)
    return k_first, total, x


@dataclass
class AllocationLut:
    """Optimal placement for every time budget on the grid.

    ``x_units[t]`` holds item counts per space, ``placement(t)`` the same in
    weights.  ``energy`` is the dynamic energy per task (pJ), ``objective``
    what the solver minimised (equal to ``energy`` unless standby power was
    charged).  ``relaxed_*`` is the placement used with no time pressure.
    """

    items: tuple[DpItem, ...]
    K_units: int
    unit_ns: float
    steps: int
    feasible: np.ndarray
    objective: np.ndarray
    x_units: np.ndarray
    k_split: np.ndarray
    weight_unit: int = 1
    K_weights: int | None = None
    static_weight: float = 0.0
    energy_per_weight: np.ndarray | None = None
    relaxed_x: tuple | None = None
    relaxed_energy: float | None = None
    x_weights: np.ndarray = field(init=False)
    energy: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.K_weights is None:
            self.K_weights = self.K_units * self.weight_unit
        if self.energy_per_weight is None:
            self.energy_per_weight = np.array([it.energy for it in self.items]) / self.weight_unit
        xw = self.x_units * self.weight_unit
        excess = self.K_units * self.weight_unit - self.K_weights
        if excess:
            rows = np.flatnonzero(self.feasible)
            xw[rows, np.argmax(xw[rows], axis=1)] -= excess
        xw[~self.feasible] = 0
        self.x_weights = xw
        self.energy = np.where(self.feasible, xw @ self.energy_per_weight, np.inf)

    @property
    def space_ids(self) -> tuple[str, ...]:
        return tuple(it.id for it in self.items)

    def placement(self, idx: int) -> tuple[int, ...]:
        if not self.feasible[idx]:
            raise PerformanceUnattainable(f"no feasible placement at t-index {idx}")
        return tuple(int(v) for v in self.x_weights[idx])

    @property
    def min_feasible_index(self) -> int | None:
        idx = np.flatnonzero(self.feasible)
        return int(idx[0]) if len(idx) else None


def combine_clusters(tables: Sequence[DpTable], K: int, *, unit_ns: float = 1.0,
                     static_weight: float = 0.0,
                     pe_static: Mapping[str, float] | None = None,
                     kernel: str | None = None, **lut_fields) -> AllocationLut:
    """Pick, for every time budget, the cheapest split of ``K`` items.

    ``tables`` are per-cluster tables in cluster order.  A split is feasible
    when every cluster fits on its own (they execute in parallel).  With
    ``static_weight > 0`` each active space and cluster is also charged its
    standby power over the time budget.  ``lut_fields`` are passed on to
    :class:`AllocationLut` (weight-level metadata).
    """
    tables = list(tables)
    if not 1 <= len(tables) <= 2:
        raise ValueError("need one or two cluster tables")
    steps = tables[0].steps
    for tab in tables:
        if tab.steps != steps or tab.K != K:
            raise ValueError("cluster tables built on different grids")
    items = tuple(it for tab in tables for it in tab.items)
    if static_weight == 0:
        a = tables[0]
        b = tables[1] if len(tables) == 2 else None
        k_first, total, x = _kernel.combine_trace(
            a.final, a.counts, [it.t_units for it in a.items],
            None if b is None else b.final, None if b is None else b.counts,
            None if b is None else [it.t_units for it in b.items], K, kernel=kernel)
    else:
        k_first, total, x = _combine_charged(tables, K, unit_ns, static_weight, pe_static or {})
    feasible = np.isfinite(total)
    split = k_first[:, None] if len(tables) == 1 else np.stack([k_first, K - k_first], axis=1)
    return AllocationLut(items, K, unit_ns, steps, feasible,
                         np.where(feasible, total, np.inf), x, split,
                         static_weight=static_weight, **lut_fields)


def lut_from_items(items: Sequence[DpItem], K: int, steps: int, *, unit_ns: float = 1.0,
                   static_weight: float = 0.0, pe_static: Mapping[str, float] | None = None,
                   kernel: str | None = None) -> AllocationLut:
    """Tables for already-quantized items, grouped by cluster, then combined."""
    clusters = list(dict.fromkeys(it.cluster for it in items))
    if len(clusters) > 2:
        raise ValueError("at most two clusters are supported")
    tables = [build_dp_table([it for it in items if it.cluster == c], K, steps,
                             subsets=static_weight > 0, kernel=kernel) for c in clusters]
    order = [it for c in clusters for it in items if it.cluster == c]
    if order != list(items):
        raise ValueError("items must be grouped by cluster")
    return combine_clusters(tables, K, unit_ns=unit_ns, static_weight=static_weight,
                            pe_static=pe_static, kernel=kernel)


def relaxed_placement(spaces, K: int, pe_static: Mapping[str, float],
                      ops_per_weight: float = 1.0):
    """Placement with no time limit: least standby power, then least energy.

    Returns ``(x, dynamic_energy_pj)`` with ``x`` in weights.
    """
    return _relaxed(tuple(spaces), K, tuple(sorted(pe_static.items())), ops_per_weight)


@functools.lru_cache(maxsize=256)
def _relaxed(spaces, K, pe_items, ops_per_weight):
    pe_static = dict(pe_items)
    n = len(spaces)
    caps = [sp.capacity_weights for sp in spaces]
    order = sorted(range(n), key=lambda p: (spaces[p].e_per_weight_pj, p))
    best = None
    for mask in range(1, 1 << n):
        if sum(caps[p] for p in range(n) if mask >> p & 1) < K:
            continue
        x = [0] * n
        left = K
        for p in order:
            if mask >> p & 1:
                x[p] = min(left, caps[p])
                left -= x[p]
        if K and any(mask >> p & 1 and x[p] == 0 for p in range(n)):
            continue  # covered by a smaller subset
        power = sum(spaces[p].static_mw_when_active for p in range(n) if x[p])
        power += sum(pe_static.get(c, 0.0) for c in {spaces[p].cluster for p in range(n) if x[p]})
        energy = sum(x[p] * spaces[p].e_per_weight_pj for p in range(n)) * ops_per_weight
        if best is None or (power, energy) < best[0]:
            best = ((power, energy), tuple(x), energy)
    if best is None:
        raise PlacementError("weights exceed total capacity")
    return best[1], best[2]


def saturation_time_ns(spaces, K: int, ops_per_weight: float = 1.0) -> float:
    """Task time of the least-energy placement when time is unconstrained.

    Beyond it the uncharged optimum no longer changes with the budget.
    """
    x = [0] * len(spaces)
    left = K
    for p in sorted(range(len(spaces)), key=lambda p: (spaces[p].e_per_weight_pj, p)):
        x[p] = min(left, spaces[p].capacity_weights)
        left -= x[p]
    return task_time_ns(x, spaces, ops_per_weight)


def build_lut(spaces, K: int, grid: TimeGrid, *, ops_per_weight: float = 1.0,
              static_weight: float = 0.0, pe_static: Mapping[str, float] | None = None,
              honor_capacity: bool = True, kernel: str | None = None) -> AllocationLut:
    """Quantize ``spaces``, build per-cluster tables and combine them."""
    pe_static = dict(pe_static or {})
    items = quantize_spaces(spaces, grid, ops_per_weight, honor_capacity)
    K_units = grid.units(K)
    clusters = list(dict.fromkeys(it.cluster for it in items))
    tables = [build_dp_table([it for it in items if it.cluster == c], K_units, grid.steps,
                             subsets=static_weight > 0, kernel=kernel) for c in clusters]
    relaxed_x, relaxed_energy = relaxed_placement(spaces, K, pe_static, ops_per_weight)
    return combine_clusters(
        tables, K_units, unit_ns=grid.unit_ns, static_weight=static_weight,
        pe_static=pe_static, kernel=kernel, weight_unit=grid.weight_unit, K_weights=K,
        energy_per_weight=np.array([sp.e_per_weight_pj * ops_per_weight for sp in spaces]),
        relaxed_x=relaxed_x, relaxed_energy=relaxed_energy)


@dataclass(frozen=True)
class Allocation:
    x: tuple[int, ...]
    E_task_pj: float
    index: int | None  # None for the relaxed entry


def lookup_allocation(lut: AllocationLut, t_constraint_ns: float) -> Allocation:
    """Placement for a per-task time budget; the index rounds down."""
    if math.isinf(t_constraint_ns) and t_constraint_ns > 0:
        if lut.relaxed_x is None:
            return lookup_allocation(lut, lut.steps * lut.unit_ns)
        return Allocation(lut.relaxed_x, lut.relaxed_energy, None)
    if not t_constraint_ns >= 0:
        raise PerformanceUnattainable(f"t_constraint {t_constraint_ns} ns is negative")
    idx = min(int(math.floor(t_constraint_ns / lut.unit_ns)), lut.steps)
    if not lut.feasible[idx]:
        raise PerformanceUnattainable(
            f"t_constraint {t_constraint_ns:.4g} ns below peak capability "
            f"(first feasible budget {_first_feasible_ns(lut)})")
    return Allocation(lut.placement(idx), float(lut.energy[idx]), idx)


def _first_feasible_ns(lut):
    i = lut.min_feasible_index
    return "none" if i is None else f"{i * lut.unit_ns:.4g} ns"


def cluster_times_ns(x, spaces, ops_per_weight: float = 1.0) -> dict[str, float]:
    """Unquantized serial service time of each cluster for placement ``x``."""
    out: dict[str, float] = {}
    for xi, sp in zip(x, spaces):
        out[sp.cluster] = out.get(sp.cluster, 0.0) + xi * sp.t_per_weight_ns * ops_per_weight
    return out


def task_time_ns(x, spaces, ops_per_weight: float = 1.0) -> float:
    times = cluster_times_ns(x, spaces, ops_per_weight)
    return max(times.values()) if times else 0.0


def brute_force_optimal(items: Sequence[DpItem], K: int, t: int, *,
                        static_weight: float = 0.0, unit_ns: float = 1.0,
                        pe_static: Mapping[str, float] | None = None,
                        limit: int = BRUTE_FORCE_LIMIT):
    """Exact optimum by enumerating every placement of ``K`` items.

    Returns ``(objective, x)`` or ``None`` when no placement fits in ``t``
    units on every cluster.
    """
    n = len(items)
    if K < 0:
        raise ValueError("K must be >= 0")
    if n == 0:
        return (0.0, ()) if K == 0 else None
    if math.comb(K + n - 1, n - 1) > limit:
        raise InstanceTooLarge(f"{math.comb(K + n - 1, n - 1)} placements exceed {limit}")
    pe_static = pe_static or {}
    clusters = sorted({it.cluster for it in items})
    best = None
    for bars in itertools.combinations(range(K + n - 1), n - 1):
        x = []
        prev = -1
        for b in bars + (K + n - 1,):
            x.append(b - prev - 1)
            prev = b
        if any(it.capacity is not None and xi > it.capacity for xi, it in zip(x, items)):
            continue
        ok = True
        for c in clusters:
            if sum(xi * it.t_units for xi, it in zip(x, items) if it.cluster == c) > t:
                ok = False
                break
        if not ok:
            continue
        obj = sum(xi * it.energy for xi, it in zip(x, items))
        if static_weight:
            active = [it for xi, it in zip(x, items) if xi > 0]
            power = sum(it.static_mw for it in active)
            power += sum(pe_static.get(c, 0.0) for c in {it.cluster for it in active})
            obj += static_weight * unit_ns * t * power
        if best is None or obj < best[0]:
            best = (obj, tuple(x))
    return best


def _grid_for(K, weight_unit, t_fast_ns, t_max_ns, resolve, min_steps, max_steps):
    """Grid on which one group in the fastest space spans ``resolve`` units."""
    unit = weight_unit * t_fast_ns / resolve
    steps = math.ceil(t_max_ns / unit - 1e-9)
    if steps < min_steps or steps > max_steps:
        steps = min(max(steps, min_steps), max_steps)
        unit = t_max_ns / steps
    return unit, steps


def calibrate_resolution(K: int, T_ns: float, budget_fraction: float = 0.01, *,
                         spaces, ops_per_weight: float = 1.0, t_max_ns: float | None = None,
                         throughput=None, kernel: str | None = None, static_weight: float = 0.0,
                         min_steps: int = 64, max_steps: int = 4096,
                         resolve: int = RESOLVE) -> TimeGrid:
    """Choose the finest grid whose predicted build time fits the budget.

    Finer weight groups force a finer time unit (the fastest space must span
    ``resolve`` units per group), so one knob sets both axes.  Predicted time
    is ``overhead + cells / rate`` with ``throughput = (overhead_s, rate)``;
    ``"measure"`` times the kernel on this machine, ``None`` uses a fixed
    reference so that grids are reproducible.
    """
    if K <= 0 or T_ns <= 0:
        raise ValueError("K and T must be positive")
    if throughput == "measure":
        throughput = measure_build_cost(spaces, ops_per_weight=ops_per_weight,
                                        static_weight=static_weight, kernel=kernel)
    overhead, rate = throughput or NOMINAL_THROUGHPUT
    t_max_ns = T_ns if t_max_ns is None else t_max_ns
    t_fast = min(sp.t_per_weight_ns for sp in spaces) * ops_per_weight
    # cells touched per (item-count, step), subset tables included
    per_cell = _cells_per_step(spaces, static_weight)
    budget_s = budget_fraction * T_ns * 1e-9

    def predicted(w):
        _, steps = _grid_for(K, w, t_fast, t_max_ns, resolve, min_steps, max_steps)
        k_units = -(-K // w)
        return overhead + per_cell * (k_units + 1) * (steps + 1) / rate

    lo, hi = 1, K
    if predicted(hi) > budget_s:
        warnings.warn(f"solver budget {budget_s * 1e3:.3g} ms unreachable; "
                      f"using coarsest grid", RuntimeWarning, stacklevel=2)
        w = K
    elif predicted(lo) <= budget_s:
        w = lo
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if predicted(mid) <= budget_s:
                hi = mid
            else:
                lo = mid
        w = hi
        # prefer a group size that divides K exactly (no partial group)
        for cand in range(w, min(K, w + w // 2) + 1):
            if K % cand == 0:
                w = cand
                break
    unit, steps = _grid_for(K, w, t_fast, t_max_ns, resolve, min_steps, max_steps)
    return TimeGrid(unit_ns=unit, steps=steps, budget_fraction=budget_fraction, weight_unit=w)


def _cells_per_step(spaces, static_weight):
    sizes: dict[str, int] = {}
    for sp in spaces:
        sizes[sp.cluster] = sizes.get(sp.cluster, 0) + 1
    if static_weight:
        return sum(sum(math.comb(m, r) * (r + 1) for r in range(1, m + 1)) for m in sizes.values())
    return sum(m + 1 for m in sizes.values())


_cost_cache: dict = {}


def measure_build_cost(spaces, *, ops_per_weight=1.0, static_weight=0.0, kernel=None, repeats=5):
    """Time :func:`build_lut` end to end; returns ``(overhead_s, cells_per_s)``."""
    key = (tuple(spaces), static_weight, kernel or _kernel.KERNEL_NAME)
    if key in _cost_cache:
        return _cost_cache[key]
    per = _cells_per_step(spaces, static_weight)
    t_fast = min(sp.t_per_weight_ns for sp in spaces)
    points = []
    for k_units, steps in ((4, 64), (48, 768)):
        grid = TimeGrid(unit_ns=t_fast * 1.0 / 4, steps=steps)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            build_lut(spaces, k_units, grid, static_weight=static_weight, kernel=kernel)
            best = min(best, time.perf_counter() - t0)
        points.append((per * (k_units + 1) * (steps + 1), best))
    (c0, s0), (c1, s1) = points
    rate = (c1 - c0) / max(s1 - s0, 1e-9)
    cost = (max(s0 - c0 / rate, 0.0), rate)
    _cost_cache[key] = cost
    return cost


def solve(spaces, K: int, T_ns: float, *, budget_fraction: float = 0.01,
          ops_per_weight: float = 1.0, static_weight: float = 0.0,
          pe_static: Mapping[str, float] | None = None, throughput=None,
          weight_groups: int | None = None, kernel: str | None = None):
    """Calibrate a grid for slices of ``T_ns`` and build the LUT on it.

    Without standby charges the grid stops shortly after the saturation
    time; lookups past it clamp to the last (already optimal) entry.
    ``weight_groups`` overrides the calibrated number of weight groups.
    """
    t_max = T_ns
    if static_weight == 0:
        t_max = min(T_ns, 1.25 * saturation_time_ns(spaces, K, ops_per_weight))
    if weight_groups is not None:
        w = max(1, -(-K // weight_groups))
        t_fast = min(sp.t_per_weight_ns for sp in spaces) * ops_per_weight
        unit, steps = _grid_for(K, w, t_fast, t_max, RESOLVE, 64, 1 << 16)
        grid = TimeGrid(unit_ns=unit, steps=steps, budget_fraction=budget_fraction, weight_unit=w)
    else:
        grid = calibrate_resolution(K, T_ns, budget_fraction, spaces=spaces,
                                    ops_per_weight=ops_per_weight, t_max_ns=t_max,
                                    throughput=throughput, kernel=kernel,
                                    static_weight=static_weight)
    lut = build_lut(spaces, K, grid, ops_per_weight=ops_per_weight, static_weight=static_weight,
                    pe_static=pe_static, kernel=kernel)
    return grid, lut


def write_lut(lut: AllocationLut, fh, meta: Mapping[str, object] | None = None) -> None:
    """Columnar dump: one row per grid point, relaxed entry last."""
    for key, val in (meta or {}).items():
        fh.write(f"# {key}: {val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t_index", "t_ns", "feasible", "E_task_pJ"] + [f"x_{s}" for s in lut.space_ids])
    for t in range(lut.steps + 1):
        ok = bool(lut.feasible[t])
        row = [t, f"{t * lut.unit_ns:.6g}", int(ok), f"{lut.energy[t]:.6g}" if ok else "inf"]
        w.writerow(row + [int(v) for v in lut.x_weights[t]])
    if lut.relaxed_x is not None:
        w.writerow(["relaxed", "inf", 1, f"{lut.relaxed_energy:.6g}"] + list(lut.relaxed_x))
