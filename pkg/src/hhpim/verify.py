"""Randomized check of the table solver against exhaustive enumeration.

Also runs a handful of cheap property checks on the other modules.  Used
by ``hhpim verify`` and the test suite.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from hhpim.model import default_archs, derive_cost_model, static_power
from hhpim.placement import DpItem, brute_force_optimal, lut_from_items
from hhpim.sim import plan_migration
from hhpim.workload import SCENARIOS, generate

log = logging.getLogger(__name__)

CLUSTERS = ("HP", "LP")


@dataclass
class VerifyReport:
    trials: int = 0
    checked_points: int = 0
    mismatches: list = field(default_factory=list)
    property_failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.property_failures

    def lines(self):
        yield f"trials: {self.trials}"
        yield f"budgets checked: {self.checked_points}"
        yield f"mismatches: {len(self.mismatches)}"
        for m in self.mismatches[:10]:
            yield f"  {m}"
        yield f"property failures: {len(self.property_failures)}"
        for m in self.property_failures:
            yield f"  {m}"
        for w in self.warnings:
            yield f"warning: {w}"
        yield "PASS" if self.ok else "FAIL"


def random_instance(rng, max_n=4, max_K=8, max_steps=40, static=False, exact_n=False):
    """Spaces split over up to two clusters, with small integer times."""
    n = max_n if exact_n else int(rng.integers(1, max_n + 1))
    n_hp = int(rng.integers(0, n + 1)) if n > 1 else n
    items = []
    for p in range(n):
        cl = CLUSTERS[0] if p < n_hp else CLUSTERS[1]
        cap = None if rng.random() < 0.7 else int(rng.integers(0, max_K + 1))
        items.append(DpItem(
            id=f"s{p}", cluster=cl,
            t_units=int(rng.integers(1, 9)),
            energy=float(rng.uniform(1, 100)),
            capacity=cap,
            static_mw=float(rng.uniform(0, 5)) if static else 0.0,
        ))
    K = int(rng.integers(0, max_K + 1))
    steps = int(rng.integers(1, max_steps + 1))
    pe = {c: float(rng.uniform(0, 2)) for c in CLUSTERS} if static else {}
    weight = float(rng.uniform(0.1, 2.0)) if static else 0.0
    return items, K, steps, pe, weight


def check_instance(items, K, steps, *, pe_static=None, static_weight=0.0, unit_ns=1.0,
                   mutate=False, kernel=None, rel_tol=1e-9):
    """Compare solver and oracle at every budget; returns a list of mismatch strings."""
    solver_items = list(items)
    if mutate:
        # deliberately wrong energy for the first space, to prove the check bites
        first = solver_items[0]
        solver_items[0] = dataclasses.replace(first, energy=first.energy * 1.5 + 1.0)
    lut = lut_from_items(solver_items, K, steps, unit_ns=unit_ns, static_weight=static_weight,
                         pe_static=pe_static, kernel=kernel)
    bad = []
    for t in range(steps + 1):
        ref = brute_force_optimal(items, K, t, static_weight=static_weight, unit_ns=unit_ns,
                                  pe_static=pe_static)
        got = float(lut.objective[t]) if lut.feasible[t] else None
        if ref is None or got is None:
            if (ref is None) != (got is None):
                bad.append(f"t={t}: feasibility solver={got is not None} oracle={ref is not None}")
            continue
        if abs(got - ref[0]) > rel_tol * max(1.0, abs(ref[0])):
            bad.append(f"t={t}: solver {got:.12g} oracle {ref[0]:.12g}")
            continue
        # the traced placement must itself achieve the value and fit
        x = lut.x_units[t]
        if x.sum() != K:
            bad.append(f"t={t}: placement sums to {x.sum()} not {K}")
        for c in {it.cluster for it in items}:
            if sum(int(xi) * it.t_units for xi, it in zip(x, items) if it.cluster == c) > t:
                bad.append(f"t={t}: cluster {c} over budget")
    return bad


def run_oracle(trials=500, seed=0, max_n=4, max_K=8, max_steps=40, static_share=0.2,
               mutate=False, kernel=None, report=None, exact_n=False):
    report = report or VerifyReport()
    if trials == 0:
        report.warnings.append("0 trials requested; oracle check is vacuous")
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        static = rng.random() < static_share
        items, K, steps, pe, weight = random_instance(rng, max_n, max_K, max_steps, static, exact_n)
        bad = check_instance(items, K, steps, pe_static=pe, static_weight=weight,
                             mutate=mutate, kernel=kernel)
        report.trials += 1
        report.checked_points += steps + 1
        for b in bad:
            report.mismatches.append(f"trial {trial} (n={len(items)}, K={K}, steps={steps}): {b}")
    return report


def run_properties(report=None, seed=0):
    """Cheap invariants of the cost model, migration planner and workloads."""
    report = report or VerifyReport()
    fail = report.property_failures.append
    rng = np.random.default_rng(seed)
    for arch in default_archs():
        spaces = derive_cost_model(arch)
        n = len(spaces)
        if static_power([0] * n, spaces, arch) != 0.0:
            fail(f"{arch.name}: empty placement draws standby power")
        for _ in range(20):
            K = int(rng.integers(0, 50))
            old = rng.multinomial(K, [1 / n] * n)
            new = rng.multinomial(K, [1 / n] * n)
            plan = plan_migration(list(old), list(new), spaces)
            net = {sp.id: int(o) for sp, o in zip(spaces, old)}
            for src, dst, cnt in plan.moves:
                if cnt <= 0:
                    fail(f"{arch.name}: non-positive move")
                net[src] -= cnt
                net[dst] += cnt
            if [net[sp.id] for sp in spaces] != [int(v) for v in new]:
                fail(f"{arch.name}: migration does not conserve weights")
            if plan.energy_pj < 0 or plan.time_ns < 0:
                fail(f"{arch.name}: negative migration cost")
    for sc in SCENARIOS:
        st = generate(sc, 40, 10, seed=seed)
        if any(not 0 <= a <= 10 for a in st.arrivals):
            fail(f"{sc}: arrivals out of range")
        if st != generate(sc, 40, 10, seed=seed):
            fail(f"{sc}: not reproducible")
    return report
