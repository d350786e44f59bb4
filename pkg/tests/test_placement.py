import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhpim import kernel as kmod
from hhpim.model import load_arch, derive_cost_model
from hhpim.placement import (DpItem, GridOverflow, InstanceTooLarge, PerformanceUnattainable,
                             TimeGrid, brute_force_optimal, build_dp_table, build_lut,
                             calibrate_resolution, cluster_times_ns, lookup_allocation,
                             lut_from_items, quantize_spaces, relaxed_placement, solve,
                             task_time_ns, write_lut)

KERNELS = sorted(kmod.KERNELS)


def item(id, t, e, cluster="HP", cap=None, static=0.0):
    return DpItem(id=id, cluster=cluster, t_units=t, energy=e, capacity=cap, static_mw=static)


# -- hand-worked table ------------------------------------------------------

def test_single_cluster_table_by_hand():
    # A: 2 units, 5 pJ; B: 1 unit, 9 pJ; exactly 3 items.
    a, b = item("A", 2, 5.0), item("B", 1, 9.0)
    lut = lut_from_items([a, b], 3, 6)
    # t=0..2: nothing fits (3 items of B need 3 units)
    assert not lut.feasible[:3].any()
    # t=3: BBB = 27; t=4: A+BB = 23; t=5: AA+B = 19; t=6: AAA = 15
    assert list(lut.objective[3:]) == [27.0, 23.0, 19.0, 15.0]
    assert [tuple(r) for r in lut.x_units[3:]] == [(0, 3), (1, 2), (2, 1), (3, 0)]


def test_dp_view_layout():
    tab = build_dp_table([item("A", 2, 5.0)], 2, 4)
    # dp[i][t][k]: one A item needs 2 units
    assert tab.dp.shape == (2, 5, 3)
    assert math.isinf(tab.dp[1, 1, 1])
    assert tab.dp[1, 2, 1] == 5.0
    assert tab.dp[1, 4, 2] == 10.0
    assert tab.trace(4, 2) == [2]


def test_two_clusters_run_in_parallel():
    # each cluster alone needs 4 units for 2 items, together 2 units
    hp, lp = item("H", 2, 1.0, "HP"), item("L", 2, 1.0, "LP")
    lut = lut_from_items([hp, lp], 2, 4)
    assert lut.feasible[2] and not lut.feasible[1]
    assert tuple(lut.x_units[2]) == (1, 1)


# -- oracle equivalence -----------------------------------------------------

instances = st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.lists(st.tuples(st.integers(1, 8), st.floats(1, 100), st.sampled_from(["HP", "LP"]),
                       st.one_of(st.none(), st.integers(0, 8))), min_size=n, max_size=n),
    st.integers(0, 8), st.integers(1, 40)))


def _items(spec):
    raw = sorted(spec, key=lambda r: r[2])  # group by cluster
    return [item(f"s{p}", t, e, c, cap) for p, (t, e, c, cap) in enumerate(raw)]


@pytest.mark.parametrize("kernel", KERNELS)
@settings(max_examples=60, deadline=None)
@given(inst=instances)
def test_matches_brute_force(kernel, inst):
    spec, K, steps = inst
    items = _items(spec)
    lut = lut_from_items(items, K, steps, kernel=kernel)
    for t in range(steps + 1):
        ref = brute_force_optimal(items, K, t)
        if ref is None:
            assert not lut.feasible[t]
        else:
            assert lut.feasible[t]
            assert lut.objective[t] == pytest.approx(ref[0], rel=1e-9, abs=1e-9)
            x = lut.x_units[t]
            assert x.sum() == K
            assert sum(xi * it.energy for xi, it in zip(x, items)) == pytest.approx(ref[0], rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(inst=instances, weight=st.floats(0.05, 3.0), pe=st.tuples(st.floats(0, 2), st.floats(0, 2)),
       statics=st.lists(st.floats(0, 5), min_size=4, max_size=4))
def test_standby_charged_matches_brute_force(inst, weight, pe, statics):
    spec, K, steps = inst
    items = [DpItem(it.id, it.cluster, it.t_units, it.energy, it.capacity, s)
             for it, s in zip(_items(spec), statics)]
    pe_static = {"HP": pe[0], "LP": pe[1]}
    lut = lut_from_items(items, K, steps, unit_ns=1.5, static_weight=weight, pe_static=pe_static)
    for t in range(steps + 1):
        ref = brute_force_optimal(items, K, t, static_weight=weight, unit_ns=1.5, pe_static=pe_static)
        assert (ref is None) == (not lut.feasible[t])
        if ref is not None:
            assert lut.objective[t] == pytest.approx(ref[0], rel=1e-9, abs=1e-9)


@pytest.mark.skipif(len(KERNELS) < 2, reason="compiled kernel not built")
def test_kernels_agree_bit_for_bit():
    rng = np.random.default_rng(7)
    for _ in range(30):
        m = int(rng.integers(1, 4))
        t_units = rng.integers(1, 9, size=m)
        energy = rng.uniform(1, 100, size=m)
        K = int(rng.integers(0, 30))
        caps = np.where(rng.random(m) < 0.5, K, rng.integers(0, K + 1, size=m))
        steps = int(rng.integers(1, 120))
        d1, c1 = kmod.build_table(t_units, energy, caps, K, steps, kernel="python")
        d2, c2 = kmod.build_table(t_units, energy, caps, K, steps, kernel="compiled")
        np.testing.assert_array_equal(d1, d2)
        np.testing.assert_array_equal(c1, c2)


# -- properties ------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(inst=instances)
def test_energy_nonincreasing_in_budget(inst):
    spec, K, steps = inst
    lut = lut_from_items(_items(spec), K, steps)
    e = lut.objective
    ok = np.flatnonzero(lut.feasible)
    if len(ok):
        assert lut.feasible[ok[0]:].all()
        assert np.all(np.diff(e[ok[0]:]) <= 1e-9)


@settings(max_examples=40, deadline=None)
@given(inst=instances, extra=st.tuples(st.integers(1, 8), st.floats(1, 100)))
def test_adding_a_space_never_hurts(inst, extra):
    spec, K, steps = inst
    items = _items(spec)
    more = sorted(items + [item("new", extra[0], extra[1], "LP")], key=lambda i: i.cluster)
    a = lut_from_items(items, K, steps)
    b = lut_from_items(more, K, steps)
    assert np.all(b.feasible >= a.feasible)
    ok = a.feasible
    assert np.all(b.objective[ok] <= a.objective[ok] + 1e-9)


@settings(max_examples=40, deadline=None)
@given(inst=instances)
def test_dropping_capacity_limits_never_hurts(inst):
    spec, K, steps = inst
    items = _items(spec)
    free = [DpItem(i.id, i.cluster, i.t_units, i.energy, None) for i in items]
    a, b = lut_from_items(items, K, steps), lut_from_items(free, K, steps)
    ok = a.feasible
    assert np.all(b.feasible[ok])
    assert np.all(b.objective[ok] <= a.objective[ok] + 1e-9)


def test_ties_go_to_lower_index_space():
    twins = [item("first", 1, 3.0), item("second", 1, 3.0)]
    lut = lut_from_items(twins, 4, 10)
    assert tuple(lut.x_units[10]) == (4, 0)


def test_ties_between_clusters_favour_low_power_cluster():
    lut = lut_from_items([item("H", 1, 2.0, "HP"), item("L", 1, 2.0, "LP")], 3, 10)
    assert tuple(lut.x_units[10]) == (0, 3)
    assert tuple(lut.k_split[10]) == (0, 3)


def test_capacity_respected():
    lut = lut_from_items([item("small", 1, 1.0, cap=2), item("big", 1, 50.0)], 5, 10)
    assert tuple(lut.x_units[10]) == (2, 3)


def test_guards():
    with pytest.raises(GridOverflow):
        build_dp_table([item("A", 1, 1.0)], 10_000, 10_000)
    with pytest.raises(InstanceTooLarge):
        brute_force_optimal([item(f"s{i}", 1, 1.0) for i in range(4)], 400, 10, limit=1000)
    with pytest.raises(ValueError):
        build_dp_table([item("A", 1, 1.0), item("B", 1, 1.0, "LP")], 2, 4)
    with pytest.raises(ValueError):
        DpItem("bad", "HP", 0, 1.0)


def test_zero_items_is_free():
    lut = lut_from_items([item("A", 3, 2.0)], 0, 5)
    assert lut.feasible.all() and (lut.objective == 0).all()


# -- physical model ----------------------------------------------------------

@pytest.fixture(scope="module")
def hh_spaces():
    return derive_cost_model(load_arch("hhpim"))


def test_relaxed_placement_is_all_lp_mram(hh_spaces):
    arch = load_arch("hhpim")
    pe = {c.name: c.pe_static_mw for c in arch.clusters}
    x, e = relaxed_placement(hh_spaces, 95_000, pe)
    assert x == (0, 0, 95_000, 0)
    assert e == pytest.approx(95_000 * (179.05 * 2.96 + 0.51 * 10.68))


def test_quantized_placements_meet_their_budget(hh_spaces):
    K, ops = 1000, 3.0
    grid = TimeGrid(unit_ns=40.0, steps=400, weight_unit=30)  # 30 does not divide 1000
    lut = build_lut(hh_spaces, K, grid, ops_per_weight=ops)
    for t in np.flatnonzero(lut.feasible):
        x = lut.placement(int(t))
        assert sum(x) == K and min(x) >= 0
        assert task_time_ns(x, hh_spaces, ops) <= t * grid.unit_ns + 1e-6


def test_loose_budget_uses_cheapest_space_only(hh_spaces):
    K = 1000
    grid = TimeGrid(unit_ns=50.0, steps=200, weight_unit=10)
    lut = build_lut(hh_spaces, K, grid)
    assert lut.placement(lut.steps) == (0, 0, 0, K)  # all LP-SRAM, nothing on HP


def test_peak_uses_both_srams(hh_spaces):
    K = 1000
    grid = TimeGrid(unit_ns=10.0, steps=400, weight_unit=10)
    lut = build_lut(hh_spaces, K, grid)
    x = lut.placement(lut.min_feasible_index)
    assert x[1] > 0 and x[3] > 0
    # the continuous split would be proportional to per-weight speed
    ideal = (3.0225 / 1.66)
    assert x[1] / x[3] == pytest.approx(ideal, rel=0.2)


def test_lookup_rules(hh_spaces):
    grid = TimeGrid(unit_ns=10.0, steps=400, weight_unit=10)
    lut = build_lut(hh_spaces, 1000, grid)
    with pytest.raises(PerformanceUnattainable):
        lookup_allocation(lut, 5.0)
    with pytest.raises(PerformanceUnattainable):
        lookup_allocation(lut, -1.0)
    last = lookup_allocation(lut, 1e12)
    assert last.index == lut.steps
    relaxed = lookup_allocation(lut, math.inf)
    assert relaxed.index is None and relaxed.x == (0, 0, 1000, 0)
    i = lut.min_feasible_index
    # a budget between grid points rounds down
    assert lookup_allocation(lut, (i + 0.99) * grid.unit_ns).index == i


def test_cluster_times(hh_spaces):
    times = cluster_times_ns((10, 0, 0, 4), hh_spaces, 2.0)
    assert times["HP"] == pytest.approx(10 * 2.62 / 4 * 2 + 10 * 5.52 / 4 * 2)
    assert times["LP"] == pytest.approx(4 * (1.41 + 10.68) / 4 * 2)


# -- calibration ---------------------------------------------------------------

def test_calibration_is_deterministic_and_within_limits(hh_spaces):
    g1 = calibrate_resolution(95_000, 33e6, spaces=hh_spaces, ops_per_weight=29.0)
    g2 = calibrate_resolution(95_000, 33e6, spaces=hh_spaces, ops_per_weight=29.0)
    assert g1 == g2
    assert 64 <= g1.steps <= 4096
    assert g1.weight_unit >= 1


def test_more_time_gives_finer_grid(hh_spaces):
    coarse = calibrate_resolution(95_000, 25e6, spaces=hh_spaces, ops_per_weight=29.0)
    fine = calibrate_resolution(95_000, 1e9, spaces=hh_spaces, ops_per_weight=29.0)
    assert fine.weight_unit < coarse.weight_unit


def test_unreachable_budget_warns(hh_spaces):
    with pytest.warns(RuntimeWarning):
        g = calibrate_resolution(1000, 1e3, spaces=hh_spaces)
    assert g.weight_unit == 1000


def test_fastest_space_spans_resolve_units(hh_spaces):
    g = calibrate_resolution(95_000, 33e6, spaces=hh_spaces, ops_per_weight=29.0)
    items = quantize_spaces(hh_spaces, g, 29.0)
    assert items[1].t_units == 16  # HP-SRAM


def test_solve_override_groups(hh_spaces):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        grid, lut = solve(hh_spaces, 950, 1e6, weight_groups=19)
    assert grid.weight_unit == 50 and lut.K_units == 19


def test_write_lut_layout(hh_spaces):
    grid = TimeGrid(unit_ns=10.0, steps=100, weight_unit=10)
    lut = build_lut(hh_spaces, 100, grid)
    buf = io.StringIO()
    write_lut(lut, buf, {"seed": 1})
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# seed: 1"
    assert lines[1].startswith("t_index,t_ns,feasible,E_task_pJ,x_HP-MRAM")
    assert len(lines) == 2 + 101 + 1
    assert lines[-1].startswith("relaxed,inf,1,")
