"""Cell sleep scheduling over a gridded network.

Cells (a few per site) carry their grid's traffic in proportion to
capacity. Every half-hour slot a controller decides which cells stay on,
go to sleep, or switch off, guarded by two masks: demand must remain
satisfiable, and a site may only close once all its cells are off. The
greedy controller keeps a hysteresis margin of spare capacity to avoid
status flapping; the minimal-cells baseline re-derives the smallest
sufficient set every slot.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .rngstream import substream

ON, SLEEPING, OFF = 0, 1, 2
STATUS_NAMES = {ON: "on", SLEEPING: "sleeping", OFF: "off"}

SLOTS_PER_DAY = 48
WEEK_SLOTS = 7 * SLOTS_PER_DAY
SLOT_HOURS = 0.5

H_GRID = (0.05, 0.1, 0.15, 0.2, 0.3)


@dataclass
class EnergyModel:
    p_on_static_w: float = 130.0
    p_on_slope_w: float = 120.0  # extra draw at full utilization
    p_sleep_w: float = 25.0
    p_site_overhead_w: float = 300.0  # BBU + air conditioning while the site is up
    beta_onoff: float = 10.0
    beta_sleep: float = 2.0
    switch_cost_wh: float = 25.0  # Wh-equivalent of one beta unit when tuning

    def __post_init__(self):
        if min(self.p_on_static_w, self.p_on_slope_w, self.p_sleep_w,
               self.p_site_overhead_w) < 0:
            raise ValueError("power terms must be >= 0")
        if self.p_sleep_w >= self.p_on_static_w:
            raise ValueError("sleep power must be below static on power")


@dataclass
class CellFleet:
    """Static plant: cells grouped by site, sites grouped by grid."""

    site_of_cell: np.ndarray
    grid_of_cell: np.ndarray
    capacity_bps: np.ndarray
    n_grids: int

    def __post_init__(self):
        self.site_of_cell = np.asarray(self.site_of_cell, dtype=np.int64)
        self.grid_of_cell = np.asarray(self.grid_of_cell, dtype=np.int64)
        self.capacity_bps = np.asarray(self.capacity_bps, dtype=float)
        self.n_cells = len(self.site_of_cell)
        self.n_sites = int(self.site_of_cell.max()) + 1 if self.n_cells else 0

    def grid_capacity(self):
        return np.bincount(self.grid_of_cell, weights=self.capacity_bps,
                           minlength=self.n_grids)


def build_cell_fleet(scenario, grid, cells_per_site=3, cell_capacity_bps=50e6):
    """Instantiate cells for every site, mapped through the grid partition."""
    site_ids = [s.id for s in scenario.sites]
    site_of = np.repeat(np.arange(len(site_ids)), cells_per_site)
    grid_of = np.repeat([grid.site_to_grid[sid] for sid in site_ids], cells_per_site)
    cap = np.full(len(site_of), float(cell_capacity_bps))
    return CellFleet(site_of_cell=site_of, grid_of_cell=grid_of, capacity_bps=cap,
                     n_grids=len(grid.rects))


def site_is_on(statuses, fleet):
    """Per-site on/off: a site is off iff every one of its cells is off."""
    any_not_off = np.zeros(fleet.n_sites, dtype=bool)
    np.logical_or.at(any_not_off, fleet.site_of_cell, statuses != OFF)
    return any_not_off


def grid_load_assignment(grid_demand_bps, statuses, fleet):
    """Split each grid's demand over its on-cells proportionally to capacity.

    Returns (per-cell load, per-grid unserved demand). Demand in a grid with
    no on-cells (or above the on-capacity) is recorded as unserved.
    """
    demand = np.asarray(grid_demand_bps, dtype=float)
    on = statuses == ON
    cap_on = np.bincount(fleet.grid_of_cell[on], weights=fleet.capacity_bps[on],
                         minlength=fleet.n_grids)
    loads = np.zeros(fleet.n_cells)
    share = np.zeros(fleet.n_grids)
    nz = cap_on > 0
    share[nz] = demand[nz] / cap_on[nz]
    loads[on] = fleet.capacity_bps[on] * share[fleet.grid_of_cell[on]]
    unserved = np.where(nz, np.maximum(0.0, demand - cap_on), demand)
    return loads, unserved


def mask_demand_satisfiable(grid_demand_bps, cell, statuses, fleet):
    """Could the grid still be served if this cell went to sleep or off?"""
    g = fleet.grid_of_cell[cell]
    members = np.flatnonzero(fleet.grid_of_cell == g)
    on = members[(statuses[members] == ON) & (members != cell)]
    return float(fleet.capacity_bps[on].sum()) >= float(np.asarray(grid_demand_bps)[g])


def mask_bs_closable(cell, statuses, fleet):
    """Could the cell's site close if the cell itself were closed?"""
    sib = np.flatnonzero(fleet.site_of_cell == fleet.site_of_cell[cell])
    sib = sib[sib != cell]
    return bool((statuses[sib] == OFF).all())


def network_power(statuses, loads, fleet, model):
    """Total draw in watts for the given statuses and per-cell loads."""
    on = statuses == ON
    util = np.zeros(fleet.n_cells)
    util[on] = np.minimum(1.0, loads[on] / fleet.capacity_bps[on])
    p = np.zeros(fleet.n_cells)
    p[on] = model.p_on_static_w + model.p_on_slope_w * util[on]
    p[statuses == SLEEPING] = model.p_sleep_w
    return float(p.sum() + model.p_site_overhead_w * site_is_on(statuses, fleet).sum())


def switch_cost(prev_statuses, cur_statuses, model):
    """Transition penalty between consecutive slots (same cell set)."""
    prev = np.asarray(prev_statuses)
    cur = np.asarray(cur_statuses)
    if prev.shape != cur.shape:
        raise ValueError("status vectors must cover the same cells")
    changed = prev != cur
    onoff = changed & (((prev == ON) & (cur == OFF)) | ((prev == OFF) & (cur == ON)))
    return float(model.beta_onoff * onoff.sum()
                 + model.beta_sleep * (changed & ~onoff).sum())


def switch_count(prev_statuses, cur_statuses):
    return int((np.asarray(prev_statuses) != np.asarray(cur_statuses)).sum())


def greedy_sleep_policy(grid_demand_bps, prev_statuses, fleet, h=0.15,
                        demand_ref_bps=None):
    """Hysteresis greedy controller for one slot.

    Per grid, the on-set must always cover bare demand; when it falls short
    it is grown up to reference * (1 + h) (waking cells at running sites
    first), and capacity is released only while the remainder still covers
    that margin. The release reference defaults to the current demand;
    passing a recent-peak estimate in demand_ref_bps keeps slot noise from
    rattling the on-set. Both masks guard every deactivation. Releases
    consolidate: a site drains whole (its cells switch off together) when
    the margin allows, otherwise single cells go to sleep next to an on
    sibling.
    """
    demand = np.asarray(grid_demand_bps, dtype=float)
    ref = demand if demand_ref_bps is None else np.maximum(
        demand, np.asarray(demand_ref_bps, dtype=float))
    statuses = np.asarray(prev_statuses).copy()
    site_on = site_is_on(statuses, fleet)
    for g in range(fleet.n_grids):
        members = np.flatnonzero(fleet.grid_of_cell == g)
        if len(members) == 0:
            continue
        cap = fleet.capacity_bps
        cap_on = cap[members][statuses[members] == ON].sum()
        target = ref[g] * (1.0 + h)
        if cap_on < demand[g]:
            # wake order: sleeping cells, then off cells at live sites,
            # then cells at closed sites; big cells first within each tier
            tier = np.where(statuses[members] == SLEEPING, 0,
                            np.where(site_on[fleet.site_of_cell[members]], 1, 2))
            order = members[np.lexsort((members, -cap[members], tier))]
            for c in order:
                if cap_on >= target:
                    break
                if statuses[c] != ON:
                    statuses[c] = ON
                    site_on[fleet.site_of_cell[c]] = True
                    cap_on += cap[c]
            continue
        # release pass 1: close whole sites (smallest on-capacity first)
        sites_here = np.unique(fleet.site_of_cell[members])
        for s in sorted(sites_here,
                        key=lambda s: (cap[members][(fleet.site_of_cell[members] == s)
                                                    & (statuses[members] == ON)].sum(), s)):
            onc = members[(fleet.site_of_cell[members] == s) & (statuses[members] == ON)]
            if len(onc) == 0:
                continue
            c_site = cap[onc].sum()
            if cap_on - c_site < target:
                continue
            ok = all(mask_demand_satisfiable(demand, c, statuses, fleet) for c in onc)
            if not ok:
                continue
            # the last cell out satisfies mask_bs_closable, so the whole
            # site closes and its sleeping cells close with it
            statuses[(fleet.site_of_cell == s) & (statuses != OFF)] = OFF
            site_on[s] = False
            cap_on -= c_site
        # release pass 2: single cells next to an on sibling go to sleep
        onc = members[statuses[members] == ON]
        for c in onc[np.lexsort((onc, cap[onc]))]:
            if cap_on - cap[c] < target:
                continue
            sib = np.flatnonzero(fleet.site_of_cell == fleet.site_of_cell[c])
            if not (statuses[sib[sib != c]] == ON).any():
                continue  # mask_bs_closable holds; site closure is pass 1's call
            if not mask_demand_satisfiable(demand, c, statuses, fleet):
                continue
            statuses[c] = SLEEPING
            cap_on -= cap[c]
    return statuses


def baseline_minimal_cells(grid_demand_bps, fleet):
    """Smallest capacity-sorted on-set per grid; every surplus cell is off."""
    demand = np.asarray(grid_demand_bps, dtype=float)
    statuses = np.full(fleet.n_cells, OFF, dtype=np.int64)
    for g in range(fleet.n_grids):
        members = np.flatnonzero(fleet.grid_of_cell == g)
        if len(members) == 0:
            continue
        order = members[np.lexsort((members, -fleet.capacity_bps[members]))]
        cap = 0.0
        for c in order:
            if demand[g] <= 0 or cap >= demand[g]:
                break
            statuses[c] = ON
            cap += fleet.capacity_bps[c]
    return statuses


def always_on(fleet):
    return np.full(fleet.n_cells, ON, dtype=np.int64)


def synth_weekly_traffic(seed, fleet, peak_util_range=(0.55, 0.8)):
    """Synthetic per-grid demand for one week of half-hour slots.

    Slot 0 is Monday 00:00. Each grid follows a double-peak diurnal curve
    scaled to a fraction of its cell capacity, damped on the weekend, with
    mild multiplicative noise. By construction weekday 14:00 demand always
    exceeds 04:00 demand.
    """
    rng = substream(seed, "weekly_traffic")
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) / 2.0

    def bump(c, w):
        d = np.abs(hours - c)
        d = np.minimum(d, 24 - d)
        return np.exp(-0.5 * (d / w) ** 2)

    diurnal = 0.12 + 0.75 * bump(11.5, 2.8) + 1.0 * bump(20.0, 3.0)
    diurnal = diurnal / diurnal.max()
    cap = fleet.grid_capacity()
    series = np.zeros((WEEK_SLOTS, fleet.n_grids))
    for g in range(fleet.n_grids):
        if cap[g] <= 0:
            continue
        peak = cap[g] * rng.uniform(*peak_util_range)
        for day in range(7):
            weekend = 0.72 if day >= 5 else 1.0
            noise = rng.uniform(0.85, 1.15, SLOTS_PER_DAY)
            series[day * SLOTS_PER_DAY:(day + 1) * SLOTS_PER_DAY, g] = (
                peak * weekend * diurnal * noise)
    return series


@dataclass
class SlotRecord:
    slot: int
    traffic_total_bps: float
    energy_ours_wh: float
    energy_always_on_wh: float
    energy_minimal_wh: float
    switches_ours: int
    switches_minimal: int
    unserved_ours_bps: float
    switch_cost_ours: float


@dataclass
class WeekResult:
    records: list
    h: float

    CSV_HEADER = ("slot,traffic_total,energy_ours,energy_always_on,"
                  "energy_minimal_cells,switches_ours,switches_minimal")

    def totals(self):
        return {
            "energy_ours_wh": sum(r.energy_ours_wh for r in self.records),
            "energy_always_on_wh": sum(r.energy_always_on_wh for r in self.records),
            "energy_minimal_wh": sum(r.energy_minimal_wh for r in self.records),
            "switches_ours": sum(r.switches_ours for r in self.records),
            "switches_minimal": sum(r.switches_minimal for r in self.records),
            "unserved_ours_bps": sum(r.unserved_ours_bps for r in self.records),
            "h": self.h,
        }

    def csv_rows(self):
        for r in self.records:
            yield (f"{r.slot},{r.traffic_total_bps!r},{r.energy_ours_wh!r},"
                   f"{r.energy_always_on_wh!r},{r.energy_minimal_wh!r},"
                   f"{r.switches_ours},{r.switches_minimal}")


REF_WINDOW_SLOTS = 4  # two hours of peak-hold for the release reference


def run_slots(traffic, fleet, model, h, slot_range=None, init_statuses=None):
    """Run controller + baselines over the given slots; returns WeekResult."""
    lo, hi = slot_range or (0, len(traffic))
    ours = init_statuses.copy() if init_statuses is not None else always_on(fleet)
    minimal = always_on(fleet)
    on_all = always_on(fleet)
    records = []
    for slot in range(lo, hi):
        demand = traffic[slot]
        ref = traffic[max(lo, slot - REF_WINDOW_SLOTS + 1):slot + 1].max(axis=0)
        prev_ours = ours
        prev_min = minimal
        ours = greedy_sleep_policy(demand, prev_ours, fleet, h=h, demand_ref_bps=ref)
        minimal = baseline_minimal_cells(demand, fleet)

        loads_ours, unserved = grid_load_assignment(demand, ours, fleet)
        loads_min, _ = grid_load_assignment(demand, minimal, fleet)
        loads_on, _ = grid_load_assignment(demand, on_all, fleet)
        records.append(SlotRecord(
            slot=slot,
            traffic_total_bps=float(demand.sum()),
            energy_ours_wh=network_power(ours, loads_ours, fleet, model) * SLOT_HOURS,
            energy_always_on_wh=network_power(on_all, loads_on, fleet, model) * SLOT_HOURS,
            energy_minimal_wh=network_power(minimal, loads_min, fleet, model) * SLOT_HOURS,
            switches_ours=switch_count(prev_ours, ours),
            switches_minimal=switch_count(prev_min, minimal),
            unserved_ours_bps=float(unserved.sum()),
            switch_cost_ours=switch_cost(prev_ours, ours, model),
        ))
    return WeekResult(records=records, h=h), ours


def tune_hysteresis(traffic, fleet, model, candidates=H_GRID):
    """Pick h minimizing day-1 energy plus switch cost (training split)."""
    best_h = candidates[0]
    best_obj = math.inf
    for h in candidates:
        res, _ = run_slots(traffic, fleet, model, h, slot_range=(0, SLOTS_PER_DAY))
        obj = (sum(r.energy_ours_wh for r in res.records)
               + model.switch_cost_wh * sum(r.switch_cost_ours for r in res.records))
        if obj < best_obj:
            best_obj = obj
            best_h = h
    return best_h


def run_week(seed, fleet, model=None, h=None):
    """Full weekly experiment: tune h on day 1, run the whole week with it."""
    model = model or EnergyModel()
    traffic = synth_weekly_traffic(seed, fleet)
    if h is None:
        h = tune_hysteresis(traffic, fleet, model)
    result, _ = run_slots(traffic, fleet, model, h)
    return result
