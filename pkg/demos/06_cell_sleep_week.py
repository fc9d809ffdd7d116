# %%
# A synthetic week of cell sleeping: every half hour the controller decides
# which cells stay on, doze, or power off, against two baselines (always-on
# and the per-slot minimal set).

import numpy as np

from cellsim import GenerationSpec, build_cell_fleet, build_grid, generate_scenario
from cellsim.sleep import (EnergyModel, SLOTS_PER_DAY, run_slots, synth_weekly_traffic,
                           tune_hysteresis)

scen = generate_scenario(seed=1, spec=GenerationSpec.table1())
grid = build_grid(scen, cell_size_m=500.0)
fleet = build_cell_fleet(scen, grid, cells_per_site=3, cell_capacity_bps=50e6)
model = EnergyModel()
print(f"{fleet.n_cells} cells across {fleet.n_grids} grids, "
      f"{fleet.grid_capacity().sum() / 1e9:.1f} Gbit/s total capacity")

# %%
# Day 1 is the training split: pick the hysteresis margin there, then run
# the whole week with it frozen.

traffic = synth_weekly_traffic(seed=7, fleet=fleet)
h = tune_hysteresis(traffic, fleet, model)
print("tuned hysteresis margin:", h)
result, _ = run_slots(traffic, fleet, model, h)

e_ours = np.array([r.energy_ours_wh for r in result.records])
e_on = np.array([r.energy_always_on_wh for r in result.records])
e_min = np.array([r.energy_minimal_wh for r in result.records])
traf = np.array([r.traffic_total_bps for r in result.records])

print(f"weekly energy: ours {e_ours.sum() / 1e6:.2f} MWh, "
      f"always-on {e_on.sum() / 1e6:.2f} MWh, minimal {e_min.sum() / 1e6:.2f} MWh")
print(f"saving vs always-on: {(1 - e_ours.sum() / e_on.sum()) * 100:.1f}%")
print(f"energy/traffic correlation: {np.corrcoef(e_ours, traf)[0, 1]:.3f}")

sw_ours = sum(r.switches_ours for r in result.records[SLOTS_PER_DAY:])
sw_min = sum(r.switches_minimal for r in result.records[SLOTS_PER_DAY:])
print(f"status switches days 2-7: ours {sw_ours}, minimal-cells {sw_min}")

# %%
# A terminal strip chart of day 3: energy follows the traffic curve.

day = slice(2 * SLOTS_PER_DAY, 3 * SLOTS_PER_DAY)
BLOCKS = " .:-=+*#%@"
for label, series in (("traffic", traf[day]), ("energy", e_ours[day])):
    scaled = ((series - series.min()) / (series.max() - series.min())
              * (len(BLOCKS) - 1)).astype(int)
    print(f"  {label:<8}", "".join(BLOCKS[v] for v in scaled))

# %%
# Optional: a real plot if matplotlib is around.

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(10, 4))
    hours = np.arange(len(e_ours)) / 2.0
    ax.plot(hours, e_on, label="always on", lw=1)
    ax.plot(hours, e_min, label="minimal cells", lw=1)
    ax.plot(hours, e_ours, label="sleep controller", lw=1.5)
    ax2 = ax.twinx()
    ax2.plot(hours, traf / 1e9, "k--", alpha=0.4, label="traffic")
    ax.set_xlabel("hour of week")
    ax.set_ylabel("energy per half hour (Wh)")
    ax2.set_ylabel("traffic (Gbit/s)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig("/tmp/sleep_week.png", dpi=120)
    print("wrote /tmp/sleep_week.png")
except ImportError:
    pass
