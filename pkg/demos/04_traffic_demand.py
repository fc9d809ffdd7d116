# %%
# Traffic demand: a small library of diurnal archetypes, per-user processes
# with burst switching, and the flat episode totals the allocation
# experiment uses.

import numpy as np

from cellsim.demand import (UserDemandProcess, assign_clusters,
                            build_pattern_library, sample_demand,
                            sample_episode_demand)
from cellsim.rngstream import substream

lib = build_pattern_library(seed=4, k=5)
print("clusters:", ", ".join(lib.names))

# crude terminal sparkline of each diurnal curve (48 half-hour slots)
BLOCKS = " .:-=+*#%@"
for name, curve in zip(lib.names, lib.means_bps):
    scaled = (curve / lib.means_bps.max() * (len(BLOCKS) - 1)).astype(int)
    print(f"  {name:<15}", "".join(BLOCKS[v] for v in scaled))

# %%
# Users follow their cluster's curve but switch between a normal and a
# burst regime; bursts multiply the mean demand.

clusters = assign_clusters(seed=4, n_users=6, k=lib.k)
rng = substream(9, "demo-demand")
proc = UserDemandProcess(user_id=0, cluster=int(clusters[0]))
slot_evening = 40  # 20:00-20:30
draws = [sample_demand(proc, lib, slot_evening, 1.0, rng) for _ in range(3600)]
print(f"user 0 ({lib.names[clusters[0]]}) over one evening hour-of-slots: "
      f"mean {np.mean(draws) / 1e3:.1f} kbit/step, "
      f"p99 {np.percentile(draws, 99) / 1e3:.1f} kbit/step")

# %%
# Episode totals for the short allocation runs: uniform on [0, 60 x block
# bandwidth], i.e. up to ~10.8 Mbit per user over 20 steps.

totals = sample_episode_demand(seed=4, n_users=8000, bandwidth_hz=1.8e5)
print(f"{len(totals)} users, mean {totals.mean() / 1e6:.2f} Mbit, "
      f"max {totals.max() / 1e6:.2f} Mbit")
