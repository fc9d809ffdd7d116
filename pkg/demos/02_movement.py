# %%
# User movement: lane routing, car following, indoor drift, straight lines.

import numpy as np

from cellsim import GenerationSpec, generate_scenario
from cellsim.mobility import (KraussParams, PedestrianState, VehicleState,
                              generate_schedule, indoor_step, krauss_platoon_step,
                              krauss_step, plan_route, route_cost,
                              straight_line_position)
from cellsim.rngstream import substream

scen = generate_scenario(seed=1, spec=GenerationSpec.desk())

# %%
# Shortest (travel-time) route between two intersections.

nodes = sorted(scen.lanes.nodes)
route = plan_route(scen.lanes, nodes[0], nodes[-1])
print(f"route {nodes[0]} -> {nodes[-1]}: {len(route)} lanes, "
      f"{route_cost(scen.lanes, route):.1f} s at the speed limits")

# %%
# A stop-and-go platoon: the follower's safe speed keeps gaps nonnegative
# no matter how hard the leader brakes.

params = KraussParams(v_max=14.0)
rng = substream(42, "platoon")
x = np.cumsum(np.full(12, 8.0))
v = np.zeros(12)
min_gap = np.inf
for t in range(300):
    x, v = krauss_platoon_step(x, v, params, 1.0, rng)
    min_gap = min(min_gap, np.diff(x).min())
print(f"after 300 s: head at {x[-1]:.0f} m, mean speed {v.mean():.1f} m/s, "
      f"smallest gap ever {min_gap:.2f} m")

# one vehicle closing on a stopped leader
follower = VehicleState(lane_id=0, position_m=0.0, speed_mps=12.0,
                        params=KraussParams(imperfection=0.0))
leader = VehicleState(lane_id=0, position_m=60.0, speed_mps=0.0)
for _ in range(8):
    gap = leader.position_m - follower.position_m
    follower = krauss_step(follower, leader, gap, 1.0, rng)
    print(f"  gap {gap:6.1f} m -> speed {follower.speed_mps:5.2f} m/s")

# %%
# Indoor motion: attraction to the destination, repulsion from an obstacle.

aoi = scen.aois[0]
cx = sum(p[0] for p in aoi.footprint) / 4
cy = sum(p[1] for p in aoi.footprint) / 4
ped = PedestrianState(position=(cx - 12, cy - 12), velocity=(0.0, 0.0),
                      destination=(cx + 12, cy + 12))
for step in range(40):
    ped = indoor_step(ped, aoi, 0.5)
dist = np.hypot(ped.position[0] - ped.destination[0],
                ped.position[1] - ped.destination[1])
print(f"pedestrian within {dist:.2f} m of target after 20 s")

# %%
# The straight-line mode used by the allocation experiment, plus a
# stochastic daily schedule.

print("straight line at t=30:", straight_line_position((0, 0), (300, 400), 2.0, 30.0))
sched = generate_schedule(seed=7, scenario=scen, horizon_s=86400.0, user_id=0)
for leg in sched.legs[:4]:
    print(f"  {leg.departure_s / 3600:5.1f} h  {leg.mode:<10} "
          f"({leg.origin[0]:.0f},{leg.origin[1]:.0f}) -> "
          f"({leg.destination[0]:.0f},{leg.destination[1]:.0f})")
