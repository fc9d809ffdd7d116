"""User movement: lane routing, car following, indoor motion, schedules.

All updates are pure functions of their inputs plus an explicit RNG stream,
so trajectories replay bit-identically and users can be stepped in any
order (vehicles only read their leader's previous state).
"""

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import distance_to_polygon, nearest_polygon_point, point_in_polygon, project_into_polygon
from .rngstream import substream


class UnreachableError(ValueError):
    """Destination not in the origin's connected component."""


@dataclass
class KraussParams:
    v_max: float = 16.7
    accel: float = 2.0
    decel: float = 4.0
    tau: float = 1.0
    imperfection: float = 0.5


@dataclass
class VehicleState:
    lane_id: int
    position_m: float
    speed_mps: float
    params: KraussParams = field(default_factory=KraussParams)


@dataclass
class PedestrianParams:
    desired_speed: float = 1.34
    relaxation_time: float = 0.5
    obstacle_strength: float = 2.0  # m/s^2 at contact
    obstacle_range: float = 0.3  # m


@dataclass
class PedestrianState:
    position: tuple
    velocity: tuple
    destination: tuple
    params: PedestrianParams = field(default_factory=PedestrianParams)


@dataclass
class ScheduleLeg:
    origin: tuple
    destination: tuple
    departure_s: float
    mode: str  # vehicle | pedestrian | indoor | straight_line


@dataclass
class TravelSchedule:
    user_id: int
    legs: list


# ---------------------------------------------------------------------------
# routing

def plan_route(graph, origin, dest):
    """Minimum travel-time lane sequence from origin to dest node via A*.

    Edge cost is length / speed_limit; the heuristic is straight-line
    distance over the network's top speed limit, which never overestimates.
    """
    if origin == dest:
        return []
    adj = graph.adjacency()
    if origin not in adj or dest not in adj:
        raise UnreachableError(f"unknown node in ({origin}, {dest})")
    v_top = max(e.speed_limit_mps for e in graph.edges.values())
    dx, dy = graph.nodes[dest]

    def h(node):
        x, y = graph.nodes[node]
        return math.hypot(dx - x, dy - y) / v_top

    best = {origin: 0.0}
    came = {}
    heap = [(h(origin), 0.0, origin)]
    while heap:
        f, g, u = heapq.heappop(heap)
        if u == dest:
            route = []
            while u != origin:
                u, lid = came[u]
                route.append(lid)
            return route[::-1]
        if g > best.get(u, math.inf):
            continue
        for v, lid in adj[u]:
            e = graph.edges[lid]
            g2 = g + e.length_m / e.speed_limit_mps
            if g2 < best.get(v, math.inf):
                best[v] = g2
                came[v] = (u, lid)
                heapq.heappush(heap, (g2 + h(v), g2, v))
    raise UnreachableError(f"node {dest} not reachable from {origin}")


def route_cost(graph, route):
    return sum(graph.edges[lid].length_m / graph.edges[lid].speed_limit_mps for lid in route)


# ---------------------------------------------------------------------------
# car following

def krauss_safe_speed(v, v_leader, gap_m, params):
    v_bar = 0.5 * (v + v_leader)
    return v_leader + (gap_m - v_leader * params.tau) / (v_bar / params.decel + params.tau)


def krauss_step(follower, leader, gap_m, dt_s, rng):
    """One Krauss update of the follower; leader None means a free road."""
    p = follower.params
    if leader is None:
        v_safe = math.inf
    else:
        v_safe = krauss_safe_speed(follower.speed_mps, leader.speed_mps, gap_m, p)
    v_des = min(p.v_max, follower.speed_mps + p.accel * dt_s, v_safe)
    eta = rng.uniform(0.0, p.imperfection * p.accel * dt_s) if p.imperfection > 0 else 0.0
    v_new = max(0.0, v_des - eta)
    return replace(follower, position_m=follower.position_m + v_new * dt_s,
                   speed_mps=v_new)


def krauss_platoon_step(positions, speeds, params, dt_s, rng):
    """Vectorized single-lane update: each vehicle follows the next one up.

    positions must be ascending (index -1 is the platoon head). All
    followers react to their leader's previous state, matching per-vehicle
    krauss_step calls evaluated against the old snapshot.
    """
    v = np.asarray(speeds, dtype=float)
    x = np.asarray(positions, dtype=float)
    v_lead = v[1:]
    gaps = np.diff(x)
    v_bar = 0.5 * (v[:-1] + v_lead)
    v_safe = v_lead + (gaps - v_lead * params.tau) / (v_bar / params.decel + params.tau)
    v_des = np.minimum(v + params.accel * dt_s, params.v_max)
    v_des[:-1] = np.minimum(v_des[:-1], v_safe)
    eta = rng.uniform(0.0, max(params.imperfection * params.accel * dt_s, 1e-300), size=len(v))
    v_new = np.maximum(0.0, v_des - (eta if params.imperfection > 0 else 0.0))
    return x + v_new * dt_s, v_new


# ---------------------------------------------------------------------------
# indoor motion

def indoor_acceleration(ped, aoi):
    """Destination attraction plus exponential obstacle repulsion."""
    p = np.asarray(ped.position, dtype=float)
    v = np.asarray(ped.velocity, dtype=float)
    d = np.asarray(ped.destination, dtype=float) - p
    dist = np.hypot(*d)
    prm = ped.params
    desired = prm.desired_speed * d / dist if dist > 1e-12 else np.zeros(2)
    acc = (desired - v) / prm.relaxation_time
    for obs in aoi.obstacles:
        q = nearest_polygon_point(obs, p)
        away = p - q
        r = np.hypot(*away)
        if r < 1e-12:
            continue
        acc = acc + prm.obstacle_strength * math.exp(-distance_to_polygon(obs, p) / prm.obstacle_range) * away / r
    return acc


def indoor_step(ped, aoi, dt_s):
    """Explicit Euler step of the social-force dynamics, kept inside the AoI."""
    acc = indoor_acceleration(ped, aoi)
    v = np.asarray(ped.velocity, dtype=float) + acc * dt_s
    speed = np.hypot(*v)
    cap = 1.5 * ped.params.desired_speed
    if speed > cap:
        v = v * (cap / speed)
    pos = np.asarray(ped.position, dtype=float) + v * dt_s
    if not point_in_polygon(aoi.footprint, pos):
        pos = project_into_polygon(aoi.footprint, pos)
    return replace(ped, position=(float(pos[0]), float(pos[1])),
                   velocity=(float(v[0]), float(v[1])))


# ---------------------------------------------------------------------------
# straight-line mode

def straight_line_position(start, end, speed_mps, t_s):
    """Uniform-speed motion from start toward end, clamped at arrival."""
    s = np.asarray(start, dtype=float)
    e = np.asarray(end, dtype=float)
    d = e - s
    total = np.hypot(*d)
    if total <= 1e-12:
        return (float(s[0]), float(s[1]))
    run = min(max(speed_mps, 0.0) * max(t_s, 0.0), total)
    if run >= total:
        return (float(e[0]), float(e[1]))
    p = s + d * (run / total)
    return (float(p[0]), float(p[1]))


# ---------------------------------------------------------------------------
# schedules

# two-peak diurnal departure profile: morning and evening rush
DIURNAL_PEAKS_H = (8.5, 18.0)
DIURNAL_STD_H = 1.5


def sample_departure_hour(rng):
    mu = DIURNAL_PEAKS_H[0] if rng.random() < 0.5 else DIURNAL_PEAKS_H[1]
    return float(np.clip(rng.normal(mu, DIURNAL_STD_H), 0.0, 23.999))


def generate_schedule(seed, scenario, horizon_s, user_id=0):
    """Alternating indoor-dwell / road legs for one user.

    Deterministic per (seed, user_id); departures follow the two-peak
    diurnal profile scaled into the horizon.
    """
    if horizon_s <= 0:
        raise ValueError("horizon must be positive")
    rng = substream(seed, "schedule", user_id)
    n_aois = len(scenario.aois)
    here = scenario.aois[int(rng.integers(n_aois))]
    pos = tuple(here.entrances[0])
    legs = []
    t = sample_departure_hour(rng) / 24.0 * horizon_s
    while t < horizon_s and len(legs) < 12:
        nxt = scenario.aois[int(rng.integers(n_aois))]
        target = tuple(nxt.entrances[0])
        mode = "vehicle" if rng.random() < 0.6 else "pedestrian"
        legs.append(ScheduleLeg(origin=pos, destination=target, departure_s=float(t), mode=mode))
        dist = math.hypot(target[0] - pos[0], target[1] - pos[1])
        travel = dist / (10.0 if mode == "vehicle" else 1.34) + 1.0
        # indoor dwell at the destination before the next road leg
        dwell = float(rng.uniform(600, 7200)) * horizon_s / 86400.0
        t_arrive = t + travel
        if t_arrive >= horizon_s:
            break
        fx = sum(p[0] for p in nxt.footprint) / len(nxt.footprint)
        fy = sum(p[1] for p in nxt.footprint) / len(nxt.footprint)
        legs.append(ScheduleLeg(origin=target, destination=(fx, fy),
                                departure_s=float(t_arrive), mode="indoor"))
        pos = (fx, fy)
        here = nxt
        t = t_arrive + max(dwell, 1.0)
    if not legs:
        legs.append(ScheduleLeg(origin=pos, destination=pos,
                                departure_s=float(min(horizon_s * 0.5, horizon_s - 1)),
                                mode="indoor"))
    return TravelSchedule(user_id=user_id, legs=legs)
