"""Discrete-time constrained-MDP environment over the simulated network.

State per step: remaining time, per-user remaining demand, per-site power
budget, and the linear signal decay matrix (users x sites). Actions are
full allocations; reward is raw throughput and cost is demand actually
served. Everything is a deterministic function of (scenario, config, seed).
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel, demand, radio
from .channel import FadingModel, RadioConfig
from .geometry import ObstructionRaster
from .rngstream import substream

USER_HEIGHT_M = 1.5


@dataclass
class EpisodeConfig:
    horizon_steps: int = 20
    dt_s: float = 1.0
    n_users: int = 200
    demand_mode: str = "uniform_episode"  # uniform_episode | hierarchical
    mobility_mode: str = "straight_line"  # straight_line | static
    endpoint_mode: str = "street"  # street (trips along one street) | open
    user_speed_range: tuple = (0.5, 2.0)
    trip_length_range: tuple = (10.0, 200.0)
    street_lateral_jitter_m: float = 2.0
    fading: FadingModel = field(default_factory=lambda: FadingModel("nakagami", m=2.0))
    nlos_penalty_db: float = channel.NLOS_PENALTY_DB
    wall_penetration_db: float = channel.WALL_PENETRATION_DB
    los_candidates: int = 16  # exact LoS tested for this many nearest sites
    raster_cell_m: float = 4.0
    outage_threshold_bps: float = radio.OUTAGE_THRESHOLD_BPS
    demand_slot: int = 18  # half-hour slot used by hierarchical demand
    keep_link_terms: bool = False
    radio: RadioConfig = field(default_factory=RadioConfig)

    @classmethod
    def desk(cls, n_users=200, **overrides):
        """Settings for the small allocation-experiment world.

        The street canyons of the desk map isolate cells far better than
        the flat default non-LoS penalty expresses, and the experiment's
        satisfaction target is unreachable without that isolation, so the
        preset deepens the penalty to a measured-urban-canyon figure.
        """
        params = dict(n_users=n_users, nlos_penalty_db=44.0,
                      user_speed_range=(2.0, 8.0))
        params.update(overrides)
        return cls(**params)


@dataclass
class CmdpState:
    t_rem: int
    remaining_demand: np.ndarray
    max_tx_power_w: np.ndarray
    decay_factors: np.ndarray
    user_positions: np.ndarray
    rng_cursor: int


@dataclass
class Observation:
    t_rem: int
    remaining_demand: np.ndarray
    max_tx_power_w: np.ndarray
    decay_factors: np.ndarray


@dataclass
class StepOutcome:
    reward_bits: float
    cost_bits: float
    done: bool


@dataclass
class StepRecord:
    t: int
    remaining_demand_before: np.ndarray
    action: radio.Allocation
    outcome: StepOutcome
    kpi: radio.KpiRecord


@dataclass
class EpisodeTrace:
    initial_demand: np.ndarray
    steps: list

    @property
    def total_reward_bits(self):
        return sum(s.outcome.reward_bits for s in self.steps)

    @property
    def total_cost_bits(self):
        return sum(s.outcome.cost_bits for s in self.steps)

    def per_user_served(self):
        served = np.zeros_like(self.initial_demand)
        for s in self.steps:
            served += np.minimum(s.remaining_demand_before,
                                 s.kpi.per_user_rate * 1.0)
        return served

    def to_json_dict(self):
        return {
            "initial_demand_bits": float(self.initial_demand.sum()),
            "total_reward_bits": float(self.total_reward_bits),
            "total_cost_bits": float(self.total_cost_bits),
            "satisfaction_ratio": satisfaction_ratio(self),
            "steps": [{
                "t": s.t,
                "n_assigned": int(len(s.action)),
                "reward_bits": s.outcome.reward_bits,
                "cost_bits": s.outcome.cost_bits,
                "sum_bs_rate": s.kpi.sum_bs_rate,
                "total_tx_power_w": s.kpi.total_tx_power_w,
                "outage_ratio": s.kpi.outage_ratio,
            } for s in self.steps],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _read_only(arr):
    v = arr.view()
    v.flags.writeable = False
    return v


class CmdpEnv:
    """Single-owner stepped environment; one step in flight at a time."""

    def __init__(self, scenario, config=None, seed=0):
        self.scenario = scenario
        self.config = config or EpisodeConfig()
        self.seed = int(seed)
        sites = scenario.sites
        self.n_sites = len(sites)
        self.site_pos = np.array([s.position for s in sites], dtype=float)
        self.site_height = np.array([s.antenna_height_m for s in sites])
        self.site_indoor = np.array([s.indoor for s in sites], dtype=bool)
        self.site_budget_w = np.array([s.max_tx_power_w() for s in sites])
        self.site_channels = np.array([s.n_channels for s in sites], dtype=np.int64)
        self.site_bandwidth = np.array([s.rb_bandwidth_hz for s in sites])
        self.carrier_mhz = float(sites[0].carrier_freq_mhz)
        self.noise_w_site = channel.dbm_to_w(np.array([
            channel.noise_power(self.config.radio.noise_density_dbm_hz, b)
            for b in self.site_bandwidth]))
        self.raster = ObstructionRaster(
            scenario.area_extent,
            [(b.footprint, b.height_m) for b in scenario.buildings],
            cell_m=self.config.raster_cell_m)
        self.state = None
        self.last_link_terms = None
        self._shadow_unit = None
        self._route = None

    # -- world sampling ----------------------------------------------------

    def _sample_open_points(self, rng, n):
        """Uniform points over the extent rejected out of building footprints."""
        x0, y0, x1, y1 = self.scenario.area_extent
        pts = np.empty((n, 2))
        need = np.arange(n)
        while len(need):
            cand = np.column_stack([rng.uniform(x0, x1, len(need)),
                                    rng.uniform(y0, y1, len(need))])
            ok = ~self.raster.indoor(cand)
            pts[need[ok]] = cand[ok]
            need = need[~ok]
        return pts

    def _sample_street_trips(self, rng, n):
        """Start/end pairs running along one lane's street line per user.

        A lane is drawn length-weighted; the trip starts on it and runs a
        random distance along the lane's direction (so journeys follow
        roads rather than cutting through blocks).
        """
        cfg = self.config
        x0, y0, x1, y1 = self.scenario.area_extent
        lanes = self.scenario.lanes
        lane_ids = sorted(lanes.edges)
        a = np.array([lanes.nodes[lanes.edges[l].src] for l in lane_ids])
        b = np.array([lanes.nodes[lanes.edges[l].dst] for l in lane_ids])
        seg = b - a
        length = np.hypot(seg[:, 0], seg[:, 1])
        pick = rng.choice(len(lane_ids), size=n, p=length / length.sum())
        u = seg[pick] / np.maximum(length[pick], 1e-9)[:, None]
        normal = np.column_stack([-u[:, 1], u[:, 0]])
        along = rng.uniform(0, length[pick])
        lateral = rng.uniform(-cfg.street_lateral_jitter_m, cfg.street_lateral_jitter_m, n)
        start = a[pick] + u * along[:, None] + normal * lateral[:, None]
        trip = rng.uniform(*cfg.trip_length_range, n) * rng.choice([-1.0, 1.0], size=n)
        end = start + u * trip[:, None]
        start = np.clip(start, [x0, y0], [x1, y1])
        end = np.clip(end, [x0, y0], [x1, y1])
        return start, end

    def _positions_at(self, t_abs):
        if self.config.mobility_mode == "static" or t_abs == 0:
            return self._route["start"].copy()
        run = np.minimum(self._route["speed"] * (t_abs * self.config.dt_s),
                         self._route["dist"])
        return self._route["start"] + self._route["unit"] * run[:, None]

    def demand_trace(self):
        """Per-step demand arrivals (steps x users).

        The uniform-episode mode has a single arrival at t=0 (the episode
        total); the hierarchical mode draws every step from the pattern
        library. Deterministic per seed, so it can be dumped after the fact.
        """
        cfg = self.config
        if cfg.demand_mode == "uniform_episode":
            totals = demand.sample_episode_demand(
                self.seed, cfg.n_users, cfg.radio.rb_bandwidth_hz, cfg.horizon_steps)
            return totals[None, :]
        if cfg.demand_mode != "hierarchical":
            raise ValueError(f"unknown demand mode {cfg.demand_mode!r}")
        patterns = demand.build_pattern_library(self.seed, 5)
        clusters = demand.assign_clusters(self.seed, cfg.n_users, patterns.k)
        rng = substream(self.seed, "hier_demand")
        means = patterns.means_bps[clusters, cfg.demand_slot] * cfg.dt_s
        shape = 2.0
        return np.stack([rng.gamma(shape=shape, size=cfg.n_users) * (means / shape)
                         for _ in range(cfg.horizon_steps)])

    def _initial_demand(self):
        return self.demand_trace().sum(axis=0)

    # -- link matrix ---------------------------------------------------------

    def _compute_links(self, t_abs, positions):
        """Decay matrix (and optionally the dB terms) for all user-site pairs.

        Exact raster LoS is tested for each user's los_candidates nearest
        sites; links beyond that set are treated as non-LoS, which at those
        ranges they almost surely are.
        """
        cfg = self.config
        n_u = len(positions)
        diff = positions[:, None, :] - self.site_pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))

        los = np.zeros((n_u, self.n_sites), dtype=bool)
        k = min(cfg.los_candidates, self.n_sites)
        if k > 0:
            near = np.argpartition(dist, k - 1, axis=1)[:, :k]
            uu = np.repeat(np.arange(n_u), k)
            ss = near.ravel()
            clear = self.raster.los_clear(
                positions[uu], USER_HEIGHT_M, self.site_pos[ss], self.site_height[ss])
            los[uu, ss] = clear

        user_indoor = self.raster.indoor(positions)
        same_side = user_indoor[:, None] == self.site_indoor[None, :]

        l_d = channel.free_space_loss(dist, self.carrier_mhz)
        if self._shadow_unit is None:
            self._shadow_unit = channel.shadowing_matrix(
                self.seed, np.arange(n_u), np.arange(self.n_sites))
        l_s = channel.large_scale_db(los, same_side, self._shadow_unit,
                                     nlos_penalty_db=cfg.nlos_penalty_db,
                                     wall_penetration_db=cfg.wall_penetration_db)
        rng = substream(self.seed, "fading", t_abs)
        l_f = cfg.fading.sample_db(rng, size=(n_u, self.n_sites))
        pl = l_d + l_s + l_f
        decay = np.minimum(channel.db_to_linear(-pl), 1.0)
        if cfg.keep_link_terms:
            self.last_link_terms = {"distance": dist, "los": los, "L_d": l_d,
                                    "L_s": l_s, "L_f": l_f, "PL": pl,
                                    "user_indoor": user_indoor}
        return decay

    # -- environment API -----------------------------------------------------

    def reset(self):
        cfg = self.config
        rng = substream(self.seed, "users")
        if cfg.endpoint_mode == "street":
            start, end = self._sample_street_trips(rng, cfg.n_users)
        else:
            start = self._sample_open_points(rng, cfg.n_users)
            end = self._sample_open_points(rng, cfg.n_users)
        speed = rng.uniform(cfg.user_speed_range[0], cfg.user_speed_range[1], cfg.n_users)
        d = end - start
        dist = np.hypot(d[:, 0], d[:, 1])
        unit = np.divide(d, np.maximum(dist, 1e-12)[:, None])
        self._route = {"start": start, "end": end, "speed": speed,
                       "dist": dist, "unit": unit}
        self._shadow_unit = None
        positions = self._positions_at(0)
        self.state = CmdpState(
            t_rem=cfg.horizon_steps,
            remaining_demand=self._initial_demand(),
            max_tx_power_w=self.site_budget_w.copy(),
            decay_factors=self._compute_links(0, positions),
            user_positions=positions,
            rng_cursor=0)
        return self.observe()

    def observe(self):
        s = self.state
        return Observation(
            t_rem=s.t_rem,
            remaining_demand=_read_only(s.remaining_demand),
            max_tx_power_w=_read_only(s.max_tx_power_w),
            decay_factors=_read_only(s.decay_factors))

    def step(self, action):
        """Apply a full allocation; rejects any constraint violation."""
        if self.state is None or self.state.t_rem <= 0:
            raise RuntimeError("step called on a finished or unreset environment")
        cfg = self.config
        s = self.state
        action.validate(cfg.n_users, self.scenario.sites)

        rates_user = np.zeros(cfg.n_users)
        if len(action):
            sinr = channel.sinr_vector(action, s.decay_factors,
                                       self.noise_w_site[action.sites])
            rates = channel.shannon_rate(self.site_bandwidth[action.sites], sinr)
            rates_user[action.users] = rates
        served = np.minimum(s.remaining_demand, rates_user * cfg.dt_s)
        reward = float((rates_user * cfg.dt_s).sum())
        cost = float(served.sum())

        remaining_before = s.remaining_demand.copy()
        s.remaining_demand = s.remaining_demand - served
        s.rng_cursor += 1
        s.t_rem -= 1
        positions = self._positions_at(s.rng_cursor)
        s.user_positions = positions
        s.decay_factors = self._compute_links(s.rng_cursor, positions)

        outcome = StepOutcome(reward_bits=reward, cost_bits=cost, done=s.t_rem == 0)
        kpi = radio.compute_kpis(remaining_before, rates_user, action, cfg.dt_s,
                                 t=s.rng_cursor - 1,
                                 outage_threshold_bps=cfg.outage_threshold_bps)
        return self.observe(), outcome, kpi

    def calibration_hook(self, real_world_kpis):
        """Attachment point for updating the twin from live measurements.

        Calibration against a physical network is out of scope here; this
        records nothing and exists so callers have a stable interface.
        """
        return None


def run_episode(env, policy):
    """Roll one full episode; per-step wall-clock split is recorded in KPIs."""
    obs = env.reset()
    if hasattr(policy, "begin_episode"):
        policy.begin_episode(obs)
    initial = env.state.remaining_demand.copy()
    steps = []
    for _ in range(env.config.horizon_steps):
        t0 = time.perf_counter()
        action = policy.decide(obs)
        t1 = time.perf_counter()
        before = env.state.remaining_demand.copy()
        t = env.state.rng_cursor
        obs, outcome, kpi = env.step(action)
        t2 = time.perf_counter()
        kpi.action_selection_time_s = t1 - t0
        kpi.interaction_time_s = t2 - t1
        steps.append(StepRecord(t=t, remaining_demand_before=before,
                                action=action, outcome=outcome, kpi=kpi))
        if outcome.done:
            break
    trace = EpisodeTrace(initial_demand=initial, steps=steps)
    if hasattr(policy, "episode_end"):
        policy.episode_end(satisfaction_ratio(trace))
    return trace


def satisfaction_ratio(trace):
    """Aggregate served demand over aggregate requested demand, in [0, 1]."""
    total = float(trace.initial_demand.sum())
    if total <= 0:
        return 1.0
    return min(1.0, trace.total_cost_bits / total)
