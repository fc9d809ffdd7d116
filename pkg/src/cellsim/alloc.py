"""Demand-decoupled resource allocation.

Per step: a controller turns each user's remaining demand into a
single-step quota, edges between users and base stations are scored by
predicted throughput minus a weighted predicted quota shortfall, the
assignment is solved as bipartite matching (users to stations, then users
to resource blocks per station), and transmit powers come from inverting
the rate formula under lagged interference estimates.

Interference estimates always use the previous step's own decisions; there
is no peeking at concurrent choices.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import min_power_for_rate
from .radio import Allocation

# weight offset that keeps already-satisfied users strictly below every
# unsatisfied user in the matching order while preserving their relative
# ranking (small enough that float64 keeps rate differences exact)
FILL_OFFSET = 1e12
MIN_ENTRY_POWER_W = 1e-9


@dataclass
class EdgeScores:
    predicted_reward: np.ndarray  # bits over the step
    predicted_shortfall: np.ndarray  # bits of quota predicted unmet
    weight: np.ndarray


class DemandController:
    """Proportional-feedback schedule for per-step demand quotas.

    delta_u = clip(kappa * remaining_u / t_rem, 0, remaining_u); kappa is
    nudged once per episode toward the target satisfaction ratio.
    """

    def __init__(self, kappa=1.0, eta=2.0, bounds=(0.5, 3.0), target_ratio=0.95):
        self.kappa = float(kappa)
        self.eta = float(eta)
        self.bounds = bounds
        self.target_ratio = float(target_ratio)

    def single_step_demand(self, remaining_demand, t_rem):
        remaining = np.asarray(remaining_demand, dtype=float)
        if t_rem < 1:
            return np.zeros_like(remaining)
        return np.clip(self.kappa * remaining / t_rem, 0.0, remaining)

    def update(self, achieved_ratio):
        self.kappa = float(np.clip(self.kappa + self.eta * (self.target_ratio - achieved_ratio),
                                   self.bounds[0], self.bounds[1]))
        return self.kappa


def single_step_demand(remaining_demand, t_rem, controller=None):
    return (controller or DemandController()).single_step_demand(remaining_demand, t_rem)


def score_edges(delta, gains, budgets_w, capacities, bandwidths, noise_w, dt_s,
                lam=10.0, interference_w=None):
    """Edge scores for every (user, site) pair.

    Predicted reward assumes the site splits its budget fairly over its
    matching capacity; predicted shortfall is the part of the user's quota
    that rate would not cover. interference_w broadcasts against the
    (users x sites) gain matrix.
    """
    gains = np.asarray(gains, dtype=float)
    p_bar = np.asarray(budgets_w) / np.maximum(np.asarray(capacities), 1)
    interf = 0.0 if interference_w is None else np.asarray(interference_w)
    sinr = gains * p_bar[None, :] / (np.asarray(noise_w)[None, :] + interf)
    r_hat = np.asarray(bandwidths)[None, :] * np.log1p(sinr) / math.log(2.0) * dt_s
    c_hat = np.maximum(0.0, np.asarray(delta)[:, None] - r_hat)
    return EdgeScores(predicted_reward=r_hat, predicted_shortfall=c_hat,
                      weight=r_hat - lam * c_hat)


def hungarian(weights, maximize=True):
    """Optimal assignment on a (possibly rectangular) weight matrix.

    Returns (rows, cols) index arrays of matched pairs, each row and column
    used at most once. Non-finite weights act as -inf sentinels: such pairs
    are never part of the returned matching.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    finite = np.isfinite(w)
    if not finite.all():
        lo = w[finite].min() if finite.any() else 0.0
        span = (w[finite].max() - lo) if finite.any() else 1.0
        sentinel = lo - (span + 1.0) * (max(w.shape) + 1)
        w = np.where(finite, w, sentinel if maximize else -sentinel)
    rows, cols = linear_sum_assignment(w, maximize=maximize)
    keep = finite[rows, cols]
    return rows[keep], cols[keep]


def brute_force_assignment_value(weights, maximize=True):
    """Exhaustive optimum over all row->column injections (test oracle)."""
    from itertools import permutations
    w = np.asarray(weights, dtype=float)
    n, m = w.shape
    best = None
    if n <= m:
        for perm in permutations(range(m), n):
            v = w[np.arange(n), perm].sum()
            if best is None or (v > best if maximize else v < best):
                best = v
    else:
        for perm in permutations(range(n), m):
            v = w[perm, np.arange(m)].sum()
            if best is None or (v > best if maximize else v < best):
                best = v
    return best


class AllocationPlanner:
    """Shared machinery behind the optimizer and the two baselines."""

    def __init__(self, sites, dt_s=1.0, noise_w_site=None, lam=10.0, slack=2,
                 power_rounds=3, max_group_columns=768):
        self.sites = sites
        self.n_sites = len(sites)
        self.dt_s = float(dt_s)
        self.site_pos = np.array([s.position for s in sites], dtype=float)
        self.budget_w = np.array([s.max_tx_power_w() for s in sites])
        self.n_channels = np.array([s.n_channels for s in sites], dtype=np.int64)
        self.bandwidth = np.array([s.rb_bandwidth_hz for s in sites])
        self.noise_w = (np.asarray(noise_w_site) if noise_w_site is not None
                        else np.zeros(self.n_sites))
        self.lam = float(lam)
        self.slack = int(slack)
        self.power_rounds = int(power_rounds)
        self.max_group_columns = int(max_group_columns)
        self.site_groups = self._make_site_groups()
        self.prev_action = None
        self.prev_decay = None

    def reset(self):
        self.prev_action = None
        self.prev_decay = None

    # -- partitioning -------------------------------------------------------

    def _make_site_groups(self):
        """Split sites into spatial groups so each matching stays small."""
        per_group = max(1, self.max_group_columns // max(int(self.n_channels.max()), 1))
        if self.n_sites <= per_group:
            return [np.arange(self.n_sites)]
        # Morton order keeps groups spatially compact
        q = np.floor((self.site_pos - self.site_pos.min(axis=0))
                     / max(np.ptp(self.site_pos), 1e-9) * 1023).astype(np.int64)

        def interleave(x, y):
            out = 0
            for bit in range(10):
                out |= ((x >> bit) & 1) << (2 * bit) | ((y >> bit) & 1) << (2 * bit + 1)
            return out

        codes = np.array([interleave(int(a), int(b)) for a, b in q])
        order = np.argsort(codes, kind="stable")
        n_groups = math.ceil(self.n_sites / per_group)
        return [np.sort(order[i::n_groups]) for i in range(n_groups)]

    def capacities(self, n_users):
        cap = min(self.n_channels.max(), math.ceil(n_users / self.n_sites) + self.slack)
        return np.minimum(self.n_channels, cap)

    # -- lagged interference --------------------------------------------------

    def interference_maps(self, n_users):
        """(users x channels) co-channel interference and (sites x channels)
        transmit powers measured from the previous step's own action."""
        max_c = int(self.n_channels.max())
        i_all = np.zeros((n_users, max_c))
        p_sc = np.zeros((self.n_sites, max_c))
        if self.prev_action is None or len(self.prev_action) == 0:
            return i_all, p_sc
        a = self.prev_action
        g = self.prev_decay
        p_sc[a.sites, a.channels] = a.powers
        for c in np.unique(a.channels):
            on_c = a.channels == c
            i_all[:, c] = g[:, a.sites[on_c]] @ a.powers[on_c]
        return i_all, p_sc

    # -- pipeline stages ------------------------------------------------------

    def match_users_to_bs(self, delta, gains, pool_mask, lam, fill=True, maps=None):
        """Capacity-aware user->site matching; returns site index or -1.

        Users outside the pool either fill leftover slots at a large weight
        offset (fill=True) or are left out entirely, which also keeps the
        co-channel transmitter count down late in an episode.
        """
        n_users = len(delta)
        caps = self.capacities(n_users)
        i_all, p_sc = maps if maps is not None else self.interference_maps(n_users)
        # per-(user, site) expected co-channel interference, own site excluded
        mean_i = i_all.mean(axis=1, keepdims=True)
        own = gains * (p_sc.sum(axis=1) / np.maximum(self.n_channels, 1))[None, :]
        interf = np.maximum(0.0, mean_i - own)
        scores = score_edges(delta, gains, self.budget_w, caps, self.bandwidth,
                             self.noise_w, self.dt_s, lam=lam, interference_w=interf)
        w = scores.weight.copy()
        if fill:
            w[~pool_mask, :] -= FILL_OFFSET
        else:
            w[~pool_mask, :] = -np.inf

        assoc = np.full(n_users, -1, dtype=np.int64)
        user_best = np.argmax(gains, axis=1)
        site_to_group = np.empty(self.n_sites, dtype=np.int64)
        for gi, members in enumerate(self.site_groups):
            site_to_group[members] = gi
        user_group = site_to_group[user_best]
        for gi, members in enumerate(self.site_groups):
            users_here = np.flatnonzero(user_group == gi)
            if len(users_here) == 0:
                continue
            cols_site = np.repeat(members, caps[members])
            sub = w[np.ix_(users_here, members)]
            sub = np.repeat(sub, caps[members], axis=1)
            rows, cols = hungarian(sub, maximize=True)
            assoc[users_here[rows]] = cols_site[cols]
        return assoc

    def match_users_to_rb(self, site, users, gains, maps=None):
        """Channel per user at one site, by estimated rate under lagged
        co-channel interference from other sites."""
        n_c = int(self.n_channels[site])
        if len(users) > n_c:
            raise ValueError("more users than channels at site")
        i_all, p_sc = maps if maps is not None else self.interference_maps(gains.shape[0])
        i_ex = i_all[users, :n_c] - gains[users, site][:, None] * p_sc[site, :n_c][None, :]
        i_ex = np.maximum(i_ex, 0.0)
        sinr = gains[users, site][:, None] * (self.budget_w[site] / n_c) \
            / (self.noise_w[site] + i_ex)
        rate = self.bandwidth[site] * np.log1p(sinr) / math.log(2.0)
        rows, cols = hungarian(rate, maximize=True)
        chan = np.full(len(users), -1, dtype=np.int64)
        chan[rows] = cols
        return chan

    def allocate_power(self, users, sites, channels, delta, gains, maps=None):
        """Quota-inverting power with a short interference fixed point.

        Round 0 prices each entry at the lagged measured interference; later
        rounds recompute interference from the tentative powers of other
        sites' entries. Per site the result is scaled into the budget or
        topped up so the budget is spent exactly.
        """
        n_entries = len(users)
        if n_entries == 0:
            return np.zeros(0)
        i_all, _ = maps if maps is not None else self.interference_maps(gains.shape[0])
        interf = i_all[users, channels]
        g = gains[users, sites]
        target_rate = np.asarray(delta)[users] / self.dt_s
        powers = np.zeros(n_entries)
        for round_i in range(self.power_rounds):
            if round_i > 0:
                from .channel import interference_by_entry
                interf = interference_by_entry(users, sites, channels, powers, gains)
            p_req = min_power_for_rate(target_rate, self.bandwidth[sites], g,
                                       self.noise_w[sites] + interf)
            p_req = np.maximum(p_req, MIN_ENTRY_POWER_W)
            powers = np.empty(n_entries)
            for b in np.unique(sites):
                here = sites == b
                total = p_req[here].sum()
                budget = self.budget_w[b]
                if total > budget:
                    powers[here] = p_req[here] * (budget / total)
                else:
                    powers[here] = p_req[here] + (budget - total) / here.sum()
        return powers

    def fair_full_power(self, users, sites):
        powers = np.zeros(len(users))
        for b in np.unique(sites):
            here = sites == b
            powers[here] = self.budget_w[b] / here.sum()
        return powers

    # -- one full decision ------------------------------------------------------

    def plan(self, obs, delta, lam, power_mode, fill=True):
        gains = np.asarray(obs.decay_factors)
        n_users = gains.shape[0]
        pool_mask = np.asarray(delta) > 0 if lam > 0 else np.ones(n_users, bool)
        if not pool_mask.any():
            pool_mask = np.ones(n_users, bool)
        maps = self.interference_maps(n_users)
        assoc = self.match_users_to_bs(delta, gains, pool_mask, lam, fill=fill, maps=maps)

        users_list = []
        sites_list = []
        chan_list = []
        for b in np.unique(assoc[assoc >= 0]):
            ub = np.flatnonzero(assoc == b)
            chan = self.match_users_to_rb(int(b), ub, gains, maps=maps)
            ok = chan >= 0
            users_list.append(ub[ok])
            sites_list.append(np.full(ok.sum(), b, dtype=np.int64))
            chan_list.append(chan[ok])
        if not users_list:
            action = Allocation.empty()
        else:
            users = np.concatenate(users_list)
            sites = np.concatenate(sites_list)
            channels = np.concatenate(chan_list)
            if power_mode == "fair_full":
                powers = self.fair_full_power(users, sites)
            else:
                powers = self.allocate_power(users, sites, channels, delta, gains,
                                             maps=maps)
            action = Allocation(users=users, sites=sites, channels=channels, powers=powers)
        self.prev_action = action
        self.prev_decay = gains.copy()
        return action


class DemandDecoupledPolicy:
    """The adaptive allocator: quota controller + matching + power inversion."""

    def __init__(self, sites, dt_s=1.0, noise_w_site=None, lam=10.0,
                 controller=None, slack=2, power_rounds=3, max_group_columns=768):
        self.planner = AllocationPlanner(sites, dt_s, noise_w_site, lam=lam, slack=slack,
                                         power_rounds=power_rounds,
                                         max_group_columns=max_group_columns)
        self.controller = controller or DemandController()
        self.lam = float(lam)

    def begin_episode(self, obs):
        self.planner.reset()

    def decide(self, obs):
        delta = self.controller.single_step_demand(obs.remaining_demand, obs.t_rem)
        return self.planner.plan(obs, delta, self.lam, "min_rate")

    def episode_end(self, satisfaction):
        self.controller.update(satisfaction)


class EquallyDividingPolicy:
    """Baseline: fixed per-step quota of initial_demand / horizon."""

    def __init__(self, sites, dt_s=1.0, noise_w_site=None, lam=10.0, slack=2,
                 power_rounds=3, max_group_columns=768):
        self.planner = AllocationPlanner(sites, dt_s, noise_w_site, lam=lam, slack=slack,
                                         power_rounds=power_rounds,
                                         max_group_columns=max_group_columns)
        self.lam = float(lam)
        self._per_step = None

    def begin_episode(self, obs):
        self.planner.reset()
        self._per_step = np.asarray(obs.remaining_demand, dtype=float) / max(obs.t_rem, 1)

    def decide(self, obs):
        if self._per_step is None:
            self.begin_episode(obs)
        delta = np.minimum(self._per_step, np.asarray(obs.remaining_demand, dtype=float))
        # surplus slots stay empty: pure demand service, no opportunistic load
        return self.planner.plan(obs, delta, self.lam, "min_rate", fill=False)


class IgnoreDemandsPolicy:
    """Baseline: pure throughput chase, demand-blind (lambda = 0)."""

    def __init__(self, sites, dt_s=1.0, noise_w_site=None, slack=2,
                 max_group_columns=768):
        self.planner = AllocationPlanner(sites, dt_s, noise_w_site, lam=0.0, slack=slack,
                                         max_group_columns=max_group_columns)
        self.lam = 0.0

    def begin_episode(self, obs):
        self.planner.reset()

    def decide(self, obs):
        delta = np.zeros(len(obs.remaining_demand))
        return self.planner.plan(obs, delta, 0.0, "fair_full")


def baseline_equally_dividing(env):
    return EquallyDividingPolicy(env.scenario.sites, env.config.dt_s, env.noise_w_site)


def baseline_ignore_demands(env):
    return IgnoreDemandsPolicy(env.scenario.sites, env.config.dt_s, env.noise_w_site)


def make_policy(name, env, lam=10.0, controller=None, **kwargs):
    if name == "ours":
        return DemandDecoupledPolicy(env.scenario.sites, env.config.dt_s,
                                     env.noise_w_site, lam=lam,
                                     controller=controller, **kwargs)
    if name == "equal":
        return EquallyDividingPolicy(env.scenario.sites, env.config.dt_s,
                                     env.noise_w_site, lam=lam, **kwargs)
    if name == "ignore":
        return IgnoreDemandsPolicy(env.scenario.sites, env.config.dt_s,
                                   env.noise_w_site, **kwargs)
    raise ValueError(f"unknown policy {name!r}")
