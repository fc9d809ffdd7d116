"""Base-station side behaviors: allocations, default policies, KPIs.

An Allocation is a flat list of (user, site, channel, power) entries;
users absent from the list are unserved this step. Validation checks the
five scheduling constraints in a fixed order and names the first one
violated, so optimizer bugs surface with a usable message.
"""

from dataclasses import dataclass

import numpy as np

from .channel import min_power_for_rate

POWER_BUDGET_RTOL = 1e-9

# violation identifiers, in validation order
USER_SINGLE_BS = "user-single-bs"
USER_SINGLE_RB = "user-single-rb"
BS_USER_CAPACITY = "bs-user-capacity"
RB_EXCLUSIVE = "rb-exclusive"
POWER_BUDGET = "power-budget"


class ConstraintViolation(ValueError):
    def __init__(self, constraint, message):
        super().__init__(f"[{constraint}] {message}")
        self.constraint = constraint


@dataclass
class Allocation:
    users: np.ndarray
    sites: np.ndarray
    channels: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.sites = np.asarray(self.sites, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.int64)
        self.powers = np.asarray(self.powers, dtype=float)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64),
                   np.zeros(0, np.int64), np.zeros(0))

    def __len__(self):
        return len(self.users)

    def site_of_user(self, n_users):
        """Per-user serving site index, -1 where unassigned."""
        out = np.full(n_users, -1, dtype=np.int64)
        out[self.users] = self.sites
        return out

    def validate(self, n_users, sites):
        """Raise ConstraintViolation naming the first violated constraint."""
        if len(self.users) == 0:
            return self
        n_sites = len(sites)
        if (self.users < 0).any() or (self.users >= n_users).any():
            raise ConstraintViolation("unknown-user", "entry references an unknown user id")
        if (self.sites < 0).any() or (self.sites >= n_sites).any():
            raise ConstraintViolation("unknown-site", "entry references an unknown site id")
        n_ch = np.array([s.n_channels for s in sites])
        if (self.channels < 0).any() or (self.channels >= n_ch[self.sites]).any():
            raise ConstraintViolation("channel-range", "channel index outside the site's range")
        if (self.powers <= 0).any():
            bad = int(self.users[np.argmin(self.powers)])
            raise ConstraintViolation("power-positive",
                                      f"user {bad} assigned without positive power")

        order = np.argsort(self.users, kind="stable")
        u = self.users[order]
        dup = np.flatnonzero(u[1:] == u[:-1])
        if len(dup):
            i = order[dup[0]]
            j = order[dup[0] + 1]
            if self.sites[i] != self.sites[j]:
                raise ConstraintViolation(
                    USER_SINGLE_BS, f"user {u[dup[0]]} connected to more than one base station")
            raise ConstraintViolation(
                USER_SINGLE_RB, f"user {u[dup[0]]} assigned more than one resource block")

        counts = np.bincount(self.sites, minlength=n_sites)
        over = np.flatnonzero(counts > n_ch)
        if len(over):
            s = int(over[0])
            raise ConstraintViolation(
                BS_USER_CAPACITY,
                f"site {s} serves {counts[s]} users but has {n_ch[s]} channels")

        key = self.sites * (n_ch.max() + 1) + self.channels
        ks = np.sort(key)
        if (ks[1:] == ks[:-1]).any():
            idx = np.flatnonzero(ks[1:] == ks[:-1])[0]
            raise ConstraintViolation(
                RB_EXCLUSIVE,
                f"resource block {int(ks[idx] % (n_ch.max() + 1))} at site "
                f"{int(ks[idx] // (n_ch.max() + 1))} allocated twice")

        budgets = np.array([s.max_tx_power_w() for s in sites])
        tot = np.bincount(self.sites, weights=self.powers, minlength=n_sites)
        over = np.flatnonzero(tot > budgets * (1 + POWER_BUDGET_RTOL))
        if len(over):
            s = int(over[0])
            raise ConstraintViolation(
                POWER_BUDGET,
                f"site {s} transmit power {tot[s]:.6g} W exceeds budget {budgets[s]:.6g} W")
        return self


@dataclass
class KpiRecord:
    t: int
    sum_bs_rate: float
    total_tx_power_w: float
    per_user_rate: np.ndarray
    network_throughput_bits: float
    outage_ratio: float
    action_selection_time_s: float = 0.0
    interaction_time_s: float = 0.0

    CSV_HEADER = "t,sum_bs_rate,total_tx_power_w,throughput_bits,outage_ratio,action_time_s,interaction_time_s"

    def csv_row(self, profile=False):
        at = self.action_selection_time_s if profile else 0.0
        it = self.interaction_time_s if profile else 0.0
        return (f"{self.t},{self.sum_bs_rate!r},{self.total_tx_power_w!r},"
                f"{self.network_throughput_bits!r},{self.outage_ratio!r},{at!r},{it!r}")


OUTAGE_THRESHOLD_BPS = 1e3


def compute_kpis(remaining_demand, rates, alloc, dt_s, t=0,
                 outage_threshold_bps=OUTAGE_THRESHOLD_BPS,
                 action_time_s=0.0, interaction_time_s=0.0):
    rates = np.asarray(rates, dtype=float)
    remaining = np.asarray(remaining_demand, dtype=float)
    n = len(rates)
    served = np.minimum(remaining, rates * dt_s)
    outage = float((rates < outage_threshold_bps).sum() / n) if n else 0.0
    return KpiRecord(
        t=t,
        sum_bs_rate=float(rates.sum()),
        total_tx_power_w=float(np.asarray(alloc.powers).sum()),
        per_user_rate=rates,
        network_throughput_bits=float(served.sum()),
        outage_ratio=outage,
        action_selection_time_s=action_time_s,
        interaction_time_s=interaction_time_s,
    )


# ---------------------------------------------------------------------------
# default association / power rules

def nearest_bs_association(user_positions, sites):
    """Euclidean-nearest site index per user; ties go to the lowest id."""
    pos = np.asarray(user_positions, dtype=float)
    spos = np.array([s.position for s in sites], dtype=float)
    d2 = ((pos[:, None, :] - spos[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)  # argmin returns the first (lowest-id) minimum


def random_rb_assignment(association, sites, rng):
    """Distinct random channels per site; overflow users get -1."""
    association = np.asarray(association)
    out = np.full(len(association), -1, dtype=np.int64)
    for b in np.unique(association):
        users_here = np.flatnonzero(association == b)
        users_here = users_here[rng.permutation(len(users_here))]
        chans = rng.permutation(sites[b].n_channels)
        k = min(len(users_here), len(chans))
        out[users_here[:k]] = chans[:k]
    return out


def fair_power_allocation(site, n_served):
    """Equal split of the site's full linear budget."""
    if n_served < 1:
        raise ValueError("need at least one served user")
    return np.full(n_served, site.max_tx_power_w() / n_served)


class AdmissionLedger:
    """Mutable per-step occupancy used by the sequential admission procedure."""

    def __init__(self, sites):
        self.sites = sites
        self.used_channels = {b: set() for b in range(len(sites))}
        self.used_power = np.zeros(len(sites))
        self.entries = []  # (user, site, channel, power)
        self.outage_users = []

    def residual_power(self, b):
        return self.sites[b].max_tx_power_w() - self.used_power[b]

    def free_channel(self, b):
        for c in range(self.sites[b].n_channels):
            if c not in self.used_channels[b]:
                return c
        return None

    def commit(self, user, b, channel, power):
        self.used_channels[b].add(channel)
        self.used_power[b] += power
        self.entries.append((user, b, channel, power))

    def to_allocation(self):
        if not self.entries:
            return Allocation.empty()
        return Allocation(
            users=np.array([e[0] for e in self.entries]),
            sites=np.array([e[1] for e in self.entries]),
            channels=np.array([e[2] for e in self.entries]),
            powers=np.array([e[3] for e in self.entries], dtype=float))


def three_phase_admission(user, candidate_sites, ledger, gains, demand_rate_bps,
                          noise_w, interference_w=0.0):
    """Admit one user by walking its candidate list (strongest first).

    Phase i takes the next candidate; phase ii checks a free channel and
    enough residual power for the user's minimum required rate; phase iii
    commits on the first eligible site. Returns the site index or None,
    in which case the user is recorded as in outage for this step.
    """
    for b in candidate_sites:
        chan = ledger.free_channel(b)
        if chan is None:
            continue
        g = gains[user, b]
        if g <= 0:
            continue
        bw = ledger.sites[b].rb_bandwidth_hz
        p_req = float(min_power_for_rate(demand_rate_bps, bw, g, noise_w + interference_w))
        if p_req <= ledger.residual_power(b) and p_req > 0:
            ledger.commit(user, b, chan, p_req)
            return b
        if demand_rate_bps == 0 and ledger.residual_power(b) > 0:
            # zero demand still gets a nominal sliver so power > 0 iff assigned
            p = min(1e-6, ledger.residual_power(b))
            ledger.commit(user, b, chan, p)
            return b
    ledger.outage_users.append(user)
    return None
