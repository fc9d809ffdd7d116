"""Traffic demand generation.

Two scales: a small library of diurnal rate patterns (one per behavioral
cluster) and per-user processes that follow one pattern while switching
between a normal and a burst mode. The episode-level generator draws flat
uniform totals for the short allocation experiments.
"""

from dataclasses import dataclass, field

import numpy as np

from .rngstream import substream

N_SLOTS = 48  # half-hour slots per day

ARCHETYPES = ("commuter", "office", "residential", "entertainment", "low_activity")


@dataclass
class DemandPatternSet:
    names: list
    means_bps: np.ndarray  # (K, 48) mean demand rate per slot

    def __post_init__(self):
        self.means_bps = np.asarray(self.means_bps, dtype=float)
        if self.means_bps.ndim != 2 or self.means_bps.shape[1] != N_SLOTS:
            raise ValueError("patterns must be (K, 48)")
        if (self.means_bps < 0).any():
            raise ValueError("pattern means must be >= 0")

    @property
    def k(self):
        return len(self.means_bps)


@dataclass
class UserDemandProcess:
    user_id: int
    cluster: int
    stay_normal: float = 0.95
    stay_burst: float = 0.8
    burst_multiplier: float = 3.0
    dispersion: float = 2.0
    mode: int = 0  # 0 normal, 1 burst

    def __post_init__(self):
        if not (0 <= self.stay_normal <= 1 and 0 <= self.stay_burst <= 1):
            raise ValueError("switch probabilities must lie in [0, 1]")
        if self.burst_multiplier < 1:
            raise ValueError("burst multiplier must be >= 1")
        if self.dispersion <= 0:
            raise ValueError("dispersion must be positive")


def _bump(hours, center_h, width_h):
    d = np.abs(hours - center_h)
    d = np.minimum(d, 24.0 - d)
    return np.exp(-0.5 * (d / width_h) ** 2)


def _window(hours, start_h, end_h, edge_h=0.75):
    # smooth plateau between start and end
    rise = 1.0 / (1.0 + np.exp(-(hours - start_h) / edge_h))
    fall = 1.0 / (1.0 + np.exp(-(end_h - hours) / edge_h))
    return rise * fall


def build_pattern_library(seed, k=5):
    """K diurnal mean-rate curves (bits/s per half-hour slot)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    rng = substream(seed, "patterns")
    hours = (np.arange(N_SLOTS) + 0.5) / 2.0
    base = {
        "commuter": 2e4 + 2.5e5 * (_bump(hours, 8.0, 1.0) + _bump(hours, 18.0, 1.2)),
        "office": 2e4 + 2.2e5 * _window(hours, 9.0, 18.0),
        "residential": 3e4 + 1.1e5 * _bump(hours, 7.5, 1.5) + 2.4e5 * _window(hours, 19.0, 23.0),
        "entertainment": 2e4 + 2.8e5 * _window(hours, 20.0, 24.5) + 8e4 * _bump(hours, 13.0, 2.0),
        "low_activity": np.full(N_SLOTS, 1.5e4),
    }
    if k == 1:
        return DemandPatternSet(names=["flat"], means_bps=np.full((1, N_SLOTS), 1e5))
    names = []
    rows = []
    for i in range(k):
        arch = ARCHETYPES[i % len(ARCHETYPES)]
        curve = base[arch].copy()
        if i >= len(ARCHETYPES):
            curve = np.roll(curve, 2 * (i // len(ARCHETYPES)))
        curve = curve * rng.uniform(0.9, 1.1)
        names.append(arch if i < len(ARCHETYPES) else f"{arch}_{i // len(ARCHETYPES)}")
        rows.append(curve)
    return DemandPatternSet(names=names, means_bps=np.array(rows))


def assign_clusters(seed, n_users, k):
    """Cluster index per user; every user belongs to exactly one cluster."""
    return substream(seed, "clusters").integers(0, k, size=n_users)


def sample_demand(process, patterns, slot, step_s, rng):
    """Bits demanded in one step; advances the process's mode chain once."""
    if not 0 <= slot < N_SLOTS:
        raise ValueError("slot must lie in [0, 48)")
    stay = process.stay_normal if process.mode == 0 else process.stay_burst
    if rng.random() >= stay:
        process.mode = 1 - process.mode
    mean_rate = patterns.means_bps[process.cluster, slot]
    if process.mode == 1:
        mean_rate = mean_rate * process.burst_multiplier
    mean_bits = mean_rate * step_s
    if mean_bits <= 0:
        return 0.0
    shape = process.dispersion
    return float(rng.gamma(shape=shape, scale=mean_bits / shape))


def sample_episode_demand(seed, n_users, bandwidth_hz, horizon_steps=20):
    """Per-user episode totals ~ Uniform(0, 60 x bandwidth) bits.

    Index equals user id. horizon_steps is recorded context only; the
    distribution of the total does not depend on it.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    rng = substream(seed, "episode_demand")
    return rng.uniform(0.0, 60.0 * bandwidth_hz, size=n_users)
