"""Link budgets: free-space loss, shadowing, small-scale fading, SINR, rates.

Total path loss is composed additively in dB as PL = L_d + L_s + L_f, with
L_d the free-space term, L_s the static large-scale term (shadowing plus
line-of-sight and wall penalties) and L_f a fresh small-scale fading draw.
Antenna gain is tracked alongside the budget, not folded into PL.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import segment_blocked_by_buildings
from .rngstream import hash_normal

NLOS_PENALTY_DB = 20.0
WALL_PENETRATION_DB = 20.0
SHADOWING_SIGMA_LOS_DB = 4.0
SHADOWING_SIGMA_NLOS_DB = 8.0


@dataclass
class RadioConfig:
    noise_density_dbm_hz: float = -174.0
    rb_bandwidth_hz: float = 1.8e5
    carrier_freq_mhz: float = 2600.0

    def noise_w(self):
        return dbm_to_w(noise_power(self.noise_density_dbm_hz, self.rb_bandwidth_hz))


@dataclass
class LinkBudget:
    distance_m: float
    los: bool
    L_d: float
    L_s: float
    L_f: float
    PL: float
    antenna_gain: float = 0.0

    def rx_power_dbm(self, tx_power_dbm):
        return tx_power_dbm + self.antenna_gain - self.PL


@dataclass
class FadingModel:
    """Small-scale fading with unit mean power gain E[|h|^2] = 1."""

    kind: str  # rayleigh | rician | nakagami | none
    k_factor: float = 0.0  # rician
    m: float = 1.0  # nakagami

    def __post_init__(self):
        if self.kind not in ("rayleigh", "rician", "nakagami", "none"):
            raise ValueError(f"unknown fading kind {self.kind!r}")
        if self.kind == "rician" and self.k_factor < 0:
            raise ValueError("Rician K-factor must be >= 0")
        if self.kind == "nakagami" and self.m < 0.5:
            raise ValueError("Nakagami m must be >= 0.5")

    def sample_power(self, rng, size=None):
        """Draw |h|^2 (linear power gain)."""
        if self.kind == "none":
            return np.ones(size) if size is not None else 1.0
        if self.kind == "rayleigh":
            return rng.exponential(1.0, size=size)
        if self.kind == "rician":
            k = self.k_factor
            sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
            mean = math.sqrt(k / (k + 1.0))
            x = mean + sigma * rng.standard_normal(size=size)
            y = sigma * rng.standard_normal(size=size)
            return x * x + y * y
        return rng.gamma(shape=self.m, scale=1.0 / self.m, size=size)

    def sample_db(self, rng, size=None):
        """One fading draw expressed as attenuation L_f = -10 log10 |h|^2."""
        return -10.0 * np.log10(self.sample_power(rng, size=size))


@dataclass
class AntennaPattern:
    """Parabolic horizontal pattern: 12 (theta/theta_3dB)^2 capped attenuation."""

    boresight_gain_dbi: float
    beamwidth_deg: float = 65.0
    max_attenuation_db: float = 30.0

    def gain_db(self, offset_deg):
        off = np.abs((np.asarray(offset_deg) + 180.0) % 360.0 - 180.0)
        att = np.minimum(12.0 * (off / self.beamwidth_deg) ** 2, self.max_attenuation_db)
        return self.boresight_gain_dbi - att


def dbm_to_w(dbm):
    return 10.0 ** (np.asarray(dbm) / 10.0) / 1000.0


def w_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w) * 1000.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db) / 10.0)


def free_space_loss(distance_m, freq_mhz):
    """Friis free-space loss in dB with distance clamped below at 1 m."""
    d_km = np.maximum(np.asarray(distance_m, dtype=float), 1.0) / 1000.0
    return 32.44 + 20.0 * np.log10(d_km) + 20.0 * np.log10(freq_mhz)


def los_check(tx_pos, tx_height_m, rx_pos, rx_height_m, buildings):
    """True iff the 3D tx->rx segment clears every building volume."""
    vols = [(b.footprint, b.height_m) if hasattr(b, "footprint") else tuple(b)
            for b in buildings]
    return not segment_blocked_by_buildings(tx_pos, tx_height_m, rx_pos, rx_height_m, vols)


def shadowing_sample(link_key, sigma_db, seed):
    """Static shadowing in dB for one link, hashed from (seed, link key)."""
    if sigma_db < 0:
        raise ValueError("sigma must be >= 0")
    user_id, site_id = link_key
    return float(sigma_db * hash_normal(seed, "shadowing", user_id, site_id))


def shadowing_matrix(seed, user_ids, site_ids):
    """Unit-variance shadowing draws for the (users x sites) link set.

    Entry (i, j) equals shadowing_sample((user_ids[i], site_ids[j]), 1, seed),
    so bulk and scalar paths agree exactly.
    """
    u = np.asarray(user_ids)[:, None]
    s = np.asarray(site_ids)[None, :]
    return hash_normal(seed, "shadowing", u, s)


def fading_sample(model, rng):
    """One linear power gain draw |h|^2 from the given fading model."""
    return float(model.sample_power(rng))


def large_scale_db(los, same_side, shadow_unit, nlos_penalty_db=NLOS_PENALTY_DB,
                   wall_penetration_db=WALL_PENETRATION_DB):
    """L_s in dB: scaled shadowing plus NLoS and wall-penetration penalties.

    los, same_side (True when both endpoints are indoor or both outdoor) and
    shadow_unit (a unit normal draw) broadcast elementwise.
    """
    los = np.asarray(los, dtype=bool)
    sigma = np.where(los, SHADOWING_SIGMA_LOS_DB, SHADOWING_SIGMA_NLOS_DB)
    ls = sigma * np.asarray(shadow_unit)
    ls = ls + np.where(los, 0.0, nlos_penalty_db)
    ls = ls + np.where(np.asarray(same_side, dtype=bool), 0.0, wall_penetration_db)
    return ls


def path_loss(tx_pos, tx_height_m, rx_pos, rx_height_m, *, freq_mhz,
              tx_indoor=False, rx_indoor=False, buildings=(), los=None,
              link_key=(0, 0), seed=0, fading_model=None, rng=None,
              sigma_los_db=SHADOWING_SIGMA_LOS_DB, sigma_nlos_db=SHADOWING_SIGMA_NLOS_DB,
              nlos_penalty_db=NLOS_PENALTY_DB, wall_penetration_db=WALL_PENETRATION_DB,
              antenna=None, azimuth_deg=0.0):
    """Compose a LinkBudget for one link at one step.

    los may be passed to skip the occlusion test (e.g. when precomputed);
    fading_model None disables the small-scale term. Shadowing is static per
    (seed, link_key); fading is fresh per call.
    """
    dx = rx_pos[0] - tx_pos[0]
    dy = rx_pos[1] - tx_pos[1]
    dist = math.hypot(dx, dy)
    if los is None:
        los = los_check(tx_pos, tx_height_m, rx_pos, rx_height_m, buildings)
    l_d = float(free_space_loss(dist, freq_mhz))
    shadow_unit = hash_normal(seed, "shadowing", link_key[0], link_key[1])
    sigma = sigma_los_db if los else sigma_nlos_db
    l_s = float(sigma * shadow_unit
                + (0.0 if los else nlos_penalty_db)
                + (0.0 if tx_indoor == rx_indoor else wall_penetration_db))
    l_f = float(fading_model.sample_db(rng)) if fading_model is not None else 0.0
    gain = 0.0
    if antenna is not None:
        bearing = math.degrees(math.atan2(dy, dx))
        gain = float(antenna.gain_db(bearing - azimuth_deg))
    return LinkBudget(distance_m=dist, los=bool(los), L_d=l_d, L_s=l_s, L_f=l_f,
                      PL=l_d + l_s + l_f, antenna_gain=gain)


def noise_power(noise_density_dbm_hz, bandwidth_hz):
    """Thermal noise power in dBm over the given bandwidth."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return noise_density_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def shannon_rate(bandwidth_hz, sinr_linear):
    """Maximum error-free rate in bits/s."""
    return bandwidth_hz * np.log2(1.0 + np.asarray(sinr_linear))


def min_power_for_rate(target_rate_bps, bandwidth_hz, gain_linear, noise_plus_interf_w):
    """Exact Shannon inversion: transmit power (W) achieving the target rate."""
    t = np.asarray(target_rate_bps, dtype=float)
    return (np.exp2(t / bandwidth_hz) - 1.0) * noise_plus_interf_w / gain_linear


class SchedulingError(RuntimeError):
    """Raised when a rate is requested for a user the allocation never assigned."""


def interference_by_entry(users, sites, channels, powers, gains):
    """Co-channel interference (W) seen by each allocation entry.

    users/sites/channels/powers are parallel arrays of assignment entries;
    gains is the linear (users x sites) path-gain matrix. Interference for
    an entry sums other sites' power on the same channel, weighted by the
    victim user's gain to each interfering site.
    """
    users = np.asarray(users)
    sites = np.asarray(sites)
    channels = np.asarray(channels)
    powers = np.asarray(powers, dtype=float)
    interf = np.zeros(len(users))
    for c in np.unique(channels):
        on_c = np.flatnonzero(channels == c)
        tx_sites = sites[on_c]
        tx_pow = powers[on_c]
        g = gains[np.ix_(users[on_c], tx_sites)]
        total = g @ tx_pow
        own = gains[users[on_c], sites[on_c]] * tx_pow
        interf[on_c] = total - own
    return interf


def sinr(user, channel, alloc, gains, noise_w):
    """Linear SINR for one assigned user under the full allocation."""
    idx = np.flatnonzero((np.asarray(alloc.users) == user)
                         & (np.asarray(alloc.channels) == channel))
    if len(idx) == 0 or alloc.powers[idx[0]] <= 0:
        raise SchedulingError(f"user {user} has no positive-power assignment on channel {channel}")
    i = idx[0]
    interf = interference_by_entry(alloc.users, alloc.sites, alloc.channels,
                                   alloc.powers, gains)[i]
    signal = gains[alloc.users[i], alloc.sites[i]] * alloc.powers[i]
    return float(signal / (noise_w + interf))


def sinr_vector(alloc, gains, noise_w):
    """Linear SINR for every allocation entry at once."""
    interf = interference_by_entry(alloc.users, alloc.sites, alloc.channels,
                                   alloc.powers, gains)
    signal = gains[np.asarray(alloc.users), np.asarray(alloc.sites)] * np.asarray(alloc.powers)
    return signal / (noise_w + interf)
