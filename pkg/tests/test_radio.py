import numpy as np
import pytest

from cellsim.channel import min_power_for_rate
from cellsim.radio import (AdmissionLedger, Allocation, ConstraintViolation,
                           compute_kpis, fair_power_allocation,
                           nearest_bs_association, random_rb_assignment,
                           three_phase_admission)
from cellsim.rngstream import substream
from cellsim.scenario import BaseStationSite


def make_site(sid, pos=(0.0, 0.0), power_dbm=30.0, n_channels=45):
    return BaseStationSite(id=sid, position=pos, indoor=False,
                           max_tx_power_dbm=power_dbm, antenna_height_m=8.0,
                           azimuth_deg=0.0, elevation_deg=0.0,
                           carrier_freq_mhz=2600.0, n_channels=n_channels,
                           rb_bandwidth_hz=1.8e5)


def alloc_of(*entries):
    users, sites, chans, powers = zip(*entries)
    return Allocation(np.array(users), np.array(sites), np.array(chans),
                      np.array(powers, dtype=float))


SITES = [make_site(0), make_site(1, (100.0, 0.0))]


def test_validate_accepts_valid():
    a = alloc_of((0, 0, 0, 0.4), (1, 0, 1, 0.4), (2, 1, 0, 0.9))
    a.validate(3, SITES)


def test_validate_names_user_single_bs():
    a = alloc_of((0, 0, 0, 0.1), (0, 1, 0, 0.1))
    with pytest.raises(ConstraintViolation) as err:
        a.validate(2, SITES)
    assert err.value.constraint == "user-single-bs"


def test_validate_names_user_single_rb():
    a = alloc_of((0, 0, 0, 0.1), (0, 0, 1, 0.1))
    with pytest.raises(ConstraintViolation) as err:
        a.validate(2, SITES)
    assert err.value.constraint == "user-single-rb"


def test_validate_names_rb_exclusive():
    a = alloc_of((0, 0, 3, 0.1), (1, 0, 3, 0.1))
    with pytest.raises(ConstraintViolation) as err:
        a.validate(2, SITES)
    assert err.value.constraint == "rb-exclusive"


def test_validate_names_capacity():
    small = [make_site(0, n_channels=2)]
    a = alloc_of((0, 0, 0, 0.1), (1, 0, 1, 0.1), (2, 0, 0, 0.1))
    with pytest.raises(ConstraintViolation) as err:
        a.validate(3, small)
    assert err.value.constraint == "bs-user-capacity"


def test_validate_names_power_budget():
    a = alloc_of((0, 0, 0, 0.7), (1, 0, 1, 0.5))  # 1.2 W > 1 W budget
    with pytest.raises(ConstraintViolation) as err:
        a.validate(2, SITES)
    assert err.value.constraint == "power-budget"


def test_validate_power_budget_tolerates_rounding():
    a = alloc_of((0, 0, 0, 0.5), (1, 0, 1, 0.5 + 1e-12))
    a.validate(2, SITES)


def test_validate_rejects_nonpositive_power():
    a = alloc_of((0, 0, 0, 0.0))
    with pytest.raises(ConstraintViolation) as err:
        a.validate(1, SITES)
    assert err.value.constraint == "power-positive"


def test_validate_rejects_unknown_ids():
    with pytest.raises(ConstraintViolation):
        alloc_of((5, 0, 0, 0.1)).validate(2, SITES)
    with pytest.raises(ConstraintViolation):
        alloc_of((0, 7, 0, 0.1)).validate(2, SITES)
    with pytest.raises(ConstraintViolation):
        alloc_of((0, 0, 99, 0.1)).validate(2, SITES)


def test_site_of_user():
    a = alloc_of((2, 1, 0, 0.1))
    assert a.site_of_user(4).tolist() == [-1, -1, 1, -1]


# -- association ----------------------------------------------------------------

def test_nearest_single_site():
    sites = [make_site(0, (50.0, 50.0))]
    users = np.array([[0.0, 0.0], [99.0, 99.0]])
    assert nearest_bs_association(users, sites).tolist() == [0, 0]


def test_nearest_tie_goes_to_lowest_id():
    sites = [make_site(0, (0.0, 0.0)), make_site(1, (0.0, 0.0)),
             make_site(2, (10.0, 0.0)), make_site(3, (10.0, 0.0))]
    users = np.array([[5.0, 0.0]])  # equidistant to all four
    assert nearest_bs_association(users, sites)[0] == 0


def test_nearest_matches_bruteforce():
    rng = substream(1, "assoc")
    sites = [make_site(i, tuple(rng.uniform(0, 1000, 2))) for i in range(10)]
    users = rng.uniform(0, 1000, (100, 2))
    got = nearest_bs_association(users, sites)
    for u in range(100):
        dists = [np.hypot(users[u, 0] - s.position[0], users[u, 1] - s.position[1])
                 for s in sites]
        assert dists[got[u]] == min(dists)


def test_random_rb_single_user():
    chan = random_rb_assignment(np.array([0]), SITES, substream(2, "rb"))
    assert 0 <= chan[0] < 45


def test_random_rb_overflow():
    # 50 users on one 45-channel site: exactly 5 left unassigned
    assoc = np.zeros(50, dtype=int)
    chan = random_rb_assignment(assoc, SITES, substream(3, "rb"))
    assert (chan == -1).sum() == 5
    used = chan[chan >= 0]
    assert len(np.unique(used)) == 45


def test_random_rb_deterministic():
    assoc = np.array([0, 0, 1, 1, 0])
    a = random_rb_assignment(assoc, SITES, substream(4, "rb"))
    b = random_rb_assignment(assoc, SITES, substream(4, "rb"))
    assert np.array_equal(a, b)


def test_fair_power_values():
    assert fair_power_allocation(make_site(0, power_dbm=30.0), 1)[0] == pytest.approx(1.0)
    assert fair_power_allocation(make_site(0, power_dbm=30.0), 4) == pytest.approx([0.25] * 4)
    expected = 10 ** (24.0 / 10.0) / 1000.0 / 2.0
    assert fair_power_allocation(make_site(0, power_dbm=24.0), 2) == pytest.approx([expected] * 2)


def test_fair_power_sums_to_budget():
    site = make_site(0, power_dbm=27.3)
    for k in (1, 3, 7):
        assert fair_power_allocation(site, k).sum() == pytest.approx(site.max_tx_power_w())


# -- admission -------------------------------------------------------------------

def test_admission_first_candidate_eligible():
    ledger = AdmissionLedger(SITES)
    gains = np.full((1, 2), 1e-8)
    got = three_phase_admission(0, [0, 1], ledger, gains, 1e5, 1e-13)
    assert got == 0
    assert ledger.entries[0][0] == 0 and ledger.entries[0][1] == 0


def test_admission_falls_through_to_second():
    sites = [make_site(0, n_channels=1), make_site(1, n_channels=1)]
    ledger = AdmissionLedger(sites)
    gains = np.full((2, 2), 1e-8)
    assert three_phase_admission(0, [0, 1], ledger, gains, 1e5, 1e-13) == 0
    assert three_phase_admission(1, [0, 1], ledger, gains, 1e5, 1e-13) == 1


def test_admission_exhaustion_marks_outage():
    sites = [make_site(0, n_channels=1)]
    ledger = AdmissionLedger(sites)
    gains = np.full((2, 1), 1e-8)
    three_phase_admission(0, [0], ledger, gains, 1e5, 1e-13)
    before = list(ledger.entries)
    assert three_phase_admission(1, [0], ledger, gains, 1e5, 1e-13) is None
    assert ledger.entries == before  # monotone commit: nothing disturbed
    assert ledger.outage_users == [1]


def test_admission_power_budget_gate():
    # demand so high the minimum power exceeds the budget everywhere
    ledger = AdmissionLedger(SITES)
    gains = np.full((1, 2), 1e-12)
    assert three_phase_admission(0, [0, 1], ledger, gains, 1e7, 1e-10) is None


def test_admission_commits_minimum_power():
    ledger = AdmissionLedger(SITES)
    gains = np.full((1, 2), 1e-8)
    three_phase_admission(0, [0, 1], ledger, gains, 2e5, 1e-13)
    expected = min_power_for_rate(2e5, 1.8e5, 1e-8, 1e-13)
    assert ledger.entries[0][3] == pytest.approx(float(expected))
    alloc = ledger.to_allocation()
    alloc.validate(1, SITES)


# -- KPIs ------------------------------------------------------------------------

def test_kpis_empty():
    k = compute_kpis(np.zeros(0), np.zeros(0), Allocation.empty(), 1.0)
    assert k.sum_bs_rate == 0.0
    assert k.outage_ratio == 0.0
    assert k.network_throughput_bits == 0.0


def test_kpis_outage_ratio():
    rates = np.array([2e5, 0.0])
    k = compute_kpis(np.array([1e9, 1e9]), rates, Allocation.empty(), 1.0,
                     outage_threshold_bps=1e3)
    assert k.outage_ratio == 0.5


def test_kpis_throughput_caps_at_demand():
    k = compute_kpis(np.array([100.0]), np.array([1e5]), Allocation.empty(), 1.0)
    assert k.network_throughput_bits == 100.0
    assert k.sum_bs_rate == 1e5
