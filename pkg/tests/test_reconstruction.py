import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tsboson.distribution import distribution_metrics, exact_distribution
from tsboson.errors import EmptyEstimateError, EmptyLogError
from tsboson.events import PS_PER_S, EventLog, SourceConfig, duration_for_events, simulate_event_log
from tsboson.matrix import haar_random_unitary
from tsboson.reconstruction import (OccurrenceRecord, counting_estimate, occurrence_census,
                                    occurrence_records, reshape_filter, reshape_mask,
                                    subspace_metrics, timestamp_estimate)


@pytest.fixture(scope="module")
def dist10():
    return exact_distribution(haar_random_unitary(10, 0), [0, 1])


def _sim(dist, n_events, seed, rate=100.0):
    return simulate_event_log(dist, SourceConfig(rate, None, seed), duration_for_events(n_events, rate))


def test_counting_single_event():
    log = EventLog(5, 2, 100, [7], [[1, 4]])
    assert counting_estimate(log).probs == {(1, 4): 1.0}


def test_counting_three_to_one():
    log = EventLog(5, 2, 100, [1, 2, 3, 4], [[0, 1], [0, 2], [0, 1], [0, 1]])
    c = counting_estimate(log)
    assert c[(0, 1)] == 0.75 and c[(0, 2)] == 0.25


def test_counting_empty_log():
    with pytest.raises(EmptyLogError):
        counting_estimate(EventLog(5, 2, 100, [], np.zeros((0, 2))))


def test_counting_converges(dist10):
    log = _sim(dist10, 1_000_000, 3, rate=1000.0)
    assert distribution_metrics(counting_estimate(log), dist10).tvd <= 0.01


def test_timestamp_two_combinations():
    log = EventLog(4, 2, 3 * PS_PER_S, [PS_PER_S, 2 * PS_PER_S], [[0, 1], [2, 3]])
    rep = timestamp_estimate(log, n_o=1, filter=False)
    assert rep.estimate[(0, 1)] == pytest.approx(2 / 3)
    assert rep.estimate[(2, 3)] == pytest.approx(1 / 3)
    assert rep.high_variance


def test_timestamp_single_combination():
    log = EventLog(4, 2, 1000, [13, 500, 999], [[1, 2]] * 3)
    for n_o in (1, 2, 3):
        assert timestamp_estimate(log, n_o, filter=False).estimate.probs == {(1, 2): 1.0}


def test_timestamp_threshold_not_reached():
    log = EventLog(4, 2, 1000, [1, 2], [[0, 1], [0, 2]])
    with pytest.raises(EmptyEstimateError):
        timestamp_estimate(log, n_o=2)


def test_timestamp_counts_below_threshold():
    log = EventLog(4, 2, 1000, [1, 2, 3, 4], [[0, 1], [0, 2], [0, 1], [0, 1]])
    rep = timestamp_estimate(log, n_o=2, filter=False)
    assert rep.below_threshold == 1 and rep.kept == 1 and rep.events_used == 2


def test_timestamp_modes_agree_for_one_occurrence():
    log = EventLog(4, 2, 10_000, [100, 250, 4000], [[0, 1], [2, 3], [1, 3]])
    base = timestamp_estimate(log, 1, filter=False).estimate.probs
    for mode in ("mean-absolute", "nth-arrival"):
        got = timestamp_estimate(log, 1, filter=False, mode=mode).estimate.probs
        assert got == pytest.approx(base)


@settings(max_examples=40, deadline=None)
@given(scale=st.integers(2, 1000), seed=st.integers(0, 10_000))
def test_scale_invariance(scale, seed):
    d = exact_distribution(haar_random_unitary(5, 1), [0, 1])
    log = _sim(d, 300, seed)
    big = EventLog(log.m, log.n, log.duration_ps * scale, log.taus * scale, log.modes)
    for n_o in (1, 3):
        a = timestamp_estimate(log, n_o).estimate.probs
        b = timestamp_estimate(big, n_o).estimate.probs
        assert a.keys() == b.keys()
        assert all(abs(a[k] - b[k]) <= 1e-12 for k in a)


def test_reshape_band_centre_and_outside():
    T = 1_000_000
    assert reshape_mask([T / 10], [10], T)[0]
    assert not reshape_mask([T / 30], [10], T)[0]
    # the band is open at both ends
    assert not reshape_mask([T / 20], [10], T)[0]
    assert not reshape_mask([T / 5], [10], T)[0]


@settings(max_examples=200, deadline=None)
@given(n_a=st.integers(1, 10_000), factor=st.floats(0.501, 1.999))
def test_reshape_keeps_band_members(n_a, factor):
    T = 10 ** 12
    assert reshape_mask([factor * T / n_a], [n_a], T)[0]


def test_reshape_filter_records():
    T = 1000
    rec = [OccurrenceRecord((0, 1), np.array([100, 200, 300, 400, 500, 600, 700, 800, 900, 1000])),
           OccurrenceRecord((0, 2), np.array([1, 3]))]
    kept, singular = reshape_filter(rec, T, n_o=1)
    assert [r.combination for r in kept] == [(0, 1)]
    assert [r.combination for r in singular] == [(0, 2)]


def test_occurrence_records_grouping():
    log = EventLog(4, 2, 100, [1, 2, 3, 4], [[1, 2], [0, 1], [1, 2], [0, 3]])
    recs = occurrence_records(log)
    assert [r.combination for r in recs] == [(0, 1), (1, 2), (0, 3)]
    assert recs[1].timestamps.tolist() == [1, 3]


def test_census_examples():
    assert occurrence_census(EventLog(4, 2, 100, [], np.zeros((0, 2)))) == {}
    assert occurrence_census(EventLog(4, 2, 100, [1, 2, 3, 4, 5], [[0, 1]] * 5)) == {5: 1}


def test_census_low_flux(exact30):
    census = occurrence_census(_sim(exact30, 358, 1))
    assert max(census, key=census.get) == 1
    assert census[1] > sum(v for k, v in census.items() if k > 1)


def test_reference_scale_discard_orders(exact30):
    fr5, fr10 = [], []
    for s in range(5):
        log = _sim(exact30, 83_455, s)
        fr5.append(timestamp_estimate(log, 5).discarded_fraction)
        fr10.append(timestamp_estimate(log, 10).discarded_fraction)
    assert 0.03 <= np.median(fr5) <= 0.3
    assert 0.005 <= np.median(fr10) <= 0.06


def test_all_occurrences_rank_correlate_with_counting(dist10):
    log = _sim(dist10, 1_000_000, 5, rate=1000.0)
    rep = timestamp_estimate(log, None, filter=False)
    c = counting_estimate(log)
    keys = rep.estimate.support()
    rho = stats.spearmanr([rep.estimate[k] for k in keys], [c[k] for k in keys]).statistic
    assert rho >= 0.9
    assert rep.events_used == len(log)


def test_tvd_shrinks_with_run_length(dist10):
    medians = []
    for n in (500, 2000, 10_000):
        medians.append(np.median([subspace_metrics(timestamp_estimate(_sim(dist10, n, s), 5), dist10).tvd
                                  for s in range(50)]))
    assert medians[0] > medians[1] > medians[2]


@pytest.mark.xfail(strict=True, reason="at ~20 events per combination the first-5 estimator sits "
                                       "near sqrt(20.6/5) ~ 2.03x the counting TVD; see decisions ledger")
def test_tvd_within_twice_counting_at_matched_occupancy(dist10):
    # events per combination matched to 83455 events over 4060 outcomes
    n_events = round(83_455 / 4060 * 45)
    ts, ct = [], []
    for s in range(50):
        log = _sim(dist10, n_events, s)
        rep = timestamp_estimate(log, 5)
        ts.append(subspace_metrics(rep, dist10).tvd)
        truth = dist10.restrict(rep.kept_support)
        ct.append(distribution_metrics(counting_estimate(log).restrict(rep.kept_support), truth).tvd)
    assert np.median(ts) <= 2 * np.median(ct)


def test_report_json_fields(dist10):
    rep = timestamp_estimate(_sim(dist10, 2000, 1), 3)
    d = rep.to_json()
    assert d["n_o"] == 3 and d["kept"] == rep.kept and d["filter"] is True
    assert len(d["estimate_jsonl"].splitlines()) == rep.kept
    assert 0 <= d["discarded_fraction"] <= 1
