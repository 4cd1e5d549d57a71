"""Pairwise turn-taking features: transition gaps and simultaneous speech."""

import numpy as np
import pytest

from floorspace import PairFeatures, Utterance, extract_all, extract_pair
from floorspace.features import (
    LOOKBACK_MS,
    TRP_CLIP_MS,
    WINDOW_LENGTHS_MS,
    simultaneous_speech,
    trp_gap,
)
from floorspace.timeline import ActivityStream, stream_from_intervals


def utts(pid, intervals):
    return [Utterance(pid, s, e) for s, e in intervals]


def gap_oracle(a_utterances, b_utterances, now, clip=TRP_CLIP_MS):
    """Scan every utterance pair instead of bisecting."""
    started = [u for u in a_utterances if u.start <= now]
    if not started:
        return None
    anchor = started[-1].start
    prior = [u for u in b_utterances if u.start < anchor]
    if not prior:
        return None
    closed = [u.end for u in prior if u.end <= anchor]
    if closed:
        g = anchor - max(closed)
    else:
        g = anchor - min(prior[-1].end, now)
    return max(-clip, min(clip, g))


def random_utterances(rng, pid, horizon):
    out = []
    t = int(rng.integers(0, 400))
    while t < horizon:
        d = int(rng.integers(80, 2500))
        out.append(Utterance(pid, t, t + d))
        t += d + int(rng.integers(1, 1500))
    return out


def test_gap_after_turn_boundary_is_positive():
    a = utts(0, [(1200, 2000)])
    b = utts(1, [(0, 1000)])
    assert trp_gap(a, b, now=2500) == 200


def test_gap_inside_other_turn_is_negative():
    a = utts(0, [(1200, 2000)])
    b = utts(1, [(500, 1500)])
    assert trp_gap(a, b, now=2500) == -300


def test_gap_against_still_open_turn_uses_running_end():
    a = utts(0, [(1200, 2000)])
    b = utts(1, [(500, 1500)])
    assert trp_gap(a, b, now=1300) == -100


def test_gap_missing_cases():
    b = utts(1, [(0, 1000)])
    assert trp_gap([], b, now=2000) is None
    assert trp_gap(utts(0, [(500, 900)]), [], now=2000) is None
    # b's first turn starts after a's newest start
    assert trp_gap(utts(0, [(100, 400)]), utts(1, [(600, 900)]), now=1000) is None
    # a's only turn is still in the future
    assert trp_gap(utts(0, [(3000, 4000)]), b, now=2000) is None


def test_gap_clipping_both_directions():
    assert trp_gap(utts(0, [(9000, 9500)]), utts(1, [(0, 1000)]), now=9999) == 5000
    a = utts(0, [(200, 9000)])
    b = utts(1, [(0, 10000)])
    assert trp_gap(a, b, now=10000) == -5000


def test_gap_skips_past_an_open_interjection():
    # b spoke twice; the newer b turn is still open when a starts, so
    # the gap anchors on the older turn's end
    a = utts(0, [(5000, 6000)])
    b = utts(1, [(0, 1000), (4500, 5500)])
    assert trp_gap(a, b, now=6000) == 4000


def test_gap_matches_bruteforce_scan():
    rng = np.random.default_rng(23)
    for _ in range(500):
        a = random_utterances(rng, 0, 20000)
        b = random_utterances(rng, 1, 20000)
        now = int(rng.integers(0, 22000))
        assert trp_gap(a, b, now) == gap_oracle(a, b, now)


def test_gap_translation_invariance():
    rng = np.random.default_rng(31)
    for _ in range(100):
        a = random_utterances(rng, 0, 8000)
        b = random_utterances(rng, 1, 8000)
        now = int(rng.integers(0, 9000))
        delta = int(rng.integers(0, 5000))
        a2 = [Utterance(0, u.start + delta, u.end + delta) for u in a]
        b2 = [Utterance(1, u.start + delta, u.end + delta) for u in b]
        assert trp_gap(a, b, now) == trp_gap(a2, b2, now + delta)


def test_window_lengths():
    assert WINDOW_LENGTHS_MS == (1000, 14000, 15000)
    assert sum(WINDOW_LENGTHS_MS) == LOOKBACK_MS == 30000


def test_overlap_silent_streams():
    a = ActivityStream(0)
    b = ActivityStream(1)
    assert simultaneous_speech(a, b, now=30000) == (0, 0, 0)


def test_overlap_continuous_speech_fills_every_window():
    a = stream_from_intervals(0, [(0, 30000)], 30000)
    b = stream_from_intervals(1, [(0, 30000)], 30000)
    assert simultaneous_speech(a, b, now=30000) == (1000, 14000, 15000)


def test_overlap_confined_to_newest_window():
    now = 40000
    a = stream_from_intervals(0, [(now - 500, now)], now)
    b = stream_from_intervals(1, [(now - 800, now - 300)], now)
    assert simultaneous_speech(a, b, now) == (200, 0, 0)


def test_overlap_windows_tile_the_lookback():
    rng = np.random.default_rng(47)
    for _ in range(100):
        dur = 31000
        a = ActivityStream(0, bits=rng.random(dur) < 0.5)
        b = ActivityStream(1, bits=rng.random(dur) < 0.5)
        now = int(rng.integers(0, dur))
        w1, w2, w3 = simultaneous_speech(a, b, now)
        both = a.window(now - LOOKBACK_MS, now) & b.window(now - LOOKBACK_MS, now)
        assert w1 + w2 + w3 == int(both.sum())
        assert 0 <= w1 <= 1000 and 0 <= w2 <= 14000 and 0 <= w3 <= 15000


def test_overlap_matches_per_tick_oracle():
    rng = np.random.default_rng(53)
    for _ in range(40):
        dur = 2200
        a = ActivityStream(0, bits=rng.random(dur) < 0.5)
        b = ActivityStream(1, bits=rng.random(dur) < 0.5)
        now = int(rng.integers(0, 2500))

        def count(lo, hi):
            return sum(1 for t in range(lo, hi) if a.get(t) and b.get(t))

        expected = (
            count(now - 1000, now),
            count(now - 15000, now - 1000),
            count(now - 30000, now - 15000),
        )
        assert simultaneous_speech(a, b, now) == expected


def test_overlap_is_symmetric():
    rng = np.random.default_rng(59)
    a = ActivityStream(0, bits=rng.random(5000) < 0.4)
    b = ActivityStream(1, bits=rng.random(5000) < 0.6)
    for now in (0, 100, 2500, 5000, 6000):
        assert simultaneous_speech(a, b, now) == simultaneous_speech(b, a, now)


def test_extract_pair_combines_gap_and_overlap():
    now = 3000
    streams = {
        0: stream_from_intervals(0, [(1200, 2000)], now),
        1: stream_from_intervals(1, [(0, 1000)], now),
    }
    utterances = {0: utts(0, [(1200, 2000)]), 1: utts(1, [(0, 1000)])}
    f = extract_pair(streams, utterances, 0, 1, now)
    assert f == PairFeatures(trp_gap_ms=200, overlap_w1_ms=0, overlap_w2_ms=0, overlap_w3_ms=0)
    assert f.overlaps == (0, 0, 0)


def test_extract_all_counts_ordered_pairs():
    def party(n):
        streams = {i: ActivityStream(i) for i in range(n)}
        utterances = {i: [] for i in range(n)}
        return extract_all(streams, utterances, now=1000)

    assert len(party(2)) == 2
    assert len(party(4)) == 12


def test_extract_all_shares_overlap_across_directions():
    rng = np.random.default_rng(61)
    streams = {i: ActivityStream(i, bits=rng.random(4000) < 0.5) for i in range(3)}
    utterances = {i: random_utterances(rng, i, 4000) for i in range(3)}
    out = extract_all(streams, utterances, now=4000)
    for a in range(3):
        for b in range(a + 1, 3):
            assert out[(a, b)].overlaps == out[(b, a)].overlaps
            assert out[(a, b)].trp_gap_ms == trp_gap(utterances[a], utterances[b], 4000)
            assert out[(b, a)].trp_gap_ms == trp_gap(utterances[b], utterances[a], 4000)
