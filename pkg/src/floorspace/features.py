"""Pairwise turn-taking features.

Two kinds of evidence distinguish people sharing a conversational
floor from people merely sharing a room: where one speaker's turns
begin relative to the other's turn endings (aligned starts suggest a
shared floor), and how much the two talk at the same time (sustained
simultaneous speech suggests separate floors).

Both features are computed per ordered pair at an observation instant
``now``, using only speech observable by then: an utterance still in
progress contributes its running end.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .timeline import ActivityStream, Tick, Utterance

# Gaps are clipped to this magnitude; anything further apart carries
# no alignment information worth distinguishing.
TRP_CLIP_MS = 5000

# Lookback windows for simultaneous speech, most recent first:
# (now-1s, now], (now-15s, now-1s], (now-30s, now-15s].
WINDOW_LENGTHS_MS = (1000, 14000, 15000)
LOOKBACK_MS = 30000


@dataclass(frozen=True)
class PairFeatures:
    """Feature vector for an ordered pair (a, b) at one instant.

    ``trp_gap_ms`` is None when either side has no qualifying
    utterance yet (a missing value, not zero).
    """

    trp_gap_ms: Optional[int]
    overlap_w1_ms: int
    overlap_w2_ms: int
    overlap_w3_ms: int

    @property
    def overlaps(self) -> Tuple[int, int, int]:
        return (self.overlap_w1_ms, self.overlap_w2_ms, self.overlap_w3_ms)


def trp_gap_from_arrays(
    a_starts: Sequence[int],
    b_starts: Sequence[int],
    b_ends: Sequence[int],
    now: Tick,
) -> Optional[int]:
    """Signed start-to-end gap on sorted utterance arrays.

    Positive: the a-side speaker began after the b-side's preceding
    turn ended, i.e. a transition at a turn boundary. Negative: the
    a-side began while the b-side was still talking. Per-speaker
    utterances are disjoint and ordered, so ends are ascending too.
    """
    i = bisect_right(a_starts, now) - 1
    if i < 0:
        return None
    ua_start = a_starts[i]
    j = bisect_left(b_starts, ua_start) - 1  # newest b begun before ua_start
    if j < 0:
        return None
    if b_ends[j] <= ua_start:
        gap = ua_start - b_ends[j]
    elif j >= 1:
        # b was mid-utterance when a started; the newest b turn that
        # had actually ended is the one before it
        gap = ua_start - b_ends[j - 1]
    else:
        # b's only earlier utterance is still open at ua_start; use
        # its running end, which makes the gap non-positive
        gap = ua_start - min(b_ends[0], now)
    return max(-TRP_CLIP_MS, min(TRP_CLIP_MS, gap))


def trp_gap(
    a_utterances: Sequence[Utterance],
    b_utterances: Sequence[Utterance],
    now: Tick,
) -> Optional[int]:
    """Gap between a's most recent turn start and b's closest preceding turn end.

    Input lists must be time-ordered. Only utterances with start <= now
    participate; an utterance whose end lies beyond ``now`` is treated
    as still in progress.
    """
    return trp_gap_from_arrays(
        [u.start for u in a_utterances],
        [u.start for u in b_utterances],
        [u.end for u in b_utterances],
        now,
    )


def simultaneous_speech(
    a: ActivityStream, b: ActivityStream, now: Tick
) -> Tuple[int, int, int]:
    """Tick counts where both streams are speech, per lookback window.

    Returns (w1, w2, w3) covering the most recent second, 1 s to 15 s
    back, and 15 s to 30 s back. Ticks before either recording exist
    count as non-speech.
    """
    both = a.window(now - LOOKBACK_MS, now) & b.window(now - LOOKBACK_MS, now)
    w3 = int(both[:15000].sum())
    w2 = int(both[15000:29000].sum())
    w1 = int(both[29000:].sum())
    return (w1, w2, w3)


def extract_pair(
    streams: Mapping[int, ActivityStream],
    utterances: Mapping[int, Sequence[Utterance]],
    a: int,
    b: int,
    now: Tick,
) -> PairFeatures:
    w1, w2, w3 = simultaneous_speech(streams[a], streams[b], now)
    return PairFeatures(trp_gap(utterances[a], utterances[b], now), w1, w2, w3)


def extract_all(
    streams: Mapping[int, ActivityStream],
    utterances: Mapping[int, Sequence[Utterance]],
    now: Tick,
) -> Dict[Tuple[int, int], PairFeatures]:
    """Features for every ordered pair of participants at ``now``.

    Simultaneous speech is symmetric and computed once per unordered
    pair; the gap feature is directional and computed both ways.
    """
    ids: List[int] = sorted(streams)
    out: Dict[Tuple[int, int], PairFeatures] = {}
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            w1, w2, w3 = simultaneous_speech(streams[a], streams[b], now)
            out[(a, b)] = PairFeatures(
                trp_gap(utterances[a], utterances[b], now), w1, w2, w3
            )
            out[(b, a)] = PairFeatures(
                trp_gap(utterances[b], utterances[a], now), w1, w2, w3
            )
    return out
