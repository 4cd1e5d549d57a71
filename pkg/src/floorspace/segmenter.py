"""Turning raw activity bits into utterances.

Gaps shorter than the bridge threshold are absorbed first, then
anything still shorter than the minimum utterance length is dropped.
Order matters: a run of blips separated by tiny gaps can bridge into
one utterance that survives, while the same blips in isolation would
all be discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .timeline import ActivityStream, Tick, Utterance


@dataclass
class SegmenterConfig:
    min_utterance_ms: int = 100
    bridge_gap_ms: int = 200

    def __post_init__(self):
        if self.min_utterance_ms < 1:
            raise ValueError("min_utterance_ms must be positive")
        if self.bridge_gap_ms < 0:
            raise ValueError("bridge_gap_ms must be non-negative")


def speech_runs(bits: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal [start, end) index runs of true bits."""
    bits = np.asarray(bits, dtype=bool)
    if len(bits) == 0:
        return []
    edges = np.flatnonzero(np.diff(bits.astype(np.int8)))
    starts = list(edges[bits[edges + 1]] + 1)
    ends = list(edges[~bits[edges + 1]] + 1)
    if bits[0]:
        starts.insert(0, 0)
    if bits[-1]:
        ends.append(len(bits))
    return list(zip(starts, ends))


def _bridge(runs: List[Tuple[int, int]], bridge_gap_ms: int) -> List[List[int]]:
    merged: List[List[int]] = []
    for s, e in runs:
        if merged and s - merged[-1][1] < bridge_gap_ms:
            merged[-1][1] = e
        else:
            merged.append([s, e])
    return merged


def segment(stream: ActivityStream, cfg: Optional[SegmenterConfig] = None) -> List[Utterance]:
    """Utterances for a whole stream, ordered and pairwise disjoint."""
    cfg = cfg or SegmenterConfig()
    merged = _bridge(speech_runs(stream.bits), cfg.bridge_gap_ms)
    base = stream.start_tick
    return [
        Utterance(stream.participant, base + s, base + e)
        for s, e in merged
        if e - s >= cfg.min_utterance_ms
    ]


class OnlineSegmenter:
    """Incremental mirror of ``segment`` over a growing stream.

    After feeding bits covering [start_tick, T), ``view()`` equals what
    ``segment`` would produce on that prefix. Only the newest run can
    still change (it may grow, or a later run may bridge into it), so
    the work per fed chunk is proportional to the runs in the chunk.
    """

    def __init__(
        self,
        participant: int,
        cfg: Optional[SegmenterConfig] = None,
        start_tick: Tick = 0,
    ):
        self.participant = participant
        self.cfg = cfg or SegmenterConfig()
        self._next_tick = start_tick
        self._runs: List[List[int]] = []  # bridged runs, absolute ticks
        # cached view of every run except the newest
        self._frozen_starts: List[int] = []
        self._frozen_ends: List[int] = []

    @property
    def end_tick(self) -> Tick:
        return self._next_tick

    def feed(self, bits) -> None:
        bits = np.atleast_1d(np.asarray(bits, dtype=bool))
        base = self._next_tick
        bridge = self.cfg.bridge_gap_ms
        for s, e in speech_runs(bits):
            s += base
            e += base
            gap = s - self._runs[-1][1] if self._runs else None
            # gap 0 is a run continuing across a chunk boundary; merge
            # that even when bridging is disabled
            if gap is not None and (gap == 0 or gap < bridge):
                self._runs[-1][1] = e
            else:
                self._freeze_tail()
                self._runs.append([s, e])
        self._next_tick = base + len(bits)

    def _freeze_tail(self) -> None:
        if self._runs:
            s, e = self._runs[-1]
            if e - s >= self.cfg.min_utterance_ms:
                self._frozen_starts.append(s)
                self._frozen_ends.append(e)

    def view(self) -> Tuple[List[int], List[int]]:
        """(starts, ends) of utterances visible so far, oldest first."""
        starts = list(self._frozen_starts)
        ends = list(self._frozen_ends)
        if self._runs:
            s, e = self._runs[-1]
            if e - s >= self.cfg.min_utterance_ms:
                starts.append(s)
                ends.append(e)
        return starts, ends

    def utterances(self) -> List[Utterance]:
        starts, ends = self.view()
        return [Utterance(self.participant, s, e) for s, e in zip(starts, ends)]
