"""Floor configuration search and per-listener gain assignment.

A floor configuration is a partition of the present participants into
disjoint conversational floors. Every evaluation period the assigner
scores all set partitions (their count is the Bell number of the
participant count, 115,975 at the 10-person cap) and picks the best.

A partition's score is the mean, over every unordered pair of present
participants, of the probability the partition assigns to that pair:
the pair's mutual-floor posterior when the partition puts the two in
one floor, and its complement when it separates them. Scoring all
pairs, not only the within-floor ones, is what lets larger floors and
multi-floor configurations beat a lone high-posterior pair: evidence
that two people are apart must count against configurations that
join them, and vice versa.

Ties break toward the previously chosen configuration, then toward
fewer floors, then toward the lexicographically smallest canonical
form, so the choice is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, PinPermissionError
from .timeline import MAX_PARTICIPANTS

NEUTRAL_SCORE = 0.5  # score of a configuration with no pairs to witness it
NORMAL_GAIN = 1.0
QUIET_GAIN = 0.2
EVAL_PERIOD_MS = 30

Partition = Tuple[Tuple[int, ...], ...]
PairKey = Tuple[int, int]


def canonical_partition(blocks: Iterable[Iterable[int]]) -> Partition:
    """Sort members within blocks and blocks by their smallest member."""
    return tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))


def pair_key(a: int, b: int) -> PairKey:
    return (a, b) if a < b else (b, a)


def unordered_pairs(ids: Sequence[int]) -> List[PairKey]:
    ids = sorted(ids)
    return [(a, b) for i, a in enumerate(ids) for b in ids[i + 1 :]]


@lru_cache(maxsize=None)
def _partitions_of_range(n: int) -> Tuple[Partition, ...]:
    # Grown by inserting each next element into every existing block
    # or a new one; blocks stay canonically ordered by construction.
    parts: List[List[List[int]]] = [[[0]]]
    for x in range(1, n):
        grown: List[List[List[int]]] = []
        for p in parts:
            for i in range(len(p)):
                q = [list(b) for b in p]
                q[i].append(x)
                grown.append(q)
            grown.append([list(b) for b in p] + [[x]])
        parts = grown
    return tuple(tuple(tuple(b) for b in p) for p in parts)


def enumerate_partitions(participants: Sequence[int]) -> List[Partition]:
    """All partitions of the given participant ids, canonical form.

    Raises CapacityError beyond MAX_PARTICIPANTS, where exhaustive
    search stops being viable.
    """
    ids = sorted(participants)
    n = len(ids)
    if n == 0:
        return [()]
    if n > MAX_PARTICIPANTS:
        raise CapacityError(
            f"{n} participants exceeds the searchable cap of {MAX_PARTICIPANTS}"
        )
    base = _partitions_of_range(n)
    if ids == list(range(n)):
        return list(base)
    return [tuple(tuple(ids[i] for i in block) for block in p) for p in base]


def bell_number(n: int) -> int:
    """Number of set partitions of n elements (number of floor configurations)."""
    if n == 0:
        return 1
    return len(enumerate_partitions(range(n)))


def score(partition: Iterable[Iterable[int]], posteriors: Mapping[PairKey, float]) -> float:
    """Mean probability the partition assigns to every unordered pair.

    ``posteriors`` must hold a mutual-floor probability for each
    unordered pair of the partition's members. With fewer than two
    participants there are no pairs and the score is NEUTRAL_SCORE.
    """
    blocks = [tuple(b) for b in partition]
    members = sorted(m for b in blocks for m in b)
    block_of = {m: i for i, b in enumerate(blocks) for m in b}
    total = 0.0
    count = 0
    for i, a in enumerate(members):
        for b in members[i + 1 :]:
            p = posteriors[pair_key(a, b)]
            total += p if block_of[a] == block_of[b] else 1.0 - p
            count += 1
    if count == 0:
        return NEUTRAL_SCORE
    return total / count


class _PartitionTable:
    """Precomputed structure for scoring every partition at once."""

    def __init__(self, ids: Tuple[int, ...]):
        self.ids = ids
        self.partitions = enumerate_partitions(ids)
        self.pairs = unordered_pairs(ids)
        index = {p: k for k, p in enumerate(self.pairs)}
        m = len(self.pairs)
        P = len(self.partitions)
        within = np.zeros((P, m), dtype=np.float64)
        for r, part in enumerate(self.partitions):
            for block in part:
                for i, a in enumerate(block):
                    for b in block[i + 1 :]:
                        within[r, index[pair_key(a, b)]] = 1.0
        self.within = within
        self.n_blocks = np.array([len(p) for p in self.partitions])

    def scores(self, p: np.ndarray) -> np.ndarray:
        # sum over pairs of (p if within else 1-p), as one matvec:
        # total = sum(1-p) + within @ (2p - 1)
        m = len(self.pairs)
        if m == 0:
            return np.full(len(self.partitions), NEUTRAL_SCORE)
        return (float(np.sum(1.0 - p)) + self.within @ (2.0 * p - 1.0)) / m


@lru_cache(maxsize=32)
def _partition_table(ids: Tuple[int, ...]) -> _PartitionTable:
    return _PartitionTable(ids)


@dataclass(frozen=True)
class FloorConfiguration:
    """A chosen partition together with the score it won with."""

    partition: Partition
    score: float

    def floor_of(self, participant: int) -> Optional[int]:
        for i, block in enumerate(self.partition):
            if participant in block:
                return i
        return None

    def same_floor(self, a: int, b: int) -> bool:
        fa = self.floor_of(a)
        return fa is not None and fa == self.floor_of(b)


@dataclass(frozen=True)
class GainMatrix:
    """Target gains per (listener, speaker); the diagonal is zero."""

    ids: Tuple[int, ...]
    matrix: np.ndarray

    def gain(self, listener: int, speaker: int) -> float:
        i = self.ids.index(listener)
        j = self.ids.index(speaker)
        return float(self.matrix[i, j])


def gains(
    config: FloorConfiguration,
    participants: Sequence[int],
    normal: float = NORMAL_GAIN,
    quiet: float = QUIET_GAIN,
) -> GainMatrix:
    """Per-listener target gains: full for floor-mates, quiet otherwise.

    A listener never hears their own stream back, hence the zero
    diagonal.
    """
    ids = tuple(sorted(participants))
    n = len(ids)
    mat = np.full((n, n), quiet, dtype=np.float64)
    for block in config.partition:
        idx = [ids.index(m) for m in block if m in ids]
        for i in idx:
            for j in idx:
                mat[i, j] = normal
    np.fill_diagonal(mat, 0.0)
    return GainMatrix(ids=ids, matrix=mat)


class FloorAssigner:
    """Periodic configuration selection with pinning and optional dwell.

    ``assign`` is called once per evaluation period with the complete
    pairwise posterior map. A pinned configuration overrides the
    search until its owner unpins it or the participant set changes.
    ``dwell_ms`` > 0 suppresses a switch until that long has passed
    since the last one, trading latency for stability; the default is
    no dwell.
    """

    def __init__(self, eval_period_ms: int = EVAL_PERIOD_MS, dwell_ms: int = 0):
        self.eval_period_ms = eval_period_ms
        self.dwell_ms = dwell_ms
        self.previous: Optional[FloorConfiguration] = None
        self.pinned: Optional[Partition] = None
        self.pin_owner = None
        self._clock: int = 0
        self._last_change: Optional[int] = None

    def pin(self, partition: Iterable[Iterable[int]], owner,
            participants: Sequence[int]) -> Partition:
        """Freeze the configuration; only ``owner`` may later unpin it."""
        part = canonical_partition(partition)
        members = sorted(m for b in part for m in b)
        if members != sorted(participants):
            raise ValueError(
                "pinned partition must cover exactly the present participants"
            )
        self.pinned = part
        self.pin_owner = owner
        return part

    def unpin(self, owner) -> None:
        if self.pinned is None:
            return
        if owner != self.pin_owner:
            raise PinPermissionError(
                f"participant {owner} does not own the pin"
            )
        self.pinned = None
        self.pin_owner = None

    def assign(
        self,
        posteriors: Mapping[PairKey, float],
        participants: Sequence[int],
        now_ms: Optional[int] = None,
    ) -> FloorConfiguration:
        """Pick the best configuration for this evaluation period."""
        ids = tuple(sorted(participants))
        if now_ms is None:
            self._clock += self.eval_period_ms
            now_ms = self._clock
        else:
            self._clock = now_ms

        if self.pinned is not None:
            covered = sorted(m for b in self.pinned for m in b)
            if covered != list(ids):
                # membership changed underneath the pin; it dissolves
                self.pinned = None
                self.pin_owner = None
            else:
                cfg = FloorConfiguration(self.pinned, score(self.pinned, posteriors))
                self.previous = cfg
                return cfg

        table = _partition_table(ids)
        p = np.array([posteriors[k] for k in table.pairs], dtype=np.float64)
        scores = table.scores(p)
        best = float(scores.max()) if len(scores) else NEUTRAL_SCORE
        tie_rows = np.flatnonzero(scores == best)
        if len(tie_rows) == 1:
            choice = table.partitions[tie_rows[0]]
        else:
            tied = [table.partitions[r] for r in tie_rows]
            if self.previous is not None and self.previous.partition in tied:
                choice = self.previous.partition
            else:
                choice = min(tied, key=lambda part: (len(part), part))

        if (
            self.dwell_ms > 0
            and self.previous is not None
            and choice != self.previous.partition
            and self._last_change is not None
            and now_ms - self._last_change < self.dwell_ms
            and sorted(m for b in self.previous.partition for m in b) == list(ids)
        ):
            # still inside the dwell window; hold the current choice
            choice = self.previous.partition
            best = float(score(choice, posteriors))

        if self.previous is None or choice != self.previous.partition:
            self._last_change = now_ms
        cfg = FloorConfiguration(choice, best)
        self.previous = cfg
        return cfg
