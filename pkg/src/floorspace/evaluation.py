"""Tick-driven floor tracking, corpus replay, and accuracy evaluation.

The tracker advances one evaluation period (30 ms) at a time and is
purely a function of input timing: feeding the same activity in one
batch or in packet-sized slices produces the same configuration log.
Replay feeds a whole labeled corpus through the identical path the
live server uses, just as fast as the machine allows.

Evaluation compares the replayed configuration stream against ground
truth derived from the corpus labels: at any instant a participant
belongs to the floor of their most recent labeled turn, participants
yet to speak stand alone. Accuracy is measured in steady state,
excluding a warm-up and a guard band around every ground-truth
change, since the feature windows need history before they mean
anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .assigner import (
    EVAL_PERIOD_MS,
    FloorAssigner,
    FloorConfiguration,
    Partition,
    canonical_partition,
    unordered_pairs,
)
from .corpus import Corpus
from .errors import EvaluationError
from .features import LOOKBACK_MS, WINDOW_LENGTHS_MS, trp_gap_from_arrays
from .learner import FloorModel, posterior_batch
from .timeline import ActivityStream, Tick

WARMUP_MS = 30000
CHANGE_EXCLUSION_MS = 2000

UtteranceView = Callable[[], Tuple[Sequence[int], Sequence[int]]]


class _PairOverlap:
    """Growable cumulative simultaneous-speech counts, one row per pair."""

    def __init__(self, n_pairs: int):
        self._buf = np.zeros((n_pairs, 4096), dtype=np.int32)
        self._len = 1  # cum[0] = 0

    @property
    def covered(self) -> int:
        return self._len - 1

    def extend(self, both: np.ndarray) -> None:
        """Append AND-bits for [covered, covered + both.shape[1])."""
        n = both.shape[1]
        if n == 0:
            return
        need = self._len + n
        if need > self._buf.shape[1]:
            cap = self._buf.shape[1]
            while cap < need:
                cap *= 2
            grown = np.zeros((self._buf.shape[0], cap), dtype=np.int32)
            grown[:, : self._len] = self._buf[:, : self._len]
            self._buf = grown
        base = self._buf[:, self._len - 1][:, None]
        self._buf[:, self._len : need] = base + np.cumsum(both, axis=1, dtype=np.int32)
        self._len = need

    def window_counts(self, t: Tick) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(w1, w2, w3) overlap tick counts per pair at instant t."""
        c = self._buf
        edges = [max(t - e, 0) for e in (0, 1000, 15000, LOOKBACK_MS)]
        now, e1, e15, e30 = (c[:, k] for k in edges)
        return now - e1, e1 - e15, e15 - e30


@dataclass
class ConfigurationEvent:
    tick: Tick
    partition: Partition
    score: float


class FloorTracker:
    """Streams in, configuration log out, one evaluation period at a time.

    ``views`` supplies per-participant utterance (starts, ends) as
    observed so far; the replay path hands in full corpus records
    (the gap feature only looks at what had started by ``now``), the
    live path hands in online segmenter views.
    """

    def __init__(
        self,
        participants: Sequence[int],
        model: FloorModel,
        views: Mapping[int, UtteranceView],
        assigner: Optional[FloorAssigner] = None,
        eval_period_ms: int = EVAL_PERIOD_MS,
        posterior_override: Optional[Callable[[Tick], Mapping[Tuple[int, int], float]]] = None,
        first_eval_ms: Optional[Tick] = None,
    ):
        self.participants = tuple(sorted(participants))
        self.model = model
        self.views = dict(views)
        self.assigner = assigner or FloorAssigner(eval_period_ms=eval_period_ms)
        self.eval_period_ms = eval_period_ms
        self.posterior_override = posterior_override

        self.streams: Dict[int, ActivityStream] = {
            pid: ActivityStream(pid) for pid in self.participants
        }
        self.pairs = unordered_pairs(self.participants)
        self._overlap = _PairOverlap(len(self.pairs))
        # a tracker rebuilt after a membership change picks up at the
        # current period instead of re-announcing all of history
        self._next_eval = eval_period_ms
        if first_eval_ms is not None:
            steps = max((first_eval_ms + eval_period_ms - 1) // eval_period_ms, 1)
            self._next_eval = steps * eval_period_ms

        self.ticks: List[Tick] = []
        self.configs: List[FloorConfiguration] = []
        self.events: List[ConfigurationEvent] = []
        self.posteriors: List[np.ndarray] = []

    def add_activity(self, participant: int, bits) -> None:
        self.streams[participant].append(bits)
        self._advance_overlap()

    def _advance_overlap(self) -> None:
        new_cover = min(s.end_tick for s in self.streams.values())
        old_cover = self._overlap.covered
        if new_cover <= old_cover:
            return
        rows = np.empty((len(self.pairs), new_cover - old_cover), dtype=np.int32)
        cache = {
            pid: self.streams[pid].window(old_cover, new_cover)
            for pid in self.participants
        }
        for k, (a, b) in enumerate(self.pairs):
            rows[k] = cache[a] & cache[b]
        self._overlap.extend(rows)

    @property
    def coverage(self) -> Tick:
        """Ticks fully observed across every participant."""
        return self._overlap.covered

    def process_due(self, upto: Optional[Tick] = None) -> List[ConfigurationEvent]:
        """Evaluate every period boundary now covered by all streams."""
        limit = self.coverage if upto is None else min(upto, self.coverage)
        fresh: List[ConfigurationEvent] = []
        while self._next_eval <= limit:
            event = self._evaluate(self._next_eval)
            if event is not None:
                fresh.append(event)
            self._next_eval += self.eval_period_ms
        return fresh

    def pair_posteriors(self, t: Tick) -> np.ndarray:
        """Unordered-pair mutual-floor posteriors at instant t."""
        if self.posterior_override is not None:
            p = self.posterior_override(t)
            return np.array([p[k] for k in self.pairs], dtype=np.float64)
        m = len(self.pairs)
        binning = self.model.binning
        w1, w2, w3 = self._overlap.window_counts(t)
        bins = np.empty((2 * m, 4), dtype=np.intp)
        for col, (w, length) in enumerate(
            zip((w1, w2, w3), WINDOW_LENGTHS_MS), start=1
        ):
            ob = np.minimum(
                w.astype(np.int64) * binning.overlap_bins_per_window // length,
                binning.overlap_bins_per_window - 1,
            )
            bins[:m, col] = ob
            bins[m:, col] = ob
        views = {pid: self.views[pid]() for pid in self.participants}
        for k, (a, b) in enumerate(self.pairs):
            sa, ea = views[a]
            sb, eb = views[b]
            bins[k, 0] = binning.trp_bin(trp_gap_from_arrays(sa, sb, eb, t))
            bins[m + k, 0] = binning.trp_bin(trp_gap_from_arrays(sb, sa, ea, t))
        directed = posterior_batch(self.model, bins)
        return 0.5 * (directed[:m] + directed[m:])

    def _evaluate(self, t: Tick) -> Optional[ConfigurationEvent]:
        p = self.pair_posteriors(t)
        config = self.assigner.assign(
            dict(zip(self.pairs, p)), self.participants, now_ms=t
        )
        changed = not self.configs or self.configs[-1].partition != config.partition
        self.ticks.append(t)
        self.configs.append(config)
        self.posteriors.append(p)
        if changed:
            event = ConfigurationEvent(t, config.partition, config.score)
            self.events.append(event)
            return event
        return None


class TruthTracker:
    """Derived ground-truth partition as a function of time.

    Groups participants by the floor label of their most recent turn;
    a participant with no turn yet is their own singleton floor.
    """

    def __init__(self, corpus: Corpus):
        ids = corpus.ids
        self.participants = tuple(sorted(ids.values()))
        self._events = sorted(
            (r.start_ms, ids[r.participant], r.floor_label) for r in corpus.records
        )
        self._cursor = 0
        self._label: Dict[int, Optional[int]] = {p: None for p in self.participants}
        self._partition = self._compute()

    def _compute(self) -> Partition:
        blocks: Dict[object, List[int]] = {}
        for pid in self.participants:
            lab = self._label[pid]
            key = ("solo", pid) if lab is None else ("floor", lab)
            blocks.setdefault(key, []).append(pid)
        return canonical_partition(blocks.values())

    def partition_at(self, t: Tick) -> Partition:
        """Advance to instant t (non-decreasing calls) and return the truth."""
        moved = False
        while self._cursor < len(self._events) and self._events[self._cursor][0] <= t:
            _, pid, label = self._events[self._cursor]
            self._cursor += 1
            if self._label[pid] != label:
                self._label[pid] = label
                moved = True
        if moved:
            self._partition = self._compute()
        return self._partition


def _record_views(corpus: Corpus) -> Dict[int, UtteranceView]:
    views: Dict[int, UtteranceView] = {}
    for pid, utts in corpus.utterances().items():
        starts = [u.start for u in utts]
        ends = [u.end for u in utts]
        views[pid] = lambda s=starts, e=ends: (s, e)
    return views


@dataclass
class ReplayResult:
    participants: Tuple[int, ...]
    pairs: List[Tuple[int, int]]
    ticks: np.ndarray
    chosen: List[Partition]
    scores: np.ndarray
    truth: List[Partition]
    events: List[ConfigurationEvent]
    posteriors: np.ndarray  # (periods, n_pairs)


def replay_corpus(
    corpus: Corpus,
    model: FloorModel,
    eval_period_ms: int = EVAL_PERIOD_MS,
    dwell_ms: int = 0,
    oracle_posteriors: bool = False,
) -> ReplayResult:
    """Run the labeled corpus through the full detection path.

    With ``oracle_posteriors`` the learned model is bypassed and each
    pair's posterior is 1.0 or 0.0 straight from ground truth, which
    isolates the configuration search from feature or model error.
    """
    ids = sorted(corpus.ids.values())
    truth_for_oracle = TruthTracker(corpus)

    override = None
    if oracle_posteriors:
        def override(t: Tick) -> Dict[Tuple[int, int], float]:
            part = truth_for_oracle.partition_at(t)
            block_of = {m: i for i, b in enumerate(part) for m in b}
            return {
                (a, b): 1.0 if block_of[a] == block_of[b] else 0.0
                for (a, b) in unordered_pairs(ids)
            }

    tracker = FloorTracker(
        ids,
        model,
        _record_views(corpus),
        assigner=FloorAssigner(eval_period_ms=eval_period_ms, dwell_ms=dwell_ms),
        eval_period_ms=eval_period_ms,
        posterior_override=override,
    )
    streams = corpus.streams()
    for pid in ids:
        tracker.add_activity(pid, streams[pid].bits)
    tracker.process_due()

    truth = TruthTracker(corpus)
    truth_parts = [truth.partition_at(t) for t in tracker.ticks]
    return ReplayResult(
        participants=tracker.participants,
        pairs=tracker.pairs,
        ticks=np.array(tracker.ticks, dtype=np.int64),
        chosen=[c.partition for c in tracker.configs],
        scores=np.array([c.score for c in tracker.configs]),
        truth=truth_parts,
        events=tracker.events,
        posteriors=(
            np.vstack(tracker.posteriors)
            if tracker.posteriors
            else np.zeros((0, len(tracker.pairs)))
        ),
    )


def _pair_same_matrix(partitions: List[Partition], pairs: List[Tuple[int, int]]) -> np.ndarray:
    out = np.zeros((len(partitions), len(pairs)), dtype=bool)
    cache: Dict[Partition, np.ndarray] = {}
    for i, part in enumerate(partitions):
        row = cache.get(part)
        if row is None:
            block_of = {m: k for k, b in enumerate(part) for m in b}
            row = np.array(
                [block_of.get(a) == block_of.get(b) for a, b in pairs], dtype=bool
            )
            cache[part] = row
        out[i] = row
    return out


@dataclass
class EvaluationReport:
    configuration_accuracy: float
    pairwise_accuracy: float
    periods: int
    steady_periods: int
    confusion: Dict[str, int]
    events: List[ConfigurationEvent] = field(repr=False)
    warmup_ms: int = WARMUP_MS
    exclusion_ms: int = CHANGE_EXCLUSION_MS
    oracle_posteriors: bool = False

    def to_dict(self) -> dict:
        return {
            "configuration_accuracy": self.configuration_accuracy,
            "pairwise_accuracy": self.pairwise_accuracy,
            "periods": self.periods,
            "steady_periods": self.steady_periods,
            "confusion": dict(self.confusion),
            "configuration_changes": len(self.events),
            "warmup_ms": self.warmup_ms,
            "exclusion_ms": self.exclusion_ms,
            "oracle_posteriors": self.oracle_posteriors,
        }

    def to_text(self) -> str:
        c = self.confusion
        lines = [
            f"periods evaluated      {self.periods}",
            f"steady-state periods   {self.steady_periods}"
            f" (warm-up {self.warmup_ms} ms,"
            f" +-{self.exclusion_ms} ms around truth changes)",
            f"configuration accuracy {self.configuration_accuracy:.4f}",
            f"pairwise accuracy      {self.pairwise_accuracy:.4f}",
            f"pair confusion         same->same {c['same_as_same']}"
            f"  same->diff {c['same_as_diff']}"
            f"  diff->same {c['diff_as_same']}"
            f"  diff->diff {c['diff_as_diff']}",
            f"configuration changes  {len(self.events)}",
        ]
        if self.oracle_posteriors:
            lines.insert(0, "mode                   oracle posteriors")
        return "\n".join(lines)


def evaluate(
    corpus: Corpus,
    model: FloorModel,
    eval_period_ms: int = EVAL_PERIOD_MS,
    dwell_ms: int = 0,
    oracle_posteriors: bool = False,
    warmup_ms: int = WARMUP_MS,
    exclusion_ms: int = CHANGE_EXCLUSION_MS,
) -> Tuple[EvaluationReport, ReplayResult]:
    """Replay a corpus and score the result against derived ground truth."""
    if corpus.duration_ms <= warmup_ms:
        raise EvaluationError(
            f"corpus of {corpus.duration_ms} ms is no longer than the "
            f"{warmup_ms} ms warm-up"
        )
    result = replay_corpus(
        corpus,
        model,
        eval_period_ms=eval_period_ms,
        dwell_ms=dwell_ms,
        oracle_posteriors=oracle_posteriors,
    )
    ticks = result.ticks
    steady = ticks > warmup_ms
    change_ticks = [
        t for t, prev, cur in zip(ticks, [None] + result.truth, result.truth)
        if prev is not None and prev != cur
    ]
    if result.truth:
        first_speech = min((r.start_ms for r in corpus.records), default=None)
        if first_speech is not None:
            change_ticks.append(first_speech)
    for c in change_ticks:
        steady &= np.abs(ticks - c) > exclusion_ms

    chosen_same = _pair_same_matrix(result.chosen, result.pairs)
    truth_same = _pair_same_matrix(result.truth, result.pairs)

    config_ok = np.array(
        [a == b for a, b in zip(result.chosen, result.truth)], dtype=bool
    )
    n_steady = int(steady.sum())
    if n_steady == 0:
        raise EvaluationError("no steady-state periods to evaluate")
    config_acc = float(config_ok[steady].mean())
    pair_acc = float((chosen_same[steady] == truth_same[steady]).mean())
    cs, ts = chosen_same[steady], truth_same[steady]
    confusion = {
        "same_as_same": int((cs & ts).sum()),
        "same_as_diff": int((~cs & ts).sum()),
        "diff_as_same": int((cs & ~ts).sum()),
        "diff_as_diff": int((~cs & ~ts).sum()),
    }
    report = EvaluationReport(
        configuration_accuracy=config_acc,
        pairwise_accuracy=pair_acc,
        periods=len(ticks),
        steady_periods=n_steady,
        confusion=confusion,
        events=result.events,
        warmup_ms=warmup_ms,
        exclusion_ms=exclusion_ms,
        oracle_posteriors=oracle_posteriors,
    )
    return report, result


def partition_text(partition: Partition) -> str:
    """Compact one-line form, e.g. "0,1|2,3"."""
    return "|".join(",".join(str(m) for m in block) for block in partition)


def write_timeline(path: str, result: ReplayResult) -> None:
    """Tab-separated per-period rows: tick, chosen partition, truth partition."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tick_ms\tchosen\ttruth\n")
        for t, c, g in zip(result.ticks, result.chosen, result.truth):
            fh.write(f"{t}\t{partition_text(c)}\t{partition_text(g)}\n")


def write_report(path: str, report: EvaluationReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
