"""Learned mapping from pair features to same-floor posteriors.

A two-class Naive Bayes over discretized features. Likelihood lookup
tables are trained offline from labeled corpora with add-one
smoothing, and evaluated in log space at runtime. The classifier is
directional (features for (a, b) and (b, a) differ in the gap
feature); callers that need one probability per unordered pair
average the two directions.
"""

from __future__ import annotations

import json
import os
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import CorpusError, ModelFormatError, ModelVersionError, TrainingError
from .features import (
    TRP_CLIP_MS,
    WINDOW_LENGTHS_MS,
    PairFeatures,
    simultaneous_speech,
    trp_gap_from_arrays,
)
from .timeline import ActivityStream, Tick, Utterance

SAME, DIFF = 0, 1
CLASS_NAMES = ("same", "diff")

FEATURE_NAMES = ("trp_gap", "overlap_w1", "overlap_w2", "overlap_w3")

MODEL_FORMAT = "floorspace-model"
MODEL_FORMAT_VERSION = 1

DEFAULT_SAMPLE_PERIOD_MS = 1000
RECENT_SPEECH_WINDOW_MS = 30000


@dataclass(frozen=True)
class FeatureBinning:
    """Maps raw feature values onto table bins.

    Gap values get fixed-width bins across the clipped range plus one
    trailing bin for "no antecedent pair of turns yet". Overlap counts
    get equal-width bins across each window's possible range. Every
    value maps to exactly one bin.
    """

    trp_bin_width_ms: int = 100
    trp_clip_ms: int = TRP_CLIP_MS
    overlap_bins_per_window: int = 20
    window_lengths_ms: Tuple[int, int, int] = WINDOW_LENGTHS_MS

    @property
    def n_trp_value_bins(self) -> int:
        return 2 * self.trp_clip_ms // self.trp_bin_width_ms

    @property
    def missing_bin(self) -> int:
        return self.n_trp_value_bins

    @property
    def n_trp_bins(self) -> int:
        return self.n_trp_value_bins + 1

    def trp_bin(self, gap_ms: Optional[int]) -> int:
        if gap_ms is None:
            return self.missing_bin
        g = max(-self.trp_clip_ms, min(self.trp_clip_ms, int(gap_ms)))
        return min((g + self.trp_clip_ms) // self.trp_bin_width_ms,
                   self.n_trp_value_bins - 1)

    def overlap_bin(self, overlap_ms: int, window_index: int) -> int:
        length = self.window_lengths_ms[window_index]
        b = int(overlap_ms) * self.overlap_bins_per_window // length
        return min(max(b, 0), self.overlap_bins_per_window - 1)

    def bin_features(self, f: PairFeatures) -> Tuple[int, int, int, int]:
        return (
            self.trp_bin(f.trp_gap_ms),
            self.overlap_bin(f.overlap_w1_ms, 0),
            self.overlap_bin(f.overlap_w2_ms, 1),
            self.overlap_bin(f.overlap_w3_ms, 2),
        )

    def bins_for(self, feature: str) -> int:
        if feature == "trp_gap":
            return self.n_trp_bins
        return self.overlap_bins_per_window

    def to_dict(self) -> dict:
        return {
            "trp_bin_width_ms": self.trp_bin_width_ms,
            "trp_clip_ms": self.trp_clip_ms,
            "overlap_bins_per_window": self.overlap_bins_per_window,
            "window_lengths_ms": list(self.window_lengths_ms),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureBinning":
        return cls(
            trp_bin_width_ms=int(d["trp_bin_width_ms"]),
            trp_clip_ms=int(d["trp_clip_ms"]),
            overlap_bins_per_window=int(d["overlap_bins_per_window"]),
            window_lengths_ms=tuple(int(x) for x in d["window_lengths_ms"]),
        )


@dataclass
class TrainingInstance:
    features: PairFeatures
    label: int  # SAME or DIFF


@dataclass
class FloorModel:
    """Priors plus per-feature likelihood tables.

    ``tables[name]`` has shape (2, n_bins); row 0 is the same-floor
    class, row 1 different-floor. Rows are proper distributions.
    """

    priors: np.ndarray
    tables: Dict[str, np.ndarray]
    binning: FeatureBinning = field(default_factory=FeatureBinning)
    format_version: int = MODEL_FORMAT_VERSION

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.tables = {k: np.asarray(v, dtype=np.float64) for k, v in self.tables.items()}
        self._log_priors = np.log(self.priors)
        self._log_tables = {k: np.log(v) for k, v in self.tables.items()}

    def log_likelihoods(self, feature: str) -> np.ndarray:
        return self._log_tables[feature]


def make_training_instances(
    streams: Mapping[int, ActivityStream],
    utterances: Mapping[int, Sequence[Utterance]],
    duration_ms: Optional[Tick] = None,
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS,
) -> List[TrainingInstance]:
    """Sample labeled feature vectors from a labeled corpus.

    Every ``sample_period_ms`` an instance is emitted for each ordered
    pair in which both participants produced speech within the last
    30 s. The class is whether the two participants' most recent
    utterances carry the same floor label.

    Raises CorpusError when an utterance is unlabeled.
    """
    ids = sorted(streams)
    for pid in ids:
        for u in utterances.get(pid, ()):
            if u.floor_label is None:
                raise CorpusError(
                    f"utterance at {u.start} of participant {pid} has no floor label"
                )
    if duration_ms is None:
        duration_ms = max((s.end_tick for s in streams.values()), default=0)

    starts = {pid: [u.start for u in utterances.get(pid, ())] for pid in ids}
    ends = {pid: [u.end for u in utterances.get(pid, ())] for pid in ids}
    labels = {pid: [u.floor_label for u in utterances.get(pid, ())] for pid in ids}

    out: List[TrainingInstance] = []
    t = sample_period_ms
    while t <= duration_ms:
        active = [
            pid
            for pid in ids
            if streams[pid].window(t - RECENT_SPEECH_WINDOW_MS, t).any()
        ]
        latest = {}
        for pid in active:
            k = bisect_right(starts[pid], t) - 1
            latest[pid] = labels[pid][k] if k >= 0 else None
        for i, a in enumerate(active):
            for b in active[i + 1 :]:
                w1, w2, w3 = simultaneous_speech(streams[a], streams[b], t)
                same = latest[a] is not None and latest[a] == latest[b]
                label = SAME if same else DIFF
                gap_ab = trp_gap_from_arrays(starts[a], starts[b], ends[b], t)
                gap_ba = trp_gap_from_arrays(starts[b], starts[a], ends[a], t)
                out.append(TrainingInstance(PairFeatures(gap_ab, w1, w2, w3), label))
                out.append(TrainingInstance(PairFeatures(gap_ba, w1, w2, w3), label))
        t += sample_period_ms
    return out


def train(
    instances: Iterable[TrainingInstance],
    binning: Optional[FeatureBinning] = None,
) -> FloorModel:
    """Fit priors and add-one smoothed likelihood tables.

    Needs at least one instance of each class; raises TrainingError
    otherwise.
    """
    binning = binning or FeatureBinning()
    instances = list(instances)
    class_counts = np.zeros(2, dtype=np.int64)
    counts = {
        name: np.zeros((2, binning.bins_for(name)), dtype=np.int64)
        for name in FEATURE_NAMES
    }
    for inst in instances:
        c = inst.label
        class_counts[c] += 1
        bins = binning.bin_features(inst.features)
        for name, b in zip(FEATURE_NAMES, bins):
            counts[name][c, b] += 1
    if class_counts.min() == 0:
        missing = CLASS_NAMES[int(np.argmin(class_counts))]
        raise TrainingError(
            f"training data contains no '{missing}' instances "
            f"(counts: same={class_counts[SAME]}, diff={class_counts[DIFF]})"
        )
    tables = {}
    for name in FEATURE_NAMES:
        n_bins = binning.bins_for(name)
        tables[name] = (counts[name] + 1.0) / (
            class_counts[:, None] + float(n_bins)
        )
    priors = class_counts / class_counts.sum()
    return FloorModel(priors=priors, tables=tables, binning=binning)


def summarize_training(
    instances: Iterable[TrainingInstance],
    binning: Optional[FeatureBinning] = None,
) -> dict:
    """Class counts and per-feature occupied-bin counts, for reporting."""
    binning = binning or FeatureBinning()
    class_counts = {SAME: 0, DIFF: 0}
    occupied: Dict[str, Dict[int, set]] = {
        name: {SAME: set(), DIFF: set()} for name in FEATURE_NAMES
    }
    for inst in instances:
        class_counts[inst.label] += 1
        for name, b in zip(FEATURE_NAMES, binning.bin_features(inst.features)):
            occupied[name][inst.label].add(b)
    return {
        "instances": {
            CLASS_NAMES[c]: class_counts[c] for c in (SAME, DIFF)
        },
        "occupied_bins": {
            name: {
                CLASS_NAMES[c]: len(occupied[name][c]) for c in (SAME, DIFF)
            }
            for name in FEATURE_NAMES
        },
        "total_bins": {name: binning.bins_for(name) for name in FEATURE_NAMES},
    }


def posterior(model: FloorModel, f: PairFeatures) -> float:
    """P(same floor | features) for one ordered pair, computed in log space."""
    bins = model.binning.bin_features(f)
    log_same = model._log_priors[SAME]
    log_diff = model._log_priors[DIFF]
    for name, b in zip(FEATURE_NAMES, bins):
        lt = model.log_likelihoods(name)
        log_same += lt[SAME, b]
        log_diff += lt[DIFF, b]
    return float(np.exp(log_same - np.logaddexp(log_same, log_diff)))


def posterior_batch(model: FloorModel, bins: np.ndarray) -> np.ndarray:
    """Posteriors for many pre-binned feature vectors at once.

    ``bins`` has shape (m, 4) in FEATURE_NAMES order; returns shape (m,).
    """
    bins = np.asarray(bins, dtype=np.intp)
    log_same = np.full(len(bins), model._log_priors[SAME])
    log_diff = np.full(len(bins), model._log_priors[DIFF])
    for k, name in enumerate(FEATURE_NAMES):
        lt = model.log_likelihoods(name)
        log_same += lt[SAME, bins[:, k]]
        log_diff += lt[DIFF, bins[:, k]]
    return np.exp(log_same - np.logaddexp(log_same, log_diff))


def pair_posterior(model: FloorModel, f_ab: PairFeatures, f_ba: PairFeatures) -> float:
    """Single probability for an unordered pair: mean of both directions."""
    return 0.5 * (posterior(model, f_ab) + posterior(model, f_ba))


def save_model(model: FloorModel, path: str) -> None:
    """Write a model as deterministic JSON; reruns are byte-identical."""
    doc = {
        "format": MODEL_FORMAT,
        "format_version": model.format_version,
        "binning": model.binning.to_dict(),
        "priors": {
            "same": float(model.priors[SAME]),
            "diff": float(model.priors[DIFF]),
        },
        "tables": {
            name: {
                "same": [float(x) for x in model.tables[name][SAME]],
                "diff": [float(x) for x in model.tables[name][DIFF]],
            }
            for name in FEATURE_NAMES
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> FloorModel:
    """Read a model file, validating format, version, and table shapes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {version!r} unsupported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        binning = FeatureBinning.from_dict(doc["binning"])
        priors = np.array(
            [doc["priors"]["same"], doc["priors"]["diff"]], dtype=np.float64
        )
        tables = {}
        for name in FEATURE_NAMES:
            rows = doc["tables"][name]
            tables[name] = np.array(
                [rows["same"], rows["diff"]], dtype=np.float64
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file {path} is malformed: {exc}") from exc
    for name, table in tables.items():
        if table.shape != (2, binning.bins_for(name)):
            raise ModelFormatError(
                f"table '{name}' has shape {table.shape}, "
                f"expected (2, {binning.bins_for(name)})"
            )
        if not np.all(table > 0):
            raise ModelFormatError(f"table '{name}' contains non-positive entries")
    if not np.isclose(priors.sum(), 1.0):
        raise ModelFormatError("class priors do not sum to 1")
    return FloorModel(
        priors=priors, tables=tables, binning=binning, format_version=version
    )
