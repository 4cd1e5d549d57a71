"""Offline audible renders: what each listener would have heard.

Each participant gets a fixed-frequency tone that sounds whenever
their corpus turns say they speak, the corpus is replayed to get the
configuration timeline, and the per-listener mixes are rendered with
the same mixer and gain ramps the live path uses. Same-floor voices
come through at full level, other floors sit at the background level,
so floor changes are directly audible as tones fading in and out.
"""

from __future__ import annotations

import os
import wave
from typing import Dict, List, Optional, Sequence

import numpy as np

from .corpus import Corpus
from .errors import UnsupportedFormatError
from .evaluation import ReplayResult, replay_corpus
from .learner import FloorModel
from .mixer import Mixer, MixerConfig
from .assigner import FloorConfiguration, gains
from .timeline import Tick
from .vad import SAMPLE_RATE, SAMPLES_PER_MS

# roughly a C-major scale so concurrent voices stay tellable apart
TONE_FREQS_HZ = (262, 294, 330, 349, 392, 440, 494, 523, 587, 659)
TONE_AMPLITUDE = 0.35
TONE_EDGE_MS = 10


def write_wav(path: str, pcm: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    data = np.asarray(pcm, dtype=np.int16)
    with wave.open(path, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(data.tobytes())


def read_wav(path: str) -> np.ndarray:
    """Load mono 16-bit PCM at the native rate; anything else is rejected."""
    with wave.open(path, "rb") as wf:
        if wf.getnchannels() != 1:
            raise UnsupportedFormatError(
                f"{path}: expected mono, got {wf.getnchannels()} channels"
            )
        if wf.getsampwidth() != 2:
            raise UnsupportedFormatError(
                f"{path}: expected 16-bit samples, got {8 * wf.getsampwidth()}-bit"
            )
        if wf.getframerate() != SAMPLE_RATE:
            raise UnsupportedFormatError(
                f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()}"
            )
        raw = wf.readframes(wf.getnframes())
    return np.frombuffer(raw, dtype=np.int16)


def _tone(freq_hz: float, n_samples: int, phase0: float) -> np.ndarray:
    t = np.arange(n_samples, dtype=np.float64)
    burst = TONE_AMPLITUDE * 32767.0 * np.sin(
        phase0 + 2.0 * np.pi * freq_hz * t / SAMPLE_RATE
    )
    edge = min(TONE_EDGE_MS * SAMPLES_PER_MS, n_samples // 2)
    if edge > 0:
        # raised-cosine on/off edges keep turn boundaries click-free
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
        burst[:edge] *= ramp
        burst[-edge:] *= ramp[::-1]
    return burst


def tone_audio_for_corpus(corpus: Corpus) -> Dict[int, np.ndarray]:
    """Per-participant int16 tracks, a tone burst per labeled turn."""
    ids = corpus.ids
    n = corpus.duration_ms * SAMPLES_PER_MS
    tracks: Dict[int, np.ndarray] = {
        pid: np.zeros(n, dtype=np.float64) for pid in ids.values()
    }
    for rec in corpus.records:
        pid = ids[rec.participant]
        freq = TONE_FREQS_HZ[pid % len(TONE_FREQS_HZ)]
        a = rec.start_ms * SAMPLES_PER_MS
        b = min(rec.end_ms * SAMPLES_PER_MS, n)
        if b > a:
            tracks[pid][a:b] = _tone(freq, b - a, phase0=0.0)
    return {
        pid: np.clip(np.rint(t), -32768, 32767).astype(np.int16)
        for pid, t in tracks.items()
    }


def load_participant_tracks(corpus: Corpus, audio_dir: str) -> Dict[int, np.ndarray]:
    """One WAV per participant, named ``<participant>.wav`` in audio_dir.

    Tracks are zero-padded or truncated to the corpus duration so the
    mix walks every frame.
    """
    n = corpus.duration_ms * SAMPLES_PER_MS
    tracks: Dict[int, np.ndarray] = {}
    missing = []
    for name, pid in corpus.ids.items():
        path = os.path.join(audio_dir, f"{name}.wav")
        if not os.path.exists(path):
            missing.append(path)
            continue
        pcm = read_wav(path)
        if pcm.shape[0] < n:
            pcm = np.concatenate([pcm, np.zeros(n - pcm.shape[0], dtype=np.int16)])
        tracks[pid] = pcm[:n]
    if missing:
        raise FileNotFoundError(
            "missing participant audio: " + ", ".join(sorted(missing))
        )
    return tracks


def _partition_for_frame(result: ReplayResult, frame_start: Tick):
    """Chosen partition in force at frame_start, or None before the first."""
    idx = int(np.searchsorted(result.ticks, frame_start, side="right")) - 1
    return result.chosen[idx] if idx >= 0 else None


def render_listener_mix(
    corpus: Corpus,
    result: ReplayResult,
    listener: int,
    tracks: Optional[Dict[int, np.ndarray]] = None,
    mixer_cfg: Optional[MixerConfig] = None,
) -> np.ndarray:
    """Walk the gain timeline frame by frame and mix what one listener hears."""
    cfg = mixer_cfg or MixerConfig()
    if tracks is None:
        tracks = tone_audio_for_corpus(corpus)
    ids = sorted(corpus.ids.values())
    mixer = Mixer(cfg)
    n = corpus.duration_ms * SAMPLES_PER_MS
    out = np.zeros(n, dtype=np.int16)
    frame_samples = cfg.frame_samples
    singletons = tuple((pid,) for pid in ids)
    gain_cache: Dict[object, Dict[int, float]] = {}

    for a in range(0, n - n % frame_samples, frame_samples):
        t_ms = a // SAMPLES_PER_MS
        partition = _partition_for_frame(result, t_ms) or singletons
        targets = gain_cache.get(partition)
        if targets is None:
            gm = gains(FloorConfiguration(partition, 0.0), ids)
            targets = {pid: gm.gain(listener, pid) for pid in ids}
            gain_cache[partition] = targets
        frames = {pid: tracks[pid][a : a + frame_samples] for pid in ids}
        out[a : a + frame_samples] = mixer.mix_frame(listener, frames, targets)
    return out


def mixdown_corpus(
    corpus: Corpus,
    model: FloorModel,
    out_dir: str,
    listeners: Optional[Sequence[str]] = None,
    tracks: Optional[Dict[int, np.ndarray]] = None,
    dwell_ms: int = 0,
) -> List[str]:
    """Replay a corpus and write one WAV per requested listener.

    Returns the written paths. ``listeners`` are corpus participant
    names, all of them by default; ``tracks`` default to synthesized
    tones.
    """
    ids = corpus.ids
    names = list(listeners) if listeners is not None else list(corpus.participants)
    for name in names:
        if name not in ids:
            raise UnsupportedFormatError(f"unknown participant {name!r}")
    result = replay_corpus(corpus, model, dwell_ms=dwell_ms)
    if tracks is None:
        tracks = tone_audio_for_corpus(corpus)
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []
    for name in names:
        pcm = render_listener_mix(corpus, result, ids[name], tracks=tracks)
        path = os.path.join(out_dir, f"mix_{name}.wav")
        write_wav(path, pcm)
        written.append(path)
    return written
