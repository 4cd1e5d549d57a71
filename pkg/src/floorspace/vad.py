"""Energy-based voice activity detection over 8 kHz 16-bit PCM.

Decisions are made per frame (10 ms by default) and fanned out to the
1 ms activity grid. A frame counts as speech when its RMS level clears
both an absolute floor and an adaptive noise floor plus an SNR margin;
a hangover keeps brief intra-phrase pauses inside one speech region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedFormatError
from .timeline import ActivityStream, Tick

SAMPLE_RATE = 8000
SAMPLES_PER_MS = SAMPLE_RATE // 1000
FULL_SCALE = 32768.0

_SILENCE_DB = -200.0  # stands in for log10(0) on all-zero frames
_NOISE_FLOOR_MIN_DB = -90.0  # digital silence must not drag the floor down forever


@dataclass
class VadConfig:
    frame_ms: int = 10
    energy_floor_db: float = -60.0
    snr_threshold_db: float = 10.0
    hangover_ms: int = 200
    noise_adapt_rate: float = 0.05

    def __post_init__(self):
        if self.frame_ms < 1:
            raise ValueError("frame_ms must be at least 1")
        if self.hangover_ms < 0:
            raise ValueError("hangover_ms must be non-negative")
        if not 0.0 <= self.noise_adapt_rate <= 1.0:
            raise ValueError("noise_adapt_rate must lie in [0, 1]")

    @property
    def frame_samples(self) -> int:
        return self.frame_ms * SAMPLES_PER_MS


def frame_rms_db(frame: np.ndarray) -> float:
    """RMS level of one PCM frame in dBFS (0 dB = 16-bit full scale)."""
    x = np.asarray(frame, dtype=np.float64)
    rms = math.sqrt(float(np.mean(x * x))) if len(x) else 0.0
    if rms <= 0.0:
        return _SILENCE_DB
    return 20.0 * math.log10(rms / FULL_SCALE)


class VoiceActivityDetector:
    """Stateful detector for one stream; feed frames in capture order."""

    def __init__(self, cfg: Optional[VadConfig] = None):
        self.cfg = cfg or VadConfig()
        self.noise_floor_db = self.cfg.energy_floor_db
        self._hangover_left = 0

    def process_frame(self, frame: np.ndarray) -> bool:
        """Speech/non-speech decision for one frame, updating state."""
        cfg = self.cfg
        level = frame_rms_db(frame)
        raw_speech = (
            level > cfg.energy_floor_db
            and level > self.noise_floor_db + cfg.snr_threshold_db
        )
        if raw_speech:
            self._hangover_left = cfg.hangover_ms
            return True
        if self._hangover_left > 0:
            self._hangover_left = max(0, self._hangover_left - cfg.frame_ms)
            return True
        # Adapt only while genuinely quiet so speech energy never
        # inflates the floor; clamp so digital silence cannot sink it.
        self.noise_floor_db += cfg.noise_adapt_rate * (level - self.noise_floor_db)
        self.noise_floor_db = max(self.noise_floor_db, _NOISE_FLOOR_MIN_DB)
        return False

    def frame_bits(self, pcm: np.ndarray) -> np.ndarray:
        """Decisions for a longer chunk, fanned out to 1 ms bits.

        The chunk must hold a whole number of detector frames (a 20 ms
        transport frame is two 10 ms detector frames).
        """
        pcm = np.asarray(pcm, dtype=np.int16)
        fs = self.cfg.frame_samples
        if len(pcm) % fs != 0:
            raise UnsupportedFormatError(
                f"chunk of {len(pcm)} samples is not a whole number of "
                f"{self.cfg.frame_ms} ms frames"
            )
        n_frames = len(pcm) // fs
        bits = np.zeros(n_frames * self.cfg.frame_ms, dtype=bool)
        for i in range(n_frames):
            if self.process_frame(pcm[i * fs : (i + 1) * fs]):
                bits[i * self.cfg.frame_ms : (i + 1) * self.cfg.frame_ms] = True
        return bits


def detect(
    pcm,
    start_tick: Tick = 0,
    cfg: Optional[VadConfig] = None,
    sample_rate: int = SAMPLE_RATE,
    participant: int = 0,
) -> ActivityStream:
    """Run detection over a whole recording.

    The returned stream covers exactly the input duration, one bit per
    millisecond, every tick of a frame inheriting that frame's
    decision. Only 8 kHz input is supported, and the sample count must
    be a whole number of frames.
    """
    cfg = cfg or VadConfig()
    if sample_rate != SAMPLE_RATE:
        raise UnsupportedFormatError(
            f"unsupported sample rate {sample_rate}, expected {SAMPLE_RATE}"
        )
    pcm = np.asarray(pcm, dtype=np.int16)
    if pcm.ndim != 1:
        raise UnsupportedFormatError("expected mono PCM (1-d array)")
    if len(pcm) == 0:
        return ActivityStream(participant, start_tick)
    fs = cfg.frame_samples
    if len(pcm) % fs != 0:
        raise UnsupportedFormatError(
            f"sample count {len(pcm)} is not a whole number of {cfg.frame_ms} ms frames"
        )
    bits = VoiceActivityDetector(cfg).frame_bits(pcm)
    return ActivityStream(participant, start_tick, bits)
