"""Per-listener audio mixing with click-free gain changes.

Each listener gets an individualized mix of everyone else's stream,
weighted by the current gain matrix. Gain changes glide linearly over
the ramp duration instead of stepping, so floor changes never click.
Accumulation happens in float64 and saturates into int16 on output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .errors import UnsupportedFormatError

SAMPLE_RATE = 8000
INT16_MIN = -32768
INT16_MAX = 32767

@dataclass
class MixerConfig:
    frame_ms: int = 20
    ramp_ms: int = 250
    sample_rate: int = SAMPLE_RATE

    @property
    def frame_samples(self) -> int:
        return self.frame_ms * self.sample_rate // 1000

    @property
    def ramp_samples(self) -> int:
        return max(1, self.ramp_ms * self.sample_rate // 1000)

class GainRamp:
    """Scalar gain gliding linearly toward a target."""

    __slots__ = ("value", "target", "_step")

    def __init__(self, value: float = 0.0):
        self.value = float(value)
        self.target = float(value)
        self._step = 0.0

    def set_target(self, target: float, ramp_samples: int) -> None:
        target = float(target)
        if target == self.target:
            return
        self.target = target
        if ramp_samples <= 0:
            self.value = target
            self._step = 0.0
        else:
            self._step = (target - self.value) / ramp_samples

    def advance(self, n: int) -> np.ndarray:
        """Per-sample gains for the next n samples, updating state."""
        if self.value == self.target:
            return np.full(n, self.value)
        g = self.value + self._step * np.arange(1, n + 1)
        if self._step > 0:
            g = np.minimum(g, self.target)
        else:
            g = np.maximum(g, self.target)
        self.value = float(g[-1])
        return g

class Mixer:
    """Stateful renderer of per-listener frames.

    Keeps one ramp per (listener, speaker) pair. A pair seen for the
    first time starts directly at its target, so a newly joined
    speaker is not faded in from silence artificially.
    """

    def __init__(self, cfg: Optional[MixerConfig] = None):
        self.cfg = cfg or MixerConfig()
        self._ramps: Dict[Tuple[int, int], GainRamp] = {}

    def ramp_for(self, listener: int, speaker: int, target: float) -> GainRamp:
        key = (listener, speaker)
        ramp = self._ramps.get(key)
        if ramp is None:
            ramp = GainRamp(target)
            self._ramps[key] = ramp
        return ramp

    def mix_frame(
        self,
        listener: int,
        frames: Mapping[int, np.ndarray],
        targets: Mapping[int, float],
    ) -> np.ndarray:
        """One mixed frame for ``listener``.

        ``frames`` maps speaker id to an int16 PCM frame; all frames
        must share one length. ``targets`` holds the wanted gain per
        speaker (a speaker absent from it is muted). The listener's
        own frame, if present, is excluded regardless of the targets.
        """
        lengths = {len(np.atleast_1d(f)) for f in frames.values()}
        if len(lengths) > 1:
            raise UnsupportedFormatError(
                f"frames of differing lengths in one mix: {sorted(lengths)}"
            )
        n = lengths.pop() if lengths else self.cfg.frame_samples
        acc = np.zeros(n, dtype=np.float64)
        for speaker in sorted(frames):
            if speaker == listener:
                continue
            target = float(targets.get(speaker, 0.0))
            ramp = self.ramp_for(listener, speaker, target)
            ramp.set_target(target, self.cfg.ramp_samples)
            g = ramp.advance(n)
            acc += g * np.asarray(frames[speaker], dtype=np.float64)
        return np.clip(np.rint(acc), INT16_MIN, INT16_MAX).astype(np.int16)
