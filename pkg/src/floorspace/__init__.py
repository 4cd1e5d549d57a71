"""Conversational-floor detection and mixing for a shared audio space.

Turn-taking timing, observed as per-participant voice activity on a
1 ms grid, is enough to tell who is talking with whom. This package
detects those conversational floors online and uses them to give
every listener a mix where their own conversation is loud and the
others are quiet but monitorable.
"""

from .assigner import (
    EVAL_PERIOD_MS,
    FloorAssigner,
    FloorConfiguration,
    GainMatrix,
    NORMAL_GAIN,
    QUIET_GAIN,
    bell_number,
    canonical_partition,
    enumerate_partitions,
    gains,
    score,
)
from .corpus import (
    Corpus,
    GeneratorConfig,
    TurnRecord,
    generate,
    load_corpus,
    save_corpus,
)
from .errors import (
    CapacityError,
    CorpusError,
    EvaluationError,
    FloorspaceError,
    InvalidRangeError,
    ModelFormatError,
    ModelVersionError,
    PacketFormatError,
    PinPermissionError,
    SyncTimeoutError,
    TrainingError,
    UnsupportedFormatError,
)
from .evaluation import (
    ConfigurationEvent,
    EvaluationReport,
    FloorTracker,
    ReplayResult,
    TruthTracker,
    evaluate,
    partition_text,
    replay_corpus,
    write_report,
    write_timeline,
)
from .features import (
    LOOKBACK_MS,
    PairFeatures,
    TRP_CLIP_MS,
    WINDOW_LENGTHS_MS,
    extract_all,
    extract_pair,
    simultaneous_speech,
    trp_gap,
)
from .learner import (
    FeatureBinning,
    FloorModel,
    TrainingInstance,
    load_model,
    make_training_instances,
    pair_posterior,
    posterior,
    save_model,
    train,
)
from .mixdown import (
    load_participant_tracks,
    mixdown_corpus,
    read_wav,
    render_listener_mix,
    tone_audio_for_corpus,
    write_wav,
)
from .mixer import Mixer, MixerConfig
from .segmenter import OnlineSegmenter, SegmenterConfig, segment
from .timeline import (
    ActivityStream,
    MAX_PARTICIPANTS,
    Participant,
    Tick,
    Utterance,
    clip_stream,
    overlap_ms,
    stream_from_intervals,
)
from .transport import (
    AudioPacket,
    ClockOffset,
    JitterBuffer,
    Packetizer,
    decode_ulaw,
    encode_ulaw,
    estimate_clock_offset,
    loopback_latency_ms,
)
from .vad import SAMPLE_RATE, VadConfig, VoiceActivityDetector, detect

__version__ = "0.1.0"

__all__ = [
    "ActivityStream",
    "AudioPacket",
    "CapacityError",
    "ClockOffset",
    "ConfigurationEvent",
    "Corpus",
    "CorpusError",
    "EVAL_PERIOD_MS",
    "EvaluationError",
    "EvaluationReport",
    "FeatureBinning",
    "FloorAssigner",
    "FloorConfiguration",
    "FloorModel",
    "FloorTracker",
    "FloorspaceError",
    "GainMatrix",
    "GeneratorConfig",
    "InvalidRangeError",
    "JitterBuffer",
    "LOOKBACK_MS",
    "MAX_PARTICIPANTS",
    "Mixer",
    "MixerConfig",
    "ModelFormatError",
    "ModelVersionError",
    "NORMAL_GAIN",
    "OnlineSegmenter",
    "PacketFormatError",
    "Packetizer",
    "PairFeatures",
    "Participant",
    "PinPermissionError",
    "QUIET_GAIN",
    "ReplayResult",
    "SAMPLE_RATE",
    "SegmenterConfig",
    "SyncTimeoutError",
    "TRP_CLIP_MS",
    "Tick",
    "TrainingError",
    "TrainingInstance",
    "TruthTracker",
    "TurnRecord",
    "UnsupportedFormatError",
    "Utterance",
    "VadConfig",
    "VoiceActivityDetector",
    "WINDOW_LENGTHS_MS",
    "bell_number",
    "canonical_partition",
    "clip_stream",
    "decode_ulaw",
    "detect",
    "encode_ulaw",
    "enumerate_partitions",
    "estimate_clock_offset",
    "evaluate",
    "extract_all",
    "extract_pair",
    "gains",
    "generate",
    "load_corpus",
    "load_model",
    "load_participant_tracks",
    "loopback_latency_ms",
    "make_training_instances",
    "mixdown_corpus",
    "overlap_ms",
    "pair_posterior",
    "partition_text",
    "posterior",
    "read_wav",
    "render_listener_mix",
    "replay_corpus",
    "save_corpus",
    "save_model",
    "score",
    "segment",
    "stream_from_intervals",
    "tone_audio_for_corpus",
    "train",
    "write_report",
    "write_timeline",
    "write_wav",
]
