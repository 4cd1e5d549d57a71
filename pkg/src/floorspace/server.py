"""Real-time audio space server: UDP audio in, per-listener mixes out.

Two sockets. The audio port speaks the 12-byte-header packet format
from transport; the control port speaks small length-prefixed JSON
messages (join, leave, pin, unpin, status, and the clock-sync
exchange the server initiates). Each client session owns its jitter
buffer, voice activity detector, online segmenter, and measured
clock offset; a single pump advances the shared timeline one 20 ms
frame at a time: drain arrivals, pop one frame per session, update
activity, re-evaluate the floor configuration on its own 30 ms grid,
then mix and send every listener their return frame.

The pump is callable directly (pump_once) so tests and the replay
path can drive time without a wall clock; serve() runs it paced.

Activity joins the shared timeline at jitter-buffer playout, so all
streams are already expressed on the server clock when features see
them; the measured per-client offsets are kept on the session for
diagnostics and log timestamps rather than re-timing audio.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np

from .assigner import (
    EVAL_PERIOD_MS,
    FloorAssigner,
    FloorConfiguration,
    NORMAL_GAIN,
    QUIET_GAIN,
    gains,
)
from .errors import CapacityError, FloorspaceError, PacketFormatError
from .evaluation import ConfigurationEvent, FloorTracker
from .learner import FloorModel, load_model
from .mixer import Mixer, MixerConfig
from .segmenter import OnlineSegmenter, SegmenterConfig
from .timeline import ActivityStream, MAX_PARTICIPANTS
from .transport import (
    AudioPacket,
    FRAME_MS,
    JitterBuffer,
    Packetizer,
    decode_ulaw,
    estimate_clock_offset,
    ClockOffset,
)
from .vad import SAMPLE_RATE, VadConfig, VoiceActivityDetector

log = logging.getLogger("floorspace.server")

_LEN = struct.Struct(">I")
MAX_CONTROL_BYTES = 64 * 1024
INBOX_FRAMES = 64


def encode_message(msg: dict) -> bytes:
    body = json.dumps(msg, separators=(",", ":")).encode("utf-8")
    return _LEN.pack(len(body)) + body


def decode_message(data: bytes) -> dict:
    if len(data) < _LEN.size:
        raise PacketFormatError(f"control message too short: {len(data)} bytes")
    (n,) = _LEN.unpack_from(data)
    if n > MAX_CONTROL_BYTES or len(data) != _LEN.size + n:
        raise PacketFormatError(
            f"control length prefix {n} does not match body of "
            f"{len(data) - _LEN.size} bytes"
        )
    try:
        msg = json.loads(data[_LEN.size :].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PacketFormatError(f"control message is not valid JSON: {exc}") from exc
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise PacketFormatError("control message must be an object with a type")
    return msg


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    audio_port: int = 46000
    control_port: int = 46001
    model_path: Optional[str] = None
    max_participants: int = MAX_PARTICIPANTS
    eval_period_ms: int = EVAL_PERIOD_MS
    frame_ms: int = FRAME_MS
    jitter_depth_ms: int = 60
    normal_gain: float = NORMAL_GAIN
    quiet_gain: float = QUIET_GAIN
    dwell_ms: int = 0
    sync_interval_s: float = 10.0
    vad: VadConfig = field(default_factory=VadConfig)

    def __post_init__(self):
        if not 1 <= self.max_participants <= MAX_PARTICIPANTS:
            raise CapacityError(
                f"max_participants must be in [1, {MAX_PARTICIPANTS}]"
            )
        if self.eval_period_ms <= 0 or self.frame_ms <= 0:
            raise FloorspaceError("periods must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ServerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise FloorspaceError(
                f"unknown server config fields: {sorted(unknown)}"
            )
        kwargs = dict(data)
        if "vad" in kwargs and isinstance(kwargs["vad"], dict):
            kwargs["vad"] = VadConfig(**kwargs["vad"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise FloorspaceError(f"bad server config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "ServerConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class ClientSession:
    def __init__(
        self,
        name: str,
        participant: int,
        ssrc: int,
        control_addr: Tuple[str, int],
        cfg: ServerConfig,
        start_tick: int,
    ):
        self.name = name
        self.participant = participant
        self.ssrc = ssrc
        self.control_addr = control_addr
        self.audio_addr: Optional[Tuple[str, int]] = None
        self.inbox: Deque[AudioPacket] = deque()
        self.overload_drops = 0
        self.jitter = JitterBuffer(depth_ms=cfg.jitter_depth_ms, frame_ms=cfg.frame_ms)
        self.vad = VoiceActivityDetector(cfg.vad)
        self.segmenter = OnlineSegmenter(participant, SegmenterConfig())
        self.stream = ActivityStream(participant)
        # silence backfill keeps every stream aligned to the shared epoch
        if start_tick > 0:
            zeros = np.zeros(start_tick, dtype=bool)
            self.stream.append(zeros)
            self.segmenter.feed(zeros)
        self.packetizer = Packetizer(ssrc=ssrc ^ 0xFFFFFFFF)
        self.clock: Optional[ClockOffset] = None
        self.pending_sync_t1: Optional[int] = None

    def push_packet(self, pkt: AudioPacket) -> None:
        if len(self.inbox) >= INBOX_FRAMES:
            self.inbox.popleft()
            self.overload_drops += 1
        self.inbox.append(pkt)


class RealtimeServer:
    def __init__(self, cfg: ServerConfig, model: Optional[FloorModel] = None):
        if model is None:
            if cfg.model_path is None:
                raise FloorspaceError("a model (or model_path) is required")
            model = load_model(cfg.model_path)
        self.cfg = cfg
        self.model = model
        self.sessions: Dict[str, ClientSession] = {}
        self._by_ssrc: Dict[int, ClientSession] = {}
        self.tracker: Optional[FloorTracker] = None
        self.events: List[ConfigurationEvent] = []
        self.tick = 0
        self._mixer = Mixer(MixerConfig(frame_ms=cfg.frame_ms))
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._last_sync = 0.0

        self.audio_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.audio_sock.bind((cfg.host, cfg.audio_port))
        self.control_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.control_sock.bind((cfg.host, cfg.control_port))
        self.audio_addr = self.audio_sock.getsockname()
        self.control_addr = self.control_sock.getsockname()
        self._threads: List[threading.Thread] = []

    # ---- membership ----

    def _join(self, name: str, ssrc: int, addr: Tuple[str, int]) -> dict:
        with self._lock:
            if name in self.sessions:
                existing = self.sessions[name]
                if existing.ssrc == ssrc:
                    existing.control_addr = addr
                    return self._joined_reply(existing)
                return {"type": "error", "message": f"name {name!r} already joined"}
            if len(self.sessions) >= self.cfg.max_participants:
                return {
                    "type": "error",
                    "message": f"room is full ({self.cfg.max_participants})",
                }
            if ssrc in self._by_ssrc:
                return {"type": "error", "message": f"ssrc {ssrc} already in use"}
            used = {s.participant for s in self.sessions.values()}
            participant = min(set(range(self.cfg.max_participants)) - used)
            session = ClientSession(name, participant, ssrc, addr, self.cfg, self.tick)
            self.sessions[name] = session
            self._by_ssrc[ssrc] = session
            self._rebuild_tracker()
            log.info("join %s as participant %d (ssrc %d)", name, participant, ssrc)
            return self._joined_reply(session)

    def _joined_reply(self, session: ClientSession) -> dict:
        return {
            "type": "joined",
            "name": session.name,
            "participant": session.participant,
            "frame_ms": self.cfg.frame_ms,
            "sample_rate": SAMPLE_RATE,
            "participants": {
                s.name: s.participant for s in self.sessions.values()
            },
        }

    def _leave(self, name: str) -> dict:
        with self._lock:
            session = self.sessions.pop(name, None)
            if session is None:
                return {"type": "error", "message": f"unknown participant {name!r}"}
            self._by_ssrc.pop(session.ssrc, None)
            self._rebuild_tracker()
            log.info("leave %s", name)
            return {"type": "left", "name": name}

    def _rebuild_tracker(self) -> None:
        sessions = sorted(self.sessions.values(), key=lambda s: s.participant)
        if len(sessions) < 2:
            self.tracker = None
            return
        tracker = FloorTracker(
            [s.participant for s in sessions],
            self.model,
            {s.participant: s.segmenter.view for s in sessions},
            assigner=FloorAssigner(
                eval_period_ms=self.cfg.eval_period_ms, dwell_ms=self.cfg.dwell_ms
            ),
            eval_period_ms=self.cfg.eval_period_ms,
            first_eval_ms=self.tick + 1,
        )
        for s in sessions:
            tracker.add_activity(s.participant, s.stream.bits)
        self.tracker = tracker

    # ---- control plane ----

    def _handle_control(self, data: bytes, addr: Tuple[str, int]) -> None:
        try:
            msg = decode_message(data)
        except PacketFormatError as exc:
            self._send_control({"type": "error", "message": str(exc)}, addr)
            return
        kind = msg.get("type")
        try:
            if kind == "join":
                reply = self._join(str(msg["name"]), int(msg["ssrc"]), addr)
            elif kind == "leave":
                reply = self._leave(str(msg["name"]))
            elif kind == "pin":
                reply = self._pin(msg)
            elif kind == "unpin":
                reply = self._unpin(msg)
            elif kind == "status":
                reply = self._status()
            elif kind == "sync_response":
                self._finish_sync(msg)
                return
            else:
                reply = {"type": "error", "message": f"unknown message type {kind!r}"}
        except (KeyError, TypeError, ValueError) as exc:
            reply = {"type": "error", "message": f"malformed {kind}: {exc!r}"}
        except FloorspaceError as exc:
            reply = {"type": "error", "message": str(exc)}
        self._send_control(reply, addr)

    def _names_to_partition(self, floors: List[List[str]]) -> Tuple[Tuple[int, ...], ...]:
        part = []
        for block in floors:
            ids = []
            for name in block:
                if name not in self.sessions:
                    raise FloorspaceError(f"unknown participant {name!r}")
                ids.append(self.sessions[name].participant)
            part.append(tuple(sorted(ids)))
        return tuple(part)

    def _pin(self, msg: dict) -> dict:
        with self._lock:
            if self.tracker is None:
                return {"type": "error", "message": "fewer than two participants"}
            owner = str(msg["owner"])
            if owner not in self.sessions:
                return {"type": "error", "message": f"unknown participant {owner!r}"}
            partition = self._names_to_partition(msg["floors"])
            self.tracker.assigner.pin(
                partition, owner, self.tracker.participants
            )
            log.info("pin by %s: %s", owner, partition)
            return {"type": "pinned", "owner": owner}

    def _unpin(self, msg: dict) -> dict:
        with self._lock:
            if self.tracker is None:
                return {"type": "error", "message": "fewer than two participants"}
            owner = str(msg["owner"])
            self.tracker.assigner.unpin(owner)
            return {"type": "unpinned", "owner": owner}

    def _status(self) -> dict:
        with self._lock:
            names = {s.participant: s.name for s in self.sessions.values()}
            if self.tracker is not None and self.tracker.configs:
                config = self.tracker.configs[-1]
                floors = [[names[m] for m in b] for b in config.partition]
                score = config.score
            else:
                floors = [[n] for n in sorted(self.sessions)]
                score = None
            return {
                "type": "status",
                "tick_ms": self.tick,
                "floors": floors,
                "score": score,
                "participants": {
                    s.name: {
                        "participant": s.participant,
                        "clock_offset_ms": None if s.clock is None else s.clock.offset_ms,
                        "jitter": vars(s.jitter.stats).copy(),
                        "overload_drops": s.overload_drops,
                    }
                    for s in self.sessions.values()
                },
            }

    def _send_control(self, msg: dict, addr: Tuple[str, int]) -> None:
        try:
            self.control_sock.sendto(encode_message(msg), addr)
        except OSError as exc:
            log.warning("control send to %s failed: %s", addr, exc)

    # ---- clock sync ----

    def _start_sync(self) -> None:
        t1 = self.tick
        with self._lock:
            for session in self.sessions.values():
                session.pending_sync_t1 = t1
                self._send_control(
                    {"type": "sync_request", "t1": t1}, session.control_addr
                )

    def _finish_sync(self, msg: dict) -> None:
        t1, t2, t3 = int(msg["t1"]), int(msg["t2"]), int(msg["t3"])
        name = str(msg.get("name", ""))
        t4 = self.tick
        with self._lock:
            session = self.sessions.get(name)
            if session is None or session.pending_sync_t1 != t1:
                return
            session.pending_sync_t1 = None
            session.clock = estimate_clock_offset(t1, t2, t3, t4)
            log.debug(
                "sync %s: offset %d ms, rtt %d ms",
                name,
                session.clock.offset_ms,
                session.clock.round_trip_ms,
            )

    # ---- audio plane ----

    def _handle_audio(self, data: bytes, addr: Tuple[str, int]) -> None:
        try:
            pkt = AudioPacket.from_bytes(data)
        except PacketFormatError:
            return
        with self._lock:
            session = self._by_ssrc.get(pkt.ssrc)
            if session is None:
                return
            session.audio_addr = addr
            session.push_packet(pkt)

    def pump_once(self) -> None:
        """Advance the shared timeline by one frame."""
        with self._lock:
            frame_ms = self.cfg.frame_ms
            sessions = sorted(self.sessions.values(), key=lambda s: s.participant)
            popped: Dict[int, np.ndarray] = {}
            for s in sessions:
                while s.inbox:
                    s.jitter.push(s.inbox.popleft())
                frame = s.jitter.pop()
                popped[s.participant] = frame
                bits = s.vad.frame_bits(frame)
                s.stream.append(bits)
                s.segmenter.feed(bits)
                if self.tracker is not None:
                    self.tracker.add_activity(s.participant, bits)
            self.tick += frame_ms
            config: Optional[FloorConfiguration] = None
            if self.tracker is not None:
                for event in self.tracker.process_due(self.tick):
                    self.events.append(event)
                    names = {
                        s.participant: s.name for s in self.sessions.values()
                    }
                    log.info(
                        "configuration @%dms: %s (score %.3f)",
                        event.tick,
                        [[names[m] for m in b] for b in event.partition],
                        event.score,
                    )
                if self.tracker.configs:
                    config = self.tracker.configs[-1]
            self._send_mixes(sessions, popped, config)

    def _send_mixes(
        self,
        sessions: List[ClientSession],
        popped: Dict[int, np.ndarray],
        config: Optional[FloorConfiguration],
    ) -> None:
        if len(sessions) < 2:
            return
        ids = [s.participant for s in sessions]
        if config is None:
            partition = tuple((pid,) for pid in ids)
            config = FloorConfiguration(partition, 0.0)
        matrix = gains(
            config, ids, normal=self.cfg.normal_gain, quiet=self.cfg.quiet_gain
        )
        mixer = self._mixer
        for listener in sessions:
            if listener.audio_addr is None:
                continue
            targets = {
                pid: matrix.gain(listener.participant, pid) for pid in ids
            }
            mixed = mixer.mix_frame(listener.participant, popped, targets)
            pkt = listener.packetizer.packetize(mixed)
            try:
                self.audio_sock.sendto(pkt.to_bytes(), listener.audio_addr)
            except OSError as exc:
                log.warning("audio send to %s failed: %s", listener.audio_addr, exc)

    # ---- lifecycle ----

    def start(self) -> None:
        for name, sock, handler in (
            ("audio-rx", self.audio_sock, self._handle_audio),
            ("control-rx", self.control_sock, self._handle_control),
        ):
            t = threading.Thread(
                target=self._rx_loop, args=(sock, handler), name=name, daemon=True
            )
            t.start()
            self._threads.append(t)

    def _rx_loop(self, sock: socket.socket, handler) -> None:
        sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                data, addr = sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            handler(data, addr)

    def run(self) -> None:
        """Paced pump loop; blocks until stop() or KeyboardInterrupt."""
        self.start()
        period = self.cfg.frame_ms / 1000.0
        next_at = time.monotonic() + period
        try:
            while not self._stop.is_set():
                now = time.monotonic()
                if now < next_at:
                    time.sleep(min(next_at - now, period))
                    continue
                next_at += period
                self.pump_once()
                if (
                    self.cfg.sync_interval_s > 0
                    and time.monotonic() - self._last_sync >= self.cfg.sync_interval_s
                ):
                    self._last_sync = time.monotonic()
                    self._start_sync()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=1.0)
        self._threads.clear()
        self.audio_sock.close()
        self.control_sock.close()


class ScriptedClient:
    """Minimal loopback client for tests and demos.

    Sends prepared PCM frames on the audio socket, answers the
    server's sync requests (optionally with a skewed clock), and
    collects whatever mixed audio comes back.
    """

    def __init__(
        self,
        name: str,
        ssrc: int,
        server_audio: Tuple[str, int],
        server_control: Tuple[str, int],
        clock_skew_ms: int = 0,
    ):
        self.name = name
        self.ssrc = ssrc
        self.server_audio = server_audio
        self.server_control = server_control
        self.clock_skew_ms = clock_skew_ms
        self._epoch = time.monotonic()
        self.audio_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.audio_sock.bind(("127.0.0.1", 0))
        self.audio_sock.settimeout(0.2)
        self.control_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.control_sock.bind(("127.0.0.1", 0))
        self.control_sock.settimeout(2.0)
        self.packetizer = Packetizer(ssrc=ssrc)
        self.participant: Optional[int] = None
        self.received: List[np.ndarray] = []

    def _now_ms(self) -> int:
        return int((time.monotonic() - self._epoch) * 1000) + self.clock_skew_ms

    def request(self, msg: dict) -> dict:
        self.control_sock.sendto(encode_message(msg), self.server_control)
        while True:
            data, _ = self.control_sock.recvfrom(65536)
            reply = decode_message(data)
            if reply["type"] == "sync_request":
                self._answer_sync(reply)
                continue
            return reply

    def _answer_sync(self, msg: dict) -> None:
        t = self._now_ms()
        self.control_sock.sendto(
            encode_message(
                {
                    "type": "sync_response",
                    "name": self.name,
                    "t1": msg["t1"],
                    "t2": t,
                    "t3": self._now_ms(),
                }
            ),
            self.server_control,
        )

    def join(self) -> dict:
        reply = self.request({"type": "join", "name": self.name, "ssrc": self.ssrc})
        if reply["type"] != "joined":
            raise FloorspaceError(f"join failed: {reply}")
        self.participant = reply["participant"]
        return reply

    def leave(self) -> dict:
        return self.request({"type": "leave", "name": self.name})

    def send_frame(self, pcm: np.ndarray) -> None:
        pkt = self.packetizer.packetize(pcm)
        self.audio_sock.sendto(pkt.to_bytes(), self.server_audio)

    def drain_audio(self) -> int:
        """Collect any mixed frames waiting on the audio socket."""
        got = 0
        self.audio_sock.settimeout(0.01)
        while True:
            try:
                data, _ = self.audio_sock.recvfrom(65536)
            except (socket.timeout, OSError):
                break
            try:
                pkt = AudioPacket.from_bytes(data)
            except PacketFormatError:
                continue
            self.received.append(decode_ulaw(pkt.payload))
            got += 1
        return got

    def close(self) -> None:
        self.audio_sock.close()
        self.control_sock.close()
