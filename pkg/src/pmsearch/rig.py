"""Simulated rotation stage + DAQ served over a line protocol, and a client oracle for it.

Every message is one JSON object on one LF-terminated UTF-8 line. The
canonical encoding has no whitespace, keys in a fixed order and floats in
shortest round-trip form, so ``encode(decode(line)) == line`` for every
canonical line. See ``docs/protocol.md`` for the grammar.
"""

from __future__ import annotations

import json
import logging
import math
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Union

from pmsearch.core import IntensitySample, PeakSearchError, ScanBounds
from pmsearch.oracle import DirectivityModel, Oracle

log = logging.getLogger(__name__)

DEFAULT_ROTATION_SPEED = 30.0  # deg/s
DEFAULT_ACQUISITION_DELAY = 10.0  # s


class ProtocolError(PeakSearchError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class RigError(PeakSearchError):
    """The rig answered a command with an error reply."""

    def __init__(self, code: str, message: str):
        super().__init__(f"rig error {code}: {message}")
        self.code = code
        self.message = message


class Disconnected(PeakSearchError):
    pass


# --- messages -----------------------------------------------------------------


class Rotate(NamedTuple):
    target_deg: float


class Acquire(NamedTuple):
    pass


class Status(NamedTuple):
    pass


class Rotated(NamedTuple):
    angle_deg: float
    seconds: float


class Sample(NamedTuple):
    angle_deg: float
    intensity: float
    seconds: float


class StatusReply(NamedTuple):
    angle_deg: float
    seconds: float


class ErrorReply(NamedTuple):
    code: str
    message: str


Command = Union[Rotate, Acquire, Status]
Reply = Union[Rotated, Sample, StatusReply, ErrorReply]

_COMMANDS = {"rotate": Rotate, "acquire": Acquire, "status": Status}
_REPLIES = {"rotated": Rotated, "sample": Sample, "status": StatusReply, "error": ErrorReply}
_NAMES = {Rotate: "rotate", Acquire: "acquire", Status: "status", Rotated: "rotated",
          Sample: "sample", StatusReply: "status", ErrorReply: "error"}


def encode(msg: Command | Reply) -> str:
    """Canonical wire form of a message, without the trailing LF."""
    body = {"cmd": _NAMES[type(msg)]}
    for name, value in zip(msg._fields, msg):
        if not isinstance(msg, ErrorReply):
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        body[name] = value
    return json.dumps(body, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _decode(line: str, table: dict) -> Command | Reply:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed", f"not a JSON object: {exc.msg}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("cmd"), str):
        raise ProtocolError("malformed", "message must be an object with a string 'cmd'")
    kind = table.get(obj["cmd"])
    if kind is None:
        raise ProtocolError("unknown_command", f"unknown cmd {obj['cmd']!r}")
    expected = {"cmd", *kind._fields}
    if set(obj) != expected:
        raise ProtocolError("malformed", f"{obj['cmd']} takes fields {sorted(expected)}, got {sorted(obj)}")
    values = []
    for name in kind._fields:
        value = obj[name]
        if kind is ErrorReply:
            if not isinstance(value, str):
                raise ProtocolError("malformed", f"{name} must be a string")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ProtocolError("malformed", f"{name} must be a number")
            value = float(value)
            if not math.isfinite(value):
                raise ProtocolError("malformed", f"{name} must be finite")
        values.append(value)
    return kind(*values)


def decode_command(line: str) -> Command:
    return _decode(line, _COMMANDS)


def decode_reply(line: str) -> Reply:
    return _decode(line, _REPLIES)


# --- server side --------------------------------------------------------------


def snap(angle: float, quantum: float) -> float:
    """Nearest multiple of ``quantum``; halfway cases round away from zero."""
    if quantum <= 0:
        return angle
    steps = math.floor(abs(angle) / quantum + 0.5)
    return math.copysign(steps * quantum, angle) if steps else 0.0


@dataclass
class RigState:
    """The simulated device. Elapsed time is derived from the odometer and acquisition count."""

    model: DirectivityModel
    bounds: ScanBounds = field(default_factory=ScanBounds)
    current_angle: float = 0.0
    rotation_speed: float = DEFAULT_ROTATION_SPEED
    acquisition_delay: float = DEFAULT_ACQUISITION_DELAY
    quantization: float = 0.0
    realtime: bool = False
    odometer: float = 0.0
    acquisitions: int = 0

    def __post_init__(self):
        if not self.rotation_speed > 0:
            raise ValueError(f"rotation_speed must be > 0, got {self.rotation_speed}")
        if not self.acquisition_delay >= 0:
            raise ValueError(f"acquisition_delay must be >= 0, got {self.acquisition_delay}")
        if not self.quantization >= 0:
            raise ValueError(f"quantization must be >= 0, got {self.quantization}")
        if self.current_angle not in self.bounds:
            raise ValueError(f"start angle {self.current_angle} outside {self.bounds}")
        self._lock = threading.Lock()

    @property
    def elapsed(self) -> float:
        return self.odometer / self.rotation_speed + self.acquisitions * self.acquisition_delay

    def _wait(self, seconds: float):
        if self.realtime and seconds > 0:
            time.sleep(seconds)

    def rotate(self, target: float) -> Rotated:
        if target not in self.bounds:
            raise ProtocolError("out_of_bounds", f"target {target} deg outside [{self.bounds.lo}, {self.bounds.hi}]")
        actual = snap(target, self.quantization)
        if actual > self.bounds.hi:
            actual -= self.quantization
        elif actual < self.bounds.lo:
            actual += self.quantization
        distance = abs(actual - self.current_angle)
        self.odometer += distance
        self.current_angle = actual
        seconds = distance / self.rotation_speed
        self._wait(seconds)
        return Rotated(actual, seconds)

    def acquire(self) -> Sample:
        intensity = self.model.acquire(self.current_angle)
        self.acquisitions += 1
        self._wait(self.acquisition_delay)
        return Sample(self.current_angle, intensity, self.acquisition_delay)

    def handle(self, command: Command) -> Reply:
        with self._lock:
            if isinstance(command, Rotate):
                return self.rotate(command.target_deg)
            if isinstance(command, Acquire):
                return self.acquire()
            return StatusReply(self.current_angle, self.elapsed)

    def handle_line(self, line: str) -> str:
        """One request line in, one reply line out (no LF on either)."""
        try:
            reply = self.handle(decode_command(line))
        except ProtocolError as exc:
            reply = ErrorReply(exc.code, exc.message)
        return encode(reply)


def serve_stream(state: RigState, infile: IO[str], outfile: IO[str]) -> None:
    """Serve one session over text streams (e.g. stdin/stdout) until EOF."""
    for line in infile:
        line = line.rstrip("\r\n")
        if not line:
            continue
        outfile.write(state.handle_line(line) + "\n")
        outfile.flush()


class _SessionHandler(socketserver.StreamRequestHandler):
    server: RigServer

    def handle(self):
        if not self.server.session.acquire(blocking=False):
            self._send(encode(ErrorReply("busy", "rig is in use by another session")))
            return
        try:
            log.info("session opened from %s", self.client_address)
            for raw in self.rfile:
                try:
                    line = raw.decode("utf-8").rstrip("\r\n")
                except UnicodeDecodeError:
                    self._send(encode(ErrorReply("malformed", "line is not valid UTF-8")))
                    continue
                if line:
                    self._send(self.server.state.handle_line(line))
        finally:
            self.server.session.release()
            log.info("session closed from %s", self.client_address)

    def _send(self, line: str):
        self.wfile.write(line.encode("utf-8") + b"\n")
        self.wfile.flush()


class RigServer(socketserver.ThreadingTCPServer):
    """TCP front end for a :class:`RigState`; one session at a time, others get ``busy``."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, state: RigState, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _SessionHandler)
        self.state = state
        self.session = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self, poll_interval: float = 0.01) -> threading.Thread:
        """Serve in a background thread; stop with ``shutdown()`` then ``server_close()``."""
        thread = threading.Thread(
            target=self.serve_forever, kwargs={"poll_interval": poll_interval}, name="rig-server", daemon=True
        )
        thread.start()
        return thread


# --- client side --------------------------------------------------------------


class RigClient:
    def __init__(self, host: str, port: int, timeout: float | None = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise Disconnected(f"cannot reach rig at {host}:{port}: {exc}") from None
        self._file = self._sock.makefile("rwb")

    def request(self, command: Command) -> Reply:
        try:
            self._file.write(encode(command).encode("utf-8") + b"\n")
            self._file.flush()
            raw = self._file.readline()
        except OSError as exc:
            raise Disconnected(f"rig connection lost: {exc}") from None
        if not raw:
            raise Disconnected("rig closed the connection")
        reply = decode_reply(raw.decode("utf-8").rstrip("\r\n"))
        if isinstance(reply, ErrorReply):
            raise RigError(reply.code, reply.message)
        return reply

    def rotate(self, target: float) -> Rotated:
        return self.request(Rotate(float(target)))

    def acquire(self) -> Sample:
        return self.request(Acquire())

    def status(self) -> StatusReply:
        return self.request(Status())

    def close(self):
        for closer in (self._file.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RigOracle(Oracle):
    """Acquires by rotating the rig to the angle and sampling there.

    The recorded angle is the one the rig reports, which differs from the
    commanded one when the actuator quantizes.
    """

    def __init__(self, client: RigClient):
        self.client = client

    def sample(self, angle: float) -> IntensitySample:
        rotated = self.client.rotate(angle)
        reading = self.client.acquire()
        return IntensitySample(rotated.angle_deg, reading.intensity)

    def acquire(self, angle: float) -> float:
        return self.sample(angle).intensity
