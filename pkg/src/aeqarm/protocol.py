"""Length-prefixed wire protocol for agent profiles.

Every message is a frame: a 4-byte big-endian unsigned body length
followed by that many bytes of UTF-8 JSON. Profiles are immutable values;
the task descriptor carries an opaque byte-code blob (base64 on the wire,
persisted by workers, never executed) plus a briefcase accumulating one
result per visited site and the trip timing.
"""

from __future__ import annotations

import base64
import json
import socket
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping

__all__ = [
    "MAX_FRAME",
    "ProtocolError",
    "FrameTooLarge",
    "MalformedFrame",
    "SiteResult",
    "Briefcase",
    "AgentProfile",
    "ITIN_PARALLEL",
    "encode_profile",
    "decode_profile",
    "profile_to_dict",
    "profile_from_dict",
    "encode_frame",
    "send_frame",
    "recv_frame",
    "request",
    "parse_address",
]

MAX_FRAME = 2**31 - 1
_HEADER = struct.Struct(">I")

ITIN_PARALLEL = "Parallel"


class ProtocolError(Exception):
    """Base class for wire-level failures."""


class FrameTooLarge(ProtocolError):
    pass


class MalformedFrame(ProtocolError):
    pass


@dataclass(frozen=True)
class SiteResult:
    """One site's execution record: timing, summary, optional knowledge."""

    site: str
    cpu_time_ms: int
    summary: dict = field(default_factory=dict)
    knowledge: dict | None = None


@dataclass(frozen=True)
class Briefcase:
    """The result bag travelling with an agent."""

    trip_start_ms: int = 0
    trip_end_ms: int = 0
    trip_time_ms: int = 0
    results: tuple[SiteResult, ...] = ()
    payload: bytes | None = None


@dataclass(frozen=True)
class AgentProfile:
    """The wire-level task descriptor for one agent clone."""

    agent_name: str
    agent_version: int = 1
    byte_code: bytes = b""
    itinerary: tuple[str, ...] = ()
    itin_type: str = ITIN_PARALLEL
    params: dict[str, str] = field(default_factory=dict)
    briefcase: Briefcase = field(default_factory=Briefcase)

    def with_result(self, result: SiteResult, trip_end_ms: int) -> "AgentProfile":
        case = replace(
            self.briefcase,
            results=self.briefcase.results + (result,),
            trip_end_ms=trip_end_ms,
        )
        return replace(self, briefcase=case)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise MalformedFrame(f"bad base64 field: {exc}") from exc


def profile_to_dict(profile: AgentProfile) -> dict:
    case = profile.briefcase
    briefcase: dict = {
        "trip_start_ms": case.trip_start_ms,
        "trip_end_ms": case.trip_end_ms,
        "trip_time_ms": case.trip_time_ms,
        "results": [
            {
                "site": r.site,
                "cpu_time_ms": r.cpu_time_ms,
                "summary": r.summary,
                **({"knowledge": r.knowledge} if r.knowledge is not None else {}),
            }
            for r in case.results
        ],
    }
    if case.payload is not None:
        briefcase["payload"] = _b64(case.payload)
    return {
        "agent_name": profile.agent_name,
        "agent_version": profile.agent_version,
        "byte_code": _b64(profile.byte_code),
        "itinerary": list(profile.itinerary),
        "itin_type": profile.itin_type,
        "params": dict(profile.params),
        "briefcase": briefcase,
    }


def _expect(mapping: Mapping, key: str, kinds) -> object:
    if key not in mapping:
        raise MalformedFrame(f"missing field {key!r}")
    value = mapping[key]
    if not isinstance(value, kinds):
        raise MalformedFrame(f"field {key!r} has type {type(value).__name__}")
    return value


def profile_from_dict(data: Mapping) -> AgentProfile:
    if not isinstance(data, Mapping):
        raise MalformedFrame("profile body is not an object")
    case_data = _expect(data, "briefcase", dict)
    results = []
    for entry in _expect(case_data, "results", list):
        if not isinstance(entry, dict):
            raise MalformedFrame("briefcase result is not an object")
        results.append(
            SiteResult(
                site=str(_expect(entry, "site", str)),
                cpu_time_ms=int(_expect(entry, "cpu_time_ms", int)),
                summary=dict(_expect(entry, "summary", dict)),
                knowledge=entry.get("knowledge"),
            )
        )
    payload = case_data.get("payload")
    briefcase = Briefcase(
        trip_start_ms=int(_expect(case_data, "trip_start_ms", int)),
        trip_end_ms=int(_expect(case_data, "trip_end_ms", int)),
        trip_time_ms=int(_expect(case_data, "trip_time_ms", int)),
        results=tuple(results),
        payload=_unb64(payload) if payload is not None else None,
    )
    params = _expect(data, "params", dict)
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in params.items()):
        raise MalformedFrame("params must map strings to strings")
    itinerary = _expect(data, "itinerary", list)
    if not all(isinstance(node, str) for node in itinerary):
        raise MalformedFrame("itinerary must be a list of strings")
    return AgentProfile(
        agent_name=str(_expect(data, "agent_name", str)),
        agent_version=int(_expect(data, "agent_version", int)),
        byte_code=_unb64(str(_expect(data, "byte_code", str))),
        itinerary=tuple(itinerary),
        itin_type=str(_expect(data, "itin_type", str)),
        params=dict(params),
        briefcase=briefcase,
    )


def dump_body(body: Mapping) -> bytes:
    """Canonical JSON encoding: sorted keys, no insignificant whitespace."""
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def load_body(data: bytes) -> dict:
    try:
        body = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFrame(f"undecodable frame body: {exc}") from exc
    if not isinstance(body, dict):
        raise MalformedFrame("frame body is not a JSON object")
    return body


def encode_frame(body: bytes) -> bytes:
    if len(body) > MAX_FRAME:
        raise FrameTooLarge(f"frame body of {len(body)} bytes exceeds {MAX_FRAME}")
    return _HEADER.pack(len(body)) + body


def encode_profile(profile: AgentProfile) -> bytes:
    """Full frame (length prefix + canonical body) for a profile."""
    return encode_frame(dump_body(profile_to_dict(profile)))


def decode_profile(frame: bytes) -> AgentProfile:
    if len(frame) < _HEADER.size:
        raise MalformedFrame("frame shorter than its header")
    (length,) = _HEADER.unpack(frame[: _HEADER.size])
    body = frame[_HEADER.size :]
    if length != len(body):
        raise MalformedFrame(f"declared length {length} != body length {len(body)}")
    return profile_from_dict(load_body(body))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def send_frame(sock: socket.socket, body: bytes) -> None:
    sock.sendall(encode_frame(body))


def recv_frame(sock: socket.socket) -> bytes | None:
    """One frame body, or None on clean EOF before a header arrives."""
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME:
        raise FrameTooLarge(f"incoming frame of {length} bytes exceeds {MAX_FRAME}")
    if length == 0:
        return b""
    body = _recv_exact(sock, length)
    if body is None:
        raise MalformedFrame("connection closed mid-frame")
    return body


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address {address!r} is not host:port")
    return host, int(port)


def request(address: str, body: Mapping, timeout: float = 30.0) -> dict:
    """Send one framed JSON request and wait for the framed JSON reply."""
    host, port = parse_address(address)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        send_frame(sock, dump_body(body))
        reply = recv_frame(sock)
    if reply is None:
        raise ProtocolError(f"no reply from {address}")
    return load_body(reply)
