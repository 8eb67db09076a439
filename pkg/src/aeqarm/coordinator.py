"""Central-site services: agent launching, result collection, integration.

The launcher clones one profile per itinerary node (versions 1..n, a
shared trip start) and dispatches all clones concurrently; per-node
failures are recorded without aborting the rest. Workers submit finished
profiles to the result manager, which computes the round-trip time and
merges each profile into a per-launch collection (create-if-absent, first
submission wins on duplicate versions). Once the knowledge-collector
launch is complete, the integration step turns the collected local
knowledge into the global knowledge base on disk.
"""

from __future__ import annotations

import json
import logging
import socketserver
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .discretizer import PartitionTable
from .knowledge import GlobalKnowledge, LocalKnowledge, integrate, write_gkb
from .protocol import (
    AgentProfile,
    Briefcase,
    ProtocolError,
    dump_body,
    load_body,
    parse_address,
    profile_from_dict,
    profile_to_dict,
    recv_frame,
    request,
    send_frame,
)
from .worker import AGENT_GKDA_P

__all__ = [
    "ConnectFailed",
    "IncompleteCollection",
    "MissingGKB",
    "LaunchRequest",
    "DispatchEntry",
    "DispatchReport",
    "ProfileCollection",
    "launch",
    "relaunch",
    "await_completion",
    "query_collection",
    "run_rigkga",
    "ResultManagerServer",
    "serve_result_manager",
    "GSAR_FILE",
]

log = logging.getLogger(__name__)

GSAR_FILE = "gkb_gsar.tsv"
COLLECTIONS_DIR = "collections"

# Stand-in for the executable blob a code-shipping platform would carry;
# persisted by workers but never executed.
def _byte_code_stub(agent_name: str) -> bytes:
    return f"capability:{agent_name}\n".encode("ascii")


class ConnectFailed(Exception):
    pass


class IncompleteCollection(Exception):
    pass


class MissingGKB(Exception):
    pass


@dataclass(frozen=True)
class LaunchRequest:
    """What to launch, where, and who collects the results."""

    agent_name: str
    nodes: tuple[str, ...]
    params: dict[str, str] = field(default_factory=dict)
    result_manager_address: str = ""

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("launch requires at least one node")


@dataclass
class DispatchEntry:
    node: str
    agent_version: int
    ok: bool
    detail: str = ""


@dataclass
class DispatchReport:
    agent_name: str
    launch_id: str
    trip_start_ms: int
    entries: list[DispatchEntry] = field(default_factory=list)

    @property
    def ok_count(self) -> int:
        return sum(1 for e in self.entries if e.ok)

    @property
    def all_ok(self) -> bool:
        return self.ok_count == len(self.entries)


@dataclass
class ProfileCollection:
    """Returned profiles of one launch, keyed by clone version."""

    agent_name: str
    launch_id: str
    expected: int
    profiles: dict[int, AgentProfile] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return len(self.profiles) >= self.expected

    @property
    def missing_versions(self) -> list[int]:
        return [v for v in range(1, self.expected + 1) if v not in self.profiles]

    def to_dict(self) -> dict:
        return {
            "agent_name": self.agent_name,
            "launch_id": self.launch_id,
            "expected": self.expected,
            "profiles": [
                profile_to_dict(self.profiles[v]) for v in sorted(self.profiles)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProfileCollection":
        profiles = {}
        for entry in data.get("profiles", []):
            profile = profile_from_dict(entry)
            profiles[profile.agent_version] = profile
        return cls(
            agent_name=str(data.get("agent_name", "")),
            launch_id=str(data.get("launch_id", "")),
            expected=int(data.get("expected", 0)),
            profiles=profiles,
        )


def _dispatch_one(node: str, profile: AgentProfile, timeout: float) -> DispatchEntry:
    try:
        reply = request(node, profile_to_dict(profile), timeout=timeout)
    except (OSError, ProtocolError) as exc:
        return DispatchEntry(
            node=node,
            agent_version=profile.agent_version,
            ok=False,
            detail=f"ConnectFailed: {exc}",
        )
    if "error" in reply:
        return DispatchEntry(
            node=node,
            agent_version=profile.agent_version,
            ok=False,
            detail=f"{reply['error']}: {reply.get('detail', '')}",
        )
    return DispatchEntry(
        node=node,
        agent_version=profile.agent_version,
        ok=bool(reply.get("ok", False)),
        detail=json.dumps(reply.get("summary", {}), sort_keys=True),
    )


def _clone(
    req: LaunchRequest,
    version: int,
    launch_id: str,
    trip_start_ms: int,
    payload: bytes | None,
) -> AgentProfile:
    params = dict(req.params)
    params["launch_id"] = launch_id
    if req.result_manager_address:
        params["result_manager"] = req.result_manager_address
    return AgentProfile(
        agent_name=req.agent_name,
        agent_version=version,
        byte_code=_byte_code_stub(req.agent_name),
        itinerary=req.nodes,
        itin_type="Parallel",
        params=params,
        briefcase=Briefcase(trip_start_ms=trip_start_ms, payload=payload),
    )


def _gsar_payload(store_dir: Path | str | None) -> bytes:
    if store_dir is None:
        raise MissingGKB("no store directory given for the global-rule payload")
    path = Path(store_dir) / GSAR_FILE
    if not path.exists():
        raise MissingGKB(f"{path} not found; run the integration step first")
    return path.read_bytes()


def launch(
    req: LaunchRequest,
    store_dir: Path | str | None = None,
    launch_id: str | None = None,
    timeout: float = 120.0,
) -> DispatchReport:
    """Clone and dispatch one agent to every node, concurrently.

    Versions are assigned 1..len(nodes) in node order and all clones share
    one trip start. For the global-knowledge dispatcher, the current
    gkb_gsar.tsv from ``store_dir`` rides along as the briefcase payload.
    """
    payload = _gsar_payload(store_dir) if req.agent_name == AGENT_GKDA_P else None
    launch_id = launch_id or f"{req.agent_name}-{uuid.uuid4().hex[:12]}"
    trip_start = int(time.time() * 1000)
    report = DispatchReport(
        agent_name=req.agent_name, launch_id=launch_id, trip_start_ms=trip_start
    )
    clones = [
        (node, _clone(req, version, launch_id, trip_start, payload))
        for version, node in enumerate(req.nodes, start=1)
    ]
    with ThreadPoolExecutor(max_workers=len(clones)) as pool:
        futures = [
            pool.submit(_dispatch_one, node, profile, timeout)
            for node, profile in clones
        ]
        report.entries = [f.result() for f in futures]
    return report


def relaunch(
    req: LaunchRequest,
    report: DispatchReport,
    versions: Sequence[int],
    store_dir: Path | str | None = None,
    timeout: float = 120.0,
) -> list[DispatchEntry]:
    """Re-dispatch specific clone versions of an earlier launch.

    The relaunched clones reuse the original launch id and trip start, so
    their results merge into the same collection (first submission wins if
    a straggler also reports).
    """
    payload = _gsar_payload(store_dir) if req.agent_name == AGENT_GKDA_P else None
    entries = []
    for version in versions:
        if not 1 <= version <= len(req.nodes):
            raise ValueError(f"version {version} outside 1..{len(req.nodes)}")
        node = req.nodes[version - 1]
        profile = _clone(req, version, report.launch_id, report.trip_start_ms, payload)
        entries.append(_dispatch_one(node, profile, timeout))
    report.entries.extend(entries)
    return entries


def query_collection(
    rm_address: str, agent_name: str, launch_id: str, timeout: float = 30.0
) -> ProfileCollection:
    reply = request(
        rm_address,
        {"kind": "query", "agent_name": agent_name, "launch_id": launch_id},
        timeout=timeout,
    )
    profiles = {}
    for entry in reply.get("profiles", []):
        profile = profile_from_dict(entry)
        profiles[profile.agent_version] = profile
    return ProfileCollection(
        agent_name=agent_name,
        launch_id=launch_id,
        expected=int(reply.get("expected", 0)),
        profiles=profiles,
    )


def await_completion(
    rm_address: str,
    agent_name: str,
    launch_id: str,
    expected: int,
    timeout_ms: int,
    poll_ms: int = 100,
) -> ProfileCollection:
    """Poll until all clones reported or the timeout elapsed.

    A timeout is a normal return: the partial collection's
    ``missing_versions`` is the alert list of clones that never reported.
    """
    deadline = time.monotonic() + timeout_ms / 1000.0
    while True:
        collection = query_collection(rm_address, agent_name, launch_id)
        collection.expected = max(collection.expected, expected)
        if collection.complete or time.monotonic() >= deadline:
            return collection
        time.sleep(min(poll_ms / 1000.0, max(0.0, deadline - time.monotonic())))


def run_rigkga(
    collection: ProfileCollection,
    store_dir: Path | str,
    table: PartitionTable | None = None,
    force: bool = False,
) -> GlobalKnowledge:
    """Integrate collected local knowledge and persist the global tables."""
    if not collection.complete and not force:
        raise IncompleteCollection(
            f"{collection.agent_name} collection missing versions "
            f"{collection.missing_versions}"
        )
    locals_: list[LocalKnowledge] = []
    for version in sorted(collection.profiles):
        profile = collection.profiles[version]
        carried = [r.knowledge for r in profile.briefcase.results if r.knowledge]
        if not carried:
            raise IncompleteCollection(
                f"clone {version} of {collection.agent_name} carries no knowledge"
            )
        locals_.append(LocalKnowledge.from_dict(carried[-1]))
    gk = integrate(locals_)
    write_gkb(gk, store_dir, table or PartitionTable())
    return gk


class _ResultRequestHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: ResultManagerServer = self.server  # type: ignore[assignment]
        try:
            body = recv_frame(self.request)
            if body is None:
                return
            reply = server.process(load_body(body))
        except ProtocolError as exc:
            reply = {"error": "MalformedFrame", "detail": str(exc)}
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("result manager request failed")
            reply = {"error": type(exc).__name__, "detail": str(exc)}
        try:
            send_frame(self.request, dump_body(reply))
        except OSError:
            pass


class ResultManagerServer(socketserver.ThreadingTCPServer):
    """Receives finished profiles, times trips, and serves collections."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, listen_address: str, store_dir: Path | str):
        self.store_dir = Path(store_dir)
        if not self.store_dir.is_dir():
            raise FileNotFoundError(f"store dir {self.store_dir} does not exist")
        (self.store_dir / COLLECTIONS_DIR).mkdir(exist_ok=True)
        self._collections: dict[str, ProfileCollection] = {}
        self._lock = threading.Lock()
        host, port = parse_address(listen_address)
        super().__init__((host, port), _ResultRequestHandler)

    @property
    def address(self) -> str:
        return f"{self.server_address[0]}:{self.server_address[1]}"

    def process(self, body: Mapping) -> dict:
        kind = body.get("kind")
        if kind == "submit":
            return self._handle_submit(body)
        if kind == "query":
            return self._handle_query(body)
        return {"error": "MalformedFrame", "detail": f"unknown request kind {kind!r}"}

    def _collection_path(self, launch_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in launch_id)
        return self.store_dir / COLLECTIONS_DIR / f"{safe}.json"

    def _persist(self, collection: ProfileCollection) -> None:
        path = self._collection_path(collection.launch_id)
        path.write_text(
            json.dumps(collection.to_dict(), sort_keys=True, indent=1),
            encoding="utf-8",
        )

    def _handle_submit(self, body: Mapping) -> dict:
        profile_data = body.get("profile")
        if not isinstance(profile_data, Mapping):
            return {"error": "MalformedFrame", "detail": "submit without a profile"}
        profile = profile_from_dict(profile_data)
        case = profile.briefcase
        trip_time = case.trip_end_ms - case.trip_start_ms
        timed = AgentProfile(
            agent_name=profile.agent_name,
            agent_version=profile.agent_version,
            byte_code=profile.byte_code,
            itinerary=profile.itinerary,
            itin_type=profile.itin_type,
            params=profile.params,
            briefcase=Briefcase(
                trip_start_ms=case.trip_start_ms,
                trip_end_ms=case.trip_end_ms,
                trip_time_ms=trip_time,
                results=case.results,
                payload=case.payload,
            ),
        )
        launch_id = profile.params.get("launch_id", profile.agent_name)
        duplicate = False
        with self._lock:
            collection = self._collections.get(launch_id)
            if collection is None:
                collection = ProfileCollection(
                    agent_name=profile.agent_name,
                    launch_id=launch_id,
                    expected=len(profile.itinerary),
                )
                self._collections[launch_id] = collection
            if timed.agent_version in collection.profiles:
                duplicate = True
                log.warning(
                    "duplicate submission for %s version %s ignored",
                    launch_id,
                    timed.agent_version,
                )
            else:
                collection.profiles[timed.agent_version] = timed
                collection.expected = max(collection.expected, len(profile.itinerary))
                self._persist(collection)
        return {"ok": True, "trip_time_ms": trip_time, "duplicate": duplicate}

    def _handle_query(self, body: Mapping) -> dict:
        launch_id = body.get("launch_id")
        agent_name = body.get("agent_name")
        with self._lock:
            collection = None
            if launch_id:
                collection = self._collections.get(str(launch_id))
            elif agent_name:
                matches = [
                    c
                    for c in self._collections.values()
                    if c.agent_name == agent_name
                ]
                collection = matches[-1] if matches else None
            if collection is None:
                return {"profiles": [], "expected": 0}
            return {
                "profiles": [
                    profile_to_dict(collection.profiles[v])
                    for v in sorted(collection.profiles)
                ],
                "expected": collection.expected,
            }


def serve_result_manager(listen_address: str, store_dir: Path | str) -> None:
    """Run the result manager forever (Ctrl-C to stop)."""
    server = ResultManagerServer(listen_address, store_dir)
    log.info("result manager on %s storing to %s", server.address, store_dir)
    server.serve_forever()
