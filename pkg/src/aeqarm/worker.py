"""Worker-site agent execution service and the six agent behaviours.

The service listens for framed agent profiles, persists the carried
byte-code blob, dispatches on the agent name to a locally registered
behaviour (shipped code is never executed), appends the site's result to
the briefcase, and submits the updated profile to the result manager named
in the profile's params. Execution against a site's data directory is
serialized by a per-site lock; agents form a pipeline over the site files:

    pdb.fasta -> fpdb.fasta -> aaf.csv -> bdb.txt/idb.txt
              -> lkb_fi.tsv/lkb_rules.tsv -> (collect) -> gsar_received.tsv
"""

from __future__ import annotations

import hashlib
import logging
import socketserver
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping

from . import discretizer, miner, protein_bank, rulegen
from .discretizer import PartitionTable
from .knowledge import LocalKnowledge
from .protocol import (
    ITIN_PARALLEL,
    AgentProfile,
    ProtocolError,
    SiteResult,
    dump_body,
    load_body,
    parse_address,
    profile_from_dict,
    profile_to_dict,
    recv_frame,
    request,
    send_frame,
)

__all__ = [
    "AgentError",
    "UnknownAgent",
    "MissingInput",
    "MissingPayload",
    "UnsupportedItinerary",
    "SiteContext",
    "AGENT_PDBFA",
    "AGENT_AAFFA",
    "AGENT_FMIDBGA",
    "AGENT_LKGA_P",
    "AGENT_LKCA_P",
    "AGENT_GKDA_P",
    "AGENT_NAMES",
    "run_pdbfa",
    "run_aaffa",
    "run_fmidbga",
    "run_lkga_p",
    "run_lkca_p",
    "run_gkda_p",
    "default_registry",
    "AgentServer",
    "serve_aee",
    "PDB_FILE",
    "FPDB_FILE",
    "AAF_FILE",
    "BDB_FILE",
    "IDB_FILE",
    "FI_FILE",
    "RULES_FILE",
    "GSAR_RECEIVED_FILE",
]

log = logging.getLogger(__name__)

PDB_FILE = "pdb.fasta"
FPDB_FILE = "fpdb.fasta"
AAF_FILE = "aaf.csv"
BDB_FILE = "bdb.txt"
IDB_FILE = "idb.txt"
FI_FILE = "lkb_fi.tsv"
RULES_FILE = "lkb_rules.tsv"
GSAR_RECEIVED_FILE = "gsar_received.tsv"
AGENTS_DIR = "agents"

AGENT_PDBFA = "PDBFA"
AGENT_AAFFA = "AAFFA"
AGENT_FMIDBGA = "FMIDBGA"
AGENT_LKGA_P = "LKGA_P"
AGENT_LKCA_P = "LKCA_P"
AGENT_GKDA_P = "GKDA_P"
AGENT_NAMES = (
    AGENT_PDBFA,
    AGENT_AAFFA,
    AGENT_FMIDBGA,
    AGENT_LKGA_P,
    AGENT_LKCA_P,
    AGENT_GKDA_P,
)


class AgentError(Exception):
    """Base class for agent-level failures; the code is the class name."""

    @property
    def code(self) -> str:
        return type(self).__name__


class UnknownAgent(AgentError):
    pass


class MissingInput(AgentError):
    pass


class MissingPayload(AgentError):
    pass


class UnsupportedItinerary(AgentError):
    pass


@dataclass(frozen=True)
class SiteContext:
    """Where an agent body runs: the site's data directory and identity."""

    data_dir: Path
    site: str


def _now_ms() -> int:
    return int(time.time() * 1000)


def _require(ctx: SiteContext, filename: str) -> Path:
    path = ctx.data_dir / filename
    if not path.exists():
        raise MissingInput(f"{filename} not found in {ctx.data_dir}")
    return path


def _elapsed_ms(t0: float) -> int:
    return int((time.monotonic() - t0) * 1000)


def run_pdbfa(ctx: SiteContext, params: Mapping[str, str]) -> SiteResult:
    """Filter the site's protein bank by sequence length into fpdb.fasta."""
    t0 = time.monotonic()
    source = _require(ctx, PDB_FILE)
    length_filter = protein_bank.LengthFilter(
        min_len=int(params.get("min_len", 50)),
        max_len=int(params.get("max_len", 400)),
    )
    records = protein_bank.read_fasta_file(source)
    kept = protein_bank.filter_bank(records, length_filter)
    protein_bank.write_fasta_file(kept, ctx.data_dir / FPDB_FILE)
    summary = {"records_in": len(records), "records_out": len(kept)}
    return SiteResult(site=ctx.site, cpu_time_ms=_elapsed_ms(t0), summary=summary)


def run_aaffa(ctx: SiteContext, params: Mapping[str, str]) -> SiteResult:
    """Count amino-acid frequencies for every filtered record into aaf.csv."""
    t0 = time.monotonic()
    source = _require(ctx, FPDB_FILE)
    records = protein_bank.read_fasta_file(source)
    vectors = [discretizer.count_amino_acids(r) for r in records]
    discretizer.write_aaf_file(vectors, ctx.data_dir / AAF_FILE)
    return SiteResult(
        site=ctx.site,
        cpu_time_ms=_elapsed_ms(t0),
        summary={"records": len(vectors)},
    )


def run_fmidbga(ctx: SiteContext, params: Mapping[str, str]) -> SiteResult:
    """Discretize frequencies into the boolean bank and item transactions."""
    t0 = time.monotonic()
    source = _require(ctx, AAF_FILE)
    table = PartitionTable(max_freq=int(params.get("max_freq", 400)))
    vectors = discretizer.read_aaf_file(source)
    discretizer.write_bdb_file(vectors, table, ctx.data_dir / BDB_FILE)
    transactions = [discretizer.to_transaction(v, table) for v in vectors]
    discretizer.write_idb_file(transactions, ctx.data_dir / IDB_FILE)
    return SiteResult(
        site=ctx.site,
        cpu_time_ms=_elapsed_ms(t0),
        summary={"rows": len(vectors), "max_freq": table.max_freq},
    )


def run_lkga_p(ctx: SiteContext, params: Mapping[str, str]) -> SiteResult:
    """Mine frequent itemsets and locally strong rules from the item bank."""
    t0 = time.monotonic()
    source = _require(ctx, IDB_FILE)
    min_sup = Fraction(params.get("min_sup", "20"))
    min_conf = Fraction(params.get("min_conf", "50"))
    transactions = discretizer.read_idb_file(source)
    fis = miner.apriori(transactions, min_sup)
    rules = rulegen.generate_rules(fis, min_conf, site=ctx.site)
    miner.write_fi_file(fis, ctx.data_dir / FI_FILE)
    rulegen.write_rules_file(rules, ctx.data_dir / RULES_FILE)
    summary: dict = {"d": fis.d, "rule_count": len(rules)}
    for k in sorted(fis.levels):
        summary[f"fi_count_{k}"] = len(fis.levels[k])
    return SiteResult(site=ctx.site, cpu_time_ms=_elapsed_ms(t0), summary=summary)


def run_lkca_p(ctx: SiteContext, params: Mapping[str, str]) -> SiteResult:
    """Collect the site's mined knowledge into the briefcase."""
    t0 = time.monotonic()
    fi_path = _require(ctx, FI_FILE)
    rules_path = _require(ctx, RULES_FILE)
    idb_path = _require(ctx, IDB_FILE)
    d = len(discretizer.read_idb_file(idb_path))
    fis = miner.read_fi_file(fi_path, d=d)
    rules = rulegen.read_rules_file(rules_path)
    local = LocalKnowledge(site=ctx.site, fis=fis, rules=rules, d=d)
    summary = {
        "d": d,
        "rule_count": len(rules),
        "fi_total": sum(len(level) for level in fis.levels.values()),
    }
    return SiteResult(
        site=ctx.site,
        cpu_time_ms=_elapsed_ms(t0),
        summary=summary,
        knowledge=local.to_dict(),
    )


def run_gkda_p(
    ctx: SiteContext, params: Mapping[str, str], payload: bytes | None
) -> SiteResult:
    """Store the delivered global rules and diff them against local ones."""
    t0 = time.monotonic()
    if not payload:
        raise MissingPayload("no global-rule payload in briefcase")
    target = ctx.data_dir / GSAR_RECEIVED_FILE
    target.write_bytes(payload)
    received = rulegen.read_rules_file(target)
    summary: dict = {
        "rules_received": len(received),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    rules_path = ctx.data_dir / RULES_FILE
    if rules_path.exists():
        local_keys = {
            (r.antecedent, r.consequent) for r in rulegen.read_rules_file(rules_path)
        }
        global_here = [
            r
            for r in received
            if r.site == ctx.site and (r.antecedent, r.consequent) in local_keys
        ]
        summary["local_rules_global"] = len(global_here)
    return SiteResult(site=ctx.site, cpu_time_ms=_elapsed_ms(t0), summary=summary)


AgentBehaviour = Callable[[SiteContext, Mapping[str, str], "bytes | None"], SiteResult]


def default_registry() -> dict[str, AgentBehaviour]:
    """Name-keyed capability dispatch for the six agents."""
    return {
        AGENT_PDBFA: lambda ctx, params, payload: run_pdbfa(ctx, params),
        AGENT_AAFFA: lambda ctx, params, payload: run_aaffa(ctx, params),
        AGENT_FMIDBGA: lambda ctx, params, payload: run_fmidbga(ctx, params),
        AGENT_LKGA_P: lambda ctx, params, payload: run_lkga_p(ctx, params),
        AGENT_LKCA_P: lambda ctx, params, payload: run_lkca_p(ctx, params),
        AGENT_GKDA_P: run_gkda_p,
    }


class _AgentRequestHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: AgentServer = self.server  # type: ignore[assignment]
        try:
            body = recv_frame(self.request)
        except ProtocolError as exc:
            self._reply_error("MalformedFrame", str(exc))
            return
        if body is None:
            return
        try:
            profile = profile_from_dict(load_body(body))
        except ProtocolError as exc:
            self._reply_error("MalformedFrame", str(exc))
            return
        try:
            reply = server.execute_profile(profile)
        except AgentError as exc:
            self._reply_error(exc.code, str(exc))
            return
        try:
            send_frame(self.request, dump_body(reply))
        except OSError:
            log.warning("dispatcher went away before the reply was sent")

    def _reply_error(self, code: str, detail: str) -> None:
        try:
            send_frame(self.request, dump_body({"error": code, "detail": detail}))
        except OSError:
            pass


class AgentServer(socketserver.ThreadingTCPServer):
    """The worker-site service: receives, executes, and reports agents."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        listen_address: str,
        data_dir: Path | str,
        registry: Mapping[str, AgentBehaviour] | None = None,
        site_name: str | None = None,
    ):
        self.data_dir = Path(data_dir)
        if not self.data_dir.is_dir():
            raise FileNotFoundError(f"data dir {self.data_dir} does not exist")
        (self.data_dir / AGENTS_DIR).mkdir(exist_ok=True)
        self.registry = dict(registry) if registry is not None else default_registry()
        self._site_lock = threading.Lock()
        host, port = parse_address(listen_address)
        super().__init__((host, port), _AgentRequestHandler)
        self.site_name = site_name or f"{host}:{self.server_address[1]}"

    @property
    def address(self) -> str:
        return f"{self.server_address[0]}:{self.server_address[1]}"

    def _site_for(self, profile: AgentProfile) -> str:
        if 1 <= profile.agent_version <= len(profile.itinerary):
            return profile.itinerary[profile.agent_version - 1]
        return self.site_name

    def execute_profile(self, profile: AgentProfile) -> dict:
        """Run one agent against this site and report the updated profile."""
        if profile.itin_type != ITIN_PARALLEL:
            raise UnsupportedItinerary(
                f"itinerary type {profile.itin_type!r} is not supported"
            )
        behaviour = self.registry.get(profile.agent_name)
        if behaviour is None:
            raise UnknownAgent(f"no agent registered under {profile.agent_name!r}")

        blob_path = self.data_dir / AGENTS_DIR / f"{profile.agent_name}.bin"
        blob_path.write_bytes(profile.byte_code)

        ctx = SiteContext(data_dir=self.data_dir, site=self._site_for(profile))
        with self._site_lock:
            t0 = time.monotonic()
            try:
                result = behaviour(ctx, profile.params, profile.briefcase.payload)
            except AgentError as exc:
                result = SiteResult(
                    site=ctx.site,
                    cpu_time_ms=_elapsed_ms(t0),
                    summary={"error": exc.code, "detail": str(exc)},
                )
            except Exception as exc:
                log.exception("agent %s failed at %s", profile.agent_name, ctx.site)
                result = SiteResult(
                    site=ctx.site,
                    cpu_time_ms=_elapsed_ms(t0),
                    summary={"error": type(exc).__name__, "detail": str(exc)},
                )
        trip_end = max(_now_ms(), profile.briefcase.trip_start_ms)
        updated = profile.with_result(result, trip_end_ms=trip_end)

        reply = {
            "ok": "error" not in result.summary,
            "agent_name": profile.agent_name,
            "agent_version": profile.agent_version,
            "site": result.site,
            "cpu_time_ms": result.cpu_time_ms,
            "summary": result.summary,
        }
        manager = profile.params.get("result_manager")
        if manager:
            try:
                request(manager, {"kind": "submit", "profile": profile_to_dict(updated)})
            except (OSError, ProtocolError) as exc:
                log.warning("could not submit results to %s: %s", manager, exc)
                reply["submit_error"] = str(exc)
        return reply


def serve_aee(
    listen_address: str,
    data_dir: Path | str,
    registry: Mapping[str, AgentBehaviour] | None = None,
    site_name: str | None = None,
) -> None:
    """Run the worker service forever (Ctrl-C to stop)."""
    server = AgentServer(listen_address, data_dir, registry, site_name)
    log.info("agent execution environment on %s serving %s", server.address, data_dir)
    server.serve_forever()
