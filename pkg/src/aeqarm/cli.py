"""Operator entry points for the ``aeqarm`` command.

Subcommands: ``serve`` (worker service), ``result-manager``, ``launch``
(dispatch one agent and await its clones), ``pipeline`` (drive all stages
from a config file), ``results`` (inspect stored collections and global
tables), and ``split`` (partition a master bank into per-site banks).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from . import coordinator, protein_bank, worker
from .coordinator import (
    GSAR_FILE,
    IncompleteCollection,
    LaunchRequest,
    MissingGKB,
    ProfileCollection,
    ResultManagerServer,
    await_completion,
    launch,
    relaunch,
    run_rigkga,
)
from .discretizer import PartitionTable, item_label
from .rulegen import read_rules_file, render_rule, render_rule_numbers
from .worker import (
    AGENT_AAFFA,
    AGENT_FMIDBGA,
    AGENT_GKDA_P,
    AGENT_LKCA_P,
    AGENT_LKGA_P,
    AGENT_NAMES,
    AGENT_PDBFA,
    AgentServer,
)

__all__ = ["PipelineConfig", "load_config", "save_config", "main"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2
EXIT_DISPATCH = 3

STORE_ENV = "AEQARM_STORE"
DEFAULT_STORE = "store"

PIPELINE_STAGES = (AGENT_PDBFA, AGENT_AAFFA, AGENT_FMIDBGA, AGENT_LKGA_P, AGENT_LKCA_P)


@dataclass
class PipelineConfig:
    """Everything a full pipeline run needs, mirroring the usual defaults."""

    nodes: tuple[str, ...] = ()
    central: str = "127.0.0.1:7000"
    data_dirs: tuple[str, ...] = ()
    store_dir: str = DEFAULT_STORE
    min_len: int = 50
    max_len: int = 400
    max_freq: int = 400
    min_sup: Fraction = Fraction(20)
    min_conf: Fraction = Fraction(50)
    timeout_ms: int = 60000

    def __post_init__(self) -> None:
        if not 0 < self.min_sup <= 100 or not 0 < self.min_conf <= 100:
            raise ValueError("thresholds must be in (0, 100]")
        if self.min_len > self.max_len:
            raise ValueError("min_len must be <= max_len")


_TUPLE_KEYS = {"nodes", "data_dirs"}
_INT_KEYS = {"min_len", "max_len", "max_freq", "timeout_ms"}
_FRACTION_KEYS = {"min_sup", "min_conf"}


def load_config(path: Path | str) -> PipelineConfig:
    """Parse the flat ``key = value`` config file."""
    values: dict = {}
    known = {f.name for f in fields(PipelineConfig)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _TUPLE_KEYS:
            values[key] = tuple(tok.strip() for tok in value.split(",") if tok.strip())
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FRACTION_KEYS:
            values[key] = Fraction(value)
        else:
            values[key] = value
    if not values.get("nodes"):
        raise ValueError(f"{path}: config must list at least one node")
    return PipelineConfig(**values)


def save_config(config: PipelineConfig, path: Path | str) -> None:
    lines = []
    for f in fields(PipelineConfig):
        value = getattr(config, f.name)
        if f.name in _TUPLE_KEYS:
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_store(flag_value: str | None, config_value: str | None = None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(STORE_ENV)
    if env:
        return Path(env)
    return Path(config_value or DEFAULT_STORE)


def _stage_params(agent: str, config: PipelineConfig) -> dict[str, str]:
    if agent == AGENT_PDBFA:
        return {"min_len": str(config.min_len), "max_len": str(config.max_len)}
    if agent == AGENT_FMIDBGA:
        return {"max_freq": str(config.max_freq)}
    if agent == AGENT_LKGA_P:
        return {"min_sup": str(config.min_sup), "min_conf": str(config.min_conf)}
    return {}


def _print_report(report) -> None:
    for entry in report.entries:
        status = "ok" if entry.ok else "FAILED"
        print(f"  v{entry.agent_version} {entry.node}: {status} {entry.detail}")


def _print_collection(collection: ProfileCollection) -> None:
    for version in sorted(collection.profiles):
        profile = collection.profiles[version]
        case = profile.briefcase
        for result in case.results:
            parts = ", ".join(
                f"{k}={v}" for k, v in sorted(result.summary.items()) if k != "detail"
            )
            print(
                f"  v{version} {result.site}: cpu {result.cpu_time_ms} ms, "
                f"trip {case.trip_time_ms} ms [{parts}]"
            )
    if collection.missing_versions:
        print(f"  missing clones: {collection.missing_versions}")


def _run_stage(
    agent: str,
    nodes: tuple[str, ...],
    rm_address: str,
    params: dict[str, str],
    timeout_ms: int,
    store_dir: Path | None = None,
) -> tuple[ProfileCollection | None, int]:
    """Launch one agent over all nodes and await its clones."""
    req = LaunchRequest(
        agent_name=agent,
        nodes=nodes,
        params=params,
        result_manager_address=rm_address,
    )
    try:
        report = launch(req, store_dir=store_dir)
    except MissingGKB as exc:
        print(f"stage {agent}: {exc}", file=sys.stderr)
        return None, EXIT_DISPATCH
    print(f"stage {agent} (launch {report.launch_id}):")
    _print_report(report)
    if report.ok_count == 0:
        return None, EXIT_DISPATCH
    collection = await_completion(
        rm_address, agent, report.launch_id, expected=len(nodes), timeout_ms=timeout_ms
    )
    _print_collection(collection)
    if not collection.complete or not report.all_ok:
        return collection, EXIT_PARTIAL
    return collection, EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        worker.serve_aee(args.listen, args.data_dir, site_name=args.site_name)
    except (OSError, FileNotFoundError) as exc:
        print(f"serve failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_result_manager(args: argparse.Namespace) -> int:
    store = resolve_store(args.store_dir)
    try:
        coordinator.serve_result_manager(args.listen, store)
    except (OSError, FileNotFoundError) as exc:
        print(f"result manager failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_launch(args: argparse.Namespace) -> int:
    nodes = tuple(tok.strip() for tok in args.nodes.split(",") if tok.strip())
    if not nodes:
        print("no nodes given", file=sys.stderr)
        return EXIT_DISPATCH
    store = resolve_store(args.store_dir)
    config = PipelineConfig(
        nodes=nodes,
        min_len=args.min_len,
        max_len=args.max_len,
        max_freq=args.max_freq,
        min_sup=Fraction(args.min_sup),
        min_conf=Fraction(args.min_conf),
    )
    params = _stage_params(args.agent, config)
    req = LaunchRequest(
        agent_name=args.agent,
        nodes=nodes,
        params=params,
        result_manager_address=args.rm,
    )
    try:
        report = launch(req, store_dir=store)
    except MissingGKB as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DISPATCH
    print(f"launch {report.launch_id}:")
    _print_report(report)
    if report.ok_count == 0:
        return EXIT_DISPATCH
    collection = await_completion(
        args.rm, args.agent, report.launch_id, len(nodes), args.timeout_ms
    )
    if not collection.complete and args.relaunch_missing:
        print(f"relaunching missing clones {collection.missing_versions}")
        relaunch(req, report, collection.missing_versions, store_dir=store)
        collection = await_completion(
            args.rm, args.agent, report.launch_id, len(nodes), args.timeout_ms
        )
    _print_collection(collection)
    if not collection.complete:
        return EXIT_PARTIAL
    if args.agent == AGENT_LKCA_P:
        gk = run_rigkga(collection, store, PartitionTable(max_freq=args.max_freq))
        print(f"integrated {len(gk.gsar)} globally strong rules into {store}")
    return EXIT_OK


def _spawn_local(config: PipelineConfig, store: Path) -> list:
    if len(config.data_dirs) != len(config.nodes):
        raise ValueError("spawn-local needs one data_dir per node")
    servers: list = []
    store.mkdir(parents=True, exist_ok=True)
    try:
        servers.append(ResultManagerServer(config.central, store))
        for node, data_dir in zip(config.nodes, config.data_dirs):
            servers.append(AgentServer(node, data_dir))
    except Exception:
        for server in servers:
            server.server_close()
        raise
    for server in servers:
        threading.Thread(target=server.serve_forever, daemon=True).start()
    return servers


def cmd_pipeline(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    store = resolve_store(args.store_dir, config.store_dir)
    servers: list = []
    try:
        try:
            if args.spawn_local:
                servers = _spawn_local(config, store)
        except (OSError, ValueError, FileNotFoundError) as exc:
            print(f"spawn-local failed: {exc}", file=sys.stderr)
            return EXIT_ERROR
        table = PartitionTable(max_freq=config.max_freq)
        lkca_collection: ProfileCollection | None = None
        for agent in PIPELINE_STAGES:
            collection, code = _run_stage(
                agent,
                config.nodes,
                config.central,
                _stage_params(agent, config),
                config.timeout_ms,
            )
            if code == EXIT_DISPATCH:
                return EXIT_DISPATCH
            if code == EXIT_PARTIAL and not args.force_partial:
                print(f"aborting: stage {agent} incomplete", file=sys.stderr)
                return EXIT_PARTIAL
            if agent == AGENT_LKCA_P:
                lkca_collection = collection

        assert lkca_collection is not None
        try:
            gk = run_rigkga(lkca_collection, store, table, force=args.force_partial)
        except IncompleteCollection as exc:
            print(f"integration failed: {exc}", file=sys.stderr)
            return EXIT_PARTIAL
        print(f"integration: {len(gk.gsar)} globally strong rules")

        _, code = _run_stage(
            AGENT_GKDA_P,
            config.nodes,
            config.central,
            {},
            config.timeout_ms,
            store_dir=store,
        )
        if code == EXIT_DISPATCH:
            return EXIT_DISPATCH
        if code == EXIT_PARTIAL and not args.force_partial:
            print("aborting: global dispatch incomplete", file=sys.stderr)
            return EXIT_PARTIAL

        print()
        _print_gsar_table(store / GSAR_FILE, table, labels=True)
        return EXIT_OK
    finally:
        for server in servers:
            server.shutdown()
            server.server_close()


def _print_gsar_table(path: Path, table: PartitionTable, labels: bool) -> None:
    if not path.exists():
        print("no globally strong rules stored")
        return
    rules = read_rules_file(path)
    print(f"Globally strong association rules ({len(rules)}):")
    current = None
    for rule in rules:
        if rule.itemset != current:
            current = rule.itemset
            if labels:
                group = "{" + " ".join(item_label(i, table) for i in current) + "}"
            else:
                group = "[" + ", ".join(str(i) for i in current) + "]"
            print(f"[itemset {group}]")
        text = render_rule(rule, table) if labels else render_rule_numbers(rule)
        print(f"{text}  {rule.site}")


def cmd_results(args: argparse.Namespace) -> int:
    store = resolve_store(args.store_dir)
    collections_dir = store / coordinator.COLLECTIONS_DIR
    paths = sorted(collections_dir.glob("*.json")) if collections_dir.is_dir() else []
    if args.launch_id:
        paths = [p for p in paths if p.stem == args.launch_id]
        if not paths:
            print(f"no collection {args.launch_id!r} in {store}", file=sys.stderr)
            return EXIT_ERROR
    if not paths and not (store / GSAR_FILE).exists():
        print("no results stored")
        return EXIT_OK
    for path in paths:
        collection = ProfileCollection.from_dict(
            json.loads(path.read_text(encoding="utf-8"))
        )
        print(
            f"{collection.launch_id}: {collection.agent_name} "
            f"{len(collection.profiles)}/{collection.expected} clones"
        )
        _print_collection(collection)
    table = PartitionTable(max_freq=args.max_freq)
    _print_gsar_table(store / GSAR_FILE, table, labels=args.labels)
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    out_dirs = [Path(tok.strip()) for tok in args.out.split(",") if tok.strip()]
    if not out_dirs:
        print("no output directories given", file=sys.stderr)
        return EXIT_ERROR
    try:
        records = protein_bank.read_fasta_file(args.input)
    except (OSError, protein_bank.MalformedInput) as exc:
        print(f"cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    parts = protein_bank.split_bank(records, len(out_dirs))
    for part, out_dir in zip(parts, out_dirs):
        out_dir.mkdir(parents=True, exist_ok=True)
        protein_bank.write_fasta_file(part, out_dir / worker.PDB_FILE)
        print(f"{out_dir / worker.PDB_FILE}: {len(part)} records")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aeqarm",
        description="Distributed quantitative association-rule mining over protein banks",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run a worker-site agent service")
    p.add_argument("--listen", required=True, help="host:port to listen on")
    p.add_argument("--data-dir", required=True, help="site data directory")
    p.add_argument("--site-name", default=None, help="site identity override")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("result-manager", help="run the central result manager")
    p.add_argument("--listen", required=True, help="host:port to listen on")
    p.add_argument("--store-dir", default=None, help="central store directory")
    p.set_defaults(func=cmd_result_manager)

    p = sub.add_parser("launch", help="dispatch one agent to a set of nodes")
    p.add_argument("agent", choices=AGENT_NAMES, help="agent to launch")
    p.add_argument("--nodes", required=True, help="comma-separated host:port list")
    p.add_argument("--rm", required=True, help="result manager host:port")
    p.add_argument("--store-dir", default=None, help="central store directory")
    p.add_argument("--min-len", type=int, default=50)
    p.add_argument("--max-len", type=int, default=400)
    p.add_argument("--max-freq", type=int, default=400)
    p.add_argument("--min-sup", default="20", help="minimum support percent")
    p.add_argument("--min-conf", default="50", help="minimum confidence percent")
    p.add_argument("--timeout-ms", type=int, default=60000)
    p.add_argument(
        "--relaunch-missing",
        action="store_true",
        help="re-dispatch clones that missed the completion timeout, once",
    )
    p.set_defaults(func=cmd_launch)

    p = sub.add_parser("pipeline", help="run all stages from a config file")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--store-dir", default=None, help="central store directory")
    p.add_argument(
        "--spawn-local",
        action="store_true",
        help="start workers and result manager in-process (test mode)",
    )
    p.add_argument(
        "--force-partial",
        action="store_true",
        help="continue past stages with missing clones",
    )
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("results", help="show stored collections and global tables")
    p.add_argument("--store-dir", default=None, help="central store directory")
    p.add_argument("--launch-id", default=None, help="show one collection only")
    p.add_argument("--labels", action="store_true", help="amino-acid range labels")
    p.add_argument("--max-freq", type=int, default=400)
    p.set_defaults(func=cmd_results)

    p = sub.add_parser("split", help="split a master bank into per-site banks")
    p.add_argument("--input", required=True, help="master FASTA file")
    p.add_argument("--out", required=True, help="comma-separated site directories")
    p.set_defaults(func=cmd_split)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
