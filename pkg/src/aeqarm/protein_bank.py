"""Protein data bank handling: FASTA parsing, length filtering, splitting.

A bank is an ordered list of records, each a description header plus an
amino-acid sequence. Banks are filtered by raw sequence length before any
statistics are computed, and a master bank can be split into contiguous
per-site partitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "MalformedInput",
    "ProteinRecord",
    "LengthFilter",
    "parse_fasta",
    "serialize_fasta",
    "read_fasta_file",
    "write_fasta_file",
    "filter_bank",
    "split_bank",
]

FASTA_WRAP = 60


class MalformedInput(ValueError):
    """The input stream is not a well-formed FASTA protein bank."""


@dataclass(frozen=True)
class ProteinRecord:
    """One FASTA entry: identifier, full header text, amino-acid chain."""

    record_id: str
    header: str
    sequence: str


@dataclass(frozen=True)
class LengthFilter:
    """Inclusive [min_len, max_len] bounds on raw sequence length."""

    min_len: int
    max_len: int

    def __post_init__(self) -> None:
        if not 0 < self.min_len <= self.max_len:
            raise ValueError(
                f"invalid length filter [{self.min_len}, {self.max_len}]"
            )

    def admits(self, record: ProteinRecord) -> bool:
        return self.min_len <= len(record.sequence) <= self.max_len


def _finish_record(header: str, chunks: list[str]) -> ProteinRecord:
    sequence = "".join(chunks)
    if not sequence:
        raise MalformedInput(f"record {header!r} has an empty sequence")
    if not sequence.isalpha() or not sequence.isascii():
        bad = next(c for c in sequence if not (c.isalpha() and c.isascii()))
        raise MalformedInput(f"record {header!r} contains non-letter {bad!r}")
    tokens = header.split()
    if not tokens:
        raise MalformedInput("record with an empty header line")
    return ProteinRecord(record_id=tokens[0], header=header, sequence=sequence)


def parse_fasta(data: bytes | str) -> list[ProteinRecord]:
    """Parse a FASTA stream into records, preserving file order.

    Sequence lines belonging to one header are concatenated with all
    whitespace removed and upper-cased. Raises ``MalformedInput`` if the
    first non-blank line does not start with ``>`` or any record has an
    empty sequence.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    records: list[ProteinRecord] = []
    header: str | None = None
    chunks: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            if header is not None:
                records.append(_finish_record(header, chunks))
            header = line[1:].strip()
            chunks = []
        else:
            if header is None:
                raise MalformedInput("first non-blank line does not start with '>'")
            chunks.append("".join(line.split()).upper())
    if header is not None:
        records.append(_finish_record(header, chunks))
    return records


def serialize_fasta(records: Iterable[ProteinRecord], wrap: int = FASTA_WRAP) -> str:
    """Render records as FASTA text, sequences wrapped at ``wrap`` columns."""
    lines: list[str] = []
    for r in records:
        lines.append(f">{r.header}")
        for start in range(0, len(r.sequence), wrap):
            lines.append(r.sequence[start : start + wrap])
    return "\n".join(lines) + ("\n" if lines else "")


def read_fasta_file(path: Path | str) -> list[ProteinRecord]:
    return parse_fasta(Path(path).read_bytes())


def write_fasta_file(records: Iterable[ProteinRecord], path: Path | str) -> None:
    Path(path).write_text(serialize_fasta(records), encoding="utf-8")


def filter_bank(
    records: Sequence[ProteinRecord], length_filter: LengthFilter
) -> list[ProteinRecord]:
    """Keep exactly the records whose raw sequence length is admitted."""
    return [r for r in records if length_filter.admits(r)]


def split_bank(records: Sequence[ProteinRecord], n_sites: int) -> list[list[ProteinRecord]]:
    """Split a bank into ``n_sites`` contiguous chunks of ceil(D/n) records.

    The final chunk absorbs the remainder (possibly empty); concatenating
    the outputs reproduces the input order exactly.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    chunk = math.ceil(len(records) / n_sites)
    return [list(records[i * chunk : (i + 1) * chunk]) for i in range(n_sites)]
