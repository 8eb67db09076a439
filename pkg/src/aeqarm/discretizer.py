"""Amino-acid frequency counting and interval discretization.

Each record's 20 amino-acid frequencies are mapped into a fixed table of
15 frequency intervals per amino acid, giving 300 possible items. A record
therefore becomes a row of 300 booleans with exactly 20 bits set, or
equivalently a transaction of 20 ascending item numbers (one per amino
acid, item ``i`` belonging to block ``(i-1)//15``).
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .protein_bank import ProteinRecord

__all__ = [
    "AMINO_ACIDS",
    "N_PARTITIONS",
    "ITEM_COUNT",
    "OutOfRange",
    "PartitionTable",
    "FrequencyVector",
    "Transaction",
    "count_amino_acids",
    "partition_of",
    "item_number",
    "item_label",
    "parse_item_label",
    "to_boolean_row",
    "to_transaction",
    "write_aaf_file",
    "read_aaf_file",
    "write_bdb_file",
    "write_idb_file",
    "read_idb_file",
]

# Canonical single-letter codes in ascending alphabetical order; the
# position of a code here is its block index for item numbering.
AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"

N_PARTITIONS = 15
ITEM_COUNT = len(AMINO_ACIDS) * N_PARTITIONS

# Seven width-3 intervals, seven width-10 intervals, then the open tail
# interval capped at max_freq.
_NARROW = tuple((lo, lo + 2) for lo in range(0, 21, 3))
_WIDE = tuple((lo, lo + 9) for lo in range(21, 91, 10))
_TAIL_LO = 91


class OutOfRange(ValueError):
    """A frequency exceeds the partition table's maximum."""


@dataclass(frozen=True)
class PartitionTable:
    """The fixed 15-interval discretization, parameterized only by max_freq."""

    max_freq: int = 400

    def __post_init__(self) -> None:
        if self.max_freq < _TAIL_LO:
            raise ValueError(f"max_freq must be >= {_TAIL_LO}, got {self.max_freq}")

    @property
    def bounds(self) -> tuple[tuple[int, int], ...]:
        """Inclusive (lo, hi) pairs for partitions 1..15."""
        return _NARROW + _WIDE + ((_TAIL_LO, self.max_freq),)


@dataclass(frozen=True)
class FrequencyVector:
    """Counts of the 20 canonical amino acids for one record."""

    record_id: str
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != len(AMINO_ACIDS):
            raise ValueError(f"expected {len(AMINO_ACIDS)} counts, got {len(self.counts)}")


@dataclass(frozen=True)
class Transaction:
    """The 20 ascending item numbers for one record."""

    record_id: str
    items: tuple[int, ...]


def count_amino_acids(record: ProteinRecord) -> FrequencyVector:
    """Tally canonical letters in the sequence; other letters are ignored."""
    tally = Counter(record.sequence)
    return FrequencyVector(
        record_id=record.record_id,
        counts=tuple(tally.get(code, 0) for code in AMINO_ACIDS),
    )


def partition_of(freq: int, table: PartitionTable) -> int:
    """1-based index of the unique interval containing ``freq``."""
    if freq < 0:
        raise OutOfRange(f"negative frequency {freq}")
    if freq > table.max_freq:
        raise OutOfRange(f"frequency {freq} exceeds max_freq {table.max_freq}")
    if freq >= _TAIL_LO:
        return N_PARTITIONS
    if freq > 20:
        return 8 + (freq - 21) // 10
    return 1 + freq // 3


def item_number(code: str, partition: int) -> int:
    """Item number for (amino acid, partition): block base plus offset."""
    index = AMINO_ACIDS.index(code)
    if not 1 <= partition <= N_PARTITIONS:
        raise ValueError(f"partition {partition} out of 1..{N_PARTITIONS}")
    return index * N_PARTITIONS + partition


def item_label(item: int, table: PartitionTable) -> str:
    """Human-readable ``<X:lo..hi>`` label for an item number."""
    if not 1 <= item <= ITEM_COUNT:
        raise ValueError(f"item {item} out of 1..{ITEM_COUNT}")
    index, offset = divmod(item - 1, N_PARTITIONS)
    lo, hi = table.bounds[offset]
    return f"<{AMINO_ACIDS[index]}:{lo}..{hi}>"


_LABEL_RE = re.compile(r"<([A-Z]):(\d+)\.\.(\d+)>")


def parse_item_label(label: str, table: PartitionTable) -> int:
    """Inverse of :func:`item_label`."""
    m = _LABEL_RE.fullmatch(label)
    if not m:
        raise ValueError(f"bad item label {label!r}")
    code, lo, hi = m.group(1), int(m.group(2)), int(m.group(3))
    if code not in AMINO_ACIDS:
        raise ValueError(f"unknown amino acid {code!r} in {label!r}")
    try:
        partition = table.bounds.index((lo, hi)) + 1
    except ValueError:
        raise ValueError(f"no partition {lo}..{hi} in table") from None
    return item_number(code, partition)


def to_boolean_row(vector: FrequencyVector, table: PartitionTable) -> str:
    """300-character '0'/'1' row with exactly one bit set per amino acid."""
    bits = ["0"] * ITEM_COUNT
    for index, freq in enumerate(vector.counts):
        item = index * N_PARTITIONS + partition_of(freq, table)
        bits[item - 1] = "1"
    return "".join(bits)


def to_transaction(vector: FrequencyVector, table: PartitionTable) -> Transaction:
    """Ascending item numbers of the set bits of the boolean row."""
    items = tuple(
        index * N_PARTITIONS + partition_of(freq, table)
        for index, freq in enumerate(vector.counts)
    )
    return Transaction(record_id=vector.record_id, items=items)


def write_aaf_file(vectors: Iterable[FrequencyVector], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["record_id", *AMINO_ACIDS])
        for v in vectors:
            writer.writerow([v.record_id, *v.counts])


def read_aaf_file(path: Path | str) -> list[FrequencyVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["record_id", *AMINO_ACIDS]:
            raise ValueError(f"unexpected AAF header in {path}")
        return [
            FrequencyVector(row[0], tuple(int(c) for c in row[1:]))
            for row in reader
        ]


def write_bdb_file(
    vectors: Iterable[FrequencyVector], table: PartitionTable, path: Path | str
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(f"{v.record_id} {to_boolean_row(v, table)}\n")


def write_idb_file(transactions: Iterable[Transaction], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in transactions:
            fh.write(" ".join(str(i) for i in t.items) + "\n")


def read_idb_file(path: Path | str) -> list[tuple[int, ...]]:
    """Bare item tuples; row order matches the AAF file positionally."""
    rows: list[tuple[int, ...]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(tuple(int(tok) for tok in line.split()))
    return rows
