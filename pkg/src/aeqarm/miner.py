"""Apriori frequent-itemset mining with exact rational support thresholds.

Transactions are small sets of positive item numbers (at most 300 in this
domain), so support counting uses integer bitmasks: a candidate is
contained in a transaction iff ``cand & tx == cand``. The minimum-support
comparison is performed with exact rational arithmetic; no floats are
involved in thresholding.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "EmptyInput",
    "Itemset",
    "FrequentItemsetLevels",
    "percent_fraction",
    "support_count",
    "candidate_gen",
    "apriori",
    "format_itemset",
    "parse_itemset",
    "write_fi_file",
    "read_fi_file",
]

Itemset = tuple[int, ...]


class EmptyInput(ValueError):
    """Mining was requested over zero transactions."""


def percent_fraction(value: int | float | str | Fraction) -> Fraction:
    """Normalize a percentage into an exact Fraction in (0, 100]."""
    frac = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    if not 0 < frac <= 100:
        raise ValueError(f"percentage {value!r} outside (0, 100]")
    return frac


@dataclass
class FrequentItemsetLevels:
    """Per-size lists of frequent itemsets with their exact support counts."""

    levels: dict[int, list[tuple[Itemset, int]]] = field(default_factory=dict)
    d: int = 0

    def counts(self) -> dict[Itemset, int]:
        return {itemset: count for level in self.levels.values() for itemset, count in level}

    def itemsets_at(self, k: int) -> list[Itemset]:
        return [itemset for itemset, _ in self.levels.get(k, [])]

    def max_k(self) -> int:
        return max(self.levels, default=0)


def _items_of(transaction) -> Iterable[int]:
    return getattr(transaction, "items", transaction)


def _mask(items: Iterable[int]) -> int:
    mask = 0
    for item in items:
        if item < 1:
            raise ValueError(f"item numbers must be >= 1, got {item}")
        mask |= 1 << item
    return mask


def support_count(candidates: Sequence[Itemset], transactions: Sequence) -> list[int]:
    """Number of transactions containing each candidate (subset test)."""
    tx_masks = [_mask(_items_of(t)) for t in transactions]
    cand_masks = [_mask(c) for c in candidates]
    counts = [0] * len(candidates)
    for tx in tx_masks:
        for i, cand in enumerate(cand_masks):
            if cand & tx == cand:
                counts[i] += 1
    return counts


def candidate_gen(prev_level: Sequence[Itemset]) -> list[Itemset]:
    """Self-join itemsets sharing their first k-1 items, then prune.

    Input must be canonical (ascending items) and sorted lexicographically;
    output is sorted lexicographically. A candidate survives pruning only
    if every k-subset of it appears in ``prev_level``.
    """
    prev_set = set(prev_level)
    out: list[Itemset] = []
    n = len(prev_level)
    for i in range(n):
        head = prev_level[i][:-1]
        for j in range(i + 1, n):
            if prev_level[j][:-1] != head:
                break
            candidate = prev_level[i] + (prev_level[j][-1],)
            if all(
                candidate[:cut] + candidate[cut + 1 :] in prev_set
                for cut in range(len(candidate))
            ):
                out.append(candidate)
    return out


def apriori(
    transactions: Sequence, min_sup_percent: int | float | str | Fraction
) -> FrequentItemsetLevels:
    """Level-wise mining of all itemsets with support >= min_sup_percent.

    ``transactions`` may be Transaction objects or bare item iterables.
    An itemset qualifies iff count/d >= min_sup_percent/100 exactly;
    iteration stops at the first empty level. Itemsets within each level
    are ordered lexicographically, so identical input gives identical
    output.
    """
    d = len(transactions)
    if d == 0:
        raise EmptyInput("no transactions to mine")
    min_sup = percent_fraction(min_sup_percent)

    def frequent(count: int) -> bool:
        return 100 * count >= min_sup * d

    item_counts: Counter[int] = Counter()
    tx_sets = []
    for t in transactions:
        items = set(_items_of(t))
        tx_sets.append(items)
        item_counts.update(items)

    levels: dict[int, list[tuple[Itemset, int]]] = {}
    level1 = [
        ((item,), count)
        for item, count in sorted(item_counts.items())
        if frequent(count)
    ]
    if not level1:
        return FrequentItemsetLevels(levels={}, d=d)
    levels[1] = level1

    k = 1
    while True:
        candidates = candidate_gen([itemset for itemset, _ in levels[k]])
        if not candidates:
            break
        counts = support_count(candidates, tx_sets)
        next_level = [
            (candidate, count)
            for candidate, count in zip(candidates, counts)
            if frequent(count)
        ]
        if not next_level:
            break
        k += 1
        levels[k] = next_level
    return FrequentItemsetLevels(levels=levels, d=d)


def format_itemset(itemset: Sequence[int]) -> str:
    return "[" + ",".join(str(i) for i in itemset) + "]"


def parse_itemset(text: str) -> Itemset:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"bad itemset literal {text!r}")
    body = body[1:-1].strip()
    if not body:
        return ()
    return tuple(int(tok) for tok in body.split(","))


def write_fi_file(fis: FrequentItemsetLevels, path: Path | str) -> None:
    """One line per itemset: ``k TAB [i1,i2,...] TAB support_count``."""
    with open(path, "w", encoding="utf-8") as fh:
        for k in sorted(fis.levels):
            for itemset, count in fis.levels[k]:
                fh.write(f"{k}\t{format_itemset(itemset)}\t{count}\n")


def read_fi_file(path: Path | str, d: int) -> FrequentItemsetLevels:
    levels: dict[int, list[tuple[Itemset, int]]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        k_text, itemset_text, count_text = line.split("\t")
        levels.setdefault(int(k_text), []).append(
            (parse_itemset(itemset_text), int(count_text))
        )
    return FrequentItemsetLevels(levels=levels, d=d)
