"""Strong association rules from frequent itemsets.

Support and confidence are kept as exact rationals throughout; the
percentage view shown to operators truncates (never rounds) to a whole
percent, so a displayed value is always <= the exact one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

from .discretizer import PartitionTable, item_label
from .miner import (
    FrequentItemsetLevels,
    Itemset,
    format_itemset,
    parse_itemset,
    percent_fraction,
)

__all__ = [
    "MissingSubsetCount",
    "AssociationRule",
    "generate_rules",
    "display_percent",
    "render_rule",
    "render_rule_numbers",
    "rule_sort_key",
    "write_rules_file",
    "read_rules_file",
]


class MissingSubsetCount(ValueError):
    """A subset count required for confidence is absent (corrupt FI input)."""


@dataclass(frozen=True)
class AssociationRule:
    """antecedent => consequent with exact support/confidence and origin site."""

    antecedent: Itemset
    consequent: Itemset
    support: Fraction
    confidence: Fraction
    site: str

    @property
    def itemset(self) -> Itemset:
        return tuple(sorted(set(self.antecedent) | set(self.consequent)))


def rule_sort_key(rule: AssociationRule):
    """Group by full itemset, then antecedent size and items, then site."""
    return (rule.itemset, len(rule.antecedent), rule.antecedent, rule.site)


def generate_rules(
    fis: FrequentItemsetLevels,
    min_conf_percent: int | float | str | Fraction,
    site: str,
) -> list[AssociationRule]:
    """Emit s => (l - s) for every frequent l and non-empty proper subset s
    whose confidence count(l)/count(s) meets the threshold exactly.

    Output is grouped by full itemset (lexicographic), and within a group
    ordered by antecedent size then antecedent items.
    """
    min_conf = percent_fraction(min_conf_percent) / 100
    counts = fis.counts()
    rules: list[AssociationRule] = []
    for k in sorted(fis.levels):
        if k < 2:
            continue
        for itemset, full_count in fis.levels[k]:
            support = Fraction(full_count, fis.d)
            for size in range(1, k):
                for antecedent in combinations(itemset, size):
                    antecedent_count = counts.get(antecedent)
                    if antecedent_count is None:
                        raise MissingSubsetCount(
                            f"no support count for {antecedent} (subset of {itemset})"
                        )
                    confidence = Fraction(full_count, antecedent_count)
                    if confidence >= min_conf:
                        consequent = tuple(i for i in itemset if i not in antecedent)
                        rules.append(
                            AssociationRule(
                                antecedent=antecedent,
                                consequent=consequent,
                                support=support,
                                confidence=confidence,
                                site=site,
                            )
                        )
    rules.sort(key=rule_sort_key)
    return rules


def display_percent(value: Fraction | int) -> int:
    """Truncated whole-percent view of an exact rational in [0, 1]."""
    frac = Fraction(value)
    return (100 * frac.numerator) // frac.denominator


def _braced(labels: Iterable[str]) -> str:
    return "{" + " ".join(labels) + "}"


def render_rule(rule: AssociationRule, table: PartitionTable) -> str:
    """Label rendering, e.g. ``{<H:3..5>} => {<C:0..2>} (23%, 73%)``."""
    left = _braced(item_label(i, table) for i in rule.antecedent)
    right = _braced(item_label(i, table) for i in rule.consequent)
    return (
        f"{left} => {right} "
        f"({display_percent(rule.support)}%, {display_percent(rule.confidence)}%)"
    )


def render_rule_numbers(rule: AssociationRule) -> str:
    """Plain item-number rendering, e.g. ``{92} => {16} (23%, 73%)``."""
    left = _braced(str(i) for i in rule.antecedent)
    right = _braced(str(i) for i in rule.consequent)
    return (
        f"{left} => {right} "
        f"({display_percent(rule.support)}%, {display_percent(rule.confidence)}%)"
    )


_RULE_COLUMNS = [
    "itemset",
    "antecedent",
    "consequent",
    "support_pct",
    "confidence_pct",
    "support_exact",
    "confidence_exact",
    "site",
]


def write_rules_file(rules: Sequence[AssociationRule], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(_RULE_COLUMNS)
        for r in rules:
            writer.writerow(
                [
                    format_itemset(r.itemset),
                    format_itemset(r.antecedent),
                    format_itemset(r.consequent),
                    display_percent(r.support),
                    display_percent(r.confidence),
                    str(r.support),
                    str(r.confidence),
                    r.site,
                ]
            )


def read_rules_file(path: Path | str) -> list[AssociationRule]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != _RULE_COLUMNS:
            raise ValueError(f"unexpected rules header in {path}")
        return [
            AssociationRule(
                antecedent=parse_itemset(row[1]),
                consequent=parse_itemset(row[2]),
                support=Fraction(row[5]),
                confidence=Fraction(row[6]),
                site=row[7],
            )
            for row in reader
        ]
