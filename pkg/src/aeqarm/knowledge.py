"""Local and global knowledge bases.

A worker site's local knowledge is its frequent itemsets (with exact
counts), its locally strong rules, and its transaction total. The central
site integrates collected local knowledge four ways: the per-level union
of frequent itemsets (annotated with every contributing site's count), the
per-level intersection, the union of all local rules, and the globally
strong rules — local rules whose full itemset is frequent at every site.
Integration never recomputes statistics; each rule keeps the support and
confidence measured at its origin site.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .discretizer import PartitionTable, item_label
from .miner import FrequentItemsetLevels, Itemset, format_itemset
from .rulegen import (
    AssociationRule,
    render_rule,
    render_rule_numbers,
    rule_sort_key,
    write_rules_file,
)

__all__ = [
    "SiteCount",
    "LocalKnowledge",
    "GlobalKnowledge",
    "merge_total_fi",
    "intersect_global_fi",
    "merge_total_rules",
    "derive_gsar",
    "integrate",
    "render_global_report",
    "write_gkb",
    "GKB_FILES",
]

# (site, support_count, transaction total at that site)
SiteCount = tuple[str, int, int]

FiFamily = dict[int, list[tuple[Itemset, tuple[SiteCount, ...]]]]

GKB_FILES = ("gkb_tfi.tsv", "gkb_gfi.tsv", "gkb_tlsar.tsv", "gkb_gsar.tsv", "gkb_report.txt")


@dataclass
class LocalKnowledge:
    """One site's mining output: frequent itemsets, strong rules, and d."""

    site: str
    fis: FrequentItemsetLevels
    rules: list[AssociationRule]
    d: int

    def to_dict(self) -> dict:
        return {
            "site": self.site,
            "d": self.d,
            "fis": {
                str(k): [[list(itemset), count] for itemset, count in level]
                for k, level in sorted(self.fis.levels.items())
            },
            "rules": [
                {
                    "antecedent": list(r.antecedent),
                    "consequent": list(r.consequent),
                    "support": str(r.support),
                    "confidence": str(r.confidence),
                    "site": r.site,
                }
                for r in self.rules
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LocalKnowledge":
        levels = {
            int(k): [(tuple(itemset), int(count)) for itemset, count in level]
            for k, level in data["fis"].items()
        }
        rules = [
            AssociationRule(
                antecedent=tuple(r["antecedent"]),
                consequent=tuple(r["consequent"]),
                support=Fraction(r["support"]),
                confidence=Fraction(r["confidence"]),
                site=r["site"],
            )
            for r in data["rules"]
        ]
        return cls(
            site=data["site"],
            fis=FrequentItemsetLevels(levels=levels, d=int(data["d"])),
            rules=rules,
            d=int(data["d"]),
        )


@dataclass
class GlobalKnowledge:
    """The central site's integrated view of all collected local knowledge."""

    tfi: FiFamily = field(default_factory=dict)
    gfi: FiFamily = field(default_factory=dict)
    tlsar: list[AssociationRule] = field(default_factory=list)
    gsar: list[AssociationRule] = field(default_factory=list)


def _site_counts(
    locals_: Sequence[LocalKnowledge], k: int, itemset: Itemset
) -> tuple[SiteCount, ...]:
    entries = []
    for lk in locals_:
        for candidate, count in lk.fis.levels.get(k, []):
            if candidate == itemset:
                entries.append((lk.site, count, lk.d))
                break
    return tuple(sorted(entries))


def merge_total_fi(locals_: Sequence[LocalKnowledge]) -> FiFamily:
    """Per-level union of local frequent itemsets, tagged per contributing site."""
    if not locals_:
        raise ValueError("no local knowledge to merge")
    tfi: FiFamily = {}
    ks = sorted({k for lk in locals_ for k in lk.fis.levels})
    for k in ks:
        union = sorted({itemset for lk in locals_ for itemset in lk.fis.itemsets_at(k)})
        tfi[k] = [(itemset, _site_counts(locals_, k, itemset)) for itemset in union]
    return tfi


def intersect_global_fi(locals_: Sequence[LocalKnowledge]) -> FiFamily:
    """Per-level itemsets frequent at every site, with all sites' counts."""
    if not locals_:
        raise ValueError("no local knowledge to intersect")
    gfi: FiFamily = {}
    ks = sorted({k for lk in locals_ for k in lk.fis.levels})
    for k in ks:
        families = [set(lk.fis.itemsets_at(k)) for lk in locals_]
        shared = sorted(set.intersection(*families))
        if shared:
            gfi[k] = [(itemset, _site_counts(locals_, k, itemset)) for itemset in shared]
    return gfi


def merge_total_rules(locals_: Sequence[LocalKnowledge]) -> list[AssociationRule]:
    """Union of all sites' locally strong rules (site tags preserved)."""
    rules = [rule for lk in locals_ for rule in lk.rules]
    rules.sort(key=rule_sort_key)
    return rules


def derive_gsar(
    tlsar: Sequence[AssociationRule], gfi: FiFamily
) -> list[AssociationRule]:
    """Rules whose full itemset is globally frequent, grouped by itemset then site."""
    member = {itemset for level in gfi.values() for itemset, _ in level}
    kept = [rule for rule in tlsar if rule.itemset in member]
    kept.sort(key=rule_sort_key)
    return kept


def integrate(locals_: Sequence[LocalKnowledge]) -> GlobalKnowledge:
    ordered = sorted(locals_, key=lambda lk: lk.site)
    tfi = merge_total_fi(ordered)
    gfi = intersect_global_fi(ordered)
    tlsar = merge_total_rules(ordered)
    gsar = derive_gsar(tlsar, gfi)
    return GlobalKnowledge(tfi=tfi, gfi=gfi, tlsar=tlsar, gsar=gsar)


def _grouped_rule_lines(
    rules: Sequence[AssociationRule], itemset_text, rule_text
) -> list[str]:
    lines: list[str] = []
    current: Itemset | None = None
    for rule in rules:
        if rule.itemset != current:
            current = rule.itemset
            lines.append(f"[itemset {itemset_text(current)}]")
        lines.append(f"{rule_text(rule)}  {rule.site}")
    return lines


def render_global_report(
    gsar: Sequence[AssociationRule], table: PartitionTable
) -> str:
    """Two views of the globally strong rules: item numbers and range labels."""
    lines = [
        "GLOBAL KNOWLEDGE REPORT",
        "=======================",
        "",
        f"Globally strong association rules: {len(gsar)}",
        "",
        "Item-number view",
        "----------------",
    ]
    lines += _grouped_rule_lines(
        gsar,
        itemset_text=lambda items: "[" + ", ".join(str(i) for i in items) + "]",
        rule_text=render_rule_numbers,
    )
    lines += [
        "",
        "Amino-acid frequency-range view",
        "-------------------------------",
    ]
    lines += _grouped_rule_lines(
        gsar,
        itemset_text=lambda items: "{" + " ".join(item_label(i, table) for i in items) + "}",
        rule_text=lambda rule: render_rule(rule, table),
    )
    return "\n".join(lines) + "\n"


def _write_fi_family(family: FiFamily, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["k", "itemset", "support_count", "sites"])
        for k in sorted(family):
            for itemset, site_counts in family[k]:
                writer.writerow(
                    [
                        k,
                        format_itemset(itemset),
                        ",".join(str(count) for _, count, _ in site_counts),
                        ",".join(site for site, _, _ in site_counts),
                    ]
                )


def write_gkb(gk: GlobalKnowledge, store_dir: Path | str, table: PartitionTable) -> None:
    """Persist the four knowledge tables plus the human-readable report."""
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    _write_fi_family(gk.tfi, store / "gkb_tfi.tsv")
    _write_fi_family(gk.gfi, store / "gkb_gfi.tsv")
    write_rules_file(gk.tlsar, store / "gkb_tlsar.tsv")
    write_rules_file(gk.gsar, store / "gkb_gsar.tsv")
    (store / "gkb_report.txt").write_text(
        render_global_report(gk.gsar, table), encoding="utf-8"
    )
