"""Tests for local/global knowledge bases and their integration laws."""

import random
from fractions import Fraction
from itertools import permutations

from hypothesis import given, settings
from hypothesis import strategies as st

from aeqarm.discretizer import PartitionTable
from aeqarm.knowledge import (
    GKB_FILES,
    LocalKnowledge,
    derive_gsar,
    integrate,
    intersect_global_fi,
    merge_total_fi,
    merge_total_rules,
    render_global_report,
    write_gkb,
)
from aeqarm.miner import FrequentItemsetLevels
from aeqarm.rulegen import AssociationRule, read_rules_file

from conftest import random_local_knowledge

TABLE = PartitionTable()


def make_local(site, levels, d=100, rules=()):
    return LocalKnowledge(
        site=site,
        fis=FrequentItemsetLevels(levels=levels, d=d),
        rules=list(rules),
        d=d,
    )


def make_rule(antecedent, consequent, site, sup=Fraction(1, 4), conf=Fraction(3, 4)):
    return AssociationRule(
        antecedent=antecedent,
        consequent=consequent,
        support=sup,
        confidence=conf,
        site=site,
    )


class TestTotalFi:
    def test_identical_families(self):
        levels = {1: [((1,), 10), ((2,), 8)]}
        tfi = merge_total_fi([make_local("a", levels), make_local("b", levels)])
        assert [itemset for itemset, _ in tfi[1]] == [(1,), (2,)]
        assert tfi[1][0][1] == (("a", 10, 100), ("b", 10, 100))

    def test_disjoint_union(self):
        tfi = merge_total_fi(
            [
                make_local("a", {1: [((1,), 10)]}),
                make_local("b", {1: [((2,), 7)]}, d=50),
            ]
        )
        assert tfi[1] == [((1,), (("a", 10, 100),)), ((2,), (("b", 7, 50),))]

    @settings(max_examples=40)
    @given(st.integers(min_value=0, max_value=2**31), st.integers(2, 5))
    def test_matches_set_union_oracle(self, seed, n_sites):
        rng = random.Random(seed)
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(n_sites)]
        tfi = merge_total_fi(locals_)
        ks = {k for lk in locals_ for k in lk.fis.levels}
        assert set(tfi) == ks
        for k in ks:
            expected = set()
            for lk in locals_:
                expected |= set(lk.fis.itemsets_at(k))
            assert {itemset for itemset, _ in tfi[k]} == expected
            for itemset, sites in tfi[k]:
                expected_sites = sorted(
                    (lk.site, dict(lk.fis.levels.get(k, []))[itemset], lk.d)
                    for lk in locals_
                    if itemset in lk.fis.itemsets_at(k)
                )
                assert list(sites) == expected_sites


class TestGlobalFi:
    def test_identical_families(self):
        levels = {1: [((1,), 10)], 2: [((1, 2), 5)]}
        gfi = intersect_global_fi([make_local("a", levels), make_local("b", levels)])
        assert {k: [i for i, _ in v] for k, v in gfi.items()} == {
            1: [(1,)],
            2: [(1, 2)],
        }

    def test_disjoint_families_empty(self):
        gfi = intersect_global_fi(
            [make_local("a", {1: [((1,), 10)]}), make_local("b", {1: [((2,), 7)]})]
        )
        assert gfi == {}

    @settings(max_examples=40)
    @given(st.integers(min_value=0, max_value=2**31), st.integers(2, 5))
    def test_matches_set_intersection_oracle(self, seed, n_sites):
        rng = random.Random(seed)
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(n_sites)]
        gfi = intersect_global_fi(locals_)
        ks = {k for lk in locals_ for k in lk.fis.levels}
        for k in ks:
            families = [set(lk.fis.itemsets_at(k)) for lk in locals_]
            expected = set.intersection(*families)
            assert {itemset for itemset, _ in gfi.get(k, [])} == expected
        # gfi is always contained in tfi
        tfi = merge_total_fi(locals_)
        for k, level in gfi.items():
            assert {i for i, _ in level} <= {i for i, _ in tfi[k]}


class TestGsar:
    def test_empty_gfi_gives_empty_gsar(self):
        rule = make_rule((1,), (2,), "a")
        assert derive_gsar([rule], {}) == []

    def test_all_sites_retained_with_their_stats(self):
        sites = ["192.168.46.212", "192.168.46.189", "192.168.46.213"]
        stats = [
            (Fraction(23, 100), Fraction(73, 100)),
            (Fraction(24, 100), Fraction(66, 100)),
            (Fraction(231, 1000), Fraction(663, 1000)),
        ]
        tlsar = [
            make_rule((92,), (16,), site, sup, conf)
            for site, (sup, conf) in zip(sites, stats)
        ]
        gfi = {2: [((16, 92), (("x", 1, 1),))]}
        gsar = derive_gsar(tlsar, gfi)
        assert len(gsar) == 3
        assert {r.site for r in gsar} == set(sites)
        for original in tlsar:
            match = [r for r in gsar if r.site == original.site]
            assert match == [original]

    @settings(max_examples=40)
    @given(st.integers(min_value=0, max_value=2**31), st.integers(2, 4))
    def test_matches_membership_filter_oracle(self, seed, n_sites):
        rng = random.Random(seed)
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(n_sites)]
        gfi = intersect_global_fi(locals_)
        tlsar = merge_total_rules(locals_)
        gsar = derive_gsar(tlsar, gfi)
        member = {itemset for level in gfi.values() for itemset, _ in level}
        assert set(gsar) == {r for r in tlsar if r.itemset in member}

    def test_monotone_in_gfi_and_tlsar(self, rng):
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(3)]
        gfi = intersect_global_fi(locals_)
        tfi = merge_total_fi(locals_)
        tlsar = merge_total_rules(locals_)
        small = set(derive_gsar(tlsar, gfi))
        # enlarging the frequent family can only add rules
        assert small <= set(derive_gsar(tlsar, tfi))
        # shrinking the rule pool can only remove rules
        assert set(derive_gsar(tlsar[: len(tlsar) // 2], gfi)) <= small


class TestIntegration:
    def test_identical_locals_collapse(self, rng):
        lk = random_local_knowledge(rng, "a")
        clones = [
            LocalKnowledge(site=f"s{i}", fis=lk.fis, rules=[
                AssociationRule(r.antecedent, r.consequent, r.support, r.confidence, f"s{i}")
                for r in lk.rules
            ], d=lk.d)
            for i in range(3)
        ]
        gk = integrate(clones)
        for k in lk.fis.levels:
            family = {i for i, _ in gk.gfi.get(k, [])}
            assert family == set(lk.fis.itemsets_at(k))
        assert len(gk.gsar) == len(gk.tlsar) == 3 * len(lk.rules)

    def test_order_independent(self, rng):
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(3)]
        baseline = integrate(locals_)
        for perm in permutations(locals_):
            gk = integrate(list(perm))
            assert gk.tfi == baseline.tfi
            assert gk.gfi == baseline.gfi
            assert gk.tlsar == baseline.tlsar
            assert gk.gsar == baseline.gsar

    def test_gsar_stats_never_recomputed(self, rng):
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(4)]
        originals = {
            (r.antecedent, r.consequent, r.site): (r.support, r.confidence)
            for lk in locals_
            for r in lk.rules
        }
        gk = integrate(locals_)
        for r in gk.gsar:
            assert originals[(r.antecedent, r.consequent, r.site)] == (
                r.support,
                r.confidence,
            )


class TestSerialization:
    def test_local_knowledge_dict_round_trip(self, rng):
        lk = random_local_knowledge(rng, "site-x")
        again = LocalKnowledge.from_dict(lk.to_dict())
        assert again.site == lk.site
        assert again.d == lk.d
        assert again.fis.levels == lk.fis.levels
        assert again.rules == lk.rules


class TestReport:
    def test_fixture_line(self):
        rule = make_rule((92,), (16,), "192.168.46.212", Fraction(23, 100), Fraction(73, 100))
        report = render_global_report([rule], TABLE)
        assert "{<H:3..5>} => {<C:0..2>} (23%, 73%)  192.168.46.212" in report
        assert "{92} => {16} (23%, 73%)  192.168.46.212" in report

    def test_empty_report_is_header_only(self):
        report = render_global_report([], TABLE)
        assert "Globally strong association rules: 0" in report
        assert not [line for line in report.splitlines() if line.startswith("{")]

    def test_row_count_matches_rule_count(self, rng):
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(3)]
        gk = integrate(locals_)
        report = render_global_report(gk.gsar, TABLE)
        rows = [line for line in report.splitlines() if line.startswith("{")]
        assert len(rows) == 2 * len(gk.gsar)  # one per view


class TestGkbFiles:
    def test_write_gkb_outputs_all_files(self, tmp_path, rng):
        locals_ = [random_local_knowledge(rng, f"s{i}") for i in range(3)]
        gk = integrate(locals_)
        write_gkb(gk, tmp_path, TABLE)
        for name in GKB_FILES:
            assert (tmp_path / name).exists(), name
        assert read_rules_file(tmp_path / "gkb_tlsar.tsv") == gk.tlsar
        assert read_rules_file(tmp_path / "gkb_gsar.tsv") == gk.gsar
