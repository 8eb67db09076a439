"""Tests for FASTA parsing, length filtering, and bank splitting."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeqarm.protein_bank import (
    LengthFilter,
    MalformedInput,
    ProteinRecord,
    filter_bank,
    parse_fasta,
    serialize_fasta,
    split_bank,
)

from conftest import synth_bank


def record(n: int, length: int) -> ProteinRecord:
    return ProteinRecord(f"r{n}", f"r{n}", "A" * length)


class TestParseFasta:
    def test_concatenates_sequence_lines(self):
        records = parse_fasta(b">r1 desc\nACDE\nFGH\n")
        assert records == [ProteinRecord("r1", "r1 desc", "ACDEFGH")]

    def test_two_records_in_order(self):
        records = parse_fasta(b">a\nMK\n>b\nWW\n")
        assert [r.record_id for r in records] == ["a", "b"]
        assert [r.sequence for r in records] == ["MK", "WW"]

    def test_uppercases_and_strips_whitespace(self):
        records = parse_fasta(">x\n  ac de \n\tfg\n")
        assert records[0].sequence == "ACDEFG"

    def test_leading_blank_lines_ok(self):
        assert parse_fasta("\n\n>x\nAA\n")[0].record_id == "x"

    def test_rejects_headerless_input(self):
        with pytest.raises(MalformedInput):
            parse_fasta("ACDE\n>x\nAA\n")

    def test_rejects_empty_sequence(self):
        with pytest.raises(MalformedInput):
            parse_fasta(">x\n>y\nAA\n")
        with pytest.raises(MalformedInput):
            parse_fasta(">only header\n")

    def test_rejects_non_letter_sequence(self):
        with pytest.raises(MalformedInput):
            parse_fasta(">x\nAC-DE\n")

    def test_rejects_empty_header(self):
        with pytest.raises(MalformedInput):
            parse_fasta(">\nACDE\n")


class TestFilterBank:
    def test_inclusive_boundaries(self):
        records = [record(i, length) for i, length in enumerate([49, 50, 400, 401])]
        kept = filter_bank(records, LengthFilter(50, 400))
        assert [len(r.sequence) for r in kept] == [50, 400]

    def test_empty_input(self):
        assert filter_bank([], LengthFilter(50, 400)) == []

    def test_invalid_filter(self):
        with pytest.raises(ValueError):
            LengthFilter(0, 10)
        with pytest.raises(ValueError):
            LengthFilter(10, 9)

    def test_preserves_order(self):
        records = [record(i, 100 + i) for i in range(10)]
        assert filter_bank(records, LengthFilter(1, 1000)) == records

    @given(st.lists(st.integers(min_value=1, max_value=500), max_size=60))
    def test_predicate_and_idempotence(self, lengths):
        records = [record(i, length) for i, length in enumerate(lengths)]
        f = LengthFilter(50, 400)
        kept = filter_bank(records, f)
        assert all(50 <= len(r.sequence) <= 400 for r in kept)
        assert filter_bank(kept, f) == kept
        dropped = [r for r in records if r not in kept]
        assert all(not 50 <= len(r.sequence) <= 400 for r in dropped)


class TestSplitBank:
    def test_three_way_split_of_large_bank(self):
        records = [record(i, 10) for i in range(10569)]
        parts = split_bank(records, 3)
        assert [len(p) for p in parts] == [3523, 3523, 3523]

    def test_remainder_goes_last(self):
        parts = split_bank([record(i, 5) for i in range(5)], 2)
        assert [len(p) for p in parts] == [3, 2]

    def test_single_site_identity(self):
        records = [record(i, 5) for i in range(4)]
        assert split_bank(records, 1) == [records]

    def test_rejects_zero_sites(self):
        with pytest.raises(ValueError):
            split_bank([], 0)

    @given(st.integers(min_value=0, max_value=200), st.integers(min_value=1, max_value=7))
    def test_concatenation_is_identity(self, n, sites):
        records = [record(i, 3) for i in range(n)]
        parts = split_bank(records, sites)
        assert len(parts) == sites
        assert [r for part in parts for r in part] == records


class TestRoundTrip:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2**31))
    def test_parse_serialize_parse(self, n, seed):
        records = synth_bank(n, seed, min_len=1, max_len=200)
        reparsed = parse_fasta(serialize_fasta(records))
        assert [(r.record_id, r.sequence) for r in reparsed] == [
            (r.record_id, r.sequence) for r in records
        ]

    def test_wraps_at_sixty_columns(self):
        text = serialize_fasta([record(1, 130)])
        body = text.splitlines()[1:]
        assert [len(line) for line in body] == [60, 60, 10]
