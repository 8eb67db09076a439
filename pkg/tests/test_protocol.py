"""Tests for the length-prefixed wire format and profile codec."""

import socket
import struct
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeqarm.protocol import (
    MAX_FRAME,
    AgentProfile,
    Briefcase,
    FrameTooLarge,
    MalformedFrame,
    SiteResult,
    decode_profile,
    dump_body,
    encode_frame,
    encode_profile,
    load_body,
    parse_address,
    profile_from_dict,
    profile_to_dict,
    recv_frame,
    send_frame,
)

text_st = st.text(alphabet=st.characters(codec="utf-8"), max_size=16)
summary_st = st.dictionaries(
    text_st, st.one_of(st.integers(-(2**40), 2**40), text_st), max_size=4
)
knowledge_st = st.none() | st.dictionaries(text_st, st.integers(0, 100), max_size=3)

site_result_st = st.builds(
    SiteResult,
    site=text_st,
    cpu_time_ms=st.integers(0, 10**9),
    summary=summary_st,
    knowledge=knowledge_st,
)

briefcase_st = st.builds(
    Briefcase,
    trip_start_ms=st.integers(0, 2**48),
    trip_end_ms=st.integers(0, 2**48),
    trip_time_ms=st.integers(0, 2**48),
    results=st.lists(site_result_st, max_size=3).map(tuple),
    payload=st.none() | st.binary(max_size=64),
)

profile_st = st.builds(
    AgentProfile,
    agent_name=text_st,
    agent_version=st.integers(0, 100),
    byte_code=st.binary(max_size=256),
    itinerary=st.lists(text_st, max_size=4).map(tuple),
    itin_type=st.sampled_from(["Parallel", "Serial"]),
    params=st.dictionaries(text_st, text_st, max_size=4),
    briefcase=briefcase_st,
)


def minimal_profile(**overrides) -> AgentProfile:
    defaults = dict(
        agent_name="PDBFA",
        agent_version=1,
        byte_code=b"blob",
        itinerary=("a:1", "b:2"),
        itin_type="Parallel",
        params={"min_len": "50"},
        briefcase=Briefcase(trip_start_ms=10),
    )
    defaults.update(overrides)
    return AgentProfile(**defaults)


class TestFraming:
    def test_length_prefix(self):
        profile = minimal_profile()
        frame = encode_profile(profile)
        (length,) = struct.unpack(">I", frame[:4])
        assert length == len(frame) - 4

    def test_frame_too_large(self):
        with pytest.raises(FrameTooLarge):
            encode_frame(_FakeBytes())

    def test_truncated_frame_rejected(self):
        frame = encode_profile(minimal_profile())
        with pytest.raises(MalformedFrame):
            decode_profile(frame[:-1])
        with pytest.raises(MalformedFrame):
            decode_profile(b"\x00\x00")

    def test_body_must_be_json_object(self):
        with pytest.raises(MalformedFrame):
            load_body(b"[1, 2, 3]")
        with pytest.raises(MalformedFrame):
            load_body(b"\xff\xfe")


class _FakeBytes(bytes):
    """Stands in for a body exceeding the frame limit without allocating it."""

    def __len__(self) -> int:  # pragma: no cover - trivial
        return MAX_FRAME + 1


class TestProfileCodec:
    def test_round_trip_two_site_profile(self):
        result = SiteResult(site="a:1", cpu_time_ms=12, summary={"records_in": 100})
        profile = minimal_profile(
            briefcase=Briefcase(
                trip_start_ms=5,
                trip_end_ms=9,
                trip_time_ms=4,
                results=(result,),
                payload=b"\x00\x01\x02",
            )
        )
        assert decode_profile(encode_profile(profile)) == profile

    def test_byte_code_preserved_bit_exact(self, rng):
        blob = bytes(rng.getrandbits(8) for _ in range(1024))
        profile = minimal_profile(byte_code=blob)
        assert decode_profile(encode_profile(profile)).byte_code == blob

    def test_knowledge_and_empty_dicts_survive(self):
        result = SiteResult(site="s", cpu_time_ms=0, summary={}, knowledge={})
        profile = minimal_profile(briefcase=Briefcase(results=(result,)))
        again = decode_profile(encode_profile(profile))
        assert again.briefcase.results[0].knowledge == {}

    def test_missing_field_rejected(self):
        data = profile_to_dict(minimal_profile())
        del data["agent_name"]
        with pytest.raises(MalformedFrame):
            profile_from_dict(data)

    def test_bad_types_rejected(self):
        data = profile_to_dict(minimal_profile())
        data["itinerary"] = "not-a-list"
        with pytest.raises(MalformedFrame):
            profile_from_dict(data)
        data = profile_to_dict(minimal_profile())
        data["params"] = {"k": 7}
        with pytest.raises(MalformedFrame):
            profile_from_dict(data)

    def test_bad_base64_rejected(self):
        data = profile_to_dict(minimal_profile())
        data["byte_code"] = "!!! not base64 !!!"
        with pytest.raises(MalformedFrame):
            profile_from_dict(data)

    @settings(max_examples=300, deadline=None)
    @given(profile_st)
    def test_round_trip_random_profiles(self, profile):
        frame = encode_profile(profile)
        again = decode_profile(frame)
        assert again == profile
        # canonical encoding is stable across a decode/encode cycle
        assert encode_profile(again) == frame


class TestSocketHelpers:
    def test_send_and_recv_over_socketpair(self):
        left, right = socket.socketpair()
        try:
            body = dump_body({"hello": "world"})
            sender = threading.Thread(target=send_frame, args=(left, body))
            sender.start()
            received = recv_frame(right)
            sender.join()
            assert received == body
        finally:
            left.close()
            right.close()

    def test_recv_on_closed_socket_returns_none(self):
        left, right = socket.socketpair()
        left.close()
        try:
            assert recv_frame(right) is None
        finally:
            right.close()

    def test_parse_address(self):
        assert parse_address("127.0.0.1:7001") == ("127.0.0.1", 7001)
        with pytest.raises(ValueError):
            parse_address("no-port")
