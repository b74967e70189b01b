import struct

import pytest

from multiva.errors import ResolutionError
from multiva.livedns import (QTYPE_A, QTYPE_CNAME, QTYPE_DS, QTYPE_NS,
                             build_query, encode_name, parse_message)


def rr(name_bytes, rtype, rdata):
    return name_bytes + struct.pack(">HHIH", rtype, 1, 300, len(rdata)) + rdata


class TestWireCodec:
    def test_encode_name(self):
        assert encode_name(".") == b"\x00"
        assert encode_name("example.com.") == b"\x07example\x03com\x00"

    def test_build_query_shape(self):
        payload = build_query(0x1234, "example.com.", QTYPE_A)
        qid, flags, qd, an, ns, ar = struct.unpack(">HHHHHH", payload[:12])
        assert (qid, flags, qd, an, ns, ar) == (0x1234, 0, 1, 0, 0, 0)
        assert payload.endswith(struct.pack(">HH", QTYPE_A, 1))

    def test_parse_answer_with_compression(self):
        question = encode_name("example.com.") + struct.pack(">HH", QTYPE_A, 1)
        pointer = b"\xc0\x0c"  # offset 12 = question name
        answer = rr(pointer, QTYPE_A, bytes([93, 184, 216, 34]))
        authority = rr(pointer, QTYPE_NS, encode_name("ns1.example.com."))
        additional = rr(encode_name("ns1.example.com."), QTYPE_A,
                        bytes([192, 0, 2, 53]))
        msg_bytes = struct.pack(">HHHHHH", 7, 0x8180, 1, 1, 1, 1) + \
            question + answer + authority + additional
        msg = parse_message(msg_bytes)
        assert msg.qid == 7
        assert not msg.truncated
        assert msg.rcode == 0
        answers = msg.section("answer")
        assert answers[0].name == "example.com."
        assert answers[0].data == "93.184.216.34"
        assert msg.section("authority")[0].data == "ns1.example.com."
        assert msg.section("additional")[0].data == "192.0.2.53"

    def test_parse_cname_and_ds(self):
        question = encode_name("a.test.") + struct.pack(">HH", QTYPE_CNAME, 1)
        answer = rr(b"\xc0\x0c", QTYPE_CNAME, encode_name("b.test."))
        ds = rr(b"\xc0\x0c", QTYPE_DS, b"\x00\x01\x02")
        msg_bytes = struct.pack(">HHHHHH", 1, 0x8000, 1, 2, 0, 0) + \
            question + answer + ds
        msg = parse_message(msg_bytes)
        assert msg.section("answer")[0].data == "b.test."
        assert msg.section("answer")[1].rtype == QTYPE_DS

    def test_truncated_flag(self):
        msg = parse_message(struct.pack(">HHHHHH", 1, 0x8200, 0, 0, 0, 0))
        assert msg.truncated

    def test_short_message_rejected(self):
        with pytest.raises(ResolutionError):
            parse_message(b"\x00\x01")

    def test_compression_loop_rejected(self):
        question = encode_name("a.test.") + struct.pack(">HH", QTYPE_A, 1)
        # rdata of NS points at itself
        loop_ptr_offset = 12 + len(question) + 2 + 10
        bad = rr(b"\xc0\x0c", QTYPE_NS,
                 struct.pack(">H", 0xC000 | loop_ptr_offset))
        msg_bytes = struct.pack(">HHHHHH", 1, 0x8000, 1, 1, 0, 0) + \
            question + bad
        with pytest.raises(ResolutionError):
            parse_message(msg_bytes)

    def test_ipv6_rdata(self):
        question = encode_name("a.test.") + struct.pack(">HH", 28, 1)
        answer = rr(b"\xc0\x0c", 28, bytes(15) + b"\x01")
        msg = parse_message(struct.pack(">HHHHHH", 1, 0x8000, 1, 1, 0, 0) +
                            question + answer)
        assert msg.section("answer")[0].data == "::1"
