"""Optional live zone backend: iterative DNS over UDP with TCP fallback.

Queries are paced by a client-side rate limiter and retried twice with a
5-second timeout each. Intended for ad-hoc use against real zones; the
fixture oracle is the supported backend for analysis and tests. The
region argument is recorded but does not change where queries originate:
lookups run from wherever this host sits.
"""

from __future__ import annotations

import random
import socket
import struct
import time

from .dns_surface import DelegationStep, ZoneOracle, fqdn
from .errors import ResolutionError

QTYPE_A = 1
QTYPE_NS = 2
QTYPE_CNAME = 5
QTYPE_AAAA = 28
QTYPE_DS = 43

DEFAULT_TIMEOUT = 5.0
DEFAULT_RETRIES = 2
DEFAULT_MIN_INTERVAL = 0.05  # seconds between queries (20 qps)

# IANA root servers (a, b, c, d); enough redundancy for iterative walks.
ROOT_SERVER_IPS = ("198.41.0.4", "170.247.170.2", "192.33.4.12", "199.7.91.13")


def encode_name(name: str) -> bytes:
    out = b""
    if name != ".":
        for label in name.rstrip(".").split("."):
            raw = label.encode("ascii")
            out += bytes((len(raw),)) + raw
    return out + b"\x00"


def build_query(qid: int, name: str, qtype: int) -> bytes:
    # flags: RD=0 (iterative); one question
    header = struct.pack(">HHHHHH", qid, 0x0000, 1, 0, 0, 0)
    return header + encode_name(name) + struct.pack(">HH", qtype, 1)


def _read_name(data: bytes, offset: int) -> tuple[str, int]:
    labels = []
    jumps = 0
    end = None
    while True:
        if offset >= len(data):
            raise ResolutionError("truncated DNS name")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise ResolutionError("truncated compression pointer")
            pointer = ((length & 0x3F) << 8) | data[offset + 1]
            if end is None:
                end = offset + 2
            offset = pointer
            jumps += 1
            if jumps > 64:
                raise ResolutionError("DNS name compression loop")
            continue
        offset += 1
        if length == 0:
            break
        labels.append(data[offset:offset + length].decode("ascii", "replace"))
        offset += length
    name = ".".join(labels) + "." if labels else "."
    return name.lower(), end if end is not None else offset


class Record:
    __slots__ = ("name", "rtype", "data", "section")

    def __init__(self, name: str, rtype: int, data, section: str):
        self.name = name
        self.rtype = rtype
        self.data = data
        self.section = section


class Message:
    def __init__(self, qid: int, flags: int, records: list[Record]):
        self.qid = qid
        self.flags = flags
        self.records = records

    @property
    def truncated(self) -> bool:
        return bool(self.flags & 0x0200)

    @property
    def rcode(self) -> int:
        return self.flags & 0x000F

    def section(self, name: str) -> list[Record]:
        return [r for r in self.records if r.section == name]


def parse_message(data: bytes) -> Message:
    if len(data) < 12:
        raise ResolutionError("short DNS message")
    qid, flags, qd, an, ns, ar = struct.unpack(">HHHHHH", data[:12])
    offset = 12
    for _ in range(qd):
        _, offset = _read_name(data, offset)
        offset += 4
    records: list[Record] = []
    for section, count in (("answer", an), ("authority", ns), ("additional", ar)):
        for _ in range(count):
            name, offset = _read_name(data, offset)
            if offset + 10 > len(data):
                raise ResolutionError("truncated resource record")
            rtype, _, _, rdlen = struct.unpack(">HHIH", data[offset:offset + 10])
            offset += 10
            rdata = data[offset:offset + rdlen]
            if len(rdata) != rdlen:
                raise ResolutionError("truncated rdata")
            value = None
            if rtype == QTYPE_A and rdlen == 4:
                value = socket.inet_ntop(socket.AF_INET, rdata)
            elif rtype == QTYPE_AAAA and rdlen == 16:
                value = socket.inet_ntop(socket.AF_INET6, rdata)
            elif rtype in (QTYPE_NS, QTYPE_CNAME):
                value, _ = _read_name(data, offset)
            elif rtype == QTYPE_DS:
                value = rdata
            offset += rdlen
            records.append(Record(name, rtype, value, section))
    return Message(qid, flags, records)


class _RateLimiter:
    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._last = 0.0

    def wait(self) -> None:
        now = time.monotonic()
        delta = self._last + self.min_interval - now
        if delta > 0:
            time.sleep(delta)
        self._last = time.monotonic()


class LiveZoneOracle(ZoneOracle):
    """Iterative resolver backend; not deterministic, not for acceptance runs."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT,
                 retries: int = DEFAULT_RETRIES,
                 min_interval: float = DEFAULT_MIN_INTERVAL,
                 root_servers: tuple[str, ...] = ROOT_SERVER_IPS):
        self.timeout = timeout
        self.retries = retries
        self.root_servers = root_servers
        self._limiter = _RateLimiter(min_interval)
        self._rng = random.Random()
        self._zone_servers: dict[str, tuple[str, ...]] = {".": root_servers}

    # -- transport ---------------------------------------------------------

    def _exchange_udp(self, server: str, payload: bytes) -> bytes:
        family = socket.AF_INET6 if ":" in server else socket.AF_INET
        with socket.socket(family, socket.SOCK_DGRAM) as sock:
            sock.settimeout(self.timeout)
            sock.sendto(payload, (server, 53))
            return sock.recv(4096)

    def _exchange_tcp(self, server: str, payload: bytes) -> bytes:
        family = socket.AF_INET6 if ":" in server else socket.AF_INET
        with socket.create_connection((server, 53), timeout=self.timeout) as sock:
            sock.sendall(struct.pack(">H", len(payload)) + payload)
            raw = b""
            while len(raw) < 2:
                raw += sock.recv(2 - len(raw))
            size = struct.unpack(">H", raw)[0]
            data = b""
            while len(data) < size:
                chunk = sock.recv(size - len(data))
                if not chunk:
                    break
                data += chunk
            return data

    def _query(self, servers: tuple[str, ...], name: str, qtype: int) -> Message:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            server = servers[attempt % len(servers)]
            qid = self._rng.randrange(0x10000)
            payload = build_query(qid, name, qtype)
            try:
                self._limiter.wait()
                msg = parse_message(self._exchange_udp(server, payload))
                if msg.truncated:
                    msg = parse_message(self._exchange_tcp(server, payload))
                if msg.qid != qid:
                    raise ResolutionError("DNS response id mismatch")
                return msg
            except (OSError, ResolutionError) as exc:
                last_error = exc
        raise ResolutionError(f"query {name} type {qtype} failed: {last_error}")

    # -- iterative logic ---------------------------------------------------

    def _servers_for(self, zone: str, depth: int = 0) -> tuple[str, ...]:
        zone = fqdn(zone)
        cached = self._zone_servers.get(zone)
        if cached:
            return cached
        if depth > 16:
            raise ResolutionError(f"server resolution too deep at {zone}")
        parent = fqdn(zone.split(".", 1)[1] or ".") if zone != "." else "."
        step = self._delegation_from(parent, zone, depth)
        if step is None:
            # not a cut: served by the parent's own servers
            servers = self._servers_for(parent, depth + 1)
        else:
            ips: list[str] = []
            for ns_name in step.nameservers:
                ips.extend(step.glue.get(ns_name, ()))
            if not ips:
                for ns_name in step.nameservers[:3]:
                    a, aaaa = self.address_records(ns_name, "", 0)
                    ips.extend(sorted(a) + sorted(aaaa))
            if not ips:
                raise ResolutionError(f"no reachable servers for zone {zone}")
            servers = tuple(ips)
        self._zone_servers[zone] = servers
        return servers

    def _delegation_from(self, parent: str, zone: str,
                         depth: int = 0) -> DelegationStep | None:
        servers = self._servers_for(parent, depth + 1)
        msg = self._query(servers, zone, QTYPE_NS)
        ns_names = [r.data for r in msg.records
                    if r.rtype == QTYPE_NS and fqdn(r.name) == zone]
        if not ns_names:
            return None
        glue: dict[str, frozenset[str]] = {}
        for ns_name in ns_names:
            ips = frozenset(
                r.data for r in msg.section("additional")
                if r.rtype in (QTYPE_A, QTYPE_AAAA) and fqdn(r.name) == ns_name
                and r.data)
            if ips:
                glue[ns_name] = ips
        ds_msg = self._query(servers, zone, QTYPE_DS)
        ds_present = any(r.rtype == QTYPE_DS and fqdn(r.name) == zone
                         for r in ds_msg.section("answer"))
        return DelegationStep(zone, tuple(ns_names), ds_present, glue)

    # -- ZoneOracle interface ------------------------------------------------

    def delegation(self, zone: str, region: str) -> DelegationStep | None:
        zone = fqdn(zone)
        if zone == ".":
            return DelegationStep(".", (), ds_present=False, glue={})
        parent = fqdn(zone.split(".", 1)[1] or ".")
        return self._delegation_from(parent, zone)

    def address_records(self, name: str, region: str,
                        attempt: int) -> tuple[frozenset[str], frozenset[str]]:
        name = fqdn(name)
        out: dict[int, set[str]] = {QTYPE_A: set(), QTYPE_AAAA: set()}
        for qtype in (QTYPE_A, QTYPE_AAAA):
            zone = fqdn(name.split(".", 1)[1] or ".")
            try:
                servers = self._servers_for(zone)
                msg = self._query(servers, name, qtype)
            except ResolutionError:
                continue
            for record in msg.section("answer"):
                if record.rtype == qtype and record.data:
                    out[qtype].add(record.data)
        return frozenset(out[QTYPE_A]), frozenset(out[QTYPE_AAAA])

    def cname_target(self, name: str, region: str) -> str | None:
        name = fqdn(name)
        zone = fqdn(name.split(".", 1)[1] or ".")
        try:
            servers = self._servers_for(zone)
            msg = self._query(servers, name, QTYPE_CNAME)
        except ResolutionError:
            return None
        for record in msg.section("answer"):
            if record.rtype == QTYPE_CNAME and fqdn(record.name) == name:
                return record.data
        return None
