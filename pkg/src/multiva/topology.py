"""AS-level topology, prefix-to-origin tables, and prefix grouping.

Inputs follow the common interchange formats: pipe-delimited AS
relationships (CAIDA serial-2 compatible), ``cidr,asn`` prefix-origin CSV,
and ``datacenter_id,host_asn,peer_asn`` peer CSV. All types are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

from .errors import IngestionError

IPNetwork = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]
IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]

_MAX_ASN = 2**32 - 1
_DATACENTER_ID_RE = re.compile(r"^[a-z][a-z0-9_-]*:[A-Za-z0-9._-]+$")


class Relation(enum.IntEnum):
    """Annotated relationship of an edge, in file orientation."""

    PROVIDER_TO_CUSTOMER = -1
    PEER_TO_PEER = 0


def _lines(source: Iterable[str] | IO[str]) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(source, start=1):
        yield lineno, raw.rstrip("\n")


def _parse_asn(text: str, lineno: int | None = None) -> int:
    text = text.strip()
    if text.upper().startswith("AS"):
        text = text[2:]
    try:
        asn = int(text)
    except ValueError:
        raise IngestionError(f"invalid AS number {text!r}", lineno) from None
    if not 0 <= asn <= _MAX_ASN:
        raise IngestionError(f"AS number {asn} out of 32-bit range", lineno)
    return asn


def _parse_cidr(text: str, lineno: int | None = None) -> IPNetwork:
    try:
        # strict=False canonicalizes by zeroing host bits
        return ipaddress.ip_network(text.strip(), strict=False)
    except ValueError:
        raise IngestionError(f"invalid CIDR {text.strip()!r}", lineno) from None


def _network_sort_key(net: IPNetwork) -> tuple[int, int, int]:
    return (net.version, int(net.network_address), net.prefixlen)


class AsRelationshipGraph:
    """Annotated AS-level topology: provider/customer and peer edges.

    Edges are stored once per unordered AS pair, keyed (provider, customer)
    for provider-to-customer edges and (low ASN, high ASN) for peer edges.
    """

    def __init__(self, edges: dict[tuple[int, int], Relation],
                 extra_nodes: Iterable[int] = ()):
        nodes: set[int] = set(extra_nodes)
        for (a, b), rel in edges.items():
            if a == b:
                raise IngestionError(f"self-edge on AS{a}")
            nodes.add(a)
            nodes.add(b)
        self._edges = dict(edges)
        self._nodes = frozenset(nodes)
        self._customers: dict[int, tuple[int, ...]] = {}
        self._providers: dict[int, tuple[int, ...]] = {}
        self._peers: dict[int, tuple[int, ...]] = {}
        cust: dict[int, list[int]] = {n: [] for n in nodes}
        prov: dict[int, list[int]] = {n: [] for n in nodes}
        peer: dict[int, list[int]] = {n: [] for n in nodes}
        for (a, b), rel in self._edges.items():
            if rel is Relation.PROVIDER_TO_CUSTOMER:
                cust[a].append(b)
                prov[b].append(a)
            else:
                peer[a].append(b)
                peer[b].append(a)
        self._customers = {n: tuple(sorted(v)) for n, v in cust.items()}
        self._providers = {n: tuple(sorted(v)) for n, v in prov.items()}
        self._peers = {n: tuple(sorted(v)) for n, v in peer.items()}

    @property
    def nodes(self) -> frozenset[int]:
        return self._nodes

    @property
    def edges(self) -> dict[tuple[int, int], Relation]:
        return dict(self._edges)

    def customers(self, asn: int) -> tuple[int, ...]:
        return self._customers[asn]

    def providers(self, asn: int) -> tuple[int, ...]:
        return self._providers[asn]

    def peers(self, asn: int) -> tuple[int, ...]:
        return self._peers[asn]

    def connected(self, a: int, b: int) -> bool:
        return any(k in self._edges for k in ((a, b), (b, a)))

    def __contains__(self, asn: int) -> bool:
        return asn in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AsRelationshipGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edge_set() == other._edge_set()

    def __hash__(self):  # pragma: no cover - identity use only
        return hash((self._nodes, frozenset(self._edge_set())))

    def _edge_set(self) -> set[tuple[int, int, Relation]]:
        out = set()
        for (a, b), rel in self._edges.items():
            if rel is Relation.PEER_TO_PEER and a > b:
                a, b = b, a
            out.add((a, b, rel))
        return out


def load_as_relationships(source: Iterable[str] | IO[str]) -> AsRelationshipGraph:
    """Parse pipe-delimited relationship lines ``asn|asn|rel[|source]``.

    ``rel`` -1 declares the first AS a provider of the second; 0 declares a
    peering. ``#`` lines are comments. Conflicting duplicate declarations for
    one AS pair are an ingestion error.
    """
    edges: dict[tuple[int, int], Relation] = {}
    seen: dict[frozenset[int], tuple[tuple[int, int], Relation, int]] = {}
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) not in (3, 4):
            raise IngestionError(
                f"expected 3 or 4 pipe-delimited fields, got {len(fields)}", lineno)
        as_a = _parse_asn(fields[0], lineno)
        as_b = _parse_asn(fields[1], lineno)
        try:
            rel = Relation(int(fields[2]))
        except ValueError:
            raise IngestionError(
                f"relationship must be -1 or 0, got {fields[2]!r}", lineno) from None
        if as_a == as_b:
            raise IngestionError(f"self-edge on AS{as_a}", lineno)
        key = (as_a, as_b) if rel is Relation.PROVIDER_TO_CUSTOMER else (
            min(as_a, as_b), max(as_a, as_b))
        pair = frozenset((as_a, as_b))
        if pair in seen:
            prev_key, prev_rel, prev_line = seen[pair]
            if prev_rel is not rel or prev_key != key:
                raise IngestionError(
                    f"conflicting relation for AS{as_a}-AS{as_b} "
                    f"(first declared on line {prev_line})", lineno)
            continue
        seen[pair] = (key, rel, lineno)
        edges[key] = rel
    return AsRelationshipGraph(edges)


def serialize_as_relationships(graph: AsRelationshipGraph) -> str:
    """Render a graph back to relationship lines; inverse of the loader.

    The format carries edges only, so isolated nodes (which a loaded graph
    cannot contain) are not representable.
    """
    rows = [f"{a}|{b}|{int(rel)}" for a, b, rel in sorted(graph._edge_set())]
    return "\n".join(rows) + ("\n" if rows else "")


@dataclass(frozen=True)
class DatacenterPeerSet:
    """Peer ASes observed from one cloud datacenter, ingested as data."""

    datacenter_id: str
    host_as: int
    peers: frozenset[int]

    def __post_init__(self):
        if not self.peers:
            raise IngestionError(f"{self.datacenter_id}: empty peer set")
        if self.host_as in self.peers:
            raise IngestionError(
                f"{self.datacenter_id}: host AS{self.host_as} listed as its own peer")
        if not _DATACENTER_ID_RE.match(self.datacenter_id):
            raise IngestionError(
                f"datacenter id {self.datacenter_id!r} is not provider:location")


def load_datacenter_peers(source: Iterable[str] | IO[str]) -> list[DatacenterPeerSet]:
    """Parse ``datacenter_id,host_asn,peer_asn`` CSV, one peer per line."""
    hosts: dict[str, int] = {}
    peers: dict[str, set[int]] = {}
    order: list[str] = []
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise IngestionError(f"expected 3 comma-separated fields", lineno)
        dc_id = fields[0].strip()
        host = _parse_asn(fields[1], lineno)
        peer = _parse_asn(fields[2], lineno)
        if dc_id in hosts:
            if hosts[dc_id] != host:
                raise IngestionError(
                    f"{dc_id} declared with conflicting host AS "
                    f"({hosts[dc_id]} vs {host})", lineno)
        else:
            hosts[dc_id] = host
            peers[dc_id] = set()
            order.append(dc_id)
        peers[dc_id].add(peer)
    return [DatacenterPeerSet(dc, hosts[dc], frozenset(peers[dc])) for dc in order]


def augment_with_datacenter_peers(
        graph: AsRelationshipGraph,
        peer_sets: Iterable[DatacenterPeerSet]) -> AsRelationshipGraph:
    """Union peer edges from datacenter measurements into the graph.

    A peer edge is added only between previously unconnected pairs; an
    existing relationship-file edge wins regardless of its relation. ASes
    unknown to the graph are inserted. The input graph is left unmodified.
    """
    edges = graph.edges
    nodes = set(graph.nodes)
    for ps in peer_sets:
        nodes.add(ps.host_as)
        for peer in ps.peers:
            nodes.add(peer)
            if graph.connected(ps.host_as, peer):
                continue
            key = (min(ps.host_as, peer), max(ps.host_as, peer))
            edges.setdefault(key, Relation.PEER_TO_PEER)
    return AsRelationshipGraph(edges, extra_nodes=nodes)


@dataclass(frozen=True)
class PrefixEntry:
    prefix: IPNetwork
    origin_set: frozenset[int]


class PrefixTable:
    """Canonicalized prefix-to-origin map with longest-prefix-match lookup."""

    def __init__(self, entries: Iterable[PrefixEntry]):
        merged: dict[IPNetwork, set[int]] = {}
        for entry in entries:
            if not entry.origin_set:
                raise IngestionError(f"{entry.prefix}: empty origin set")
            merged.setdefault(entry.prefix, set()).update(entry.origin_set)
        self._entries = tuple(
            PrefixEntry(p, frozenset(o))
            for p, o in sorted(merged.items(), key=lambda kv: _network_sort_key(kv[0])))
        # per address family: prefix length -> network int -> entry
        self._index: dict[int, dict[int, dict[int, PrefixEntry]]] = {4: {}, 6: {}}
        for entry in self._entries:
            fam = self._index[entry.prefix.version]
            fam.setdefault(entry.prefix.prefixlen, {})[
                int(entry.prefix.network_address)] = entry

    @property
    def entries(self) -> tuple[PrefixEntry, ...]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, ip: IPAddress | str) -> PrefixEntry | None:
        """Return the covering entry with the greatest prefix length, if any."""
        if isinstance(ip, str):
            ip = ipaddress.ip_address(ip)
        fam = self._index[ip.version]
        bits = ip.max_prefixlen
        ip_int = int(ip)
        for length in sorted(fam, reverse=True):
            net_int = ip_int >> (bits - length) << (bits - length) if length else 0
            entry = fam[length].get(net_int)
            if entry is not None:
                return entry
        return None


def longest_prefix_match(
        table: PrefixTable, ip: IPAddress | str) -> tuple[IPNetwork, frozenset[int]] | None:
    entry = table.lookup(ip)
    if entry is None:
        return None
    return entry.prefix, entry.origin_set


def load_prefix_origins(source: Iterable[str] | IO[str]) -> PrefixTable:
    """Parse ``cidr,asn`` CSV; repeated prefixes merge their origins."""
    entries = []
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise IngestionError("expected 2 comma-separated fields", lineno)
        prefix = _parse_cidr(fields[0], lineno)
        asn = _parse_asn(fields[1], lineno)
        entries.append(PrefixEntry(prefix, frozenset((asn,))))
    return PrefixTable(entries)


@dataclass(frozen=True)
class PrefixGroup:
    """Routing-equivalent prefixes: identical origin sets, simulated once.

    Multi-origin groups treat the lowest origin ASN as the legitimate
    announcer for attack simulation.
    """

    group_id: str
    origin_set: frozenset[int]
    member_prefixes: tuple[IPNetwork, ...]

    @property
    def legitimate_origin(self) -> int:
        return min(self.origin_set)


def write_prefix_groups_csv(groups: Iterable[PrefixGroup], stream: IO[str]) -> None:
    """Persist a grouping as ``group_id,prefix,origins`` rows (origins |-joined)."""
    stream.write("group_id,prefix,origins\n")
    for group in sorted(groups, key=lambda g: g.group_id):
        origins = "|".join(str(a) for a in sorted(group.origin_set))
        for prefix in group.member_prefixes:
            stream.write(f"{group.group_id},{prefix},{origins}\n")


def load_prefix_groups_csv(source: Iterable[str] | IO[str]) -> list[PrefixGroup]:
    """Inverse of write_prefix_groups_csv."""
    members: dict[str, list[IPNetwork]] = {}
    origins: dict[str, frozenset[int]] = {}
    for lineno, line in _lines(source):
        if not line.strip() or line.startswith("group_id,"):
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise IngestionError("expected 3 comma-separated fields", lineno)
        gid = fields[0].strip()
        prefix = _parse_cidr(fields[1], lineno)
        origin_set = frozenset(_parse_asn(a, lineno) for a in fields[2].split("|"))
        if gid in origins and origins[gid] != origin_set:
            raise IngestionError(f"group {gid} with conflicting origins", lineno)
        origins[gid] = origin_set
        members.setdefault(gid, []).append(prefix)
    return [
        PrefixGroup(gid, origins[gid],
                    tuple(sorted(members[gid], key=_network_sort_key)))
        for gid in sorted(members)]


def group_prefixes_by_origin(table: PrefixTable) -> list[PrefixGroup]:
    """Partition a prefix table into groups with identical origin sets.

    Group ids are deterministic for a given table regardless of input line
    order: groups are numbered in sorted-origin-set order.
    """
    by_origin: dict[frozenset[int], list[IPNetwork]] = {}
    for entry in table.entries:
        by_origin.setdefault(entry.origin_set, []).append(entry.prefix)
    groups = []
    ordered = sorted(by_origin.items(), key=lambda kv: tuple(sorted(kv[0])))
    width = max(4, len(str(max(len(ordered) - 1, 0))))
    for i, (origins, members) in enumerate(ordered):
        groups.append(PrefixGroup(
            group_id=f"g{i:0{width}d}",
            origin_set=origins,
            member_prefixes=tuple(sorted(members, key=_network_sort_key)),
        ))
    return groups
