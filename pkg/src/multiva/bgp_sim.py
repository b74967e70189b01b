"""Stable interdomain routing under Gao-Rexford policies, with attacks.

Route selection prefers customer over peer over provider routes, then
shorter AS paths, then the lowest next-hop ASN. Customer-learned and
self-originated routes are exported to every neighbor; peer- and
provider-learned routes are exported to customers only. Propagation runs
in three phases (customer routes up, peer routes across, provider routes
down), which yields the unique stable state for these preferences on
provider-hierarchy-acyclic topologies such as the CAIDA graph.
"""

from __future__ import annotations

import enum
import json
import multiprocessing
import os
import random
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, InputError, OracleError
from .rpki import RoaSet, RpkiMode, rov_effective
from .topology import AsRelationshipGraph, PrefixGroup

# Graphs at least this large route the provider-phase frontier through
# numpy; smaller ones use the plain-Python path (same semantics).
NUMPY_PHASE_THRESHOLD = 256

_REGIME_ORDER = (RpkiMode.NONE, RpkiMode.CURRENT, RpkiMode.FULL)

_STORE_MAGIC = b"MVABITS1"


class RouteClass(enum.IntEnum):
    """How an AS learned its chosen route; larger is preferred."""

    PROVIDER = 1
    PEER = 2
    CUSTOMER = 3
    SELF = 4


class AnnouncementKind(enum.Enum):
    LEGITIMATE = "legitimate"
    PLAIN_HIJACK = "plain_hijack"
    PREPEND_HIJACK = "prepend_hijack"


@dataclass(frozen=True)
class Announcement:
    """A BGP origination, as heard by the announcer's neighbors.

    ``as_path`` is the path the announcer puts on the wire: its own ASN
    first, the claimed origin last. A plain hijack claims the prefix
    directly; a prepend hijack appends the victim's origin to evade
    origin validation at the cost of a longer path.
    """

    announcer: int
    as_path: tuple[int, ...]
    kind: AnnouncementKind
    prefix_group: str | None = None

    def __post_init__(self):
        if not self.as_path:
            raise InputError("announcement with empty AS path")
        if self.as_path[0] != self.announcer:
            raise InputError("announced path must start at the announcer")
        if len(set(self.as_path)) != len(self.as_path):
            raise InputError(f"looped announcement path {self.as_path}")
        if self.kind in (AnnouncementKind.LEGITIMATE, AnnouncementKind.PLAIN_HIJACK):
            if len(self.as_path) != 1:
                raise InputError(f"{self.kind.value} path must be the announcer only")
        else:
            if len(self.as_path) != 2:
                raise InputError("prepend path must be (adversary, victim origin)")

    @property
    def claimed_origin(self) -> int:
        return self.as_path[-1]

    @staticmethod
    def legitimate(origin: int, prefix_group: str | None = None) -> Announcement:
        return Announcement(origin, (origin,), AnnouncementKind.LEGITIMATE, prefix_group)

    @staticmethod
    def plain_hijack(adversary: int, prefix_group: str | None = None) -> Announcement:
        return Announcement(adversary, (adversary,),
                            AnnouncementKind.PLAIN_HIJACK, prefix_group)

    @staticmethod
    def prepend_hijack(adversary: int, victim_origin: int,
                       prefix_group: str | None = None) -> Announcement:
        return Announcement(adversary, (adversary, victim_origin),
                            AnnouncementKind.PREPEND_HIJACK, prefix_group)


@dataclass(frozen=True)
class Route:
    next_hop: int | None
    as_path: tuple[int, ...]
    relation_class: RouteClass


class RoutingState:
    """Chosen route per AS; ASes with no route are absent."""

    def __init__(self, routes: dict[int, Route]):
        self.routes = routes

    def __getitem__(self, asn: int) -> Route:
        return self.routes[asn]

    def get(self, asn: int) -> Route | None:
        return self.routes.get(asn)

    def __contains__(self, asn: int) -> bool:
        return asn in self.routes

    def __len__(self) -> int:
        return len(self.routes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoutingState):
            return NotImplemented
        return self.routes == other.routes

    def __repr__(self) -> str:
        return f"<RoutingState routes={len(self.routes)}>"


class _IndexedGraph:
    """Dense-index adjacency view; index order equals ASN order."""

    def __init__(self, graph: AsRelationshipGraph):
        self.asns = sorted(graph.nodes)
        self.index = {asn: i for i, asn in enumerate(self.asns)}
        self.n = len(self.asns)
        idx = self.index
        self.providers = [[idx[p] for p in graph.providers(a)] for a in self.asns]
        self.peers = [[idx[p] for p in graph.peers(a)] for a in self.asns]
        self.customers = [[idx[c] for c in graph.customers(a)] for a in self.asns]
        # CSR form of the provider->customer edges for the numpy phase
        lens = np.fromiter((len(c) for c in self.customers), dtype=np.int64,
                           count=self.n)
        self.down_head = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lens, out=self.down_head[1:])
        flat: list[int] = []
        for c in self.customers:
            flat.extend(c)
        self.down_adj = np.asarray(flat, dtype=np.int32)


def _indexed(graph: AsRelationshipGraph) -> _IndexedGraph:
    cached = graph.__dict__.get("_multiva_index")
    if cached is None:
        cached = _IndexedGraph(graph)
        graph.__dict__["_multiva_index"] = cached
    return cached


_NO_ROUTE = -1


class _CoreState:
    """Raw propagation result in index space."""

    __slots__ = ("idx", "anns", "next_hop", "relclass", "pathlen", "explen", "ann_of")

    def __init__(self, idx: _IndexedGraph, anns: Sequence[Announcement]):
        self.idx = idx
        self.anns = tuple(anns)
        n = idx.n
        self.next_hop = np.full(n, _NO_ROUTE, dtype=np.int32)
        self.relclass = np.zeros(n, dtype=np.int8)
        self.pathlen = np.zeros(n, dtype=np.int32)
        self.explen = np.zeros(n, dtype=np.int32)
        self.ann_of = np.full(n, _NO_ROUTE, dtype=np.int8)


def _propagate_core(idx: _IndexedGraph, anns: Sequence[Announcement],
                    use_numpy: bool | None = None) -> _CoreState:
    if len(anns) > 127:
        raise InputError("more than 127 concurrent announcements unsupported")
    state = _CoreState(idx, anns)
    next_hop, relclass = state.next_hop, state.relclass
    pathlen, explen, ann_of = state.pathlen, state.explen, state.ann_of
    routed = np.zeros(idx.n, dtype=bool)

    seen_announcers = set()
    for k, ann in enumerate(anns):
        if ann.announcer in seen_announcers:
            raise InputError(f"multiple announcements from AS{ann.announcer}")
        seen_announcers.add(ann.announcer)
        i = idx.index.get(ann.announcer)
        if i is None:
            raise InputError(f"announcer AS{ann.announcer} absent from graph")
        routed[i] = True
        relclass[i] = RouteClass.SELF
        pathlen[i] = len(ann.as_path)
        explen[i] = len(ann.as_path)
        ann_of[i] = k

    origin_idxs = [idx.index[a.announcer] for a in anns]

    def adopt_batch(offers: dict[int, int], cls: RouteClass, heard_len: int,
                    cascade: dict[int, list[int]] | None):
        for t, src in offers.items():
            routed[t] = True
            next_hop[t] = src
            relclass[t] = cls
            pathlen[t] = heard_len
            explen[t] = heard_len + 1
            ann_of[t] = ann_of[src]
            if cascade is not None:
                cascade.setdefault(heard_len + 1, []).append(t)

    # phase 1: customer routes climb provider edges, shortest-first
    buckets: dict[int, list[int]] = {}
    for i in origin_idxs:
        buckets.setdefault(int(explen[i]), []).append(i)
    providers = idx.providers
    while buckets:
        level = min(buckets)
        offers: dict[int, int] = {}
        for src in buckets.pop(level):
            for t in providers[src]:
                if routed[t]:
                    continue
                cur = offers.get(t)
                if cur is None or src < cur:
                    offers[t] = src
        adopt_batch(offers, RouteClass.CUSTOMER, level, buckets)

    # phase 2: customer-route holders and origins announce across peer edges;
    # peer routes are not re-exported to peers, so one pass of offers suffices
    peer_buckets: dict[int, list[tuple[int, int]]] = {}
    peers = idx.peers
    exporters = np.nonzero(routed)[0]
    for src in exporters:
        src = int(src)
        lvl = int(explen[src])
        for t in peers[src]:
            if not routed[t]:
                peer_buckets.setdefault(lvl, []).append((t, src))
    while peer_buckets:
        level = min(peer_buckets)
        offers = {}
        for t, src in peer_buckets.pop(level):
            if routed[t]:
                continue
            cur = offers.get(t)
            if cur is None or src < cur:
                offers[t] = src
        adopt_batch(offers, RouteClass.PEER, level, None)

    # phase 3: everything routed so far exports down customer edges
    if use_numpy is None:
        use_numpy = idx.n >= NUMPY_PHASE_THRESHOLD
    if use_numpy:
        _provider_phase_numpy(idx, routed, next_hop, relclass, pathlen, explen, ann_of)
    else:
        buckets = {}
        for src in np.nonzero(routed)[0]:
            src = int(src)
            if idx.customers[src]:
                buckets.setdefault(int(explen[src]), []).append(src)
        customers = idx.customers
        while buckets:
            level = min(buckets)
            offers = {}
            for src in buckets.pop(level):
                for t in customers[src]:
                    if routed[t]:
                        continue
                    cur = offers.get(t)
                    if cur is None or src < cur:
                        offers[t] = src
            adopt_batch(offers, RouteClass.PROVIDER, level, buckets)
    return state


def _provider_phase_numpy(idx: _IndexedGraph, routed, next_hop, relclass,
                          pathlen, explen, ann_of) -> None:
    n = idx.n
    head, adj = idx.down_head, idx.down_adj
    levels: dict[int, np.ndarray] = {}
    seed_idx = np.nonzero(routed)[0].astype(np.int32)
    if seed_idx.size:
        seed_lvls = explen[seed_idx]
        for lvl in np.unique(seed_lvls):
            levels[int(lvl)] = seed_idx[seed_lvls == lvl]
    best = np.full(n, n, dtype=np.int64)
    while levels:
        level = min(levels)
        srcs = levels.pop(level).astype(np.int64)
        starts = head[srcs]
        lens = head[srcs + 1] - starts
        total = int(lens.sum())
        if total == 0:
            continue
        # CSR gather of every (src, customer) edge leaving this level
        rep_src = np.repeat(srcs, lens)
        base = np.repeat(starts, lens)
        offset = np.arange(total, dtype=np.int64) - np.repeat(
            np.cumsum(lens) - lens, lens)
        dst = adj[base + offset].astype(np.int64)
        mask = ~routed[dst]
        dst = dst[mask]
        rep_src = rep_src[mask]
        if dst.size == 0:
            continue
        np.minimum.at(best, dst, rep_src)
        newly = np.unique(dst)
        chosen = best[newly]
        routed[newly] = True
        next_hop[newly] = chosen
        relclass[newly] = RouteClass.PROVIDER
        pathlen[newly] = level
        explen[newly] = level + 1
        ann_of[newly] = ann_of[chosen]
        best[newly] = n
        nxt = newly[head[newly + 1] > head[newly]].astype(np.int32)
        if nxt.size:
            existing = levels.get(level + 1)
            levels[level + 1] = nxt if existing is None else np.concatenate(
                (existing, nxt))


def _exported_paths(state: _CoreState) -> dict[int, tuple[int, ...]]:
    """Reconstruct the path each routed AS exports, in ASN terms."""
    idx, anns = state.idx, state.anns
    exported: dict[int, tuple[int, ...]] = {}
    for i in range(idx.n):
        if state.ann_of[i] == _NO_ROUTE or i in exported:
            continue
        chain = []
        j = i
        while j not in exported:
            chain.append(j)
            if state.relclass[j] == RouteClass.SELF:
                exported[j] = anns[state.ann_of[j]].as_path
                break
            j = int(state.next_hop[j])
        for j in reversed(chain):
            if j not in exported:
                exported[j] = (idx.asns[j],) + exported[int(state.next_hop[j])]
    return exported


def _to_routing_state(state: _CoreState) -> RoutingState:
    idx = state.idx
    exported = _exported_paths(state)
    routes: dict[int, Route] = {}
    for i in range(idx.n):
        if state.ann_of[i] == _NO_ROUTE:
            continue
        cls = RouteClass(int(state.relclass[i]))
        if cls is RouteClass.SELF:
            routes[idx.asns[i]] = Route(None, exported[i], cls)
        else:
            nh = int(state.next_hop[i])
            routes[idx.asns[i]] = Route(idx.asns[nh], exported[nh], cls)
    return RoutingState(routes)


def propagate_routes(graph: AsRelationshipGraph,
                     announcements: Sequence[Announcement]) -> RoutingState:
    """Compute the stable routing state for a set of announcements."""
    return _to_routing_state(_propagate_core(_indexed(graph), announcements))


def stable_state_oracle(graph: AsRelationshipGraph,
                        announcements: Sequence[Announcement]) -> RoutingState:
    """Reference implementation: iterate best responses to a fixed point.

    Recomputes every AS's best available route from its neighbors' current
    exports each round, starting from the empty state. Intended for tests
    on small graphs; raises OracleError if no fixed point is reached within
    ``|AS|**2`` rounds (which would signal a semantics bug).
    """
    announcers = {}
    for ann in announcements:
        if ann.announcer not in graph:
            raise InputError(f"announcer AS{ann.announcer} absent from graph")
        if ann.announcer in announcers:
            raise InputError(f"multiple announcements from AS{ann.announcer}")
        announcers[ann.announcer] = ann

    def neighbor_class(asn: int, nbr: int) -> RouteClass:
        if nbr in graph.customers(asn):
            return RouteClass.CUSTOMER
        if nbr in graph.peers(asn):
            return RouteClass.PEER
        return RouteClass.PROVIDER

    routes: dict[int, Route] = {
        a: Route(None, ann.as_path, RouteClass.SELF) for a, ann in announcers.items()}
    others = [a for a in sorted(graph.nodes) if a not in announcers]
    max_rounds = max(1, len(graph)) ** 2
    for _ in range(max_rounds):
        new_routes = dict(routes)
        for asn in others:
            candidates = []
            for nbr in (*graph.customers(asn), *graph.peers(asn),
                        *graph.providers(asn)):
                nbr_route = routes.get(nbr)
                if nbr_route is None:
                    continue
                exports = nbr_route.relation_class in (RouteClass.SELF,
                                                       RouteClass.CUSTOMER)
                if not exports and asn not in graph.customers(nbr):
                    continue
                if nbr_route.relation_class is RouteClass.SELF:
                    heard = nbr_route.as_path
                else:
                    heard = (nbr,) + nbr_route.as_path
                if asn in heard:
                    continue
                cls = neighbor_class(asn, nbr)
                candidates.append((-int(cls), len(heard), nbr, heard, cls))
            if candidates:
                _, _, nbr, heard, cls = min(candidates)
                new_routes[asn] = Route(nbr, heard, cls)
            else:
                new_routes.pop(asn, None)
        if new_routes == routes:
            return RoutingState(routes)
        routes = new_routes
    raise OracleError(f"no fixed point within {max_rounds} rounds")


def _attack_announcements(victim_origin: int, adversary: int,
                          kind: AnnouncementKind) -> list[Announcement]:
    if kind is AnnouncementKind.PLAIN_HIJACK:
        attack = Announcement.plain_hijack(adversary)
    elif kind is AnnouncementKind.PREPEND_HIJACK:
        attack = Announcement.prepend_hijack(adversary, victim_origin)
    else:
        raise InputError(f"attack kind must be a hijack, got {kind}")
    return [Announcement.legitimate(victim_origin), attack]


def _vp_bits(state: _CoreState, vp_idxs: dict[int, int], victim_origin: int,
             rov_filter: bool) -> tuple[dict[int, int], set[int]]:
    """Extract hijack bits at vantage points, optionally applying ROV.

    With ``rov_filter`` a vantage point discards a chosen route whose
    claimed origin differs from the legitimate origin and falls back to
    its best valid neighbor export, or to no route.
    """
    anns = state.anns
    bits: dict[int, int] = {}
    no_route: set[int] = set()
    for vp, i in vp_idxs.items():
        ann_k = int(state.ann_of[i])
        if ann_k == _NO_ROUTE:
            bits[vp] = 0
            no_route.add(vp)
            continue
        if rov_filter and anns[ann_k].claimed_origin != victim_origin:
            ann_k = _rov_fallback(state, i, victim_origin)
            if ann_k == _NO_ROUTE:
                bits[vp] = 0
                no_route.add(vp)
                continue
        bits[vp] = 1 if anns[ann_k].kind is not AnnouncementKind.LEGITIMATE else 0
    return bits, no_route


def _rov_fallback(state: _CoreState, vp_i: int, victim_origin: int) -> int:
    """Best valid route offered to a filtering AS, as an announcement index."""
    idx, anns = state.idx, state.anns
    best = None
    for cls, nbrs in ((RouteClass.CUSTOMER, idx.customers[vp_i]),
                      (RouteClass.PEER, idx.peers[vp_i]),
                      (RouteClass.PROVIDER, idx.providers[vp_i])):
        for nbr in nbrs:
            ann_k = int(state.ann_of[nbr])
            if ann_k == _NO_ROUTE:
                continue
            if anns[ann_k].claimed_origin != victim_origin:
                continue
            nbr_cls = state.relclass[nbr]
            exports = nbr_cls in (RouteClass.SELF, RouteClass.CUSTOMER) or \
                vp_i in idx.customers[nbr]
            if not exports:
                continue
            key = (-int(cls), int(state.explen[nbr]), idx.asns[nbr])
            if best is None or key < best[0]:
                best = (key, ann_k)
    return best[1] if best is not None else _NO_ROUTE


@dataclass(frozen=True)
class AttackOutcome:
    """Per-vantage-point success bits for one simulated attack."""

    adversary: int
    victim_origin: int
    kind: AnnouncementKind
    alpha: dict[int, int]
    no_route: frozenset[int]
    prefix_group: str | None = None
    regime: RpkiMode | None = None


def simulate_attack(graph: AsRelationshipGraph, victim_origin: int, adversary: int,
                    vp_ases: Iterable[int], kind: AnnouncementKind,
                    rov_filter: bool = False) -> AttackOutcome:
    """Simulate one hijack and report which vantage points it captures.

    A vantage point counts as hijacked when its chosen route derives from
    the adversary's announcement (for prepends this is exactly the set of
    routes traversing the adversary). Vantage points with no route are
    scored 0 and listed in ``no_route``.
    """
    if victim_origin == adversary:
        raise InputError("adversary must differ from the victim origin")
    idx = _indexed(graph)
    vp_idxs = {}
    for vp in sorted(set(vp_ases)):
        if vp not in idx.index:
            raise InputError(f"vantage point AS{vp} absent from graph")
        vp_idxs[vp] = idx.index[vp]
    anns = _attack_announcements(victim_origin, adversary, kind)
    state = _propagate_core(idx, anns)
    bits, no_route = _vp_bits(state, vp_idxs, victim_origin, rov_filter)
    return AttackOutcome(adversary, victim_origin, kind, bits, frozenset(no_route))


def sample_adversaries(graph: AsRelationshipGraph, n: int, seed: int) -> list[int]:
    """Uniform sample of ASes without replacement; sorted, seed-deterministic."""
    nodes = sorted(graph.nodes)
    if n > len(nodes):
        raise InputError(f"cannot sample {n} adversaries from {len(nodes)} ASes")
    return sorted(random.Random(seed).sample(nodes, n))


class AttackBitStore:
    """Dense (adversary, prefix group, vantage point, regime) -> bit store."""

    def __init__(self, adversaries: Sequence[int], group_ids: Sequence[str],
                 vp_ases: Sequence[int], regimes: Sequence[RpkiMode],
                 bits: np.ndarray, provenance: dict[str, str] | None = None):
        self.adversaries = tuple(adversaries)
        self.group_ids = tuple(group_ids)
        self.vp_ases = tuple(vp_ases)
        self.regimes = tuple(regimes)
        for name, axis in (("adversaries", self.adversaries),
                           ("group_ids", self.group_ids),
                           ("vp_ases", self.vp_ases)):
            if list(axis) != sorted(set(axis)):
                raise ConsistencyError(f"{name} must be sorted and unique")
        if self.regimes != tuple(r for r in _REGIME_ORDER if r in set(self.regimes)):
            raise ConsistencyError("regimes must be unique, in none/current/full order")
        expected = (len(self.adversaries), len(self.group_ids),
                    len(self.vp_ases), len(self.regimes))
        if bits.shape != expected:
            raise ConsistencyError(f"bit array shape {bits.shape} != {expected}")
        self.bits = bits.astype(np.uint8)
        self.provenance = dict(provenance or {})
        self._a = {a: i for i, a in enumerate(self.adversaries)}
        self._g = {g: i for i, g in enumerate(self.group_ids)}
        self._v = {v: i for i, v in enumerate(self.vp_ases)}
        self._r = {r: i for i, r in enumerate(self.regimes)}

    def get(self, adversary: int, group_id: str, vp_as: int, regime: RpkiMode) -> int:
        try:
            return int(self.bits[self._a[adversary], self._g[group_id],
                                 self._v[vp_as], self._r[regime]])
        except KeyError as exc:
            raise ConsistencyError(
                f"store has no cell for adversary={adversary} group={group_id!r} "
                f"vp={vp_as} regime={getattr(regime, 'value', regime)}") from exc

    def adversary_index(self, adversary: int) -> int:
        try:
            return self._a[adversary]
        except KeyError as exc:
            raise ConsistencyError(f"store has no adversary AS{adversary}") from exc

    def group_index(self, group_id: str) -> int:
        try:
            return self._g[group_id]
        except KeyError as exc:
            raise ConsistencyError(f"store has no prefix group {group_id!r}") from exc

    def vp_index(self, vp_as: int) -> int:
        try:
            return self._v[vp_as]
        except KeyError as exc:
            raise ConsistencyError(f"store has no vantage point AS{vp_as}") from exc

    def regime_index(self, regime: RpkiMode) -> int:
        try:
            return self._r[regime]
        except KeyError as exc:
            raise ConsistencyError(
                f"store has no regime {getattr(regime, 'value', regime)}") from exc

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttackBitStore):
            return NotImplemented
        return (self.adversaries == other.adversaries
                and self.group_ids == other.group_ids
                and self.vp_ases == other.vp_ases
                and self.regimes == other.regimes
                and np.array_equal(self.bits, other.bits))

    def save(self, path: str | os.PathLike) -> None:
        header = json.dumps({
            "adversaries": list(self.adversaries),
            "group_ids": list(self.group_ids),
            "vp_ases": list(self.vp_ases),
            "regimes": [r.value for r in self.regimes],
            "shape": list(self.bits.shape),
            "provenance": self.provenance,
        }, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(_STORE_MAGIC)
            fh.write(len(header).to_bytes(4, "big"))
            fh.write(header)
            fh.write(np.packbits(self.bits.ravel()).tobytes())

    @staticmethod
    def load(path: str | os.PathLike) -> AttackBitStore:
        with open(path, "rb") as fh:
            magic = fh.read(len(_STORE_MAGIC))
            if magic != _STORE_MAGIC:
                raise ConsistencyError(f"{path}: not an attack bit store")
            size = int.from_bytes(fh.read(4), "big")
            header = json.loads(fh.read(size).decode())
            shape = tuple(header["shape"])
            count = int(np.prod(shape)) if shape else 0
            packed = np.frombuffer(fh.read(), dtype=np.uint8)
            bits = np.unpackbits(packed, count=count).reshape(shape)
        return AttackBitStore(
            header["adversaries"], header["group_ids"], header["vp_ases"],
            [RpkiMode(r) for r in header["regimes"]], bits,
            header.get("provenance"))

    def to_csv(self, stream: IO[str]) -> None:
        stream.write("adversary,group_id,vp_as,regime,bit\n")
        for ai, a in enumerate(self.adversaries):
            for gi, g in enumerate(self.group_ids):
                for vi, v in enumerate(self.vp_ases):
                    for ri, r in enumerate(self.regimes):
                        stream.write(
                            f"{a},{g},{v},{r.value},{int(self.bits[ai, gi, vi, ri])}\n")


def _group_plan(groups: Sequence[PrefixGroup], roas: RoaSet,
                regimes: Sequence[RpkiMode]) -> list[tuple]:
    """Per group: (id, victim origin, origin set, per-regime rov flags)."""
    ids = [g.group_id for g in groups]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate prefix group ids")
    plan = []
    for group in sorted(groups, key=lambda g: g.group_id):
        rep = group.member_prefixes[0]
        effective = []
        for regime in regimes:
            flag = rov_effective(regime, roas, rep)
            if regime is RpkiMode.CURRENT:
                for prefix in group.member_prefixes[1:]:
                    if bool(roas.covering(prefix)) != flag:
                        raise InputError(
                            f"group {group.group_id} mixes ROA coverage; refine "
                            "groups before simulating the current regime")
            effective.append(flag)
        plan.append((group.group_id, group.legitimate_origin,
                     frozenset(group.origin_set), tuple(effective)))
    return plan


def _adversary_slab(idx: _IndexedGraph, adversary: int,
                    plan: list, vp_idxs: dict[int, int],
                    n_regimes: int) -> np.ndarray:
    """All (group, vp, regime) bits for one adversary."""
    slab = np.zeros((len(plan), len(vp_idxs), n_regimes), dtype=np.uint8)
    cache: dict[tuple[int, AnnouncementKind | None], list[int]] = {}
    vp_order = list(vp_idxs.keys())
    for gi, (_, victim, origin_set, effective) in enumerate(plan):
        if adversary in origin_set:
            # the adversary hosts the prefix: validation traffic reaches it
            # legitimately from every vantage point that has a route at all,
            # regardless of regime
            key = (victim, None)
            row = cache.get(key)
            if row is None:
                state = _propagate_core(idx, [Announcement.legitimate(victim)])
                row = [int(state.ann_of[i] != _NO_ROUTE)
                       for i in vp_idxs.values()]
                cache[key] = row
            slab[gi, :, :] = np.asarray(row, dtype=np.uint8)[:, None]
            continue
        for ri, rov in enumerate(effective):
            kind = (AnnouncementKind.PREPEND_HIJACK if rov
                    else AnnouncementKind.PLAIN_HIJACK)
            key = (victim, kind)
            row = cache.get(key)
            if row is None:
                state = _propagate_core(idx, _attack_announcements(
                    victim, adversary, kind))
                bits, _ = _vp_bits(state, vp_idxs, victim, rov_filter=rov)
                row = [bits[vp] for vp in vp_order]
                cache[key] = row
            slab[gi, :, ri] = row
    return slab


_WORKER_STATE: dict = {}


def _matrix_worker(adversaries: list[int]) -> list[tuple[int, bytes]]:
    st = _WORKER_STATE
    out = []
    for adversary in adversaries:
        slab = _adversary_slab(st["idx"], adversary, st["plan"], st["vp_idxs"],
                               st["n_regimes"])
        out.append((adversary, slab.tobytes()))
    return out


def run_attack_matrix(graph: AsRelationshipGraph, prefix_groups: Sequence[PrefixGroup],
                      adversaries: Sequence[int], vp_ases: Iterable[int],
                      roas: RoaSet, modes: Iterable[RpkiMode],
                      workers: int | None = None,
                      progress=None) -> AttackBitStore:
    """Simulate every adversary against every prefix group under each regime.

    Regimes where validation is effective for a group store prepend-attack
    bits with origin filtering at the vantage points; others store plain
    equally-specific attack bits. An adversary inside a group's origin set
    hosts the prefix itself and scores 1 at every vantage point that can
    reach it (no announcement needed, so no regime can prevent it).
    Results are a pure function of the inputs, independent of worker count
    and scheduling. ``progress`` is an optional callable invoked with
    (done, total) adversary counts.
    """
    if not adversaries:
        raise InputError("adversary list is empty")
    regimes = tuple(r for r in _REGIME_ORDER if r in set(modes))
    if not regimes:
        raise InputError("no RPKI modes requested")
    idx = _indexed(graph)
    vp_idxs = {}
    for vp in sorted(set(vp_ases)):
        if vp not in idx.index:
            raise InputError(f"vantage point AS{vp} absent from graph")
        vp_idxs[vp] = idx.index[vp]
    adv_sorted = sorted(set(adversaries))
    if len(adv_sorted) != len(adversaries):
        raise InputError("duplicate adversaries")
    for adversary in adv_sorted:
        if adversary not in idx.index:
            raise InputError(f"adversary AS{adversary} absent from graph")
    plan = _group_plan(prefix_groups, roas, regimes)
    group_ids = [p[0] for p in plan]
    for _, victim, _, _ in plan:
        if victim not in idx.index:
            raise InputError(f"prefix origin AS{victim} absent from graph")

    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(adv_sorted)))

    slabs: dict[int, np.ndarray] = {}
    shape = (len(plan), len(vp_idxs), len(regimes))
    if workers == 1:
        for done, adversary in enumerate(adv_sorted, start=1):
            slabs[adversary] = _adversary_slab(idx, adversary, plan, vp_idxs,
                                               len(regimes))
            if progress:
                progress(done, len(adv_sorted))
    else:
        _WORKER_STATE.update(idx=idx, plan=plan, vp_idxs=vp_idxs,
                             n_regimes=len(regimes))
        try:
            chunks = [adv_sorted[i::workers] for i in range(workers)]
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers) as pool:
                done = 0
                for result in pool.imap_unordered(_matrix_worker, chunks):
                    for adversary, raw in result:
                        slabs[adversary] = np.frombuffer(
                            raw, dtype=np.uint8).reshape(shape)
                        done += 1
                        if progress:
                            progress(done, len(adv_sorted))
        finally:
            _WORKER_STATE.clear()

    bits = np.stack([slabs[a] for a in adv_sorted], axis=0)
    return AttackBitStore(adv_sorted, group_ids, list(vp_idxs), regimes, bits)


def valley_free_violations(graph: AsRelationshipGraph, state: RoutingState,
                           announcements: Sequence[Announcement]) -> list[tuple[int, tuple[int, ...]]]:
    """Check every chosen path follows up*-across?-down* over real edges.

    The announced tail of a path (fabricated by a prepend attack) is not a
    propagation step and is excluded from the walk. Returns (asn, path)
    pairs that violate the property; empty means all paths are valley-free.
    """
    anns = sorted(announcements, key=lambda a: -len(a.as_path))
    violations = []
    for asn, route in state.routes.items():
        if route.relation_class is RouteClass.SELF:
            continue  # announced paths are not propagation paths
        tail = None
        for ann in anns:
            if route.as_path[-len(ann.as_path):] == ann.as_path:
                tail = ann.as_path
                break
        if tail is None:
            violations.append((asn, route.as_path))
            continue
        hops = (asn,) + route.as_path[:len(route.as_path) - len(tail) + 1]
        # in export order the path must look like up* across? down*; walked
        # holder-to-announcer that reads as down* across? up*
        in_descent = True
        ok = True
        for importer, exporter in zip(hops, hops[1:]):
            if exporter in graph.customers(importer):
                step = "up"  # importer heard it from a customer: route climbed
            elif exporter in graph.peers(importer):
                step = "across"
            elif exporter in graph.providers(importer):
                step = "down"
            else:
                ok = False
                break
            if step == "up":
                in_descent = False
            elif not in_descent:
                ok = False
                break
            elif step == "across":
                in_descent = False
        if not ok:
            violations.append((asn, route.as_path))
    return violations
