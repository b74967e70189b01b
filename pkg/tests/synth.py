"""Synthetic topologies and DNS worlds for tests and acceptance fixtures."""

from __future__ import annotations

import random

from multiva.topology import AsRelationshipGraph, Relation


def random_topology(n: int, seed: int, tier1: int | None = None,
                    peer_prob: float = 0.15,
                    max_providers: int = 3) -> AsRelationshipGraph:
    """Connected AS graph with an acyclic provider hierarchy.

    ASNs are drawn randomly so that the lowest-ASN tie break is not
    correlated with topological position. Nodes are ranked; every
    non-tier-1 node buys transit from one to three higher-ranked nodes,
    tier-1 nodes form a peering clique, and extra peer edges appear with
    ``peer_prob`` per node.
    """
    if n < 1:
        raise ValueError("need at least one AS")
    rng = random.Random(seed)
    asns = rng.sample(range(1, max(10 * n, 64)), n)
    if tier1 is None:
        tier1 = 1 if n < 5 else max(2, n // 50)
    tier1 = min(tier1, n)
    edges: dict[tuple[int, int], Relation] = {}

    def connect(a: int, b: int, rel: Relation):
        key = (a, b) if rel is Relation.PROVIDER_TO_CUSTOMER else (min(a, b),
                                                                   max(a, b))
        if (a, b) in edges or (b, a) in edges or key in edges:
            return
        if rel is Relation.PEER_TO_PEER and (
                (a, b) in edges or (b, a) in edges):
            return
        edges[key] = rel

    for i in range(tier1):
        for j in range(i + 1, tier1):
            connect(asns[i], asns[j], Relation.PEER_TO_PEER)
    for i in range(tier1, n):
        k = rng.randint(1, min(max_providers, i))
        for provider_rank in rng.sample(range(i), k):
            connect(asns[provider_rank], asns[i], Relation.PROVIDER_TO_CUSTOMER)
    for i in range(tier1, n):
        if rng.random() < peer_prob and i > tier1:
            j = rng.randrange(tier1, i)
            a, b = asns[i], asns[j]
            if not any(k in edges for k in ((a, b), (b, a))):
                connect(a, b, Relation.PEER_TO_PEER)
    return AsRelationshipGraph(edges, extra_nodes=asns)


def topology_lines(graph: AsRelationshipGraph) -> str:
    from multiva.topology import serialize_as_relationships
    return serialize_as_relationships(graph)


def as_prefix(index: int) -> str:
    """Deterministic /24 for the index-th AS of a synthetic world."""
    return f"10.{(index >> 8) & 255}.{index & 255}.0/24"


def as_host_ip(index: int, host: int = 10) -> str:
    return f"10.{(index >> 8) & 255}.{index & 255}.{host}"


class DnsWorld:
    """A synthetic measurement world: topology, prefixes, ROAs, zones, domains.

    Every AS owns one /24. Domains get a webserver AS and a DNS provider;
    providers host two nameservers in their own AS. The TLD is signed, so
    only the domain zone's DNSSEC flag decides whether nameserver IPs
    join the attack surface.
    """

    def __init__(self, seed: int, n_as: int = 200, n_domains: int = 50,
                 n_providers: int = 8, roa_coverage: float = 0.6,
                 provider_signed: float = 0.0, domain_signed: float = 0.2,
                 regions: tuple[str, ...] = ("region-a", "region-b")):
        self.rng = random.Random(seed)
        self.graph = random_topology(n_as, seed + 1)
        self.asns = sorted(self.graph.nodes)
        self.index_of = {asn: i for i, asn in enumerate(self.asns)}
        self.regions = regions
        self.prefix_of = {asn: as_prefix(i) for i, asn in enumerate(self.asns)}

        stubs = [a for a in self.asns if not self.graph.customers(a)]
        self.provider_as = self.rng.sample(stubs, n_providers)
        web_pool = [a for a in stubs if a not in self.provider_as]

        self.domains: dict[str, dict] = {}
        zones = {".": {"ns": ["a.root-servers.test."], "ds": False,
                       "glue": {"a.root-servers.test.": ["192.0.2.1"]}},
                 "test.": {"ns": ["a.gtld.test."], "ds": True,
                           "glue": {"a.gtld.test.": ["192.0.2.2"]}}}
        names: dict[str, dict] = {}
        region_names: dict[str, dict] = {r: {} for r in regions}
        for j, pas in enumerate(self.provider_as):
            zone = f"p{j}.test."
            ns1, ns2 = f"ns1.{zone}", f"ns2.{zone}"
            ip1 = as_host_ip(self.index_of[pas], 53)
            ip2 = as_host_ip(self.index_of[pas], 54)
            signed = self.rng.random() < provider_signed
            zones[zone] = {"ns": [ns1, ns2], "ds": signed,
                           "glue": {ns1: [ip1], ns2: [ip2]}}
            names[ns1] = {"a": [[ip1]]}
            names[ns2] = {"a": [[ip2]]}
        for i in range(n_domains):
            domain = f"dom{i:03d}.test."
            web_as = self.rng.choice(web_pool)
            provider_idx = self.rng.randrange(n_providers)
            signed = self.rng.random() < domain_signed
            web_ip = as_host_ip(self.index_of[web_as], 10 + i % 40)
            provider_zone = f"p{provider_idx}.test."
            # referral without glue: the provider's nameservers resolve via
            # their own (glued) zone
            zones[domain] = {"ns": [f"ns1.{provider_zone}",
                                    f"ns2.{provider_zone}"],
                            "ds": signed, "glue": {}}
            names[domain] = {"a": [[web_ip]]}
            alt_as = self.rng.choice(web_pool)
            if alt_as != web_as and self.rng.random() < 0.3:
                alt_ip = as_host_ip(self.index_of[alt_as], 10 + i % 40)
                region_names[regions[-1]][domain] = {"a": [[alt_ip]]}
                alt = alt_as
            else:
                alt = None
            self.domains[domain] = {"web_as": web_as, "alt_as": alt,
                                    "provider": self.provider_as[provider_idx],
                                    "signed": signed}
        self.fixture = {"zones": zones, "names": names,
                        "regions": {r: {"names": v}
                                    for r, v in region_names.items() if v}}
        covered = self.rng.sample(self.asns,
                                  int(round(roa_coverage * len(self.asns))))
        self.roa_covered = set(covered)

    def prefix_lines(self) -> str:
        rows = [f"{self.prefix_of[asn]},{asn}" for asn in self.asns]
        return "\n".join(rows) + "\n"

    def roa_lines(self) -> str:
        rows = [f"{asn},{self.prefix_of[asn]},24"
                for asn in sorted(self.roa_covered)]
        return "\n".join(rows) + "\n"

    def domain_list(self) -> list[str]:
        return sorted(self.domains)


def attack_instances(count: int, seed0: int, max_as: int = 12):
    """Random (graph, announcements) cases mixing relations and attack kinds."""
    from multiva.bgp_sim import Announcement

    for case in range(count):
        rng = random.Random(seed0 + case)
        n = rng.randint(3, max_as)
        graph = random_topology(n, seed0 * 1000 + case,
                                peer_prob=rng.choice([0.0, 0.2, 0.5]))
        nodes = sorted(graph.nodes)
        victim = rng.choice(nodes)
        scenario = case % 3
        if scenario == 0:
            anns = [Announcement.legitimate(victim)]
        else:
            adversary = rng.choice([a for a in nodes if a != victim])
            if scenario == 1:
                attack = Announcement.plain_hijack(adversary)
            else:
                attack = Announcement.prepend_hijack(adversary, victim)
            anns = [Announcement.legitimate(victim), attack]
        yield graph, anns


WEB_IP = "198.51.100.10"
NS_IP = "203.0.113.53"


def pipeline_world() -> dict[str, str]:
    """File contents for the 6-AS end-to-end fixture.

    AS10 is a transit provider peered with AS30; AS20 serves the web host
    (AS40) and the nameserver host (AS50); AS60 is a stub under AS30.
    The web prefix carries a ROA, the nameserver prefix does not.
    """
    topology = "\n".join([
        "10|20|-1",
        "10|30|-1",
        "20|40|-1",
        "20|50|-1",
        "30|60|-1",
        "20|30|0",
    ]) + "\n"
    prefixes = ("198.51.100.0/24,40\n"
                "203.0.113.0/24,50\n"
                "192.0.2.0/24,60\n")
    roas = "40,198.51.100.0/24,24\n"
    import json as _json
    fixture = _json.dumps({
        "zones": {
            ".": {"ns": ["a.root-servers.test."], "ds": False,
                  "glue": {"a.root-servers.test.": ["198.41.0.4"]}},
            "test.": {"ns": ["a.gtld.test."], "ds": True,
                      "glue": {"a.gtld.test.": ["192.0.2.2"]}},
            "shop.test.": {"ns": ["ns.shop.test."], "ds": False,
                           "glue": {"ns.shop.test.": [NS_IP]}},
        },
        "names": {
            "shop.test.": {"a": [[WEB_IP]]},
            "ns.shop.test.": {"a": [[NS_IP]]},
        },
    }, indent=1)
    deployment = _json.dumps({"vps": [
        {"id": "dc:home", "host_as": 30, "region": "region-a",
         "role": "primary"},
        {"id": "aws:r1", "host_as": 10, "region": "region-b",
         "role": "remote"},
    ]})
    catalog = ("aws:x,aws,Testville,20,region-a\n"
               "gcp:y,gcp,Testburg,60,region-b\n")
    peers = "aws:x,20,60\ngcp:y,60,20\n"
    return {
        "topology.txt": topology,
        "prefixes.csv": prefixes,
        "roas.csv": roas,
        "fixture.json": fixture,
        "domains.txt": "shop.test.\n",
        "deployment.json": deployment,
        "catalog.csv": catalog,
        "dc_peers.csv": peers,
    }


def scale_prefix_world(graph: AsRelationshipGraph, n_groups: int, seed: int,
                       hosts: int = 300) -> str:
    """Prefix-origin CSV giving exactly n_groups distinct origin sets.

    Origins concentrate on a pool of hosting ASes (heavy reuse, like real
    route tables); roughly a third of the groups are multi-origin pairs.
    """
    rng = random.Random(seed)
    asns = sorted(graph.nodes)
    pool = rng.sample(asns, min(hosts, len(asns)))
    origin_sets: list[frozenset[int]] = []
    seen = set()
    for asn in pool:
        if len(origin_sets) == n_groups:
            break
        s = frozenset((asn,))
        origin_sets.append(s)
        seen.add(s)
    while len(origin_sets) < n_groups:
        pair = frozenset(rng.sample(pool, 2))
        if pair not in seen:
            seen.add(pair)
            origin_sets.append(pair)
    lines = []
    block = 0
    for origin_set in origin_sets:
        for _ in range(rng.randint(1, 2)):
            prefix = f"10.{(block >> 8) & 255}.{block & 255}.0/24"
            block += 1
            for asn in sorted(origin_set):
                lines.append(f"{prefix},{asn}")
    return "\n".join(lines) + "\n"
