"""Full-graph DNS attack surface: every IP contactable while resolving a name.

Walks the delegation chain from the root to the authoritative zone. The
root contributes nothing (root server addresses ship in OS hint files and
root responses are signed); a zone whose parent referral carried a DS
record contributes nothing; every other zone contributes its nameserver
addresses, where glueless nameservers are resolved recursively and their
whole resolution surface joins in. The domain's own address records over
repeated lookups complete the surface.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .errors import InputError, ResolutionError

DEFAULT_REPEATS = 10
MAX_GLUELESS_DEPTH = 10
MAX_CNAME_LINKS = 8

# Measurement regions used by the reference deployment's resolver fleet,
# spanning three continents.
MEASUREMENT_REGIONS = (
    "us-east-2",        # North America (Ohio)
    "us-west-2",        # North America (Oregon)
    "eu-west-3",        # Europe (Paris)
    "eu-central-1",     # Europe (Frankfurt)
    "ap-southeast-1",   # Asia (Singapore)
    "ap-northeast-1",   # Asia (Tokyo)
)


def fqdn(name: str) -> str:
    """Normalize to a lowercase, dot-terminated domain name."""
    name = name.strip().lower()
    if not name.endswith("."):
        name += "."
    if name != ".":
        for label in name[:-1].split("."):
            if not 0 < len(label) <= 63 or label != label.strip():
                raise InputError(f"invalid domain name {name!r}")
    if len(name) > 254:
        raise InputError(f"domain name too long: {name!r}")
    return name


def _canon_ip(text: str) -> str:
    try:
        return str(ipaddress.ip_address(text.strip()))
    except ValueError:
        raise InputError(f"invalid IP address {text!r}") from None


def _zone_suffixes(name: str) -> list[str]:
    """Candidate zone cuts from the root toward ``name``, inclusive."""
    if name == ".":
        return ["."]
    labels = name[:-1].split(".")
    out = ["."]
    for i in range(len(labels) - 1, -1, -1):
        out.append(".".join(labels[i:]) + ".")
    return out


@dataclass(frozen=True)
class DelegationStep:
    """One referral: the child zone as described by its parent's response."""

    zone: str
    nameservers: tuple[str, ...]
    ds_present: bool
    glue: Mapping[str, frozenset[str]]


class ZoneOracle:
    """Zone data backend; deterministic per (zone, region, attempt) in fixtures."""

    def delegation(self, zone: str, region: str) -> DelegationStep | None:
        raise NotImplementedError

    def address_records(self, name: str, region: str,
                        attempt: int) -> tuple[frozenset[str], frozenset[str]]:
        raise NotImplementedError

    def cname_target(self, name: str, region: str) -> str | None:
        return None


class FixtureZoneOracle(ZoneOracle):
    """Deterministic oracle over a fixture document.

    Document shape::

        {"zones": {"com.": {"ns": [names], "ds": bool, "glue": {name: [ips]}}},
         "names": {"example.com.": {"a": [[ips per attempt], ...],
                                    "aaaa": [...], "cname": "other.net."}},
         "regions": {"eu-central-1": {"zones": {...}, "names": {...}}}}

    Attempt ``i`` of a lookup returns entry ``i % len(attempts)``, so answer
    lists rotate. Region sections override whole zone or name entries.
    """

    def __init__(self, document: Mapping):
        self._zones = {fqdn(z): dict(v) for z, v in document.get("zones", {}).items()}
        self._names = {fqdn(n): dict(v) for n, v in document.get("names", {}).items()}
        self._regions = {}
        for region, section in document.get("regions", {}).items():
            self._regions[region] = {
                "zones": {fqdn(z): dict(v)
                          for z, v in section.get("zones", {}).items()},
                "names": {fqdn(n): dict(v)
                          for n, v in section.get("names", {}).items()},
            }

    @staticmethod
    def from_json(stream: IO[str] | str) -> FixtureZoneOracle:
        if isinstance(stream, str):
            return FixtureZoneOracle(json.loads(stream))
        return FixtureZoneOracle(json.load(stream))

    def _zone_entry(self, zone: str, region: str) -> Mapping | None:
        regional = self._regions.get(region, {}).get("zones", {})
        if zone in regional:
            return regional[zone]
        return self._zones.get(zone)

    def _name_entry(self, name: str, region: str) -> Mapping | None:
        regional = self._regions.get(region, {}).get("names", {})
        if name in regional:
            return regional[name]
        return self._names.get(name)

    def delegation(self, zone: str, region: str) -> DelegationStep | None:
        entry = self._zone_entry(fqdn(zone), region)
        if entry is None:
            return None
        glue = {fqdn(name): frozenset(_canon_ip(ip) for ip in ips)
                for name, ips in entry.get("glue", {}).items()}
        return DelegationStep(
            zone=fqdn(zone),
            nameservers=tuple(fqdn(n) for n in entry.get("ns", ())),
            ds_present=bool(entry.get("ds", False)),
            glue=glue,
        )

    def address_records(self, name: str, region: str,
                        attempt: int) -> tuple[frozenset[str], frozenset[str]]:
        entry = self._name_entry(fqdn(name), region)
        if entry is None:
            return frozenset(), frozenset()

        def pick(attempts: Sequence[Sequence[str]]) -> frozenset[str]:
            if not attempts:
                return frozenset()
            return frozenset(_canon_ip(ip) for ip in attempts[attempt % len(attempts)])

        return pick(entry.get("a", ())), pick(entry.get("aaaa", ()))

    def cname_target(self, name: str, region: str) -> str | None:
        entry = self._name_entry(fqdn(name), region)
        if entry is None or "cname" not in entry:
            return None
        return fqdn(entry["cname"])


@dataclass(frozen=True)
class AttackSurface:
    """Per (domain, region) hijackable address set with provenance splits."""

    domain: str
    region: str
    target_ips: frozenset[str]
    a_record_ips: frozenset[str]
    nameserver_ips: frozenset[str]
    dnssec_cut_zones: tuple[str, ...]
    glueless_names: tuple[str, ...]

    def __post_init__(self):
        if self.target_ips != self.a_record_ips | self.nameserver_ips:
            raise InputError("target_ips must equal a_record_ips | nameserver_ips")

    def to_json_dict(self) -> dict:
        return {
            "domain": self.domain,
            "region": self.region,
            "target_ips": sorted(self.target_ips),
            "a_record_ips": sorted(self.a_record_ips),
            "nameserver_ips": sorted(self.nameserver_ips),
            "dnssec_cut_zones": list(self.dnssec_cut_zones),
            "glueless_names": list(self.glueless_names),
        }

    @staticmethod
    def from_json_dict(doc: Mapping) -> AttackSurface:
        return AttackSurface(
            domain=doc["domain"],
            region=doc["region"],
            target_ips=frozenset(doc["target_ips"]),
            a_record_ips=frozenset(doc["a_record_ips"]),
            nameserver_ips=frozenset(doc["nameserver_ips"]),
            dnssec_cut_zones=tuple(doc["dnssec_cut_zones"]),
            glueless_names=tuple(doc["glueless_names"]),
        )


class _Resolver:
    def __init__(self, oracle: ZoneOracle, region: str, repeats: int,
                 apply_dnssec_cuts: bool, max_depth: int):
        self.oracle = oracle
        self.region = region
        self.repeats = repeats
        self.apply_dnssec_cuts = apply_dnssec_cuts
        self.max_depth = max_depth
        self.ns_ips: set[str] = set()
        self.cuts: list[str] = []
        self.glueless: list[str] = []

    def addresses(self, name: str) -> frozenset[str]:
        """Union of A and AAAA answers across all repeated lookups."""
        out: set[str] = set()
        for attempt in range(self.repeats):
            a, aaaa = self.oracle.address_records(name, self.region, attempt)
            out.update(a)
            out.update(aaaa)
        return frozenset(out)

    def chain(self, name: str) -> list[DelegationStep]:
        steps = []
        for zone in _zone_suffixes(name):
            step = self.oracle.delegation(zone, self.region)
            if step is not None:
                steps.append(step)
        if not steps or steps[0].zone != ".":
            raise ResolutionError(f"no root zone data while resolving {name}")
        return steps

    def walk_zones(self, name: str, stack: tuple[str, ...]) -> None:
        """Accumulate nameserver contributions along ``name``'s chain."""
        for step in self.chain(name):
            if step.zone == ".":
                continue  # root servers are pinned in resolver hint files
            if self.apply_dnssec_cuts and step.ds_present:
                if step.zone not in self.cuts:
                    self.cuts.append(step.zone)
                continue
            for ns_name in step.nameservers:
                self.ns_ips.update(
                    self.nameserver_surface(ns_name, step.glue.get(ns_name), stack))

    def nameserver_surface(self, ns_name: str, glue: frozenset[str] | None,
                           stack: tuple[str, ...]) -> frozenset[str]:
        if glue:
            return frozenset(glue)
        if ns_name not in self.glueless:
            self.glueless.append(ns_name)
        if ns_name in stack:
            cycle = " -> ".join((*stack, ns_name))
            raise ResolutionError(f"glueless nameserver cycle: {cycle}")
        if len(stack) >= self.max_depth:
            raise ResolutionError(
                f"glueless recursion deeper than {self.max_depth} at {ns_name}")
        before = set(self.ns_ips)
        self.walk_zones(ns_name, (*stack, ns_name))
        added = self.ns_ips - before
        return frozenset(added) | self.addresses(ns_name)


def resolve_attack_surface(oracle: ZoneOracle, domain: str, region: str,
                           repeats: int = DEFAULT_REPEATS,
                           apply_dnssec_cuts: bool = True,
                           max_depth: int = MAX_GLUELESS_DEPTH,
                           max_cname: int = MAX_CNAME_LINKS) -> AttackSurface:
    """Compute the full-graph attack surface of a domain from one region.

    Follows CNAME redirections at the queried name (each link's delegation
    chain joins the surface) up to ``max_cname`` links. Raises
    ResolutionError for unresolvable domains (with the partial surface
    attached), delegation cycles, and depth overruns.
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    domain = fqdn(domain)
    res = _Resolver(oracle, region, repeats, apply_dnssec_cuts, max_depth)

    name = domain
    visited = [name]
    for _ in range(max_cname + 1):
        res.walk_zones(name, ())
        target = oracle.cname_target(name, region)
        if target is None:
            break
        if target in visited:
            cycle = " -> ".join((*visited, target))
            raise ResolutionError(f"CNAME cycle: {cycle}")
        visited.append(target)
        name = target
    else:
        raise ResolutionError(
            f"CNAME chain for {domain} exceeds {max_cname} links")

    a_ips = res.addresses(name)
    surface = AttackSurface(
        domain=domain,
        region=region,
        target_ips=frozenset(a_ips | res.ns_ips),
        a_record_ips=a_ips,
        nameserver_ips=frozenset(res.ns_ips),
        dnssec_cut_zones=tuple(res.cuts),
        glueless_names=tuple(res.glueless),
    )
    if not a_ips:
        raise ResolutionError(
            f"{domain} did not resolve to any address in {repeats} attempts",
            partial=surface)
    return surface


def nameserver_surface(oracle: ZoneOracle, ns_name: str,
                       glue: Iterable[str] | None, region: str,
                       repeats: int = DEFAULT_REPEATS,
                       apply_dnssec_cuts: bool = True,
                       max_depth: int = MAX_GLUELESS_DEPTH) -> frozenset[str]:
    """Surface of reaching one nameserver: its glue, or its full resolution."""
    res = _Resolver(oracle, region, repeats, apply_dnssec_cuts, max_depth)
    glue_set = frozenset(_canon_ip(ip) for ip in glue) if glue else None
    return res.nameserver_surface(fqdn(ns_name), glue_set, ())


def surface_union_across_regions(surfaces: Sequence[AttackSurface]) -> AttackSurface:
    """Merge per-region surfaces of one domain into an all-regions view."""
    if not surfaces:
        raise InputError("no surfaces to union")
    domains = {s.domain for s in surfaces}
    if len(domains) > 1:
        raise InputError(f"cannot union surfaces of different domains: {domains}")
    cuts: list[str] = []
    glueless: list[str] = []
    for s in surfaces:
        cuts.extend(z for z in s.dnssec_cut_zones if z not in cuts)
        glueless.extend(n for n in s.glueless_names if n not in glueless)
    return AttackSurface(
        domain=surfaces[0].domain,
        region="all",
        target_ips=frozenset().union(*(s.target_ips for s in surfaces)),
        a_record_ips=frozenset().union(*(s.a_record_ips for s in surfaces)),
        nameserver_ips=frozenset().union(*(s.nameserver_ips for s in surfaces)),
        dnssec_cut_zones=tuple(cuts),
        glueless_names=tuple(glueless),
    )


def load_surface_log(stream: Iterable[str]) -> dict[tuple[str, str], AttackSurface]:
    """Read a JSONL surface log into a (domain, region) -> surface map."""
    out: dict[tuple[str, str], AttackSurface] = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        if doc.get("error"):
            continue
        surface = AttackSurface.from_json_dict(doc)
        out[(surface.domain, surface.region)] = surface
    return out
