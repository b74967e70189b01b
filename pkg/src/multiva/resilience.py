"""Effective resilience: which adversaries can satisfy a CA's quorum.

Per adversary, a vantage point is compromised when any of the domain's
target IPs (its region's attack surface) sits in a hijackable prefix
group. The quorum policy decides whether the compromised set suffices
for malicious issuance; resilience is the fraction of sampled adversaries
for which it does not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .bgp_sim import AttackBitStore
from .dns_surface import AttackSurface
from .errors import ConsistencyError, InputError
from .rpki import RpkiMode
from .topology import IPNetwork, PrefixEntry, PrefixGroup, PrefixTable

ROLE_PRIMARY = "primary"
ROLE_REMOTE = "remote"


@dataclass(frozen=True)
class VantagePoint:
    """A validation location: the hosting AS plus its measurement region."""

    id: str
    host_as: int
    region: str
    role: str = ROLE_REMOTE

    def __post_init__(self):
        if self.role not in (ROLE_PRIMARY, ROLE_REMOTE):
            raise InputError(f"vantage point role must be primary or remote, "
                             f"got {self.role!r}")


def check_deployment(deployment: Iterable[VantagePoint]) -> tuple[VantagePoint, ...]:
    vps = tuple(sorted(deployment, key=lambda v: v.id))
    if len({v.id for v in vps}) != len(vps):
        raise InputError("duplicate vantage point ids in deployment")
    primaries = [v for v in vps if v.role == ROLE_PRIMARY]
    if len(primaries) != 1:
        raise InputError(f"deployment needs exactly one primary vantage point, "
                         f"got {len(primaries)}")
    return vps


@dataclass(frozen=True)
class QuorumPolicy:
    """Predicate over the hijacked vantage point set permitting issuance.

    ``full`` requires every vantage point compromised. The failure-tolerant
    policy requires the primary compromised plus all but at most
    ``max_remote_failures`` remotes. ``primary_required=False`` drops the
    primary's special role for sensitivity analysis, making the tolerant
    policy a plain all-but-f threshold.
    """

    kind: str
    max_remote_failures: int = 0
    primary_required: bool = True

    def __post_init__(self):
        if self.kind not in ("full", "allow_remote_failures"):
            raise InputError(f"unknown quorum kind {self.kind!r}")
        if self.max_remote_failures < 0:
            raise InputError("max_remote_failures must be >= 0")

    @staticmethod
    def full() -> QuorumPolicy:
        return QuorumPolicy("full")

    @staticmethod
    def allow_remote_failures(f: int, primary_required: bool = True) -> QuorumPolicy:
        return QuorumPolicy("allow_remote_failures", f, primary_required)

    def describe(self) -> str:
        if self.kind == "full":
            return "full"
        tag = f"remote-failures:{self.max_remote_failures}"
        if not self.primary_required:
            tag += ":no-primary"
        return tag


def parse_policy(text: str) -> QuorumPolicy:
    text = text.strip()
    if text == "full":
        return QuorumPolicy.full()
    parts = text.split(":")
    if parts[0] == "remote-failures" and len(parts) in (2, 3):
        try:
            f = int(parts[1])
        except ValueError:
            raise InputError(f"bad failure count in policy {text!r}") from None
        primary_required = not (len(parts) == 3 and parts[2] == "no-primary")
        return QuorumPolicy.allow_remote_failures(f, primary_required)
    raise InputError(
        f"unknown quorum policy {text!r}; use 'full' or 'remote-failures:<f>'")


def quorum_satisfied(policy: QuorumPolicy, hijacked: Iterable[VantagePoint],
                     deployment: Iterable[VantagePoint]) -> int:
    """1 if compromising exactly ``hijacked`` permits malicious issuance."""
    vps = check_deployment(deployment)
    hijacked_set = set(hijacked)
    if not hijacked_set <= set(vps):
        raise InputError("hijacked vantage points must belong to the deployment")
    if policy.kind == "full":
        return int(hijacked_set == set(vps))
    if policy.primary_required:
        primary = next(v for v in vps if v.role == ROLE_PRIMARY)
        if primary not in hijacked_set:
            return 0
        remotes = {v for v in vps if v.role == ROLE_REMOTE}
        return int(len(remotes - hijacked_set) <= policy.max_remote_failures)
    return int(len(set(vps) - hijacked_set) <= policy.max_remote_failures)


@dataclass(frozen=True)
class TargetIp:
    ip: str
    group_id: str | None  # None marks an unroutable target
    prefix: IPNetwork | None


@dataclass(frozen=True)
class DomainTargets:
    """Per-region hijack targets of one domain, resolved to prefix groups."""

    domain: str
    by_region: Mapping[str, tuple[TargetIp, ...]]

    def targets_for(self, vp: VantagePoint) -> tuple[TargetIp, ...]:
        try:
            return self.by_region[vp.region]
        except KeyError:
            raise ConsistencyError(
                f"{self.domain}: no attack surface for region {vp.region!r}") from None

    def unroutable_ips(self) -> tuple[str, ...]:
        out = sorted({t.ip for targets in self.by_region.values()
                      for t in targets if t.group_id is None})
        return tuple(out)


def group_prefix_map(groups: Sequence[PrefixGroup]) -> tuple[PrefixTable, dict[IPNetwork, str]]:
    """Rebuild the lookup table and prefix-to-group map behind a grouping."""
    prefix_to_group: dict[IPNetwork, str] = {}
    entries = []
    for group in groups:
        for prefix in group.member_prefixes:
            if prefix in prefix_to_group:
                raise InputError(f"prefix {prefix} appears in multiple groups")
            prefix_to_group[prefix] = group.group_id
            entries.append(PrefixEntry(prefix, group.origin_set))
    return PrefixTable(entries), prefix_to_group


def build_domain_targets(domain: str, surfaces: Mapping[str, AttackSurface],
                         groups: Sequence[PrefixGroup],
                         a_records_only: bool = False) -> DomainTargets:
    """Resolve a domain's per-region surface IPs to prefix groups.

    IPs with no covering prefix become unroutable targets: they contribute
    nothing to the attack disjunction but stay visible for data-quality
    reporting.
    """
    table, prefix_to_group = group_prefix_map(groups)
    by_region = {}
    for region, surface in surfaces.items():
        ips = surface.a_record_ips if a_records_only else surface.target_ips
        targets = []
        for ip in sorted(ips):
            entry = table.lookup(ip)
            if entry is None:
                targets.append(TargetIp(ip, None, None))
            else:
                targets.append(TargetIp(ip, prefix_to_group[entry.prefix],
                                        entry.prefix))
        by_region[region] = tuple(targets)
    return DomainTargets(domain, by_region)


def alpha_star(bits: AttackBitStore, targets: DomainTargets, adversary: int,
               vp: VantagePoint, regime: RpkiMode) -> int:
    """1 if the adversary can hijack any target IP as seen from this VP."""
    for target in targets.targets_for(vp):
        if target.group_id is None:
            continue
        if bits.get(adversary, target.group_id, vp.host_as, regime):
            return 1
    return 0


def _vp_alpha_vectors(bits: AttackBitStore, targets: DomainTargets,
                      deployment: Sequence[VantagePoint],
                      adversaries: Sequence[int],
                      regime: RpkiMode) -> dict[str, np.ndarray]:
    """alpha-star per vantage point for every adversary at once."""
    adv_idx = np.array([bits.adversary_index(a) for a in adversaries],
                       dtype=np.int64)
    r_idx = bits.regime_index(regime)
    vectors = {}
    for vp in deployment:
        group_ids = sorted({t.group_id for t in targets.targets_for(vp)
                            if t.group_id is not None})
        if not group_ids:
            vectors[vp.id] = np.zeros(len(adversaries), dtype=bool)
            continue
        g_idx = np.array([bits.group_index(g) for g in group_ids], dtype=np.int64)
        v_idx = bits.vp_index(vp.host_as)
        vectors[vp.id] = bits.bits[adv_idx][:, g_idx, v_idx, r_idx].any(axis=1)
    return vectors


def domain_resilience(bits: AttackBitStore, targets: DomainTargets,
                      deployment: Iterable[VantagePoint], policy: QuorumPolicy,
                      adversaries: Sequence[int], regime: RpkiMode) -> float:
    """Fraction of adversaries that cannot satisfy the quorum for a domain."""
    if not adversaries:
        raise InputError("adversary list is empty")
    vps = check_deployment(deployment)
    vectors = _vp_alpha_vectors(bits, targets, vps, adversaries, regime)
    successes = 0
    for ai in range(len(adversaries)):
        hijacked = {vp for vp in vps if vectors[vp.id][ai]}
        successes += quorum_satisfied(policy, hijacked, vps)
    return 1.0 - successes / len(adversaries)


@dataclass(frozen=True)
class Scenario:
    """One resilience experiment: deployment, quorum, regime, target scope."""

    scenario_id: str
    deployment: tuple[VantagePoint, ...]
    policy: QuorumPolicy
    regime: RpkiMode
    a_records_only: bool = False

    def manifest_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "deployment": [
                {"id": v.id, "host_as": v.host_as, "region": v.region,
                 "role": v.role} for v in self.deployment],
            "policy": self.policy.describe(),
            "regime": self.regime.value,
            "a_records_only": self.a_records_only,
        }


@dataclass(frozen=True)
class ScenarioSummary:
    scenario_id: str
    domains: int
    median: float
    mean: float
    cdf: tuple[tuple[int, float], ...]  # (percentile, gamma) at 1% steps


def lower_median(values: Sequence[float]) -> float:
    if not values:
        raise InputError("median of empty sequence")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _cdf_points(values: Sequence[float]) -> tuple[tuple[int, float], ...]:
    ordered = sorted(values)
    n = len(ordered)
    return tuple((k, ordered[(k * (n - 1)) // 100]) for k in range(101))


@dataclass(frozen=True)
class ResilienceReport:
    """Per-domain gamma values plus per-scenario distribution summaries."""

    rows: tuple[tuple[str, str, float], ...]  # (domain, scenario_id, gamma)
    summaries: Mapping[str, ScenarioSummary]
    skipped: tuple[tuple[str, str, str], ...]  # (domain, scenario_id, reason)
    unroutable: Mapping[str, tuple[str, ...]]

    def gamma(self, domain: str, scenario_id: str) -> float:
        for d, s, g in self.rows:
            if d == domain and s == scenario_id:
                return g
        raise KeyError((domain, scenario_id))

    def gammas(self, scenario_id: str) -> list[float]:
        return [g for _, s, g in self.rows if s == scenario_id]

    def write_domain_csv(self, stream: IO[str]) -> None:
        stream.write("domain,scenario_id,gamma\n")
        for domain, scenario_id, gamma in self.rows:
            stream.write(f"{domain},{scenario_id},{gamma:.6f}\n")
        for domain, scenario_id, reason in self.skipped:
            stream.write(f"{domain},{scenario_id},skipped:{reason}\n")

    def write_summary_csv(self, stream: IO[str]) -> None:
        stream.write("scenario_id,domains,median_gamma,mean_gamma\n")
        for scenario_id in sorted(self.summaries):
            s = self.summaries[scenario_id]
            stream.write(f"{scenario_id},{s.domains},{s.median:.6f},{s.mean:.6f}\n")

    def write_cdf_csv(self, stream: IO[str]) -> None:
        stream.write("scenario_id,percentile,gamma\n")
        for scenario_id in sorted(self.summaries):
            for pct, value in self.summaries[scenario_id].cdf:
                stream.write(f"{scenario_id},{pct},{value:.6f}\n")


def batch_resilience(domains: Sequence[str],
                     scenarios: Sequence[Scenario],
                     bits: AttackBitStore,
                     surfaces: Mapping[tuple[str, str], AttackSurface],
                     adversaries: Sequence[int],
                     groups: Sequence[PrefixGroup]) -> ResilienceReport:
    """Evaluate every scenario for every domain; deterministic output.

    ``surfaces`` maps (domain, region) to the region's attack surface.
    Domains with no surface at all, or missing a region some scenario
    needs, are recorded as skipped rather than silently dropped.
    """
    by_id: dict[str, Scenario] = {}
    for scenario in scenarios:
        prior = by_id.setdefault(scenario.scenario_id, scenario)
        if prior != scenario:
            raise InputError(
                f"conflicting scenarios share id {scenario.scenario_id!r}")
    rows: list[tuple[str, str, float]] = []
    skipped: list[tuple[str, str, str]] = []
    unroutable: dict[str, tuple[str, ...]] = {}
    targets_cache: dict[tuple[str, bool], DomainTargets] = {}
    for domain in domains:
        domain_surfaces = {region: surface for (d, region), surface
                           in surfaces.items() if d == domain}
        if not domain_surfaces:
            skipped.append((domain, "*", "no attack surface resolved"))
            continue
        for scenario in scenarios:
            key = (domain, scenario.a_records_only)
            targets = targets_cache.get(key)
            if targets is None:
                targets = build_domain_targets(
                    domain, domain_surfaces, groups, scenario.a_records_only)
                targets_cache[key] = targets
                if not scenario.a_records_only and targets.unroutable_ips():
                    unroutable[domain] = targets.unroutable_ips()
            missing = [vp.region for vp in scenario.deployment
                       if vp.region not in targets.by_region]
            if missing:
                skipped.append((domain, scenario.scenario_id,
                                f"no surface for region {missing[0]}"))
                continue
            gamma = domain_resilience(bits, targets, scenario.deployment,
                                      scenario.policy, adversaries, scenario.regime)
            rows.append((domain, scenario.scenario_id, gamma))
    summaries = {}
    for scenario in by_id.values():
        values = [g for _, s, g in rows if s == scenario.scenario_id]
        if not values:
            continue
        summaries[scenario.scenario_id] = ScenarioSummary(
            scenario_id=scenario.scenario_id,
            domains=len(values),
            median=lower_median(values),
            mean=sum(values) / len(values),
            cdf=_cdf_points(values),
        )
    return ResilienceReport(tuple(rows), summaries, tuple(skipped), unroutable)


def load_deployment(stream: IO[str] | str) -> tuple[VantagePoint, ...]:
    """Read a deployment JSON document: {"vps": [{id, host_as, region, role}]}."""
    doc = json.loads(stream) if isinstance(stream, str) else json.load(stream)
    vps = []
    for item in doc.get("vps", ()):
        try:
            vps.append(VantagePoint(str(item["id"]), int(item["host_as"]),
                                    str(item["region"]), str(item["role"])))
        except KeyError as exc:
            raise InputError(f"deployment vp missing field {exc.args[0]!r}") from None
    return check_deployment(vps)
