"""Deployment exploration: candidate vantage point sets ranked by resilience.

Enumerates added datacenters under cloud constraints, crosses them with
quorum policies, evaluates median resilience over a domain sample, and
reports the peer-overlap diagnostic that explains cross-cloud routing
diversity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Mapping, Sequence

from .bgp_sim import AttackBitStore
from .dns_surface import AttackSurface
from .errors import IngestionError, InputError
from .resilience import (QuorumPolicy, ROLE_REMOTE, Scenario, VantagePoint,
                         batch_resilience, check_deployment)
from .rpki import RpkiMode
from .topology import DatacenterPeerSet, PrefixGroup, _lines, _parse_asn

PROVIDERS = ("aws", "gcp", "azure", "other")

CONSTRAINT_ANY = "any"
CONSTRAINT_SINGLE_CLOUD = "single_cloud"
CONSTRAINT_MULTI_CLOUD = "multi_cloud"

# Cloud datacenters surveyed for vantage point placement, as
# provider-qualified ids with their advertised locations.
KNOWN_DATACENTERS = (
    ("gcp:asia-northeast1", "Asia Pacific (Tokyo)"),
    ("gcp:asia-southeast1", "Asia Pacific (Singapore)"),
    ("gcp:europe-west2", "Europe (London)"),
    ("gcp:us-east4", "Americas (N.Virginia)"),
    ("gcp:us-west1", "Americas (Oregon)"),
    ("gcp:northamerica-northeast2", "Americas (Toronto)"),
    ("aws:eu-west-3", "Europe (Paris)"),
    ("aws:eu-north-1", "Europe (Stockholm)"),
    ("aws:eu-central-1", "Europe (Frankfurt)"),
    ("aws:ap-south-1", "Asia Pacific (Mumbai)"),
    ("aws:us-east-2", "US East (Ohio)"),
    ("aws:us-west-2", "US West (Oregon)"),
    ("aws:sa-east-1", "South America (Sao Paulo)"),
    ("aws:ap-southeast-1", "Asia Pacific (Singapore)"),
    ("aws:ap-northeast-1", "Asia Pacific (Tokyo)"),
    ("azure:germany-west-central", "Frankfurt"),
    ("azure:japan-east-tokyo", "Tokyo, Saitama"),
    ("azure:us-east-2", "Virginia"),
    ("azure:west-europe", "Netherlands"),
)


@dataclass(frozen=True)
class DatacenterEntry:
    datacenter_id: str
    provider: str
    location: str
    host_as: int
    region: str
    peers: frozenset[int]

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise IngestionError(
                f"{self.datacenter_id}: provider must be one of {PROVIDERS}")


class DatacenterCatalog:
    def __init__(self, entries: Iterable[DatacenterEntry]):
        self.entries = tuple(sorted(entries, key=lambda e: e.datacenter_id))
        self._by_id = {e.datacenter_id: e for e in self.entries}
        if len(self._by_id) != len(self.entries):
            raise IngestionError("duplicate datacenter ids in catalog")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, datacenter_id: str) -> bool:
        return datacenter_id in self._by_id

    def get(self, datacenter_id: str) -> DatacenterEntry:
        try:
            return self._by_id[datacenter_id]
        except KeyError:
            raise InputError(f"unknown datacenter {datacenter_id!r}") from None

    def providers(self) -> tuple[str, ...]:
        return tuple(sorted({e.provider for e in self.entries}))

    def vantage_point(self, datacenter_id: str) -> VantagePoint:
        entry = self.get(datacenter_id)
        return VantagePoint(entry.datacenter_id, entry.host_as, entry.region,
                            ROLE_REMOTE)


def load_datacenter_catalog(source, peer_sets: Sequence[DatacenterPeerSet] = ()
                            ) -> DatacenterCatalog:
    """Parse ``datacenter_id,provider,location,host_asn,region`` CSV.

    Peer sets are joined by datacenter id; entries without measured peers
    get an empty set and are excluded from overlap statistics.
    """
    peers_by_id = {ps.datacenter_id: ps for ps in peer_sets}
    entries = []
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 5:
            raise IngestionError("expected 5 comma-separated fields", lineno)
        dc_id, provider, location, asn_text, region = fields
        host_as = _parse_asn(asn_text, lineno)
        peer_set = peers_by_id.get(dc_id)
        if peer_set is not None and peer_set.host_as != host_as:
            raise IngestionError(
                f"{dc_id}: catalog host AS{host_as} != peer file "
                f"AS{peer_set.host_as}", lineno)
        entries.append(DatacenterEntry(
            dc_id, provider, location, host_as, region,
            peer_set.peers if peer_set else frozenset()))
    return DatacenterCatalog(entries)


@dataclass(frozen=True)
class DeploymentConfig:
    """A base deployment plus datacenter additions under one policy/regime."""

    base: tuple[VantagePoint, ...]
    additions: tuple[str, ...]
    policy: QuorumPolicy
    regime: RpkiMode
    constraint: str = CONSTRAINT_ANY

    def __post_init__(self):
        base_ids = {v.id for v in self.base}
        overlap = base_ids & set(self.additions)
        if overlap:
            raise InputError(f"additions already deployed: {sorted(overlap)}")

    @property
    def config_id(self) -> str:
        added = "+".join(self.additions) if self.additions else "base"
        return f"{added}|{self.policy.describe()}|{self.regime.value}|{self.constraint}"


def _base_provider(catalog: DatacenterCatalog,
                   base: Sequence[VantagePoint]) -> str:
    providers = {catalog.get(v.id).provider for v in base
                 if v.role == ROLE_REMOTE and v.id in catalog}
    if len(providers) != 1:
        raise InputError(
            "single_cloud constraint needs base remotes in exactly one "
            f"catalog provider, found {sorted(providers)}")
    return providers.pop()


def enumerate_configs(catalog: DatacenterCatalog, base: Iterable[VantagePoint],
                      k: int, policies: Iterable[QuorumPolicy],
                      constraint: str = CONSTRAINT_ANY,
                      regime: RpkiMode = RpkiMode.CURRENT) -> list[DeploymentConfig]:
    """All size-k datacenter additions under a constraint, per policy.

    ``single_cloud`` restricts additions to the base deployment's provider;
    ``multi_cloud`` and ``any`` impose no provider restriction (the label is
    kept on the configs for reporting).
    """
    if k < 0:
        raise InputError("k must be >= 0")
    if constraint not in (CONSTRAINT_ANY, CONSTRAINT_SINGLE_CLOUD,
                          CONSTRAINT_MULTI_CLOUD):
        raise InputError(f"unknown constraint {constraint!r}")
    base = check_deployment(base)
    base_ids = {v.id for v in base}
    candidates = [e for e in catalog.entries if e.datacenter_id not in base_ids]
    if constraint == CONSTRAINT_SINGLE_CLOUD:
        provider = _base_provider(catalog, base)
        candidates = [e for e in candidates if e.provider == provider]
    if k > len(candidates):
        raise InputError(
            f"cannot add {k} datacenters, only {len(candidates)} available")
    policies = sorted(set(policies), key=lambda p: p.describe())
    configs = []
    for combo in itertools.combinations(candidates, k):
        additions = tuple(e.datacenter_id for e in combo)
        for policy in policies:
            configs.append(DeploymentConfig(base, additions, policy, regime,
                                            constraint))
    return configs


@dataclass(frozen=True)
class RankedRow:
    config_id: str
    additions: tuple[str, ...]
    policy: str
    constraint: str
    regime: str
    median_gamma: float
    mean_gamma: float
    domains: int


@dataclass(frozen=True)
class RankedTable:
    """Configs by descending median resilience plus the per-cell best grid."""

    rows: tuple[RankedRow, ...]
    grid: tuple[tuple[int, str, str, float], ...]  # (additions, policy, constraint, median)

    def write_csv(self, stream: IO[str]) -> None:
        stream.write("rank,config_id,additions,quorum,constraint,regime,"
                     "median_gamma,mean_gamma,domains\n")
        for rank, row in enumerate(self.rows, start=1):
            added = "+".join(row.additions) if row.additions else "base"
            stream.write(
                f"{rank},{row.config_id},{added},{row.policy},{row.constraint},"
                f"{row.regime},{row.median_gamma:.6f},{row.mean_gamma:.6f},"
                f"{row.domains}\n")

    def write_grid_csv(self, stream: IO[str]) -> None:
        stream.write("additions,quorum,constraint,median_gamma\n")
        for additions, policy, constraint, median in self.grid:
            stream.write(f"{additions},{policy},{constraint},{median:.6f}\n")


def rank_configs(catalog: DatacenterCatalog, configs: Sequence[DeploymentConfig],
                 domains: Sequence[str], bits: AttackBitStore,
                 surfaces: Mapping[tuple[str, str], AttackSurface],
                 adversaries: Sequence[int],
                 groups: Sequence[PrefixGroup]) -> RankedTable:
    """Evaluate configs over the domain sample and rank by median resilience.

    Ties rank the config with fewer additions first, then lexically by
    config id. The grid keeps, per (addition count, policy, constraint)
    cell, the best config's median (ties by median then mean).
    """
    scenarios = []
    for config in configs:
        deployment = tuple(config.base) + tuple(
            catalog.vantage_point(dc) for dc in config.additions)
        scenarios.append(Scenario(config.config_id, check_deployment(deployment),
                                  config.policy, config.regime))
    report = batch_resilience(domains, scenarios, bits, surfaces, adversaries,
                              groups)
    rows = []
    for config in configs:
        summary = report.summaries.get(config.config_id)
        if summary is None:
            continue
        rows.append(RankedRow(
            config_id=config.config_id,
            additions=config.additions,
            policy=config.policy.describe(),
            constraint=config.constraint,
            regime=config.regime.value,
            median_gamma=summary.median,
            mean_gamma=summary.mean,
            domains=summary.domains,
        ))
    rows.sort(key=lambda r: (-r.median_gamma, len(r.additions), r.config_id))
    cells: dict[tuple[int, str, str], RankedRow] = {}
    for row in rows:
        key = (len(row.additions), row.policy, row.constraint)
        cur = cells.get(key)
        if cur is None or (-row.median_gamma, -row.mean_gamma, row.config_id) < (
                -cur.median_gamma, -cur.mean_gamma, cur.config_id):
            cells[key] = row
    grid = tuple((k[0], k[1], k[2], cells[k].median_gamma)
                 for k in sorted(cells))
    return RankedTable(tuple(rows), grid)


def peer_overlap(peers_a: Iterable[int], peers_b: Iterable[int]) -> Fraction:
    """|A intersect B| / max(|A|, |B|), exactly."""
    a, b = set(peers_a), set(peers_b)
    if not a or not b:
        raise InputError("peer overlap of an empty peer set")
    return Fraction(len(a & b), max(len(a), len(b)))


def provider_overlap_matrix(
        catalog: DatacenterCatalog) -> dict[tuple[str, str], Fraction | None]:
    """Mean pairwise peer overlap between (and within) providers.

    Intra-provider cells average over unordered datacenter pairs excluding
    self-pairs; cells with no measurable pair are None. Datacenters without
    peer data are excluded. The result is symmetric.
    """
    by_provider: dict[str, list[DatacenterEntry]] = {}
    for entry in catalog.entries:
        if entry.peers:
            by_provider.setdefault(entry.provider, []).append(entry)
    providers = sorted(by_provider)
    matrix: dict[tuple[str, str], Fraction | None] = {}
    for i, p in enumerate(providers):
        for q in providers[i:]:
            if p == q:
                pairs = list(itertools.combinations(by_provider[p], 2))
            else:
                pairs = [(a, b) for a in by_provider[p] for b in by_provider[q]]
            if not pairs:
                matrix[(p, q)] = matrix[(q, p)] = None
                continue
            total = sum((peer_overlap(a.peers, b.peers) for a, b in pairs),
                        Fraction(0))
            matrix[(p, q)] = matrix[(q, p)] = total / len(pairs)
    return matrix


def write_overlap_csv(matrix: Mapping[tuple[str, str], Fraction | None],
                      stream: IO[str]) -> None:
    providers = sorted({p for p, _ in matrix})
    stream.write("provider," + ",".join(providers) + "\n")
    for p in providers:
        cells = []
        for q in providers:
            value = matrix.get((p, q))
            cells.append("" if value is None else f"{float(value):.6f}")
        stream.write(p + "," + ",".join(cells) + "\n")
