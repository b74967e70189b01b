"""Quantifying BGP-hijack resilience of multi-vantage-point domain validation."""

__version__ = "0.1.0"

from .bgp_sim import (Announcement, AnnouncementKind, AttackBitStore,
                      AttackOutcome, Route, RouteClass, RoutingState,
                      propagate_routes, run_attack_matrix, sample_adversaries,
                      simulate_attack, stable_state_oracle,
                      valley_free_violations)
from .dns_surface import (AttackSurface, DelegationStep, FixtureZoneOracle,
                          ZoneOracle, nameserver_surface, resolve_attack_surface,
                          surface_union_across_regions)
from .errors import (ConsistencyError, IngestionError, InputError, MultivaError,
                     OracleError, ResolutionError)
from .explorer import (DatacenterCatalog, DatacenterEntry, DeploymentConfig,
                       enumerate_configs, load_datacenter_catalog, peer_overlap,
                       provider_overlap_matrix, rank_configs)
from .resilience import (DomainTargets, QuorumPolicy, ResilienceReport, Scenario,
                         VantagePoint, alpha_star, batch_resilience,
                         build_domain_targets, domain_resilience,
                         quorum_satisfied)
from .rpki import (RoaRecord, RoaSet, RpkiMode, Validity, load_roas,
                   refine_groups_by_coverage, rov_effective,
                   validate_announcement)
from .topology import (AsRelationshipGraph, DatacenterPeerSet, PrefixGroup,
                       PrefixTable, Relation, augment_with_datacenter_peers,
                       group_prefixes_by_origin, load_as_relationships,
                       load_datacenter_peers, load_prefix_origins,
                       longest_prefix_match, serialize_as_relationships)
