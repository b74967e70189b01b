"""Batch command line front end: reproducible runs with recorded manifests.

Subcommands: ``simulate`` (attack bit store from topology inputs),
``resolve-surface`` (DNS attack surfaces per domain and region),
``resilience`` (per-domain gamma report from a store plus surfaces), and
``explore`` (ranked deployment configurations). All randomness flows from
the recorded seed; reruns with identical inputs produce byte-identical
CSV outputs.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .bgp_sim import AttackBitStore, run_attack_matrix, sample_adversaries
from .dns_surface import (DEFAULT_REPEATS, FixtureZoneOracle,
                          MEASUREMENT_REGIONS, load_surface_log,
                          resolve_attack_surface)
from .errors import ConsistencyError, InputError, MultivaError, ResolutionError
from .explorer import (enumerate_configs, load_datacenter_catalog,
                       provider_overlap_matrix, rank_configs, write_overlap_csv)
from .resilience import Scenario, batch_resilience, load_deployment, parse_policy
from .rpki import RoaSet, RpkiMode, load_roas, refine_groups_by_coverage
from .topology import (augment_with_datacenter_peers, group_prefixes_by_origin,
                       load_as_relationships, load_datacenter_peers,
                       load_prefix_groups_csv, load_prefix_origins,
                       write_prefix_groups_csv)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _verbose() -> bool:
    return os.environ.get("MULTIVA_VERBOSE", "1") != "0"


def _default_workers() -> int | None:
    env = os.environ.get("MULTIVA_WORKERS")
    if env:
        return int(env)
    return None


def _write_manifest(out_dir: Path, command: str, inputs: dict[str, Path | None],
                    parameters: dict) -> None:
    manifest = {
        "tool": "multiva",
        "version": __version__,
        "command": command,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in inputs.items() if path is not None},
        "parameters": parameters,
        # informational only: output identity is defined by inputs+parameters
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_modes(text: str) -> list[RpkiMode]:
    modes = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            modes.append(RpkiMode(token))
        except ValueError:
            raise InputError(f"unknown RPKI mode {token!r}") from None
    if not modes:
        raise InputError("no RPKI modes given")
    return modes


def _parse_asn_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"bad AS number list {text!r}") from None


def _progress(label: str):
    if not _verbose():
        return None

    def report(done: int, total: int):
        step = max(1, total // 20)
        if done % step == 0 or done == total:
            print(f"{label}: {done}/{total}", file=sys.stderr)

    return report


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.topology) as fh:
        graph = load_as_relationships(fh)
    if args.peers:
        with open(args.peers) as fh:
            peer_sets = load_datacenter_peers(fh)
        graph = augment_with_datacenter_peers(graph, peer_sets)
    with open(args.prefixes) as fh:
        table = load_prefix_origins(fh)
    groups = group_prefixes_by_origin(table)
    modes = _parse_modes(args.modes)
    if args.roas:
        with open(args.roas) as fh:
            roas = load_roas(fh)
    else:
        if RpkiMode.CURRENT in modes:
            raise InputError("current mode requires ROA input (--roas)")
        roas = RoaSet(())
    if RpkiMode.CURRENT in modes:
        groups = refine_groups_by_coverage(groups, roas)
    vp_ases = _parse_asn_list(args.vps)
    if not vp_ases:
        raise InputError("no vantage point ASes given (--vps)")
    adversaries = sample_adversaries(graph, args.adversaries, args.seed)

    groups_csv = io.StringIO()
    write_prefix_groups_csv(groups, groups_csv)
    groups_text = groups_csv.getvalue()
    groups_path = out_dir / "groups.csv"
    groups_path.write_text(groups_text)

    store = run_attack_matrix(graph, groups, adversaries, vp_ases, roas, modes,
                              workers=args.workers,
                              progress=_progress("simulate"))
    store.provenance.update({
        "topology_sha256": _sha256(Path(args.topology)),
        "prefixes_sha256": _sha256(Path(args.prefixes)),
        "roas_sha256": _sha256(Path(args.roas)) if args.roas else "",
        "peers_sha256": _sha256(Path(args.peers)) if args.peers else "",
        "groups_sha256": hashlib.sha256(groups_text.encode()).hexdigest(),
        "seed": str(args.seed),
    })
    store.save(out_dir / "bits.mvb")
    if args.csv:
        with open(out_dir / "bits.csv", "w") as fh:
            store.to_csv(fh)
    _write_manifest(out_dir, "simulate", {
        "topology": Path(args.topology),
        "prefixes": Path(args.prefixes),
        "roas": Path(args.roas) if args.roas else None,
        "peers": Path(args.peers) if args.peers else None,
    }, {
        "adversaries": args.adversaries,
        "seed": args.seed,
        "modes": [m.value for m in modes],
        "vps": sorted(set(vp_ases)),
    })
    if _verbose():
        print(f"wrote {out_dir / 'bits.mvb'} "
              f"({len(store.adversaries)} adversaries x {len(store.group_ids)} "
              f"groups x {len(store.vp_ases)} vps x {len(store.regimes)} regimes)",
              file=sys.stderr)
    return 0


def cmd_resolve_surface(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.domains) as fh:
        domains = [line.strip() for line in fh if line.strip()
                   and not line.lstrip().startswith("#")]
    regions = [r.strip() for r in args.regions.split(",") if r.strip()]
    if not regions:
        raise InputError("no regions given")
    if args.live:
        if not args.allow_live:
            raise InputError(
                "live mode sends real DNS queries; pass --allow-live to confirm")
        from .livedns import LiveZoneOracle
        oracle = LiveZoneOracle()
    else:
        if not args.fixture:
            raise InputError("either --fixture or --live is required")
        with open(args.fixture) as fh:
            oracle = FixtureZoneOracle.from_json(fh)
    skipped = 0
    with open(out_dir / "surfaces.jsonl", "w") as out:
        for domain in domains:
            for region in regions:
                try:
                    surface = resolve_attack_surface(
                        oracle, domain, region, repeats=args.repeats)
                    record = surface.to_json_dict()
                except (ResolutionError, InputError) as exc:
                    record = {"domain": domain, "region": region,
                              "error": str(exc)}
                    skipped += 1
                out.write(json.dumps(record, sort_keys=True) + "\n")
    _write_manifest(out_dir, "resolve-surface", {
        "domains": Path(args.domains),
        "fixture": Path(args.fixture) if args.fixture else None,
    }, {
        "regions": regions,
        "repeats": args.repeats,
        "live": bool(args.live),
    })
    if _verbose():
        total = len(domains) * len(regions)
        print(f"resolved {total - skipped}/{total} (domain, region) pairs; "
              f"{skipped} recorded as errors", file=sys.stderr)
    return 0


def _check_store_consistency(store: AttackBitStore, groups_path: Path,
                             deployment) -> None:
    expected = store.provenance.get("groups_sha256")
    if expected and expected != _sha256(groups_path):
        raise ConsistencyError(
            "dimension groups: prefix-group file does not match the bit store")
    missing = [vp.host_as for vp in deployment
               if vp.host_as not in set(store.vp_ases)]
    if missing:
        raise ConsistencyError(
            f"dimension vps: AS{missing[0]} not simulated in the bit store")


def cmd_resilience(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = AttackBitStore.load(args.bits)
    with open(args.groups) as fh:
        groups = load_prefix_groups_csv(fh)
    with open(args.surfaces) as fh:
        surfaces = load_surface_log(fh)
    with open(args.deployment) as fh:
        deployment = load_deployment(fh)
    policy = parse_policy(args.policy)
    try:
        regime = RpkiMode(args.regime)
    except ValueError:
        raise InputError(f"unknown regime {args.regime!r}") from None
    if regime not in store.regimes:
        raise ConsistencyError(
            f"dimension regimes: {regime.value} not simulated in the bit store")
    _check_store_consistency(store, Path(args.groups), deployment)
    if args.domains:
        with open(args.domains) as fh:
            domains = [line.strip() for line in fh if line.strip()]
    else:
        domains = sorted({d for d, _ in surfaces})
    scenario = Scenario("s0", deployment, policy, regime,
                        a_records_only=args.a_records_only)
    report = batch_resilience(domains, [scenario], store, surfaces,
                              list(store.adversaries), groups)
    with open(out_dir / "resilience.csv", "w") as fh:
        report.write_domain_csv(fh)
    with open(out_dir / "summary.csv", "w") as fh:
        report.write_summary_csv(fh)
    with open(out_dir / "cdf.csv", "w") as fh:
        report.write_cdf_csv(fh)
    with open(out_dir / "scenarios.json", "w") as fh:
        json.dump({
            "scenarios": [scenario.manifest_dict()],
            "skipped": [list(s) for s in report.skipped],
            "unroutable_targets": {d: list(ips)
                                   for d, ips in sorted(report.unroutable.items())},
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out_dir, "resilience", {
        "bits": Path(args.bits),
        "groups": Path(args.groups),
        "surfaces": Path(args.surfaces),
        "deployment": Path(args.deployment),
        "domains": Path(args.domains) if args.domains else None,
    }, {
        "policy": policy.describe(),
        "regime": regime.value,
        "a_records_only": bool(args.a_records_only),
    })
    if not domains and _verbose():
        print("warning: no domains to evaluate; report is empty", file=sys.stderr)
    if _verbose():
        summary = report.summaries.get("s0")
        if summary:
            print(f"median gamma {summary.median:.4f} over {summary.domains} "
                  f"domains ({len(report.skipped)} skipped)", file=sys.stderr)
    return 0


def cmd_explore(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = AttackBitStore.load(args.bits)
    with open(args.groups) as fh:
        groups = load_prefix_groups_csv(fh)
    with open(args.surfaces) as fh:
        surfaces = load_surface_log(fh)
    with open(args.base) as fh:
        base = load_deployment(fh)
    peer_sets = ()
    if args.peers:
        with open(args.peers) as fh:
            peer_sets = load_datacenter_peers(fh)
    with open(args.catalog) as fh:
        catalog = load_datacenter_catalog(fh, peer_sets)
    policies = [parse_policy(tok) for tok in args.policies.split(",") if tok.strip()]
    if not policies:
        raise InputError("no quorum policies given")
    try:
        regime = RpkiMode(args.regime)
    except ValueError:
        raise InputError(f"unknown regime {args.regime!r}") from None
    _check_store_consistency(store, Path(args.groups), base)
    configs = enumerate_configs(catalog, base, args.k, policies,
                                constraint=args.constraint, regime=regime)
    if args.domains:
        with open(args.domains) as fh:
            domains = [line.strip() for line in fh if line.strip()]
    else:
        domains = sorted({d for d, _ in surfaces})
    table = rank_configs(catalog, configs, domains, store, surfaces,
                         list(store.adversaries), groups)
    with open(out_dir / "ranked.csv", "w") as fh:
        table.write_csv(fh)
    with open(out_dir / "grid.csv", "w") as fh:
        table.write_grid_csv(fh)
    if any(e.peers for e in catalog.entries):
        with open(out_dir / "overlap.csv", "w") as fh:
            write_overlap_csv(provider_overlap_matrix(catalog), fh)
    _write_manifest(out_dir, "explore", {
        "bits": Path(args.bits),
        "groups": Path(args.groups),
        "surfaces": Path(args.surfaces),
        "base": Path(args.base),
        "catalog": Path(args.catalog),
        "peers": Path(args.peers) if args.peers else None,
        "domains": Path(args.domains) if args.domains else None,
    }, {
        "k": args.k,
        "constraint": args.constraint,
        "policies": [p.describe() for p in policies],
        "regime": regime.value,
    })
    if _verbose():
        print(f"ranked {len(table.rows)} configurations", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiva",
        description="BGP hijack resilience analysis for multi-vantage-point "
                    "domain validation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the attack simulation matrix")
    sim.add_argument("--topology", required=True, help="AS relationship file")
    sim.add_argument("--prefixes", required=True, help="prefix-origin CSV")
    sim.add_argument("--roas", help="ROA CSV (required for current mode)")
    sim.add_argument("--peers", help="datacenter peer CSV")
    sim.add_argument("--vps", required=True, help="vantage point ASNs, comma-separated")
    sim.add_argument("--adversaries", type=int, default=1000,
                     help="number of adversaries to sample")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--modes", default="none,current,full")
    sim.add_argument("--workers", type=int, default=_default_workers())
    sim.add_argument("--csv", action="store_true", help="also dump bits.csv")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    res = sub.add_parser("resolve-surface", help="compute DNS attack surfaces")
    res.add_argument("--domains", required=True, help="one FQDN per line")
    res.add_argument("--fixture", help="zone fixture JSON")
    res.add_argument("--live", action="store_true", help="use live DNS")
    res.add_argument("--allow-live", action="store_true",
                     help="confirm sending real DNS queries")
    res.add_argument("--regions", default=",".join(MEASUREMENT_REGIONS),
                     help="measurement regions, comma-separated")
    res.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    res.add_argument("--out", required=True)
    res.set_defaults(func=cmd_resolve_surface)

    rez = sub.add_parser("resilience", help="compute per-domain resilience")
    rez.add_argument("--bits", required=True)
    rez.add_argument("--groups", required=True)
    rez.add_argument("--surfaces", required=True)
    rez.add_argument("--deployment", required=True, help="deployment JSON")
    rez.add_argument("--policy", default="remote-failures:1")
    rez.add_argument("--regime", default="current")
    rez.add_argument("--domains", help="restrict to domains listed in this file")
    rez.add_argument("--a-records-only", action="store_true",
                     help="ignore nameserver targets (webserver-only surface)")
    rez.add_argument("--out", required=True)
    rez.set_defaults(func=cmd_resilience)

    exp = sub.add_parser("explore", help="rank candidate deployments")
    exp.add_argument("--bits", required=True)
    exp.add_argument("--groups", required=True)
    exp.add_argument("--surfaces", required=True)
    exp.add_argument("--base", required=True, help="base deployment JSON")
    exp.add_argument("--catalog", required=True, help="datacenter catalog CSV")
    exp.add_argument("--peers", help="datacenter peer CSV")
    exp.add_argument("--k", type=int, default=1, help="datacenters to add")
    exp.add_argument("--constraint", default="any",
                     choices=("any", "single_cloud", "multi_cloud"))
    exp.add_argument("--policies", default="remote-failures:1,full")
    exp.add_argument("--regime", default="current")
    exp.add_argument("--domains")
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=cmd_explore)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MultivaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
