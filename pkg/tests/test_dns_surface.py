import json

import pytest

from multiva.dns_surface import (AttackSurface, FixtureZoneOracle,
                                 load_surface_log, nameserver_surface,
                                 resolve_attack_surface,
                                 surface_union_across_regions)
from multiva.errors import InputError, ResolutionError

WEB_IP = "93.184.216.34"
NS1_IP = "192.0.2.53"
NS2_IP = "198.51.100.53"

# the canonical worked example: signed root/TLDs, an unsigned hosting zone
# whose two nameservers live in another TLD and arrive without glue
WORKED_EXAMPLE = {
    "zones": {
        ".": {"ns": ["a.root-servers.net."], "ds": False,
              "glue": {"a.root-servers.net.": ["198.41.0.4"]}},
        "com.": {"ns": ["a.gtld-servers.net."], "ds": True,
                 "glue": {"a.gtld-servers.net.": ["192.5.6.30"]}},
        "net.": {"ns": ["a.gtld-servers.net."], "ds": True,
                 "glue": {"a.gtld-servers.net.": ["192.5.6.30"]}},
        "example.com.": {"ns": ["ns1.provider.net.", "ns2.provider.net."],
                         "ds": False, "glue": {}},
        "provider.net.": {"ns": ["ns1.provider.net.", "ns2.provider.net."],
                          "ds": False,
                          "glue": {"ns1.provider.net.": [NS1_IP],
                                   "ns2.provider.net.": [NS2_IP]}},
    },
    "names": {
        "example.com.": {"a": [[WEB_IP]]},
        "ns1.provider.net.": {"a": [[NS1_IP]]},
        "ns2.provider.net.": {"a": [[NS2_IP]]},
    },
}


@pytest.fixture
def oracle():
    return FixtureZoneOracle(WORKED_EXAMPLE)


class TestWorkedExample:
    def test_surface(self, oracle):
        s = resolve_attack_surface(oracle, "example.com", "r1")
        assert s.a_record_ips == {WEB_IP}
        assert s.nameserver_ips == {NS1_IP, NS2_IP}
        assert s.target_ips == {WEB_IP, NS1_IP, NS2_IP}
        assert set(s.glueless_names) == {"ns1.provider.net.",
                                         "ns2.provider.net."}
        assert set(s.dnssec_cut_zones) == {"com.", "net."}

    def test_no_root_or_tld_servers(self, oracle):
        s = resolve_attack_surface(oracle, "example.com", "r1")
        assert "198.41.0.4" not in s.target_ips
        assert "192.5.6.30" not in s.target_ips

    def test_deterministic(self, oracle):
        a = resolve_attack_surface(oracle, "example.com", "r1")
        b = resolve_attack_surface(oracle, "example.com", "r1")
        assert a == b

    def test_dnssec_cuts_disabled_superset(self, oracle):
        plus = resolve_attack_surface(oracle, "example.com", "r1")
        full = resolve_attack_surface(oracle, "example.com", "r1",
                                      apply_dnssec_cuts=False)
        assert plus.target_ips <= full.target_ips
        assert "192.5.6.30" in full.target_ips  # TLD servers join Q


class TestDnssecChains:
    def test_fully_signed_chain_yields_a_records_only(self):
        doc = json.loads(json.dumps(WORKED_EXAMPLE))
        doc["zones"]["example.com."]["ds"] = True
        s = resolve_attack_surface(FixtureZoneOracle(doc), "example.com", "r1")
        assert s.target_ips == {WEB_IP}
        assert s.nameserver_ips == set()

    def test_unsigned_tld_contributes(self):
        doc = json.loads(json.dumps(WORKED_EXAMPLE))
        doc["zones"]["com."]["ds"] = False
        s = resolve_attack_surface(FixtureZoneOracle(doc), "example.com", "r1")
        assert "192.5.6.30" in s.target_ips


class TestRepeats:
    DOC = {
        "zones": {
            ".": {"ns": ["r.test."], "glue": {"r.test.": ["198.41.0.4"]}},
            "test.": {"ns": ["ns.test."], "ds": True},
            "rot.test.": {"ns": ["ns.rot.test."], "ds": False,
                          "glue": {"ns.rot.test.": ["192.0.2.1"]}},
        },
        "names": {
            "rot.test.": {"a": [["10.0.0.1"], ["10.0.0.2"], ["10.0.0.3"]]},
        },
    }

    def test_rotation_unions_all_answers(self):
        s = resolve_attack_surface(FixtureZoneOracle(self.DOC), "rot.test",
                                   "r1", repeats=10)
        assert s.a_record_ips == {"10.0.0.1", "10.0.0.2", "10.0.0.3"}

    def test_monotone_in_repeats(self):
        oracle = FixtureZoneOracle(self.DOC)
        previous = frozenset()
        for repeats in (1, 2, 3, 4):
            s = resolve_attack_surface(oracle, "rot.test", "r1",
                                       repeats=repeats)
            assert previous <= s.target_ips
            previous = s.target_ips

    def test_repeats_must_be_positive(self):
        with pytest.raises(InputError):
            resolve_attack_surface(FixtureZoneOracle(self.DOC), "rot.test",
                                   "r1", repeats=0)


class TestNameserverSurface:
    def test_glued_branch(self, oracle):
        out = nameserver_surface(oracle, "ns1.provider.net.",
                                 ["192.0.2.53"], "r1")
        assert out == {"192.0.2.53"}

    def test_glueless_under_signed_chain(self):
        doc = {
            "zones": {
                ".": {"ns": ["r.test."], "glue": {"r.test.": ["198.41.0.4"]}},
                "net.": {"ns": ["n.test."], "ds": True},
                "provider.net.": {"ns": ["ns1.provider.net."], "ds": True},
            },
            "names": {"ns1.provider.net.": {"a": [["192.0.2.53"]]}},
        }
        out = nameserver_surface(FixtureZoneOracle(doc), "ns1.provider.net.",
                                 None, "r1")
        assert out == {"192.0.2.53"}

    def test_self_referential_glueless_cycle(self):
        doc = {
            "zones": {
                ".": {"ns": ["r.test."], "glue": {"r.test.": ["198.41.0.4"]}},
                "test.": {"ns": ["n.test."], "ds": True},
                "loop.test.": {"ns": ["ns.loop.test."], "ds": False,
                               "glue": {}},
            },
            "names": {},
        }
        with pytest.raises(ResolutionError) as exc:
            nameserver_surface(FixtureZoneOracle(doc), "ns.loop.test.",
                               None, "r1")
        assert "cycle" in str(exc.value)

    def test_glued_subset_of_glueless(self, oracle):
        # glue matches the authoritative A records, so the glued result is
        # contained in the glueless one (which adds the resolution surface)
        glued = nameserver_surface(oracle, "ns1.provider.net.", [NS1_IP], "r1")
        glueless = nameserver_surface(oracle, "ns1.provider.net.", None, "r1")
        assert glued <= glueless


class TestDepthAndCycles:
    def _deep_doc(self, depth):
        zones = {".": {"ns": ["r.test."], "glue": {"r.test.": ["198.41.0.4"]}}}
        names = {}
        for i in range(depth):
            zone = f"z{i}.test."
            ns = f"ns.z{i + 1}.test." if i + 1 < depth else "ns.final.test."
            zones[zone] = {"ns": [ns], "ds": False, "glue": {}}
        zones["final.test."] = {"ns": ["x.test."], "ds": False,
                                "glue": {"x.test.": ["192.0.2.9"]}}
        names["d.z0.test."] = {"a": [["10.0.0.1"]]}
        for i in range(depth):
            names[f"ns.z{i}.test."] = {"a": [[f"10.1.{i}.1"]]}
        names["ns.final.test."] = {"a": [["10.2.0.1"]]}
        return {"zones": zones, "names": names}

    def test_depth_cap_exceeded(self):
        doc = self._deep_doc(14)
        with pytest.raises(ResolutionError) as exc:
            resolve_attack_surface(FixtureZoneOracle(doc), "d.z0.test.", "r1")
        assert "deeper than" in str(exc.value)

    def test_moderate_depth_fine(self):
        doc = self._deep_doc(5)
        s = resolve_attack_surface(FixtureZoneOracle(doc), "d.z0.test.", "r1")
        assert "10.0.0.1" in s.target_ips


class TestCname:
    DOC = {
        "zones": {
            ".": {"ns": ["r.test."], "glue": {"r.test.": ["198.41.0.4"]}},
            "test.": {"ns": ["t.test."], "ds": True},
            "a.test.": {"ns": ["ns.a.test."], "ds": False,
                        "glue": {"ns.a.test.": ["192.0.2.10"]}},
            "b.test.": {"ns": ["ns.b.test."], "ds": False,
                        "glue": {"ns.b.test.": ["192.0.2.20"]}},
        },
        "names": {
            "www.a.test.": {"cname": "web.b.test."},
            "web.b.test.": {"a": [["10.0.0.5"]]},
        },
    }

    def test_cname_chain_included(self):
        s = resolve_attack_surface(FixtureZoneOracle(self.DOC), "www.a.test",
                                   "r1")
        assert s.a_record_ips == {"10.0.0.5"}
        # both the original and the target zone's nameservers are targets
        assert {"192.0.2.10", "192.0.2.20"} <= s.nameserver_ips

    def test_cname_cycle(self):
        doc = json.loads(json.dumps(self.DOC))
        doc["names"]["web.b.test."] = {"cname": "www.a.test."}
        with pytest.raises(ResolutionError) as exc:
            resolve_attack_surface(FixtureZoneOracle(doc), "www.a.test", "r1")
        assert "CNAME cycle" in str(exc.value)

    def test_cname_cap(self):
        doc = json.loads(json.dumps(self.DOC))
        for i in range(12):
            doc["names"][f"c{i}.a.test."] = {"cname": f"c{i + 1}.a.test."}
        with pytest.raises(ResolutionError) as exc:
            resolve_attack_surface(FixtureZoneOracle(doc), "c0.a.test", "r1")
        assert "exceeds" in str(exc.value)


class TestErrorsAndRegions:
    def test_unresolvable_carries_partial_surface(self, oracle):
        doc = json.loads(json.dumps(WORKED_EXAMPLE))
        del doc["names"]["example.com."]
        with pytest.raises(ResolutionError) as exc:
            resolve_attack_surface(FixtureZoneOracle(doc), "example.com", "r1")
        partial = exc.value.partial
        assert partial is not None
        assert partial.nameserver_ips == {NS1_IP, NS2_IP}
        assert partial.a_record_ips == set()

    def test_missing_root_zone(self):
        with pytest.raises(ResolutionError):
            resolve_attack_surface(FixtureZoneOracle({"zones": {}, "names": {}}),
                                   "example.com", "r1")

    def test_region_overrides(self):
        doc = json.loads(json.dumps(WORKED_EXAMPLE))
        doc["regions"] = {"eu": {"names": {
            "example.com.": {"a": [["203.0.113.7"]]}}}}
        oracle = FixtureZoneOracle(doc)
        us = resolve_attack_surface(oracle, "example.com", "us")
        eu = resolve_attack_surface(oracle, "example.com", "eu")
        assert us.a_record_ips == {WEB_IP}
        assert eu.a_record_ips == {"203.0.113.7"}
        assert us.nameserver_ips == eu.nameserver_ips

    def test_invalid_domain(self, oracle):
        with pytest.raises(InputError):
            resolve_attack_surface(oracle, "bad..name", "r1")


class TestUnionAcrossRegions:
    def _surface(self, region, a, ns=()):
        return AttackSurface("d.test.", region, frozenset(a) | frozenset(ns),
                             frozenset(a), frozenset(ns), (), ())

    def test_identity(self):
        s = self._surface("r1", ["10.0.0.1"])
        out = surface_union_across_regions([s])
        assert out.target_ips == s.target_ips
        assert out.region == "all"

    def test_disjoint_sizes_add(self):
        a = self._surface("r1", ["10.0.0.1", "10.0.0.2", "10.0.0.3"])
        b = self._surface("r2", ["10.1.0.1", "10.1.0.2", "10.1.0.3", "10.1.0.4"])
        assert len(surface_union_across_regions([a, b]).target_ips) == 7

    def test_overlap_deduplicates(self):
        a = self._surface("r1", ["10.0.0.1", "10.0.0.2"])
        b = self._surface("r2", ["10.0.0.2", "10.0.0.3"])
        assert surface_union_across_regions([a, b]).target_ips == {
            "10.0.0.1", "10.0.0.2", "10.0.0.3"}

    def test_mixed_domains_rejected(self):
        a = self._surface("r1", ["10.0.0.1"])
        b = AttackSurface("other.test.", "r2", frozenset({"10.0.0.2"}),
                          frozenset({"10.0.0.2"}), frozenset(), (), ())
        with pytest.raises(InputError):
            surface_union_across_regions([a, b])


class TestSurfaceLog:
    def test_roundtrip_and_error_lines(self, oracle):
        s = resolve_attack_surface(oracle, "example.com", "r1")
        lines = [json.dumps(s.to_json_dict()),
                 json.dumps({"domain": "x.test.", "region": "r1",
                             "error": "no data"})]
        loaded = load_surface_log(lines)
        assert loaded == {("example.com.", "r1"): s}
