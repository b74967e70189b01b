import ipaddress

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiva.errors import IngestionError
from multiva.rpki import (RoaRecord, RoaSet, RpkiMode, Validity, load_roas,
                          refine_groups_by_coverage, rov_effective,
                          validate_announcement)
from multiva.topology import group_prefixes_by_origin, load_prefix_origins


def net(s):
    return ipaddress.ip_network(s)


class TestLoadRoas:
    def test_basic(self):
        roas = load_roas(["64500,10.0.0.0/16,24"])
        assert len(roas) == 1
        rec = roas.records[0]
        assert (rec.asn, str(rec.prefix), rec.max_length) == (
            64500, "10.0.0.0/16", 24)

    def test_as_prefix_tolerated(self):
        roas = load_roas(["AS64500,10.0.0.0/16,16"])
        assert roas.records[0].max_length == 16

    def test_max_length_below_prefix_len(self):
        with pytest.raises(IngestionError) as exc:
            load_roas(["64500,10.0.0.0/16,8"])
        assert "line 1" in str(exc.value)

    def test_max_length_beyond_family(self):
        with pytest.raises(IngestionError):
            load_roas(["64500,10.0.0.0/16,40"])
        load_roas(["64500,2001:db8::/32,40"])  # fine for IPv6

    def test_duplicates_collapse(self):
        roas = load_roas(["1,10.0.0.0/16,24", "1,10.0.0.0/16,24"])
        assert len(roas) == 1


class TestValidateAnnouncement:
    ROAS = RoaSet([RoaRecord(64500, net("10.0.0.0/16"), 24)])

    def test_valid(self):
        assert validate_announcement(self.ROAS, "10.0.0.0/24", 64500) is \
            Validity.VALID

    def test_wrong_origin(self):
        assert validate_announcement(self.ROAS, "10.0.0.0/24", 64501) is \
            Validity.INVALID

    def test_not_found(self):
        assert validate_announcement(self.ROAS, "192.0.2.0/24", 64500) is \
            Validity.NOT_FOUND

    def test_too_long(self):
        roas = RoaSet([RoaRecord(64500, net("10.0.0.0/16"), 16)])
        assert validate_announcement(roas, "10.0.0.0/24", 64500) is \
            Validity.INVALID

    def test_any_matching_roa_wins(self):
        roas = RoaSet([RoaRecord(64500, net("10.0.0.0/16"), 16),
                       RoaRecord(64501, net("10.0.0.0/16"), 24)])
        assert validate_announcement(roas, "10.0.0.0/24", 64501) is \
            Validity.VALID
        assert validate_announcement(roas, "10.0.0.0/16", 64500) is \
            Validity.VALID

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 5), st.integers(8, 24),
                              st.integers(0, 2)), max_size=8),
           st.integers(1, 5))
    def test_adding_records_never_invalidates(self, specs, origin):
        # monotonicity: an announcement valid under some record stays valid
        records = [RoaRecord(asn, net((block << 27, plen)),
                             min(plen + 4, 32))
                   for asn, plen, block in specs]
        announcement = (net("0.0.0.0/20"), origin)
        before = validate_announcement(RoaSet(records), *announcement)
        grown = RoaSet(records + [RoaRecord(9, net("192.0.2.0/24"), 24)])
        after = validate_announcement(grown, *announcement)
        if before is Validity.VALID:
            assert after is Validity.VALID


class TestRovEffective:
    ROAS = RoaSet([RoaRecord(64500, net("10.0.0.0/16"), 24)])

    def test_none_mode(self):
        assert rov_effective(RpkiMode.NONE, self.ROAS, "10.0.0.0/16") is False

    def test_full_mode_without_roa(self):
        assert rov_effective(RpkiMode.FULL, RoaSet([]), "192.0.2.0/24") is True

    def test_current_mode_coverage(self):
        assert rov_effective(RpkiMode.CURRENT, self.ROAS, "10.0.5.0/24") is True
        assert rov_effective(RpkiMode.CURRENT, self.ROAS, "192.0.2.0/24") is False

    def test_current_equiv_not_found(self):
        # covered iff validate_announcement is not NOT_FOUND, for any origin
        for prefix in ("10.0.5.0/24", "192.0.2.0/24", "10.0.0.0/8"):
            covered = rov_effective(RpkiMode.CURRENT, self.ROAS, prefix)
            for origin in (1, 64500):
                nf = validate_announcement(self.ROAS, prefix, origin) is \
                    Validity.NOT_FOUND
                assert covered == (not nf)


class TestRefineGroups:
    def test_split_mixed_group(self):
        table = load_prefix_origins(["10.0.0.0/24,1", "10.0.1.0/24,1"])
        groups = group_prefixes_by_origin(table)
        roas = RoaSet([RoaRecord(1, net("10.0.0.0/24"), 24)])
        refined = refine_groups_by_coverage(groups, roas)
        assert len(refined) == 2
        ids = sorted(g.group_id for g in refined)
        assert ids == ["g0000.noroa", "g0000.roa"]
        for g in refined:
            assert g.origin_set == frozenset({1})

    def test_homogeneous_group_kept(self):
        table = load_prefix_origins(["10.0.0.0/24,1", "10.0.1.0/24,1"])
        groups = group_prefixes_by_origin(table)
        assert refine_groups_by_coverage(groups, RoaSet([])) == groups
        roas = RoaSet([RoaRecord(1, net("10.0.0.0/16"), 24)])
        assert refine_groups_by_coverage(groups, roas) == groups
