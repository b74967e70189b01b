"""Route-origin-authorization records and route origin validation.

Validation follows deployed validator behavior: an announcement is valid
if any covering ROA matches its origin AS and length constraint, invalid
if covering ROAs exist but none match, and not_found without coverage.
"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import IngestionError
from .topology import IPNetwork, PrefixGroup, _lines, _parse_asn, _parse_cidr


class Validity(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    NOT_FOUND = "not_found"


class RpkiMode(enum.Enum):
    """Adoption regime selecting which simulation results apply per prefix."""

    NONE = "none"
    CURRENT = "current"
    FULL = "full"


@dataclass(frozen=True)
class RoaRecord:
    asn: int
    prefix: IPNetwork
    max_length: int

    def __post_init__(self):
        if not self.prefix.prefixlen <= self.max_length <= self.prefix.max_prefixlen:
            raise IngestionError(
                f"ROA {self.prefix} max_length {self.max_length} outside "
                f"[{self.prefix.prefixlen}, {self.prefix.max_prefixlen}]")


class RoaSet:
    """Deduplicated ROA records indexed for covering-prefix lookup."""

    def __init__(self, records: Iterable[RoaRecord]):
        self._records = tuple(sorted(
            set(records),
            key=lambda r: (r.prefix.version, int(r.prefix.network_address),
                           r.prefix.prefixlen, r.asn, r.max_length)))
        self._index: dict[int, dict[int, dict[int, list[RoaRecord]]]] = {4: {}, 6: {}}
        for rec in self._records:
            fam = self._index[rec.prefix.version]
            fam.setdefault(rec.prefix.prefixlen, {}).setdefault(
                int(rec.prefix.network_address), []).append(rec)

    @property
    def records(self) -> tuple[RoaRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def covering(self, prefix: IPNetwork | str) -> list[RoaRecord]:
        """All records whose prefix covers (contains or equals) ``prefix``."""
        if isinstance(prefix, str):
            prefix = ipaddress.ip_network(prefix, strict=False)
        fam = self._index[prefix.version]
        bits = prefix.max_prefixlen
        net_int = int(prefix.network_address)
        out: list[RoaRecord] = []
        for length in sorted(fam):
            if length > prefix.prefixlen:
                break
            masked = net_int >> (bits - length) << (bits - length) if length else 0
            out.extend(fam[length].get(masked, ()))
        return out


def load_roas(source: Iterable[str] | IO[str]) -> RoaSet:
    """Parse ``asn,cidr,max_length`` CSV; a leading ``AS`` on asn is tolerated."""
    records = []
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise IngestionError("expected 3 comma-separated fields", lineno)
        asn = _parse_asn(fields[0], lineno)
        prefix = _parse_cidr(fields[1], lineno)
        try:
            max_length = int(fields[2])
        except ValueError:
            raise IngestionError(f"invalid max_length {fields[2]!r}", lineno) from None
        try:
            records.append(RoaRecord(asn, prefix, max_length))
        except IngestionError as exc:
            raise IngestionError(str(exc), lineno) from None
    return RoaSet(records)


def validate_announcement(roas: RoaSet, prefix: IPNetwork | str, origin: int) -> Validity:
    """Route origin validation with any-matching-ROA semantics."""
    if isinstance(prefix, str):
        prefix = ipaddress.ip_network(prefix, strict=False)
    covering = roas.covering(prefix)
    if not covering:
        return Validity.NOT_FOUND
    for rec in covering:
        if rec.asn == origin and prefix.prefixlen <= rec.max_length:
            return Validity.VALID
    return Validity.INVALID


def rov_effective(mode: RpkiMode, roas: RoaSet, prefix: IPNetwork | str) -> bool:
    """Whether validation filtering applies to this prefix under a regime.

    In full mode the legitimate origin is assumed to hold a correct ROA,
    so filtering applies even without a covering record.
    """
    if mode is RpkiMode.NONE:
        return False
    if mode is RpkiMode.FULL:
        return True
    if isinstance(prefix, str):
        prefix = ipaddress.ip_network(prefix, strict=False)
    return bool(roas.covering(prefix))


def refine_groups_by_coverage(
        groups: Iterable[PrefixGroup], roas: RoaSet) -> list[PrefixGroup]:
    """Split groups whose members differ in ROA coverage.

    Keeps the per-group representative-prefix coverage decision exact:
    after refinement every member of a group is either covered or
    uncovered. Unsplit groups keep their ids; split halves get ``.roa``
    and ``.noroa`` suffixes.
    """
    refined = []
    for group in groups:
        covered = tuple(p for p in group.member_prefixes if roas.covering(p))
        uncovered = tuple(p for p in group.member_prefixes if not roas.covering(p))
        if covered and uncovered:
            refined.append(PrefixGroup(group.group_id + ".roa",
                                       group.origin_set, covered))
            refined.append(PrefixGroup(group.group_id + ".noroa",
                                       group.origin_set, uncovered))
        else:
            refined.append(group)
    return refined
