"""University registry and placement of URLs in the core/satellite x contour/internal grid."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Optional, Union

from .webunits import (
    MalformedUrl,
    NormalizedUrl,
    SuffixRules,
    UnresolvableSuffix,
    as_url,
    is_within,
    parse_locus,
    specificity,
)


class Part(str, Enum):
    CORE = "core"
    SATELLITE = "satellite"


class Sublevel(str, Enum):
    CONTOUR = "contour"
    INTERNAL = "internal"


class MeasureLevel(str, Enum):
    INSTITUTIONAL = "institutional"
    EXTERNAL = "external"


class UnitKind(str, Enum):
    INSTITUTION = "institution"
    PRODUCT = "product"


class Mission(str, Enum):
    TEACHING = "teaching"
    RESEARCH = "research"
    TRANSFER = "transfer"
    ADMINISTRATION = "administration"
    SERVICES = "services"
    UNASSIGNED = "unassigned"


ASSIGNED_MISSIONS = tuple(m for m in Mission if m is not Mission.UNASSIGNED)


class OutsideModel(LookupError):
    """The URL belongs to the external web, not to any declared university space."""


class EmptyRegistry(ValueError):
    pass


class RegistryFormatError(ValueError):
    """The registry document could not be read or parsed."""


@dataclass(frozen=True)
class InternalUnit:
    url: NormalizedUrl
    entity_name: str = ""
    kind: UnitKind = UnitKind.INSTITUTION
    mission: Mission = Mission.UNASSIGNED
    aliases: tuple[NormalizedUrl, ...] = ()
    redirect_target: Optional[NormalizedUrl] = None
    external_alias: bool = False

    @property
    def urls(self) -> tuple[NormalizedUrl, ...]:
        return (self.url,) + self.aliases

    @property
    def display_name(self) -> str:
        return self.entity_name or self.url.render()


@dataclass(frozen=True)
class SatellitePlatform:
    name: str
    platform_domain: NormalizedUrl
    contour_url: NormalizedUrl
    internal_units: tuple[InternalUnit, ...] = ()
    # extra URLs for the same institutional channel (e.g. youtube.com/user/harvard)
    contour_aliases: tuple[NormalizedUrl, ...] = ()

    @property
    def contour_urls(self) -> tuple[NormalizedUrl, ...]:
        return (self.contour_url,) + self.contour_aliases


@dataclass(frozen=True)
class UniversityRegistry:
    name: str
    contour_url: NormalizedUrl
    internal_units: tuple[InternalUnit, ...] = ()
    satellites: tuple[SatellitePlatform, ...] = ()
    # keys in the source document outside the schema; reported by validate_registry
    unknown_keys: tuple[str, ...] = field(default=(), compare=False)

    def declared_urls(self) -> Iterator[tuple[NormalizedUrl, object]]:
        """Every URL the registry declares, paired with its owner, in plan order."""
        yield self.contour_url, self
        for unit in self.internal_units:
            for u in unit.urls:
                yield u, unit
        for sat in self.satellites:
            for u in sat.contour_urls:
                yield u, sat
            for unit in sat.internal_units:
                for u in unit.urls:
                    yield u, unit

    def platform_of(self, unit: InternalUnit) -> Optional[SatellitePlatform]:
        for sat in self.satellites:
            if any(unit is u for u in sat.internal_units):
                return sat
        return None


@dataclass(frozen=True)
class Placement:
    part: Part
    sublevel: Sublevel
    owner: object = field(compare=False, repr=False)

    @property
    def cell(self) -> tuple[Part, Sublevel]:
        return (self.part, self.sublevel)


def classify(url: Union[str, NormalizedUrl], registry: UniversityRegistry) -> Placement:
    """Place a URL in the model grid, or raise OutsideModel.

    Declared units win over the bare contour spaces; among several declared
    units containing the URL the most specific one is chosen.
    """
    url = as_url(url)
    if url == registry.contour_url:
        return Placement(Part.CORE, Sublevel.CONTOUR, registry)
    for sat in registry.satellites:
        if url in sat.contour_urls:
            return Placement(Part.SATELLITE, Sublevel.CONTOUR, sat)

    best = None
    for unit in registry.internal_units:
        for u in unit.urls:
            if is_within(url, u) and (best is None or specificity(u) > best[0]):
                best = (specificity(u), Part.CORE, unit)
    for sat in registry.satellites:
        for unit in sat.internal_units:
            for u in unit.urls:
                if is_within(url, u) and (best is None or specificity(u) > best[0]):
                    best = (specificity(u), Part.SATELLITE, unit)
    if best is not None:
        return Placement(best[1], Sublevel.INTERNAL, best[2])

    if is_within(url, registry.contour_url):
        return Placement(Part.CORE, Sublevel.INTERNAL, registry)
    for sat in registry.satellites:
        if any(is_within(url, c) for c in sat.contour_urls):
            return Placement(Part.SATELLITE, Sublevel.INTERNAL, sat)
    raise OutsideModel(url.render())


@dataclass
class MissionDistribution:
    counts: dict[Mission, int]
    percents: dict[Mission, float]  # over mission-tagged units only
    total: int

    @property
    def unassigned(self) -> int:
        return self.counts.get(Mission.UNASSIGNED, 0)

    def as_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "unassigned": self.unassigned,
            "counts": {m.value: self.counts[m] for m in Mission},
            "percents": {m.value: self.percents[m] for m in ASSIGNED_MISSIONS},
        }


def mission_distribution(registry: UniversityRegistry) -> MissionDistribution:
    """Count core internal units per mission.

    Percents are taken over mission-tagged units so that the five missions
    sum to 100; untagged units are counted under ``Mission.UNASSIGNED`` and
    kept out of the denominator.
    """
    units = registry.internal_units
    if not units:
        raise EmptyRegistry(f"{registry.name}: no core internal units")
    tally = Counter(u.mission for u in units)
    counts = {m: tally.get(m, 0) for m in Mission}
    assigned = sum(counts[m] for m in ASSIGNED_MISSIONS)
    percents = {
        m: (100.0 * counts[m] / assigned if assigned else 0.0) for m in ASSIGNED_MISSIONS
    }
    return MissionDistribution(counts, percents, len(units))


@dataclass(frozen=True)
class Violation:
    subject: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.subject}: {self.message}"


def validate_registry(registry: UniversityRegistry) -> list[Violation]:
    out: list[Violation] = []
    for key in registry.unknown_keys:
        out.append(Violation(key, "unknown-key", "field is not part of the registry schema"))

    seen: dict[NormalizedUrl, str] = {}
    for url, owner in registry.declared_urls():
        label = _owner_label(owner)
        if url in seen:
            out.append(
                Violation(url.render(), "duplicate-url", f"declared by {seen[url]} and {label}")
            )
        else:
            seen[url] = label

    contour = registry.contour_url
    for unit in registry.internal_units:
        if not unit.external_alias:
            for u in unit.urls:
                if not is_within(u, contour):
                    out.append(
                        Violation(
                            u.render(),
                            "outside-contour",
                            f"not within {contour.render()} and unit is not marked external_alias",
                        )
                    )
        target = unit.redirect_target
        if target is not None and is_within(target, contour) and target not in seen:
            out.append(
                Violation(
                    unit.url.render(),
                    "dangling-redirect",
                    f"redirect target {target.render()} is inside the contour but not a registered URL",
                )
            )

    for sat in registry.satellites:
        for c in sat.contour_urls:
            if not is_within(c, sat.platform_domain):
                out.append(
                    Violation(
                        c.render(),
                        "satellite-contour",
                        f"not within platform domain {sat.platform_domain.render()}",
                    )
                )
        for unit in sat.internal_units:
            for u in unit.urls:
                if not (is_within(u, sat.contour_url) or is_within(u, sat.platform_domain)):
                    out.append(
                        Violation(
                            u.render(),
                            "satellite-unit",
                            f"outside platform {sat.platform_domain.render()}",
                        )
                    )
    return out


def _owner_label(owner: object) -> str:
    if isinstance(owner, UniversityRegistry):
        return f"contour of {owner.name}"
    if isinstance(owner, SatellitePlatform):
        return f"satellite contour {owner.name}"
    if isinstance(owner, InternalUnit):
        return f"unit {owner.display_name!r}"
    return repr(owner)


# -- syntax audit ------------------------------------------------------------


@dataclass
class AuditEntry:
    url: str
    entity_name: str
    mission: Mission
    signature: Optional[tuple[int, int]]  # (subdomains, directories) below the contour
    flags: tuple[str, ...] = ()


@dataclass
class SyntaxAudit:
    entries: list[AuditEntry]
    signature_counts: dict[tuple[int, int], int]
    mixed: list[str]
    external_redirects: list[tuple[str, str]]
    alias_groups: list[tuple[str, ...]]
    unassigned: list[str]

    def as_dict(self) -> dict[str, Any]:
        return {
            "entries": [
                {
                    "url": e.url,
                    "entity_name": e.entity_name,
                    "mission": e.mission.value,
                    "subdomains": None if e.signature is None else e.signature[0],
                    "directories": None if e.signature is None else e.signature[1],
                    "flags": list(e.flags),
                }
                for e in self.entries
            ],
            "signature_counts": [
                {"subdomains": s, "directories": d, "units": n}
                for (s, d), n in sorted(self.signature_counts.items())
            ],
            "mixed": self.mixed,
            "external_redirects": [{"unit": u, "target": t} for u, t in self.external_redirects],
            "alias_groups": [list(g) for g in self.alias_groups],
            "unassigned": self.unassigned,
        }


def unit_signature(
    url: NormalizedUrl, contour: NormalizedUrl, rules: SuffixRules | None = None
) -> Optional[tuple[int, int]]:
    """(extra subdomain labels, extra directories) of ``url`` relative to ``contour``."""
    if not is_within(url, contour):
        return None
    try:
        loc = parse_locus(url, rules)
        base = parse_locus(contour, rules)
    except UnresolvableSuffix:
        return None
    return (
        len(loc.subdomain_labels) - len(base.subdomain_labels),
        len(loc.path_segments) - len(base.path_segments),
    )


def syntax_audit(registry: UniversityRegistry, rules: SuffixRules | None = None) -> SyntaxAudit:
    entries = []
    sig_counts: Counter = Counter()
    mixed, redirects, alias_groups, unassigned = [], [], [], []
    contour = registry.contour_url
    for unit in registry.internal_units:
        sig = unit_signature(unit.url, contour, rules)
        flags = []
        if sig is None:
            flags.append("outside-contour")
        else:
            sig_counts[sig] += 1
            if sig[0] >= 2 and sig[1] >= 1:
                flags.append("mixed")
                mixed.append(unit.url.render())
        if unit.redirect_target is not None and not is_within(unit.redirect_target, contour):
            flags.append("external-redirect")
            redirects.append((unit.url.render(), unit.redirect_target.render()))
        if unit.aliases:
            flags.append("alias-group")
            alias_groups.append(tuple(u.render() for u in unit.urls))
        if unit.mission is Mission.UNASSIGNED:
            flags.append("unassigned-mission")
            unassigned.append(unit.url.render())
        entries.append(AuditEntry(unit.url.render(), unit.entity_name, unit.mission, sig, tuple(flags)))
    return SyntaxAudit(entries, dict(sig_counts), mixed, redirects, alias_groups, unassigned)


# -- registry file I/O ---------------------------------------------------------

_REGISTRY_KEYS = {"name", "contour_url", "internal_units", "satellites"}
_UNIT_KEYS = {
    "url",
    "entity_name",
    "kind",
    "mission",
    "aliases",
    "redirect_target",
    "external_alias",
}
_SATELLITE_KEYS = {"name", "platform_domain", "contour_url", "internal_units", "contour_aliases"}


def _url(value: Any, where: str) -> NormalizedUrl:
    if not isinstance(value, str):
        raise RegistryFormatError(f"{where}: expected a URL string, got {value!r}")
    try:
        return as_url(value)
    except MalformedUrl as exc:
        raise RegistryFormatError(f"{where}: {exc}") from exc


def _enum(cls, value: Any, default, where: str):
    if value is None:
        return default
    try:
        return cls(str(value).strip().lower())
    except ValueError as exc:
        raise RegistryFormatError(f"{where}: unknown {cls.__name__.lower()} {value!r}") from exc


def _unit_from_dict(data: Any, where: str, unknown: list[str]) -> InternalUnit:
    if not isinstance(data, dict):
        raise RegistryFormatError(f"{where}: expected an object")
    if "url" not in data:
        raise RegistryFormatError(f"{where}: missing 'url'")
    unknown.extend(f"{where}.{k}" for k in data if k not in _UNIT_KEYS)
    aliases = data.get("aliases") or []
    if not isinstance(aliases, list):
        raise RegistryFormatError(f"{where}.aliases: expected a list")
    target = data.get("redirect_target")
    return InternalUnit(
        url=_url(data["url"], f"{where}.url"),
        entity_name=str(data.get("entity_name") or ""),
        kind=_enum(UnitKind, data.get("kind"), UnitKind.INSTITUTION, f"{where}.kind"),
        mission=_enum(Mission, data.get("mission"), Mission.UNASSIGNED, f"{where}.mission"),
        aliases=tuple(_url(a, f"{where}.aliases[{i}]") for i, a in enumerate(aliases)),
        redirect_target=None if target in (None, "") else _url(target, f"{where}.redirect_target"),
        external_alias=bool(data.get("external_alias", False)),
    )


def registry_from_dict(data: Any) -> UniversityRegistry:
    if not isinstance(data, dict):
        raise RegistryFormatError("registry document must be a JSON object")
    for key in ("name", "contour_url"):
        if key not in data:
            raise RegistryFormatError(f"missing top-level key {key!r}")
    unknown = [k for k in data if k not in _REGISTRY_KEYS]
    units = tuple(
        _unit_from_dict(u, f"internal_units[{i}]", unknown)
        for i, u in enumerate(data.get("internal_units") or [])
    )
    sats = []
    for i, s in enumerate(data.get("satellites") or []):
        where = f"satellites[{i}]"
        if not isinstance(s, dict):
            raise RegistryFormatError(f"{where}: expected an object")
        for key in ("name", "platform_domain", "contour_url"):
            if key not in s:
                raise RegistryFormatError(f"{where}: missing {key!r}")
        unknown.extend(f"{where}.{k}" for k in s if k not in _SATELLITE_KEYS)
        sats.append(
            SatellitePlatform(
                name=str(s["name"]),
                platform_domain=_url(s["platform_domain"], f"{where}.platform_domain"),
                contour_url=_url(s["contour_url"], f"{where}.contour_url"),
                internal_units=tuple(
                    _unit_from_dict(u, f"{where}.internal_units[{j}]", unknown)
                    for j, u in enumerate(s.get("internal_units") or [])
                ),
                contour_aliases=tuple(
                    _url(a, f"{where}.contour_aliases[{j}]")
                    for j, a in enumerate(s.get("contour_aliases") or [])
                ),
            )
        )
    return UniversityRegistry(
        name=str(data["name"]),
        contour_url=_url(data["contour_url"], "contour_url"),
        internal_units=units,
        satellites=tuple(sats),
        unknown_keys=tuple(unknown),
    )


def load_registry(path: Union[str, Path]) -> UniversityRegistry:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RegistryFormatError(f"{path}: {exc}") from exc
    return registry_from_dict(data)


def _unit_to_dict(unit: InternalUnit) -> dict[str, Any]:
    return {
        "url": unit.url.render(),
        "entity_name": unit.entity_name,
        "kind": unit.kind.value,
        "mission": unit.mission.value,
        "aliases": [a.render() for a in unit.aliases],
        "redirect_target": None if unit.redirect_target is None else unit.redirect_target.render(),
        "external_alias": unit.external_alias,
    }


def registry_to_dict(registry: UniversityRegistry) -> dict[str, Any]:
    sats = []
    for s in registry.satellites:
        d = {
            "name": s.name,
            "platform_domain": s.platform_domain.render(),
            "contour_url": s.contour_url.render(),
            "internal_units": [_unit_to_dict(u) for u in s.internal_units],
        }
        if s.contour_aliases:
            d["contour_aliases"] = [a.render() for a in s.contour_aliases]
        sats.append(d)
    return {
        "name": registry.name,
        "contour_url": registry.contour_url.render(),
        "internal_units": [_unit_to_dict(u) for u in registry.internal_units],
        "satellites": sats,
    }


def save_registry(registry: UniversityRegistry, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(registry_to_dict(registry), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
