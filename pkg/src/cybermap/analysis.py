"""Aggregation, shares, coverage, consistency and correlation over a measured registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Iterable, Mapping, Optional, Sequence

from .querygen import QueryOptions, measurement_queries, planned_urls
from .measure import MeasurementSet
from .taxonomy import (
    EmptyRegistry,
    InternalUnit,
    MeasureLevel,
    Mission,
    MissionDistribution,
    Part,
    SatellitePlatform,
    Sublevel,
    UniversityRegistry,
    mission_distribution,
)
from .webunits import NormalizedUrl, is_within

ALIAS_MERGED = "alias_merged"
EXTERNAL_REDIRECT = "external_redirect"
EXTERNAL_ALIAS_INCLUDED = "external_alias_included"


class ZeroContour(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class DegenerateVariance(ValueError):
    pass


class MissingMeasurements(LookupError):
    def __init__(self, missing: Sequence[tuple[str, str]]):
        self.missing = list(missing)  # (query_id, rendered_query)
        super().__init__(f"{len(self.missing)} measurement(s) missing")


@dataclass(frozen=True)
class Finding:
    kind: str
    severity: str  # info | limitation | anomaly | discrepancy | warning
    subject: str
    message: str
    data: Mapping[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "severity": self.severity,
            "subject": self.subject,
            "message": self.message,
            "data": dict(self.data),
        }


# -- percent rendering ---------------------------------------------------------


def format_percent(fraction: float, decimals: Optional[int] = None) -> str:
    """Render a fraction as a percentage string.

    One decimal by default; two when one decimal would show a misleading
    ``.0`` for a value that is not actually whole (or nonzero values that
    would print as ``0.0``).
    """
    value = Decimal(repr(float(fraction))) * 100
    if decimals is None:
        one = value.quantize(Decimal("0.1"), ROUND_HALF_UP)
        two = value.quantize(Decimal("0.01"), ROUND_HALF_UP)
        decimals = 2 if (one == one.to_integral_value() and two != one) else 1
    q = Decimal(1).scaleb(-decimals)
    return f"{value.quantize(q, ROUND_HALF_UP)}%"


# -- elementary ratios ---------------------------------------------------------


def unit_share(unit_count: int, contour_count: int) -> float:
    if contour_count is None or contour_count <= 0:
        raise ZeroContour("contour count must be positive")
    return unit_count / contour_count


def coverage_ratio(internal_sum: int, contour_count: int) -> float:
    if contour_count is None or contour_count <= 0:
        raise ZeroContour("contour count must be positive")
    return internal_sum / contour_count


@dataclass(frozen=True)
class MentionConsistency:
    contour: int
    internal_sum: int
    gap: int
    relative_gap: Optional[float]
    severity: str  # consistent | limitation | anomaly

    def as_dict(self) -> dict[str, Any]:
        return {
            "contour": self.contour,
            "internal_sum": self.internal_sum,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "severity": self.severity,
        }


def mention_consistency(contour_mentions: int, internal_sum_mentions: int) -> MentionConsistency:
    """Compare the contour's mentions with the sum over its internal units.

    A shortfall means the units' mentions do not account for the whole
    (``limitation``); an excess means mentions were counted more than once
    or estimates are inflated (``anomaly``).
    """
    gap = abs(contour_mentions - internal_sum_mentions)
    rel = gap / contour_mentions if contour_mentions else None
    if internal_sum_mentions < contour_mentions:
        severity = "limitation"
    elif internal_sum_mentions > contour_mentions:
        severity = "anomaly"
    else:
        severity = "consistent"
    return MentionConsistency(contour_mentions, internal_sum_mentions, gap, rel, severity)


# -- correlation ---------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    if len(xs) != len(ys):
        raise ValueError("series differ in length")
    n = len(xs)
    if n < 3:
        raise InsufficientData(f"need at least 3 complete pairs, got {n}")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateVariance("a series is constant")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("a series has zero variance")
    r = sxy / math.sqrt(sxx * syy)
    return CorrelationResult(max(-1.0, min(1.0, r)), n)


def correlation(rows: Iterable["UnitRow"]) -> CorrelationResult:
    """Pearson r between count-page and URL-mention counts, complete pairs only."""
    pairs = [
        (r.institutional_count, r.external_count)
        for r in rows
        if r.institutional_count is not None and r.external_count is not None
    ]
    return pearson([float(p[0]) for p in pairs], [float(p[1]) for p in pairs])


# -- alias merging -------------------------------------------------------------


def _sum_present(values: Iterable[Optional[int]]) -> Optional[int]:
    values = list(values)
    if not values or any(v is None for v in values):
        return None
    return sum(values)


@dataclass
class MergedCounts:
    unit: InternalUnit
    part: Part
    platform: Optional[SatellitePlatform]
    institutional: Optional[int]  # over URLs inside the unit's own space
    external: Optional[int]
    alias_institutional: Optional[int] = None  # over external-alias URLs
    alias_external: Optional[int] = None
    alias_urls: tuple[NormalizedUrl, ...] = ()
    per_url: dict[str, tuple[Optional[int], Optional[int]]] = field(default_factory=dict)
    flags: frozenset = frozenset()

    def included(self, level: MeasureLevel) -> Optional[int]:
        own, alias = (
            (self.institutional, self.alias_institutional)
            if level is MeasureLevel.INSTITUTIONAL
            else (self.external, self.alias_external)
        )
        if not self.alias_urls:
            return own
        return _sum_present([own, alias])


def url_measures(
    measurements: MeasurementSet,
    url: NormalizedUrl,
    part: Part,
    sublevel: Sublevel,
    exclusion: NormalizedUrl,
    options: QueryOptions = QueryOptions(),
) -> tuple[Optional[int], Optional[int]]:
    inst_q, ext_q = measurement_queries(url, part, sublevel, exclusion, options)
    return measurements.count_for(inst_q), measurements.count_for(ext_q)


def merge_aliases(
    registry: UniversityRegistry,
    measurements: MeasurementSet,
    include_external_aliases: bool = False,
    options: QueryOptions = QueryOptions(),
) -> list[MergedCounts]:
    """Sum each unit's counts over its URL and aliases, core units first.

    External-alias URLs (outside the contour, on units marked
    ``external_alias``) are summed separately; they enter the unit's
    totals only through :meth:`MergedCounts.included`.
    """
    contour = registry.contour_url
    out = []
    groups: list[tuple[InternalUnit, Part, Optional[SatellitePlatform], NormalizedUrl]] = [
        (u, Part.CORE, None, contour) for u in registry.internal_units
    ]
    for sat in registry.satellites:
        groups.extend((u, Part.SATELLITE, sat, sat.platform_domain) for u in sat.internal_units)

    for unit, part, sat, exclusion in groups:
        own, held_out = [], []
        per_url = {}
        for u in unit.urls:
            inst, ext = url_measures(measurements, u, part, Sublevel.INTERNAL, exclusion, options)
            per_url[u.render()] = (inst, ext)
            if part is Part.CORE and unit.external_alias and not is_within(u, contour):
                held_out.append((u, inst, ext))
            else:
                own.append((inst, ext))
        flags = set()
        if len(unit.urls) > 1:
            flags.add(ALIAS_MERGED)
        if unit.redirect_target is not None and not is_within(unit.redirect_target, contour if part is Part.CORE else sat.platform_domain):
            flags.add(EXTERNAL_REDIRECT)
        if held_out and include_external_aliases:
            flags.add(EXTERNAL_ALIAS_INCLUDED)
        out.append(
            MergedCounts(
                unit=unit,
                part=part,
                platform=sat,
                institutional=_sum_present(i for i, _ in own) if own else 0,
                external=_sum_present(e for _, e in own) if own else 0,
                alias_institutional=_sum_present(i for _, i, _ in held_out) if held_out else None,
                alias_external=_sum_present(e for _, _, e in held_out) if held_out else None,
                alias_urls=tuple(u for u, _, _ in held_out),
                per_url=per_url,
                flags=frozenset(flags),
            )
        )
    return out


# -- rows and ranking ----------------------------------------------------------


@dataclass(frozen=True)
class UnitRow:
    url: str
    part: Part
    sublevel: Sublevel
    mission: Mission = Mission.UNASSIGNED
    institutional_count: Optional[int] = None
    external_count: Optional[int] = None
    flags: frozenset = frozenset()
    entity_name: str = ""
    platform: str = ""
    # counts measured on external-alias URLs and not folded into the row
    held_out_institutional: Optional[int] = None
    held_out_external: Optional[int] = None

    def count(self, level: MeasureLevel) -> Optional[int]:
        return self.institutional_count if level is MeasureLevel.INSTITUTIONAL else self.external_count

    def as_dict(self) -> dict[str, Any]:
        return {
            "url": self.url,
            "entity_name": self.entity_name,
            "part": self.part.value,
            "sublevel": self.sublevel.value,
            "platform": self.platform,
            "mission": self.mission.value,
            "institutional_count": self.institutional_count,
            "external_count": self.external_count,
            "held_out_institutional": self.held_out_institutional,
            "held_out_external": self.held_out_external,
            "flags": sorted(self.flags),
        }


def rank_units(rows: Iterable[UnitRow], indicator: MeasureLevel, k: int) -> list[UnitRow]:
    """Top-k internal rows by count, descending; ties by ascending URL."""
    if k <= 0:
        return []
    indicator = MeasureLevel(indicator)
    eligible = [r for r in rows if r.sublevel is Sublevel.INTERNAL and r.count(indicator) is not None]
    eligible.sort(key=lambda r: (-r.count(indicator), r.url))
    return eligible[:k]


def row_from_merged(m: MergedCounts, include_external_aliases: bool) -> UnitRow:
    if include_external_aliases and m.alias_urls:
        inst = m.included(MeasureLevel.INSTITUTIONAL)
        ext = m.included(MeasureLevel.EXTERNAL)
        held_i = held_e = None
    else:
        inst, ext = m.institutional, m.external
        held_i, held_e = m.alias_institutional, m.alias_external
    return UnitRow(
        url=m.unit.url.render(),
        part=m.part,
        sublevel=Sublevel.INTERNAL,
        mission=m.unit.mission,
        institutional_count=inst,
        external_count=ext,
        flags=m.flags,
        entity_name=m.unit.entity_name,
        platform=m.platform.name if m.platform else "",
        held_out_institutional=held_i,
        held_out_external=held_e,
    )


# -- report --------------------------------------------------------------------


@dataclass(frozen=True)
class ReportOptions:
    top_k: int = 25
    include_external_aliases: bool = False
    allow_partial: bool = False
    query_options: QueryOptions = QueryOptions()
    # published values to check the computed ones against: key -> {"value", "tolerance"}
    reference: Mapping[str, Mapping[str, float]] = field(default_factory=dict)


@dataclass
class PlatformSummary:
    name: str
    platform_domain: str
    contour: list[dict[str, Any]]  # one entry per contour URL
    contour_institutional: Optional[int]
    contour_external: Optional[int]
    internal_units: int
    internal_urls: int
    internal_sum_institutional: int
    internal_sum_external: int

    def as_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class AnalysisReport:
    registry_name: str
    contour_url: str
    rows: list[UnitRow]
    contour_institutional: Optional[int]
    contour_external: Optional[int]
    internal_sum_institutional: int
    internal_sum_external: int
    coverage_ratio: Optional[float]
    coverage_ratio_external: Optional[float]
    top_institutional: list[UnitRow]
    top_external: list[UnitRow]
    top_shares: list[tuple[str, float]]
    mission_distribution: Optional[MissionDistribution]
    mission_in_top: dict[str, dict[str, int]]
    mention_consistency: Optional[MentionConsistency]
    pearson_r: Optional[float]
    pearson_n: int
    nested_shares: list[dict[str, Any]]
    satellites: list[PlatformSummary]
    diagnostics: list[Finding]
    options: ReportOptions
    partial: bool = False
    missing: list[tuple[str, str]] = field(default_factory=list)

    @property
    def core_rows(self) -> list[UnitRow]:
        return [r for r in self.rows if r.part is Part.CORE and r.sublevel is Sublevel.INTERNAL]

    def findings(self, kind: str) -> list[Finding]:
        return [d for d in self.diagnostics if d.kind == kind]

    def row(self, url: str) -> UnitRow:
        for r in self.rows:
            if r.url == url:
                return r
        raise KeyError(url)

    def platform(self, name: str) -> PlatformSummary:
        for p in self.satellites:
            if p.name.lower() == name.lower():
                return p
        raise KeyError(name)


def required_queries(registry: UniversityRegistry, options: QueryOptions = QueryOptions()):
    """Every (institutional, external) query a full report needs, in plan order."""
    for url, part, sub, exclusion, _, _ in planned_urls(registry):
        yield from measurement_queries(url, part, sub, exclusion, options)


def _ratio_or_none(num: Optional[int], den: Optional[int]) -> Optional[float]:
    if num is None or not den:
        return None
    return num / den


def build_report(
    registry: UniversityRegistry,
    measurements: MeasurementSet,
    options: ReportOptions = ReportOptions(),
) -> AnalysisReport:
    qopts = options.query_options
    diags: list[Finding] = []

    missing = []
    seen = set()
    for q in required_queries(registry, qopts):
        if q.query_id not in seen and measurements.count_for(q) is None:
            missing.append((q.query_id, q.rendered))
        seen.add(q.query_id)
    if missing and not options.allow_partial:
        raise MissingMeasurements(missing)
    for qid, rendered in missing:
        diags.append(Finding("missing_measurement", "warning", rendered, "no measurement", {"query_id": qid}))

    contour = registry.contour_url
    c_inst, c_ext = url_measures(measurements, contour, Part.CORE, Sublevel.CONTOUR, contour, qopts)
    rows: list[UnitRow] = [
        UnitRow(contour.render(), Part.CORE, Sublevel.CONTOUR, institutional_count=c_inst,
                external_count=c_ext, entity_name=registry.name)
    ]

    merged = merge_aliases(registry, measurements, options.include_external_aliases, qopts)
    core_rows, sat_rows = [], {}
    for m in merged:
        row = row_from_merged(m, options.include_external_aliases)
        if row.institutional_count is None and row.external_count is None:
            diags.append(Finding("unmeasured_unit", "warning", row.url, "no counts for any of the unit's URLs"))
            continue
        if m.part is Part.CORE:
            core_rows.append(row)
        else:
            sat_rows.setdefault(m.platform.name, []).append(row)
        if EXTERNAL_REDIRECT in m.flags:
            diags.append(
                Finding(
                    "external_redirect", "info", row.url,
                    f"redirects outside its space to {m.unit.redirect_target.render()}",
                )
            )
        if m.alias_urls:
            diags.append(
                Finding(
                    "external_alias", "info", row.url,
                    "counts on external-alias URLs "
                    + ("included" if options.include_external_aliases else "reported separately"),
                    {
                        "alias_urls": [u.render() for u in m.alias_urls],
                        "excluded_institutional": m.institutional,
                        "excluded_external": m.external,
                        "included_institutional": m.included(MeasureLevel.INSTITUTIONAL),
                        "included_external": m.included(MeasureLevel.EXTERNAL),
                    },
                )
            )
    rows.extend(core_rows)

    sum_inst = sum(r.institutional_count for r in core_rows if r.institutional_count is not None)
    sum_ext = sum(r.external_count for r in core_rows if r.external_count is not None)

    cov = _ratio_or_none(sum_inst, c_inst)
    cov_ext = _ratio_or_none(sum_ext, c_ext)
    for label, value, num, den in (
        ("institutional", cov, sum_inst, c_inst),
        ("external", cov_ext, sum_ext, c_ext),
    ):
        if value is None:
            diags.append(Finding("coverage_unavailable", "warning", label, "contour count missing or zero"))
        elif value > 1:
            diags.append(
                Finding(
                    "coverage_exceeds_one", "anomaly", label,
                    f"internal sum {num:,} exceeds contour {den:,} ({format_percent(value)}); "
                    "engine estimates are not additive",
                    {"ratio": value},
                )
            )

    top_i = rank_units(core_rows, MeasureLevel.INSTITUTIONAL, options.top_k)
    top_e = rank_units(core_rows, MeasureLevel.EXTERNAL, options.top_k)
    shares = [(r.url, unit_share(r.institutional_count, c_inst)) for r in top_i] if c_inst else []
    mission_top = {
        level.value: {m.value: sum(1 for r in top if r.mission is m) for m in Mission}
        for level, top in ((MeasureLevel.INSTITUTIONAL, top_i), (MeasureLevel.EXTERNAL, top_e))
    }

    try:
        dist = mission_distribution(registry)
    except EmptyRegistry:
        dist = None
    if dist is not None and dist.unassigned:
        diags.append(
            Finding(
                "unassigned_mission", "warning", registry.name,
                f"{dist.unassigned} internal unit(s) carry no mission tag",
                {"units": [u.url.render() for u in registry.internal_units if u.mission is Mission.UNASSIGNED]},
            )
        )

    consistency = None
    if c_ext is not None:
        consistency = mention_consistency(c_ext, sum_ext)
        if consistency.severity != "consistent":
            diags.append(
                Finding(
                    "mention_consistency", consistency.severity, contour.render(),
                    f"contour mentions {c_ext:,} vs internal sum {sum_ext:,}: gap {consistency.gap:,}",
                    consistency.as_dict(),
                )
            )

    r_value, r_n = None, 0
    try:
        res = correlation(core_rows)
        r_value, r_n = res.r, res.n
    except (InsufficientData, DegenerateVariance) as exc:
        diags.append(Finding("correlation_unavailable", "info", "pearson", f"{type(exc).__name__}: {exc}"))

    nested = _nested_shares(core_rows, registry)
    for item in nested:
        diags.append(
            Finding(
                "nested_share", "info", item["url"],
                f"nested under {item['ancestor']}: "
                + ", ".join(
                    f"{lvl} {format_percent(item[lvl])}" for lvl in ("institutional", "external") if item[lvl] is not None
                ),
                item,
            )
        )

    platforms = []
    for sat in registry.satellites:
        platforms.append(_platform_summary(sat, sat_rows.get(sat.name, []), measurements, qopts))
        p = platforms[-1]
        rows.append(
            UnitRow(sat.contour_url.render(), Part.SATELLITE, Sublevel.CONTOUR,
                    institutional_count=p.contour_institutional, external_count=p.contour_external,
                    platform=sat.name, flags=frozenset({ALIAS_MERGED}) if sat.contour_aliases else frozenset())
        )
        rows.extend(sat_rows.get(sat.name, []))

    report = AnalysisReport(
        registry_name=registry.name,
        contour_url=contour.render(),
        rows=rows,
        contour_institutional=c_inst,
        contour_external=c_ext,
        internal_sum_institutional=sum_inst,
        internal_sum_external=sum_ext,
        coverage_ratio=cov,
        coverage_ratio_external=cov_ext,
        top_institutional=top_i,
        top_external=top_e,
        top_shares=shares,
        mission_distribution=dist,
        mission_in_top=mission_top,
        mention_consistency=consistency,
        pearson_r=r_value,
        pearson_n=r_n,
        nested_shares=nested,
        satellites=platforms,
        diagnostics=diags,
        options=options,
        partial=bool(missing),
        missing=missing,
    )
    report.diagnostics.extend(compare_reference(report, options.reference))
    return report


def _nested_shares(core_rows: list[UnitRow], registry: UniversityRegistry) -> list[dict[str, Any]]:
    """Share of each unit's counts within the nearest registered unit containing it."""
    by_url = {r.url: r for r in core_rows}
    units = [u for u in registry.internal_units if u.url.render() in by_url]
    out = []
    for unit in units:
        ancestors = [a for a in units if a is not unit and a.url != unit.url and is_within(unit.url, a.url)]
        if not ancestors:
            continue
        anc = max(ancestors, key=lambda a: (len(a.url.labels), len(a.url.path)))
        child, parent = by_url[unit.url.render()], by_url[anc.url.render()]
        item = {"url": child.url, "ancestor": parent.url}
        for lvl in MeasureLevel:
            c, p = child.count(lvl), parent.count(lvl)
            item[lvl.value] = c / p if c is not None and p else None
        out.append(item)
    return out


def _platform_summary(
    sat: SatellitePlatform, rows: list[UnitRow], measurements: MeasurementSet, qopts: QueryOptions
) -> PlatformSummary:
    contour = []
    for u in sat.contour_urls:
        inst, ext = url_measures(measurements, u, Part.SATELLITE, Sublevel.CONTOUR, sat.platform_domain, qopts)
        contour.append({"url": u.render(), "institutional": inst, "external": ext})
    return PlatformSummary(
        name=sat.name,
        platform_domain=sat.platform_domain.render(),
        contour=contour,
        contour_institutional=_sum_present(c["institutional"] for c in contour),
        contour_external=_sum_present(c["external"] for c in contour),
        internal_units=len(sat.internal_units),
        internal_urls=sum(len(u.urls) for u in sat.internal_units),
        internal_sum_institutional=sum(r.institutional_count for r in rows if r.institutional_count is not None),
        internal_sum_external=sum(r.external_count for r in rows if r.external_count is not None),
    )


# -- reference comparison ------------------------------------------------------


def computed_values(report: AnalysisReport) -> dict[str, float]:
    """Flat map of the report's headline numbers, keyed as in reference files."""
    vals: dict[str, float] = {
        "internal_sum_institutional": report.internal_sum_institutional,
        "internal_sum_external": report.internal_sum_external,
    }
    for key, value in (
        ("contour_institutional", report.contour_institutional),
        ("contour_external", report.contour_external),
        ("coverage_ratio", report.coverage_ratio),
        ("coverage_ratio_external", report.coverage_ratio_external),
        ("pearson_r", report.pearson_r),
    ):
        if value is not None:
            vals[key] = value
    if report.mention_consistency is not None:
        vals["mention_gap"] = report.mention_consistency.gap
    for url, share in report.top_shares:
        vals[f"share:{url}"] = share
    for item in report.nested_shares:
        if item["institutional"] is not None:
            vals[f"nested_share:{item['url']}"] = item["institutional"]
    if report.mission_distribution is not None:
        for m, pct in report.mission_distribution.percents.items():
            vals[f"mission_percent:{m.value}"] = pct / 100
    return vals


def compare_reference(report: AnalysisReport, reference: Mapping[str, Mapping[str, float]]) -> list[Finding]:
    out = []
    computed = computed_values(report)
    for key in sorted(reference):
        entry = reference[key]
        published = float(entry["value"])
        tol = float(entry.get("tolerance", 0.0))
        if key not in computed:
            out.append(Finding("reference_unchecked", "info", key, "no computed value to compare"))
            continue
        value = computed[key]
        if abs(value - published) <= tol:
            continue
        data = {"published": published, "computed": value, "tolerance": tol}
        is_fraction = key.startswith(("coverage_ratio", "share:", "nested_share:", "mission_percent:"))
        if is_fraction:
            msg = (
                f"published {format_percent(published, 2)} is irreproducible from the measured operands; "
                f"computed {format_percent(value, 2)}"
            )
            if key == "coverage_ratio" and published > 0:
                implied = report.internal_sum_institutional / published
                data["implied_denominator"] = round(implied)
                msg += (
                    f" ({report.internal_sum_institutional:,} / {report.contour_institutional:,}); "
                    f"the published figure implies a denominator of about {round(implied):,}"
                )
            elif key == "coverage_ratio_external" and published > 0:
                data["implied_denominator"] = round(report.internal_sum_external / published)
        else:
            msg = f"published {published:g} differs from computed {value:g}"
        out.append(Finding("reference_mismatch", "discrepancy", key, msg, data))
    return out
