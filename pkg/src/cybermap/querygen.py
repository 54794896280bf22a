"""Search-operator query strings for the four indicators."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

from .taxonomy import Part, Sublevel, UniversityRegistry
from .webunits import NormalizedUrl, UnresolvableSuffix, as_url, parse_locus


class IndicatorKind(str, Enum):
    COUNT_PAGE = "count_page"
    URL_MENTION = "url_mention"
    HYPERTEXTUAL_CITATION = "hypertextual_citation"
    TEXTUAL_CITATION = "textual_citation"


# link: operators were withdrawn by the engines; still rendered, but marked
DEPRECATED_INDICATORS = frozenset({IndicatorKind.HYPERTEXTUAL_CITATION})

PLAN_COLUMNS = ("query_id", "part", "sublevel", "indicator", "unit_url", "rendered_query")


def query_id(indicator: IndicatorKind, target: str, exclusion: Optional[str]) -> str:
    """Stable 16-hex-digit identifier of (indicator, target, exclusion)."""
    key = "\x1f".join((IndicatorKind(indicator).value, target, exclusion or ""))
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Query:
    indicator: IndicatorKind
    target: str  # rendered URL (possibly with legacy prefix) or display name
    exclusion: Optional[NormalizedUrl]
    rendered: str

    @property
    def query_id(self) -> str:
        return query_id(self.indicator, self.target, self._exclusion_text)

    @property
    def _exclusion_text(self) -> Optional[str]:
        return None if self.exclusion is None else self.exclusion.render()

    @property
    def deprecated_operator(self) -> bool:
        return self.indicator in DEPRECATED_INDICATORS


def _excl(exclusion: Optional[NormalizedUrl]) -> str:
    return "" if exclusion is None else " -site:" + exclusion.render()


def count_page_query(
    target: Union[str, NormalizedUrl], exclusion: Optional[Union[str, NormalizedUrl]] = None
) -> Query:
    """``site:`` query. An exclusion is only attached for the legacy satellite form."""
    target = as_url(target)
    if exclusion is None:
        return Query(IndicatorKind.COUNT_PAGE, target.render(), None, "site:" + target.render())
    exclusion = as_url(exclusion)
    text = "http://" + target.render()
    return Query(IndicatorKind.COUNT_PAGE, text, exclusion, "site:" + text + _excl(exclusion))


def url_mention_query(
    target: Union[str, NormalizedUrl], exclusion: Union[str, NormalizedUrl]
) -> Query:
    target, exclusion = as_url(target), as_url(exclusion)
    text = target.render()
    return Query(IndicatorKind.URL_MENTION, text, exclusion, f'"{text}"' + _excl(exclusion))


def hypertextual_citation_query(
    target: Union[str, NormalizedUrl],
    exclusion: Union[str, NormalizedUrl],
    legacy_prefix: bool = False,
) -> Query:
    """``linkdomain:`` query.

    With ``legacy_prefix`` a directory-level target on a bare registrable
    host is written as ``http://www.<host>/<dirs>``, the form older engines
    expected for folder-scoped link searches.
    """
    target, exclusion = as_url(target), as_url(exclusion)
    text = target.render()
    if legacy_prefix and target.path and _is_registrable(target):
        text = "http://www." + text
    return Query(IndicatorKind.HYPERTEXTUAL_CITATION, text, exclusion, "linkdomain:" + text + _excl(exclusion))


def textual_citation_query(name: str, exclusion: Union[str, NormalizedUrl]) -> Query:
    if not name or not name.strip():
        raise ValueError("textual citation needs a non-empty name")
    exclusion = as_url(exclusion)
    return Query(IndicatorKind.TEXTUAL_CITATION, name, exclusion, f'"{name}"' + _excl(exclusion))


def _is_registrable(url: NormalizedUrl) -> bool:
    try:
        return not parse_locus(url).subdomain_labels
    except UnresolvableSuffix:
        return False


@dataclass(frozen=True)
class QueryOptions:
    legacy_table6: bool = False  # "site:http://X -site:platform" for satellite internal units
    legacy_linkdomain: bool = False  # "linkdomain:http://www.host/dir" for directory targets


def build_query(
    indicator: IndicatorKind,
    url: NormalizedUrl,
    exclusion: NormalizedUrl,
    name: str = "",
    legacy_count_exclusion: bool = False,
    options: QueryOptions = QueryOptions(),
) -> Query:
    indicator = IndicatorKind(indicator)
    if indicator is IndicatorKind.COUNT_PAGE:
        return count_page_query(url, exclusion if legacy_count_exclusion else None)
    if indicator is IndicatorKind.URL_MENTION:
        return url_mention_query(url, exclusion)
    if indicator is IndicatorKind.HYPERTEXTUAL_CITATION:
        return hypertextual_citation_query(url, exclusion, options.legacy_linkdomain)
    return textual_citation_query(name or url.render(), exclusion)


@dataclass(frozen=True)
class PlannedQuery:
    query: Query
    part: Part
    sublevel: Sublevel
    unit_url: NormalizedUrl

    @property
    def query_id(self) -> str:
        return self.query.query_id

    @property
    def rendered(self) -> str:
        return self.query.rendered

    def csv_row(self) -> list[str]:
        return [
            self.query_id,
            self.part.value,
            self.sublevel.value,
            self.query.indicator.value,
            self.unit_url.render(),
            self.rendered,
        ]


def planned_urls(registry: UniversityRegistry):
    """Yield (url, part, sublevel, exclusion, name, is_primary) in plan order."""
    contour = registry.contour_url
    yield contour, Part.CORE, Sublevel.CONTOUR, contour, registry.name, True
    for unit in registry.internal_units:
        for i, u in enumerate(unit.urls):
            yield u, Part.CORE, Sublevel.INTERNAL, contour, unit.display_name, i == 0
    for sat in registry.satellites:
        for i, u in enumerate(sat.contour_urls):
            yield u, Part.SATELLITE, Sublevel.CONTOUR, sat.platform_domain, registry.name, i == 0
        for unit in sat.internal_units:
            for i, u in enumerate(unit.urls):
                yield u, Part.SATELLITE, Sublevel.INTERNAL, sat.platform_domain, unit.display_name, i == 0


def query_plan(
    registry: UniversityRegistry,
    indicators: Iterable[IndicatorKind],
    options: QueryOptions = QueryOptions(),
) -> list[PlannedQuery]:
    """One query per (declared URL, indicator), contour first, then units, then satellites.

    Textual citations name an entity rather than a URL, so aliases do not get
    their own. A query identical to an earlier one is emitted once.
    """
    wanted = [k for k in IndicatorKind if k in {IndicatorKind(i) for i in indicators}]
    plan: list[PlannedQuery] = []
    seen: set[str] = set()
    for url, part, sub, exclusion, name, primary in planned_urls(registry):
        for kind in wanted:
            if kind is IndicatorKind.TEXTUAL_CITATION and not primary:
                continue
            legacy = options.legacy_table6 and part is Part.SATELLITE and sub is Sublevel.INTERNAL
            q = build_query(kind, url, exclusion, name, legacy, options)
            if q.query_id in seen:
                continue
            seen.add(q.query_id)
            plan.append(PlannedQuery(q, part, sub, url))
    return plan


def measurement_queries(
    url: NormalizedUrl, part: Part, sublevel: Sublevel, exclusion: NormalizedUrl, options: QueryOptions
) -> tuple[Query, Query]:
    """The (institutional, external) pair measured for every declared URL."""
    legacy = options.legacy_table6 and part is Part.SATELLITE and sublevel is Sublevel.INTERNAL
    return (
        build_query(IndicatorKind.COUNT_PAGE, url, exclusion, legacy_count_exclusion=legacy, options=options),
        build_query(IndicatorKind.URL_MENTION, url, exclusion, options=options),
    )


def plan_to_csv(plan: Iterable[PlannedQuery]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLAN_COLUMNS)
    for pq in plan:
        w.writerow(pq.csv_row())
    return buf.getvalue()


def parse_indicators(text: str) -> list[IndicatorKind]:
    out = []
    for token in text.split(","):
        token = token.strip().lower().replace("-", "_")
        if token:
            out.append(IndicatorKind(token))
    return out
