"""Build the Harvard case-study fixture bundle.

Only part of the case study's data was ever printed: the contour figures,
the top of the per-unit rankings, a few figures quoted in prose, and
per-platform satellite sums. Everything else (the remaining core units and
every satellite channel) is a *synthetic stand-in*: integer counts drawn
deterministically so that every printed total, cap implied by the ranking
cut-off, and mission count is reproduced exactly. Stand-in units are
named ``<mission>-sNNN.harvard.edu`` / ``..._sNNN`` and labeled as such.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

from .measure import MeasurementRecord, MeasurementSet, fixture_text
from .querygen import QueryOptions, measurement_queries
from .taxonomy import (
    InternalUnit,
    Mission,
    SatellitePlatform,
    UnitKind,
    UniversityRegistry,
    registry_to_dict,
)
from .webunits import NormalizedUrl, normalize

SEED = 20120501

ENTITY_NAMES = {
    "mcz.harvard.edu": "Museum of Comparative Zoology",
    "lib.harvard.edu": "Harvard Library",
    "map.harvard.edu": "Campus map",
    "news.harvard.edu": "Public Affairs & Communications",
    "law.harvard.edu": "Harvard Law School",
    "blogs.law.harvard.edu": "Harvard Law School blog platform",
    "hbs.harvard.edu": "Harvard Business School",
    "post.harvard.edu": "Harvard Alumni (post)",
    "iq.harvard.edu": "The Institute for Quantitative Social Science",
    "meei.harvard.edu": "Massachusetts Eye and Ear Infirmary",
}
PRODUCTS = {"map.harvard.edu", "blogs.law.harvard.edu", "coursecatalog.harvard.edu", "news.harvard.edu"}

# units named in the prose but absent from the printed rankings
PROSE_UNITS = [
    # url, mission, aliases, redirect target
    ("iq.harvard.edu", Mission.RESEARCH, ("cbrss.harvard.edu",), None),
    ("meei.harvard.edu", Mission.RESEARCH, (), "masseyeandear.org"),
]

# a unit outside the ranking must stay strictly below the last ranked value
COUNT_CAP = 47_499
MENTION_CAP = 341_999
# post.harvard.edu sits between 539,000 and 531,000 mentions; its alias must not move it
POST_ALIAS_MENTION_CAP = 4_999


def _data_text(name: str) -> str:
    return resources.files("cybermap.data").joinpath(name).read_text(encoding="utf-8")


def _csv_rows(name: str) -> list[dict[str, str]]:
    lines = [ln for ln in _data_text(name).splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _int(text: str) -> Optional[int]:
    text = (text or "").strip()
    return int(text) if text else None


def published() -> dict:
    return json.loads(_data_text("harvard/published.json"))


def split_total(total: int, caps: Sequence[int], rng: random.Random, sigma: float = 1.0) -> list[int]:
    """Random integer composition of ``total`` with ``0 <= part_i <= caps[i]``.

    Log-normal weights, water-filled against the caps, then rounded by
    largest remainder. Deterministic for a given ``rng`` state.
    """
    n = len(caps)
    if total < 0 or sum(caps) < total:
        raise ValueError(f"cannot split {total} under caps summing to {sum(caps)}")
    if n == 0:
        return []
    weights = [rng.lognormvariate(0.0, sigma) for _ in range(n)]
    alloc = [0.0] * n
    free = set(range(n))
    remaining = float(total)
    while free and remaining > 1e-9:
        wsum = sum(weights[i] for i in free)
        over = [i for i in free if remaining * weights[i] / wsum > caps[i]]
        if not over:
            for i in free:
                alloc[i] = remaining * weights[i] / wsum
            break
        for i in over:
            alloc[i] = caps[i]
            remaining -= caps[i]
            free.discard(i)
    parts = [min(int(a), caps[i]) for i, a in enumerate(alloc)]
    short = total - sum(parts)
    order = sorted(range(n), key=lambda i: (-(alloc[i] - int(alloc[i])), i))
    while short > 0:
        for i in order:
            if short and parts[i] < caps[i]:
                parts[i] += 1
                short -= 1
    assert sum(parts) == total and all(0 <= p <= c for p, c in zip(parts, caps))
    return parts


@dataclass
class Bundle:
    registry: UniversityRegistry
    measurements: MeasurementSet
    reference: dict

    def write(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "registry.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(registry_to_dict(self.registry), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        with open(directory / "measurements.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(fixture_text(self.measurements))


def _unit(url: str, mission: Mission, aliases=(), redirect=None, external_alias=False, name=None) -> InternalUnit:
    return InternalUnit(
        url=normalize(url),
        entity_name=name if name is not None else ENTITY_NAMES.get(url, ""),
        kind=UnitKind.PRODUCT if url in PRODUCTS else UnitKind.INSTITUTION,
        mission=mission,
        aliases=tuple(normalize(a) for a in aliases),
        redirect_target=None if redirect is None else normalize(redirect),
        external_alias=external_alias,
    )


def build_harvard(seed: int = SEED) -> Bundle:
    rng = random.Random(seed)
    pub = published()
    targets = pub["targets"]
    rows = _csv_rows("harvard/core_units.csv")
    contour_row, unit_rows = rows[0], rows[1:]
    contour = normalize(contour_row["url"])

    # url -> [count, mentions], None where a stand-in value is needed
    known: dict[str, list[Optional[int]]] = {}
    caps: dict[str, tuple[int, int]] = {}
    units: list[InternalUnit] = []
    missions: dict[str, Mission] = {}
    for r in unit_rows:
        missions[r["url"]] = Mission(r["mission"]) if r["mission"] else Mission.UNASSIGNED
        known[r["url"]] = [_int(r["count_page"]), _int(r["url_mentions"])]

    hbs_alias = known.pop("hbs.edu")
    missions.pop("hbs.edu")
    for url, mission in missions.items():
        if url == "hbs.harvard.edu":
            units.append(_unit(url, mission, ("hbs.edu",), "hbs.edu", external_alias=True))
        elif url == "post.harvard.edu":
            units.append(_unit(url, mission, ("alumni.harvard.edu",), "alumni.harvard.edu"))
        else:
            units.append(_unit(url, mission))
    for url, mission, aliases, redirect in PROSE_UNITS:
        units.append(_unit(url, mission, aliases, redirect))
        known[url] = [None, None]
        for a in aliases:
            known[a] = [None, None]
            caps[a] = (COUNT_CAP // 2, MENTION_CAP // 2)
        caps[url] = (COUNT_CAP // 2, MENTION_CAP // 2)
    known["alumni.harvard.edu"] = [None, None]
    caps["alumni.harvard.edu"] = (COUNT_CAP // 2, POST_ALIAS_MENTION_CAP)
    caps["post.harvard.edu"] = (COUNT_CAP // 2, MENTION_CAP)

    third_level = [u for u in units if len(u.url.labels) == 3]
    tally = {m: sum(1 for u in third_level if u.mission is m) for m in Mission}
    stand_ins = []
    for m, wanted in targets["mission_counts"].items():
        m = Mission(m)
        for i in range(1, wanted - tally[m] + 1):
            url = f"{m.value}-s{i:03d}.harvard.edu"
            stand_ins.append(_unit(url, m, name=f"Synthetic {m.value} unit {i:03d} (stand-in)"))
            known[url] = [None, None]
    units.extend(stand_ins)
    n_third = sum(1 for u in units if len(u.url.labels) == 3)
    if n_third != targets["core_internal_units"]:
        raise AssertionError(f"built {n_third} third-level units, expected {targets['core_internal_units']}")

    for col, total_key, default_cap in (
        (0, "internal_sum_institutional", COUNT_CAP),
        (1, "internal_sum_external", MENTION_CAP),
    ):
        fixed = sum(v[col] for v in known.values() if v[col] is not None)
        slots = [url for url, v in known.items() if v[col] is None]
        parts = split_total(
            targets[total_key] - fixed, [caps.get(u, (COUNT_CAP, MENTION_CAP))[col] for u in slots], rng
        )
        for url, p in zip(slots, parts):
            known[url][col] = p

    satellites, sat_values = _build_satellites(rng)
    registry = UniversityRegistry("Harvard University", contour, tuple(units), tuple(satellites))

    values: dict[NormalizedUrl, tuple[int, int]] = {
        contour: (_int(contour_row["count_page"]), _int(contour_row["url_mentions"]))
    }
    for url, (c, m) in known.items():
        values[normalize(url)] = (c, m)
    values[normalize("hbs.edu")] = tuple(hbs_alias)
    values.update(sat_values)
    return Bundle(registry, _measure(registry, values), pub)


def _build_satellites(rng: random.Random):
    rows = _csv_rows("harvard/satellites.csv")
    platforms: dict[str, dict] = {}
    for r in rows:
        p = platforms.setdefault(r["platform"], {"domain": r["platform_domain"], "contour": [], "sum": None})
        if r["kind"] == "contour":
            p["contour"].append((r["url"], _int(r["count_page"]), _int(r["url_mentions"])))
        else:
            p["sum"] = (
                _int(r["count_page"]),
                _int(r["url_mentions"]),
                _int(r["internal_units"]),
                _int(r["urls_per_unit"]),
            )
    sats, values = [], {}
    for name, p in platforms.items():
        contour_url = normalize(p["contour"][0][0])
        for url, c, m in p["contour"]:
            values[normalize(url)] = (c, m)
        count_sum, mention_sum, n_units, per_unit = p["sum"]
        units = []
        for i in range(1, n_units + 1):
            urls = _channel_urls(name, contour_url, i, per_unit)
            units.append(
                InternalUnit(
                    url=urls[0],
                    entity_name=f"Synthetic {name} channel {i:03d} (stand-in)",
                    kind=UnitKind.PRODUCT,
                    mission=Mission.UNASSIGNED,
                    aliases=tuple(urls[1:]),
                )
            )
        all_urls = [u for unit in units for u in unit.urls]
        big = max(count_sum, mention_sum)
        counts = split_total(count_sum, [big] * len(all_urls), rng)
        mentions = split_total(mention_sum, [big] * len(all_urls), rng)
        for u, c, m in zip(all_urls, counts, mentions):
            values[u] = (c, m)
        sats.append(
            SatellitePlatform(
                name=name,
                platform_domain=normalize(p["domain"]),
                contour_url=contour_url,
                internal_units=tuple(units),
                contour_aliases=tuple(normalize(u) for u, _, _ in p["contour"][1:]),
            )
        )
    return sats, values


def _channel_urls(platform: str, contour: NormalizedUrl, i: int, per_unit: int) -> list[NormalizedUrl]:
    tag = f"s{i:03d}"
    if platform == "Academia":
        return [normalize(f"{contour.render()}/Departments/Department_{tag}")]
    if platform == "Flickr":
        return [normalize(f"flickr.com/groups/harvard_{tag}")]
    if platform == "Youtube":
        base = [f"youtube.com/Harvard_{tag}", f"youtube.com/user/Harvard_{tag}"]
        return [normalize(u) for u in base[:per_unit]]
    return [normalize(f"{contour.host}/Harvard_{tag}")]


def _measure(registry: UniversityRegistry, values: dict[NormalizedUrl, tuple[int, int]]) -> MeasurementSet:
    from .querygen import planned_urls

    mset = MeasurementSet(source="harvard case-study transcription with synthetic stand-ins")
    for url, part, sub, exclusion, _, _ in planned_urls(registry):
        inst_q, ext_q = measurement_queries(url, part, sub, exclusion, QueryOptions())
        c, m = values[url]
        for q, v in ((inst_q, c), (ext_q, m)):
            if q.query_id not in mset.records:
                mset.add(MeasurementRecord(q.query_id, q.rendered, v))
    return mset


def harvard_paths() -> dict[str, Path]:
    """Locations of the shipped bundle files."""
    base = resources.files("cybermap.data").joinpath("harvard")
    return {
        "registry": Path(str(base.joinpath("registry.json"))),
        "measurements": Path(str(base.joinpath("measurements.csv"))),
        "reference": Path(str(base.joinpath("published.json"))),
    }
