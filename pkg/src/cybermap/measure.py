"""Resolve queries to result counts through fixture or live providers."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union
from urllib.parse import quote_plus, urlsplit

import httpx

from .querygen import PlannedQuery, Query

log = logging.getLogger(__name__)

FIXTURE_COLUMNS = ("query_id", "rendered_query", "count")


class MeasurementError(Exception):
    kind = "error"


class MissingFixture(MeasurementError):
    kind = "missing_fixture"


class ProviderUnavailable(MeasurementError):
    kind = "provider_unavailable"


class Unparseable(MeasurementError):
    kind = "unparseable"


class RateLimited(MeasurementError):
    kind = "rate_limited"


class ConfigurationError(ValueError):
    pass


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class MeasurementRecord:
    query_id: str
    rendered_query: str
    count: int
    provenance: str = "fixture"
    observed_at: Optional[datetime] = field(default=None, compare=False)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"negative count for {self.rendered_query!r}")
        if self.provenance not in ("fixture", "live"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class FetchFailure:
    query_id: str
    rendered_query: str
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}\t{self.query_id}\t{self.rendered_query}\t{self.message}"


@dataclass
class MeasurementSet:
    records: dict[str, MeasurementRecord] = field(default_factory=dict)
    source: str = ""
    errors: list[FetchFailure] = field(default_factory=list)

    def add(self, record: MeasurementRecord) -> None:
        if record.query_id in self.records:
            raise ValueError(f"duplicate measurement for query {record.query_id}")
        self.records[record.query_id] = record

    def lookup(self, query: Union[Query, str]) -> Optional[MeasurementRecord]:
        """Find a record by query id, falling back to the rendered query string."""
        if isinstance(query, str):
            return self.records.get(query)
        rec = self.records.get(query.query_id)
        if rec is None:
            rec = self._by_rendered().get(query.rendered)
        return rec

    def count_for(self, query: Union[Query, str]) -> Optional[int]:
        rec = self.lookup(query)
        return None if rec is None else rec.count

    def _by_rendered(self) -> dict[str, MeasurementRecord]:
        cache = self.__dict__.get("_rendered_cache")
        if cache is None or cache[0] != len(self.records):
            cache = (len(self.records), {r.rendered_query: r for r in self.records.values()})
            self.__dict__["_rendered_cache"] = cache
        return cache[1]

    def merged(self, other: "MeasurementSet") -> "MeasurementSet":
        out = MeasurementSet(dict(self.records), "; ".join(s for s in (self.source, other.source) if s))
        for rec in other.records.values():
            out.add(rec)
        out.errors = self.errors + other.errors
        return out

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, qid: str) -> bool:
        return qid in self.records


# -- fixture format ------------------------------------------------------------


def _parse_count(text: str, where: str) -> int:
    try:
        value = int(text.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{where}: count {text!r} is not an integer") from exc
    if value < 0:
        raise ConfigurationError(f"{where}: negative count {value}")
    return value


def read_fixture(path: Union[str, Path]) -> MeasurementSet:
    """Load a ``query_id,rendered_query,count`` CSV.

    Rows with an empty query_id are keyed by their rendered query and
    resolved by :class:`FixtureProvider` on lookup.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return parse_fixture(text, str(path))


def parse_fixture(text: str, source: str = "") -> MeasurementSet:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != FIXTURE_COLUMNS:
        raise ConfigurationError(f"{source}: fixture header must be {','.join(FIXTURE_COLUMNS)}")
    out = MeasurementSet(source=source)
    for lineno, row in enumerate(reader, start=2):
        where = f"{source}:{lineno}"
        rendered = row["rendered_query"]
        qid = (row["query_id"] or "").strip() or "rendered:" + rendered
        try:
            out.add(MeasurementRecord(qid, rendered, _parse_count(row["count"] or "", where)))
        except ValueError as exc:
            raise ConfigurationError(f"{where}: {exc}") from exc
    return out


def fixture_text(mset: MeasurementSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIXTURE_COLUMNS)
    for rec in mset.records.values():
        w.writerow([rec.query_id, rec.rendered_query, rec.count])
    return buf.getvalue()


def write_fixture(mset: MeasurementSet, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(fixture_text(mset))


# -- providers -----------------------------------------------------------------


class Provider(Protocol):
    provenance: str

    def host(self, query: Query) -> Optional[str]: ...

    def count(self, query: Query) -> int: ...


class FixtureProvider:
    """Pure lookup of recorded counts, by query id and then by rendered string."""

    provenance = "fixture"

    def __init__(self, measurements: MeasurementSet):
        self.measurements = measurements

    @classmethod
    def from_files(cls, paths: Iterable[Union[str, Path]]) -> "FixtureProvider":
        mset = MeasurementSet()
        for p in paths:
            mset = mset.merged(read_fixture(p))
        return cls(mset)

    def host(self, query: Query) -> Optional[str]:
        return None

    def count(self, query: Query) -> int:
        rec = self.measurements.lookup(query)
        if rec is None:
            raise MissingFixture(f"no fixture for {query.rendered!r}")
        return rec.count


@dataclass
class LiveConfig:
    """Endpoint and extraction settings; engines change, so none of this is hard-coded."""

    endpoint: str = "https://www.google.com/search?q={query}&hl=en"
    pattern: str = r"About ([\d,.\s]+) results"
    zero_pattern: Optional[str] = r"did not match any documents"
    user_agent: str = "cybermap/0.1 (+research measurement)"
    headers: dict[str, str] = field(default_factory=dict)
    timeout: float = 20.0
    min_interval: float = 2.0
    retries: int = 3
    backoff: float = 2.0

    @classmethod
    def from_dict(cls, data: dict) -> "LiveConfig":
        known = set(cls.__dataclass_fields__)
        bad = set(data) - known
        if bad:
            raise ConfigurationError(f"unknown live provider settings: {sorted(bad)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "LiveConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class LiveProvider:
    """One GET per query against a configurable results page; reads the first-page estimate."""

    provenance = "live"

    def __init__(self, config: LiveConfig, client: Optional[httpx.Client] = None):
        if "{query}" not in config.endpoint:
            raise ConfigurationError("endpoint template needs a {query} placeholder")
        self.config = config
        self._pattern = re.compile(config.pattern)
        self._zero = re.compile(config.zero_pattern) if config.zero_pattern else None
        headers = {"User-Agent": config.user_agent, **config.headers}
        self.client = client or httpx.Client(timeout=config.timeout, headers=headers, follow_redirects=True)
        if client is not None:
            self.client.headers.update(headers)
        self._host = urlsplit(config.endpoint.replace("{query}", "")).hostname

    def host(self, query: Query) -> Optional[str]:
        return self._host

    def count(self, query: Query) -> int:
        url = self.config.endpoint.replace("{query}", quote_plus(query.rendered))
        try:
            resp = self.client.get(url)
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in (429, 503):
            raise RateLimited(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"HTTP {resp.status_code}")
        return self.extract(resp.text)

    def extract(self, body: str) -> int:
        m = self._pattern.search(body)
        if m:
            digits = re.sub(r"\D", "", m.group(1))
            if digits:
                return int(digits)
        if self._zero is not None and self._zero.search(body):
            return 0
        raise Unparseable("result count not found in response body")


# -- pacing --------------------------------------------------------------------


class PacingPolicy:
    """Minimum interval between requests to the same host, plus retry backoff.

    ``clock`` and ``sleep`` are injectable so tests can run on virtual time.
    """

    def __init__(
        self,
        min_interval: float = 2.0,
        retries: int = 3,
        backoff: float = 2.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if min_interval < 0 or retries < 0 or backoff < 1:
            raise ConfigurationError("invalid pacing policy")
        self.min_interval = min_interval
        self.retries = retries
        self.backoff = backoff
        self.clock = clock
        self.sleep = sleep
        self._last: dict[str, float] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @classmethod
    def from_config(cls, config: LiveConfig, **kw) -> "PacingPolicy":
        return cls(config.min_interval, config.retries, config.backoff, **kw)

    def _lock(self, host: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(host, threading.Lock())

    def call(self, host: Optional[str], fn: Callable[[], int]) -> int:
        if host is None:
            return fn()
        with self._lock(host):
            delay = self.min_interval
            for attempt in range(self.retries + 1):
                last = self._last.get(host)
                if last is not None:
                    wait = last + delay - self.clock()
                    if wait > 0:
                        self.sleep(wait)
                self._last[host] = self.clock()
                try:
                    return fn()
                except RateLimited:
                    if attempt == self.retries:
                        raise
                    delay = max(self.min_interval, delay) * self.backoff
                    log.warning("rate limited by %s; backing off %.1fs", host, delay)
        raise AssertionError("unreachable")


def fetch(query: Query, provider: Provider, policy: Optional[PacingPolicy] = None) -> MeasurementRecord:
    policy = policy or PacingPolicy(min_interval=0.0)
    value = policy.call(provider.host(query), lambda: provider.count(query))
    return MeasurementRecord(query.query_id, query.rendered, int(value), provider.provenance, _utc_now())


def fetch_plan(
    plan: Sequence[Union[Query, PlannedQuery]],
    provider: Provider,
    policy: Optional[PacingPolicy] = None,
    max_workers: int = 1,
) -> MeasurementSet:
    """Fetch every query; failures go to ``errors`` and never discard other results.

    Queries are grouped per provider host so that parallel workers never
    share a host; output keeps plan order.
    """
    policy = policy or PacingPolicy(min_interval=0.0)
    queries = [q.query if isinstance(q, PlannedQuery) else q for q in plan]
    results: list[Union[MeasurementRecord, FetchFailure, None]] = [None] * len(queries)

    def run(indices: list[int]) -> None:
        for i in indices:
            q = queries[i]
            try:
                results[i] = fetch(q, provider, policy)
            except MeasurementError as exc:
                results[i] = FetchFailure(q.query_id, q.rendered, exc.kind, str(exc))

    groups: dict[Optional[str], list[int]] = {}
    for i, q in enumerate(queries):
        groups.setdefault(provider.host(q), []).append(i)
    if max_workers <= 1 or len(groups) <= 1:
        for idx in groups.values():
            run(idx)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(run, groups.values()))

    out = MeasurementSet(source=f"{provider.provenance} provider")
    for res in results:
        if isinstance(res, MeasurementRecord):
            if res.query_id not in out.records:
                out.add(res)
        else:
            out.errors.append(res)
    return out
