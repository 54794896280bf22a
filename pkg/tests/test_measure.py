from __future__ import annotations

import httpx
import pytest
from hypothesis import given, strategies as st

from cybermap.measure import (
    ConfigurationError,
    FixtureProvider,
    LiveConfig,
    LiveProvider,
    MeasurementRecord,
    MeasurementSet,
    MissingFixture,
    PacingPolicy,
    ProviderUnavailable,
    RateLimited,
    Unparseable,
    fetch,
    fetch_plan,
    fixture_text,
    parse_fixture,
    read_fixture,
    write_fixture,
)
from cybermap.querygen import count_page_query, url_mention_query


def fixture_of(*pairs):
    mset = MeasurementSet()
    for q, n in pairs:
        mset.add(MeasurementRecord(q.query_id, q.rendered, n))
    return mset


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps: list[float] = []

    def __call__(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.now += seconds


class TestFixtureProvider:
    def test_harvard_contour_count(self, harvard_measurements):
        q = count_page_query("harvard.edu")
        rec = fetch(q, FixtureProvider(harvard_measurements))
        assert rec.count == 7_615_804
        assert rec.provenance == "fixture"
        assert rec.rendered_query == "site:harvard.edu"

    def test_zero_is_a_measurement(self, harvard_measurements):
        q = count_page_query("youtube.com/harvard")
        assert fetch(q, FixtureProvider(harvard_measurements)).count == 0

    def test_missing(self):
        with pytest.raises(MissingFixture):
            fetch(count_page_query("mcz.harvard.edu"), FixtureProvider(MeasurementSet()))

    def test_rendered_fallback(self):
        mset = parse_fixture("query_id,rendered_query,count\n,site:mcz.harvard.edu,1920000\n")
        assert FixtureProvider(mset).count(count_page_query("mcz.harvard.edu")) == 1_920_000

    def test_plan_with_gap(self):
        a, b, c = count_page_query("a.edu"), count_page_query("b.edu"), count_page_query("c.edu")
        out = fetch_plan([a, b, c], FixtureProvider(fixture_of((a, 1), (c, 3))))
        assert [r.rendered_query for r in out.records.values()] == ["site:a.edu", "site:c.edu"]
        (err,) = out.errors
        assert err.kind == "missing_fixture" and err.rendered_query == "site:b.edu"

    def test_empty_plan(self):
        out = fetch_plan([], FixtureProvider(MeasurementSet()))
        assert len(out) == 0 and out.errors == []

    def test_deterministic(self, harvard_measurements):
        qs = [count_page_query("harvard.edu"), url_mention_query("harvard.edu", "harvard.edu")]
        p = FixtureProvider(harvard_measurements)
        assert fixture_text(fetch_plan(qs, p)) == fixture_text(fetch_plan(qs, p))

    def test_from_files_merges(self, tmp_path):
        a, b = count_page_query("a.edu"), count_page_query("b.edu")
        write_fixture(fixture_of((a, 1)), tmp_path / "1.csv")
        write_fixture(fixture_of((b, 2)), tmp_path / "2.csv")
        p = FixtureProvider.from_files([tmp_path / "1.csv", tmp_path / "2.csv"])
        assert (p.count(a), p.count(b)) == (1, 2)


class TestFixtureFormat:
    def test_round_trip(self, tmp_path):
        a = url_mention_query("ucm.academia.edu/Departments/Biblioteconomía_y_Documentación", "academia.edu")
        mset = fixture_of((a, 1), (count_page_query("x.edu"), 0))
        write_fixture(mset, tmp_path / "f.csv")
        assert read_fixture(tmp_path / "f.csv").records == mset.records

    @pytest.mark.parametrize(
        "text",
        [
            "id,query,count\n",
            "query_id,rendered_query,count\nabc,site:x.edu,-1\n",
            "query_id,rendered_query,count\nabc,site:x.edu,lots\n",
            "query_id,rendered_query,count\nabc,site:x.edu,1\nabc,site:x.edu,2\n",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigurationError):
            parse_fixture(text)

    def test_negative_record(self):
        with pytest.raises(ValueError):
            MeasurementRecord("x", "site:x.edu", -1)


@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c", "d"]), st.integers(0, 10**9)), unique_by=lambda t: t[0]))
def test_fixture_text_round_trip(pairs):
    mset = fixture_of(*((count_page_query(f"{h}.edu"), n) for h, n in pairs))
    assert parse_fixture(fixture_text(mset)).records == mset.records


class TestPacing:
    def test_min_interval_per_host(self):
        clock = FakeClock()
        policy = PacingPolicy(min_interval=2.0, clock=clock, sleep=clock.sleep)
        policy.call("h", lambda: 1)
        clock.now += 0.5
        policy.call("h", lambda: 1)
        policy.call("other", lambda: 1)
        assert clock.sleeps == [1.5]

    def test_no_host_no_pacing(self):
        clock = FakeClock()
        policy = PacingPolicy(min_interval=5.0, clock=clock, sleep=clock.sleep)
        for _ in range(3):
            policy.call(None, lambda: 1)
        assert clock.sleeps == []

    def test_backoff_then_success(self):
        clock = FakeClock()
        policy = PacingPolicy(min_interval=1.0, retries=3, backoff=2.0, clock=clock, sleep=clock.sleep)
        outcomes = iter([RateLimited("429"), RateLimited("429"), 42])

        def fn():
            x = next(outcomes)
            if isinstance(x, Exception):
                raise x
            return x

        assert policy.call("h", fn) == 42
        assert clock.sleeps == [2.0, 4.0]

    def test_retries_exhausted(self):
        clock = FakeClock()
        policy = PacingPolicy(min_interval=0.0, retries=1, clock=clock, sleep=clock.sleep)
        calls = []

        def fn():
            calls.append(1)
            raise RateLimited("429")

        with pytest.raises(RateLimited):
            policy.call("h", fn)
        assert len(calls) == 2

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            PacingPolicy(backoff=0.5)


def live(handler, **cfg):
    config = LiveConfig(endpoint="https://search.test/?q={query}", **cfg)
    return LiveProvider(config, httpx.Client(transport=httpx.MockTransport(handler)))


class TestLiveProvider:
    def test_parses_estimate_and_encodes_query(self):
        seen = []

        def handler(request):
            seen.append(request)
            return httpx.Response(200, text="<div>About 1,920,000 results (0.2 seconds)</div>")

        p = live(handler, user_agent="probe/1")
        q = count_page_query("mcz.harvard.edu")
        rec = fetch(q, p)
        assert rec.count == 1_920_000 and rec.provenance == "live" and rec.observed_at is not None
        assert seen[0].url.params["q"] == "site:mcz.harvard.edu"
        assert seen[0].headers["user-agent"] == "probe/1"
        assert p.host(q) == "search.test"

    def test_zero_results_page(self):
        p = live(lambda r: httpx.Response(200, text="Your search did not match any documents."))
        assert p.count(count_page_query("x.edu")) == 0

    @pytest.mark.parametrize(
        "status, error", [(429, RateLimited), (503, RateLimited), (500, ProviderUnavailable), (404, ProviderUnavailable)]
    )
    def test_http_errors(self, status, error):
        p = live(lambda r: httpx.Response(status))
        with pytest.raises(error):
            p.count(count_page_query("x.edu"))

    def test_unparseable(self):
        p = live(lambda r: httpx.Response(200, text="<html>captcha</html>"))
        with pytest.raises(Unparseable):
            p.count(count_page_query("x.edu"))

    def test_transport_error(self):
        def handler(request):
            raise httpx.ConnectError("down")

        with pytest.raises(ProviderUnavailable):
            live(handler).count(count_page_query("x.edu"))

    def test_plan_collects_failures_with_pacing(self):
        bodies = iter(["About 10 results", "nothing here", "About 7 results"])
        p = live(lambda r: httpx.Response(200, text=next(bodies)))
        clock = FakeClock()
        policy = PacingPolicy(min_interval=1.0, clock=clock, sleep=clock.sleep)
        qs = [count_page_query(f"{h}.edu") for h in "abc"]
        out = fetch_plan(qs, p, policy)
        assert [r.count for r in out.records.values()] == [10, 7]
        assert [e.kind for e in out.errors] == ["unparseable"]
        assert clock.sleeps == [1.0, 1.0]

    def test_config(self, tmp_path):
        with pytest.raises(ConfigurationError):
            LiveConfig.from_dict({"endpoint": "x", "colour": 1})
        with pytest.raises(ConfigurationError):
            LiveProvider(LiveConfig(endpoint="https://no-placeholder.test/"))
        path = tmp_path / "live.json"
        path.write_text('{"min_interval": 5, "pattern": "(\\\\d+) hits"}', encoding="utf-8")
        cfg = LiveConfig.from_file(path)
        assert cfg.min_interval == 5
        assert PacingPolicy.from_config(cfg).min_interval == 5
