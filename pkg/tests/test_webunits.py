from __future__ import annotations

import re

import pytest
from hypothesis import given, strategies as st

from cybermap.webunits import (
    MalformedUrl,
    NormalizedUrl,
    OnlineDomain,
    SuffixRules,
    UnresolvableSuffix,
    is_within,
    normalize,
    parse_locus,
)


def naive_normalize(raw: str) -> tuple[str, tuple[str, ...]]:
    """Independent regex normalizer used as an oracle."""
    m = re.match(r"^(?:[A-Za-z][\w+.-]*://|//)?(?:[^@/]*@)?([^/:?#]+)(?::\d+)?([^?#]*)", raw.strip())
    host = m.group(1).lower()
    if host.startswith("www.") and host.count(".") >= 2:
        host = host[4:]
    return host, tuple(p for p in m.group(2).split("/") if p)


class TestNormalize:
    def test_directory_url(self):
        u = normalize("http://www.ucm.es/centros/webs/d168/")
        assert u.host == "ucm.es"
        assert u.path == ("centros", "webs", "d168")

    def test_bare_domain(self):
        u = normalize("harvard.edu")
        assert (u.host, u.path) == ("harvard.edu", ())

    def test_mixed_case_scheme_and_host(self):
        raw = "HTTPS://Blogs.Law.Harvard.EDU"
        u = normalize(raw)
        assert (u.host, u.path) == ("blogs.law.harvard.edu", ())
        assert (u.host, u.path) == naive_normalize(raw)

    def test_original_preserved(self):
        raw = "HTTPS://Blogs.Law.Harvard.EDU"
        assert normalize(raw).original == raw

    def test_strips_port_query_fragment_credentials(self):
        u = normalize("http://user:pw@www.mit.edu:8080/a/b/?q=1#frag")
        assert u.render() == "mit.edu/a/b"

    def test_path_case_and_non_ascii_preserved(self):
        u = normalize("ucm.academia.edu/Departments/Biblioteconomía_y_Documentación")
        assert u.path == ("Departments", "Biblioteconomía_y_Documentación")

    def test_percent_encoding_not_decoded(self):
        assert normalize("a.edu/x%20y").path == ("x%20y",)

    def test_leaf_file_kept(self):
        assert normalize("a.edu/dir/index.html").path == ("dir", "index.html")

    def test_trailing_slash_same_unit(self):
        assert normalize("ucm.es/info/x") == normalize("ucm.es/info/x/")

    def test_only_www_stripped(self):
        assert normalize("www.mat.ucm.es").host == "mat.ucm.es"
        assert normalize("web.ucm.es").host == "web.ucm.es"

    @pytest.mark.parametrize("raw", ["", "   ", "http://", "http:///path", "a..b.edu", "http://[::1]/x"])
    def test_malformed(self, raw):
        with pytest.raises(MalformedUrl):
            normalize(raw)


label = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=8)
segment = st.text(alphabet="abcXYZ019_-.~%í", min_size=1, max_size=8)


@st.composite
def raw_urls(draw):
    labels = draw(st.lists(label, min_size=2, max_size=5))
    host = ".".join(labels)
    if draw(st.booleans()):
        host = "".join(c.upper() if draw(st.booleans()) else c for c in host)
    scheme = draw(st.sampled_from(["", "http://", "https://", "HTTP://", "//"]))
    www = draw(st.sampled_from(["", "www."]))
    port = draw(st.sampled_from(["", ":80", ":8443"]))
    segs = draw(st.lists(segment, max_size=4))
    path = "/".join(segs)
    tail = draw(st.sampled_from(["", "/", "?q=1", "#x", "/?a=b#c"]))
    return f"{scheme}{www}{host}{port}{'/' + path if path else ''}{tail}"


@given(raw_urls())
def test_normalize_matches_oracle(raw):
    u = normalize(raw)
    assert (u.host, u.path) == naive_normalize(raw)


@given(raw_urls())
def test_normalize_idempotent(raw):
    u = normalize(raw)
    assert normalize(u.render()) == u
    assert not u.host.startswith("www.") or u.host.count(".") == 1
    assert all(u.path)


RULES = SuffixRules(["ac.uk", "edu.sg", "edu.my", "edu.co", "co.uk"])


def brute_force_registrable(host: str, suffixes):
    """Longest listed suffix by exhaustive comparison; None for a bare suffix."""
    labels = host.split(".")
    best = 1
    for s in suffixes:
        n = s.count(".") + 1
        if len(labels) >= n and ".".join(labels[-n:]) == s:
            best = max(best, n)
    if len(labels) <= best:
        return None
    return ".".join(labels[-best - 1:])


class TestParseLocus:
    def test_subdomain(self):
        loc = parse_locus(normalize("mat.ucm.es"), RULES)
        assert loc.registrable == OnlineDomain("es", "ucm")
        assert loc.subdomain_labels == ("mat",)
        assert loc.subdomain_level == 3

    def test_bare(self):
        loc = parse_locus(normalize("harvard.edu"), RULES)
        assert loc.registrable == OnlineDomain("edu", "harvard")
        assert loc.subdomain_labels == ()
        assert loc.subdomain_level == 2

    def test_multilabel_suffix(self):
        loc = parse_locus(normalize("economics.ox.ac.uk"), RULES)
        assert loc.registrable.render() == "ox.ac.uk"
        assert loc.subdomain_labels == ("economics",)
        assert loc.registrable.render() == brute_force_registrable("economics.ox.ac.uk", RULES.suffixes)

    def test_nearest_first_order(self):
        loc = parse_locus(normalize("maude.sip.ucm.es/fadoss"), RULES)
        assert loc.subdomain_labels == ("sip", "maude")
        assert loc.path_segments == ("fadoss",)

    @pytest.mark.parametrize("host", ["ac.uk", "edu", "es"])
    def test_bare_suffix_rejected(self, host):
        with pytest.raises(UnresolvableSuffix):
            parse_locus(NormalizedUrl(host), RULES)

    def test_shipped_rules_cover_university_hosts(self):
        rules = SuffixRules.default()
        for host, reg in [
            ("economics.ox.ac.uk", "ox.ac.uk"),
            ("scholarbank.nus.edu.sg", "nus.edu.sg"),
            ("cybermetrics.wlv.ac.uk", "wlv.ac.uk"),
            ("cenar.um.edu.my", "um.edu.my"),
            ("trin.cam.ac.uk", "cam.ac.uk"),
            ("dcc.uchile.cl", "uchile.cl"),
        ]:
            assert parse_locus(normalize(host), rules).registrable.render() == reg

    def test_rules_from_file(self, tmp_path):
        f = tmp_path / "s.txt"
        f.write_text("# comment\nac.uk\n\n  edu.sg  # trailing\n", encoding="utf-8")
        assert RULES.suffixes >= SuffixRules.from_file(f).suffixes == {"ac.uk", "edu.sg"}


@given(st.lists(st.sampled_from(["ox", "ac", "uk", "edu", "sg", "co", "mat", "www2"]), min_size=1, max_size=6))
def test_parse_locus_against_brute_force(labels):
    host = ".".join(labels)
    expected = brute_force_registrable(host, RULES.suffixes)
    if expected is None:
        with pytest.raises(UnresolvableSuffix):
            parse_locus(NormalizedUrl(host), RULES)
    else:
        assert parse_locus(NormalizedUrl(host), RULES).registrable.render() == expected


@given(raw_urls())
def test_locus_round_trip(raw):
    u = normalize(raw)
    try:
        loc = parse_locus(u)
    except UnresolvableSuffix:
        return
    assert loc.render() == u.render()
    assert loc.to_url() == u


class TestIsWithin:
    def test_subdomain(self):
        assert is_within("mat.ucm.es", "ucm.es")

    def test_reflexive(self):
        assert is_within("ucm.es", "ucm.es")

    def test_redirect_target_outside(self):
        assert not is_within("hbs.edu", "harvard.edu")

    def test_label_boundary(self):
        assert not is_within("notharvard.edu", "harvard.edu")

    def test_segment_boundary(self):
        assert not is_within("twitter.com/HarvardX", "twitter.com/Harvard")
        assert is_within("twitter.com/Harvard/status", "twitter.com/Harvard")

    def test_path_scope(self):
        assert is_within("mat.ucm.es/deptos/al", "ucm.es")
        assert not is_within("ucm.es", "ucm.es/info")


small_urls = st.builds(
    lambda h, p: NormalizedUrl(".".join(h + ["edu"]), tuple(p)),
    st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=3),
    st.lists(st.sampled_from(["x", "y"]), max_size=2),
)


@given(small_urls, small_urls, small_urls)
def test_is_within_partial_order(a, b, c):
    assert is_within(a, a)
    if is_within(a, b) and is_within(b, a):
        assert a == b
    if is_within(a, b) and is_within(b, c):
        assert is_within(a, c)


@given(small_urls, small_urls)
def test_is_within_monotone_depth(a, b):
    if is_within(a, b) and a != b:
        la, lb = parse_locus(a), parse_locus(b)
        assert la.subdomain_level >= lb.subdomain_level
        assert len(a.path) >= len(b.path)
        assert la.subdomain_level > lb.subdomain_level or len(a.path) > len(b.path)
