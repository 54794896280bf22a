from __future__ import annotations

import json

import pytest
from hypothesis import given

from cybermap.taxonomy import (
    EmptyRegistry,
    InternalUnit,
    Mission,
    OutsideModel,
    Part,
    RegistryFormatError,
    SatellitePlatform,
    Sublevel,
    UniversityRegistry,
    classify,
    load_registry,
    mission_distribution,
    registry_from_dict,
    registry_to_dict,
    syntax_audit,
    unit_signature,
    validate_registry,
)
from cybermap.webunits import normalize

from strategies import registries

H = normalize("harvard.edu")


def unit(url, mission=Mission.SERVICES, **kw):
    kw.setdefault("aliases", ())
    kw["aliases"] = tuple(normalize(a) for a in kw["aliases"])
    if kw.get("redirect_target"):
        kw["redirect_target"] = normalize(kw["redirect_target"])
    return InternalUnit(normalize(url), url, mission=mission, **kw)


@pytest.fixture
def small():
    academia = SatellitePlatform(
        "Academia",
        normalize("academia.edu"),
        normalize("harvard.academia.edu"),
        (unit("harvard.academia.edu/Departments/Physics"),),
    )
    facebook = SatellitePlatform(
        "Facebook", normalize("facebook.com"), normalize("facebook.com/Harvard"), (unit("facebook.com/HarvardLaw"),)
    )
    return UniversityRegistry(
        "Harvard University",
        H,
        (
            unit("mcz.harvard.edu"),
            unit("law.harvard.edu", Mission.ADMINISTRATION),
            unit("blogs.law.harvard.edu", Mission.UNASSIGNED),
            unit("hbs.harvard.edu", Mission.ADMINISTRATION, aliases=["hbs.edu"], redirect_target="hbs.edu",
                 external_alias=True),
        ),
        (academia, facebook),
    )


class TestClassify:
    def test_contour(self, small):
        assert classify("harvard.edu", small).cell == (Part.CORE, Sublevel.CONTOUR)

    def test_core_internal(self, small):
        p = classify("mcz.harvard.edu", small)
        assert p.cell == (Part.CORE, Sublevel.INTERNAL)
        assert p.owner.url == normalize("mcz.harvard.edu")

    def test_satellite_contour(self, small):
        assert classify("harvard.academia.edu", small).cell == (Part.SATELLITE, Sublevel.CONTOUR)

    def test_satellite_internal_flat_namespace(self, small):
        p = classify("facebook.com/HarvardLaw", small)
        assert p.cell == (Part.SATELLITE, Sublevel.INTERNAL)

    def test_deepest_unit_wins(self, small):
        assert classify("blogs.law.harvard.edu/x", small).owner.url == normalize("blogs.law.harvard.edu")
        assert classify("www2.law.harvard.edu", small).owner.url == normalize("law.harvard.edu")

    def test_undeclared_subdomain_is_core_internal(self, small):
        p = classify("iq.harvard.edu", small)
        assert p.cell == (Part.CORE, Sublevel.INTERNAL)
        assert p.owner is small

    def test_external_alias(self, small):
        p = classify("hbs.edu", small)
        assert p.cell == (Part.CORE, Sublevel.INTERNAL)

    @pytest.mark.parametrize("url", ["masseyeandear.org", "facebook.com/Yale", "academia.edu", "twitter.com/Harvard"])
    def test_outside(self, small, url):
        with pytest.raises(OutsideModel):
            classify(url, small)


@given(registries())
def test_contour_always_core_contour(reg):
    assert classify(reg.contour_url, reg).cell == (Part.CORE, Sublevel.CONTOUR)


class TestMissionDistribution:
    def test_single(self):
        reg = UniversityRegistry("U", H, (unit("a.harvard.edu", Mission.TEACHING),))
        d = mission_distribution(reg)
        assert d.counts[Mission.TEACHING] == 1
        assert d.percents[Mission.TEACHING] == 100.0

    def test_empty(self):
        with pytest.raises(EmptyRegistry):
            mission_distribution(UniversityRegistry("U", H))

    def test_unassigned_kept_out_of_denominator(self, small):
        d = mission_distribution(small)
        assert d.unassigned == 1
        assert d.total == 4
        assert sum(d.counts.values()) == 4
        assert d.percents[Mission.ADMINISTRATION] == pytest.approx(200 / 3)

    def test_harvard_like_split(self):
        counts = {Mission.TRANSFER: 10, Mission.TEACHING: 28, Mission.ADMINISTRATION: 28,
                  Mission.RESEARCH: 60, Mission.SERVICES: 61}
        units = [unit(f"{m.value}{i}.harvard.edu", m) for m, n in counts.items() for i in range(n)]
        d = mission_distribution(UniversityRegistry("H", H, tuple(units)))
        assert d.total == 187
        # direct arithmetic: 10/187, 28/187, (60+61)/187
        assert d.percents[Mission.TRANSFER] == pytest.approx(5.347593582887701)
        assert d.percents[Mission.TEACHING] == pytest.approx(14.973262032085561)
        assert d.percents[Mission.RESEARCH] + d.percents[Mission.SERVICES] == pytest.approx(64.70588235294117)
        assert sum(d.percents.values()) == pytest.approx(100.0)


@given(registries())
def test_mission_counts_partition_units(reg):
    if not reg.internal_units:
        return
    d = mission_distribution(reg)
    assert sum(d.counts.values()) == len(reg.internal_units)


class TestSyntaxAudit:
    def test_signatures(self):
        ucm = normalize("ucm.es")
        assert unit_signature(normalize("ucm.es/centros/webs/euenfer"), ucm) == (0, 3)
        assert unit_signature(ucm, ucm) == (0, 0)
        assert unit_signature(normalize("maude.sip.ucm.es/fadoss"), ucm) == (2, 1)
        assert unit_signature(normalize("hbs.edu"), H) is None

    def test_ucm_registry(self):
        from cybermap.fixtures import _data_text

        reg = registry_from_dict(json.loads(_data_text("ucm.json")))
        audit = syntax_audit(reg)
        assert "maude.sip.ucm.es/fadoss" in audit.mixed
        by_url = {e.url: e for e in audit.entries}
        assert by_url["ucm.es/centros/webs/euenfer"].signature == (0, 3)
        assert by_url["material.fis.ucm.es"].signature == (2, 0)
        assert sum(audit.signature_counts.values()) == len(reg.internal_units)

    def test_flags(self, small):
        audit = syntax_audit(small)
        assert audit.external_redirects == [("hbs.harvard.edu", "hbs.edu")]
        assert audit.alias_groups == [("hbs.harvard.edu", "hbs.edu")]
        assert audit.unassigned == ["blogs.law.harvard.edu"]
        assert "outside-contour" not in {f for e in audit.entries for f in e.flags}

    @given(registries())
    def test_signature_matches_locus(self, reg):
        from cybermap.webunits import is_within, parse_locus

        base = parse_locus(reg.contour_url)
        for e in syntax_audit(reg).entries:
            u = normalize(e.url)
            if not is_within(u, reg.contour_url):
                assert e.signature is None
                continue
            loc = parse_locus(u)
            assert e.signature == (
                len(loc.subdomain_labels) - len(base.subdomain_labels),
                len(loc.path_segments) - len(base.path_segments),
            )


class TestValidate:
    def test_clean(self, small):
        assert validate_registry(small) == []

    def test_empty_units(self):
        assert validate_registry(UniversityRegistry("U", H)) == []

    def test_duplicate_url(self):
        reg = UniversityRegistry("H", H, (unit("iq.harvard.edu"), unit("iq.harvard.edu")))
        (v,) = validate_registry(reg)
        assert v.rule == "duplicate-url" and v.subject == "iq.harvard.edu"

    def test_alias_encoding_is_valid(self):
        reg = UniversityRegistry("H", H, (unit("iq.harvard.edu", aliases=["cbrss.harvard.edu"]),))
        assert validate_registry(reg) == []

    def test_outside_contour_without_marker(self):
        reg = UniversityRegistry("H", H, (unit("hbs.edu"),))
        (v,) = validate_registry(reg)
        assert v.rule == "outside-contour"

    def test_dangling_internal_redirect(self):
        reg = UniversityRegistry("H", H, (unit("post.harvard.edu", redirect_target="alumni.harvard.edu"),))
        assert [v.rule for v in validate_registry(reg)] == ["dangling-redirect"]

    def test_external_redirect_allowed(self):
        reg = UniversityRegistry("H", H, (unit("meei.harvard.edu", redirect_target="masseyeandear.org"),))
        assert validate_registry(reg) == []

    def test_satellite_unit_outside_platform(self):
        sat = SatellitePlatform("T", normalize("twitter.com"), normalize("twitter.com/Harvard"),
                                (unit("facebook.com/Harvard"),))
        reg = UniversityRegistry("H", H, (), (sat,))
        assert [v.rule for v in validate_registry(reg)] == ["satellite-unit"]

    def test_unknown_keys(self):
        reg = registry_from_dict({"name": "H", "contour_url": "harvard.edu", "extra": 1,
                                  "internal_units": [{"url": "a.harvard.edu", "colour": "red"}]})
        rules = [v.rule for v in validate_registry(reg)]
        assert rules == ["unknown-key", "unknown-key"]


class TestRegistryIO:
    def test_round_trip(self, small, tmp_path):
        from cybermap.taxonomy import save_registry

        path = tmp_path / "r.json"
        save_registry(small, path)
        assert load_registry(path) == small

    @given(registries())
    def test_dict_round_trip(self, reg):
        assert registry_from_dict(registry_to_dict(reg)) == reg

    @pytest.mark.parametrize(
        "doc",
        ["not json", "[]", '{"name": "x"}', '{"name": "x", "contour_url": 5}',
         '{"name": "x", "contour_url": "a.edu", "internal_units": [{"url": "b.a.edu", "mission": "fun"}]}'],
    )
    def test_bad_documents(self, doc, tmp_path):
        path = tmp_path / "r.json"
        path.write_text(doc, encoding="utf-8")
        with pytest.raises(RegistryFormatError):
            load_registry(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(RegistryFormatError):
            load_registry(tmp_path / "nope.json")
