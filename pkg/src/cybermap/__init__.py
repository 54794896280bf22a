"""Multilevel analysis of a university's web presence: units, queries, counts, reports."""

__version__ = "0.1.0"

from .webunits import NormalizedUrl, SuffixRules, is_within, normalize, parse_locus
from .taxonomy import (
    Mission,
    Part,
    Placement,
    Sublevel,
    UniversityRegistry,
    classify,
    load_registry,
    mission_distribution,
    syntax_audit,
    validate_registry,
)
from .querygen import IndicatorKind, Query, query_plan
from .measure import FixtureProvider, MeasurementSet, fetch, fetch_plan, read_fixture
from .analysis import AnalysisReport, ReportOptions, build_report
