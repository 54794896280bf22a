"""Run the full Harvard case study from the shipped fixture and print the report.

Usage: python scripts/run_harvard_case.py [--json]

Reference values are checked, so irreproducible published figures show up
as discrepancy notes at the end of the report.
"""

from __future__ import annotations

import sys

from cybermap.analysis import ReportOptions, build_report
from cybermap.fixtures import harvard_paths, published
from cybermap.measure import read_fixture
from cybermap.report import report_to_json, report_to_text
from cybermap.taxonomy import load_registry


def main(argv: list[str]) -> int:
    paths = harvard_paths()
    registry = load_registry(paths["registry"])
    measurements = read_fixture(paths["measurements"])
    report = build_report(registry, measurements, ReportOptions(reference=published()["values"]))
    sys.stdout.write(report_to_json(report) if "--json" in argv else report_to_text(report))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
