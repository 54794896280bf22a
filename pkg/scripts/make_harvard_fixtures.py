"""Regenerate the shipped Harvard registry and measurement fixture.

Usage: python scripts/make_harvard_fixtures.py [OUTPUT_DIR]

Without an argument the files under src/cybermap/data/harvard are rewritten.
The build is seeded, so rerunning it leaves them byte-identical.
"""

from __future__ import annotations

import sys
from pathlib import Path

from cybermap.fixtures import build_harvard

DEFAULT_DIR = Path(__file__).resolve().parents[1] / "src" / "cybermap" / "data" / "harvard"


def main(argv: list[str]) -> int:
    out = Path(argv[0]) if argv else DEFAULT_DIR
    bundle = build_harvard()
    bundle.write(out)
    units = len(bundle.registry.internal_units)
    channels = sum(len(s.internal_units) for s in bundle.registry.satellites)
    print(f"wrote {out}: {units} core units, {channels} satellite channels, {len(bundle.measurements)} counts")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
