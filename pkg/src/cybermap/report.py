"""Text, CSV and JSON renderings of analysis reports and syntax audits."""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Optional

from .analysis import AnalysisReport, UnitRow, format_percent
from .taxonomy import SyntaxAudit

ROW_COLUMNS = (
    "url",
    "entity_name",
    "part",
    "sublevel",
    "platform",
    "mission",
    "institutional_count",
    "external_count",
    "held_out_institutional",
    "held_out_external",
    "flags",
)


def report_to_dict(report: AnalysisReport, generated_at: Optional[str] = None) -> dict[str, Any]:
    d: dict[str, Any] = {
        "registry": report.registry_name,
        "contour_url": report.contour_url,
        "partial": report.partial,
        "options": {
            "top_k": report.options.top_k,
            "include_external_aliases": report.options.include_external_aliases,
            "allow_partial": report.options.allow_partial,
            "legacy_table6": report.options.query_options.legacy_table6,
            "legacy_linkdomain": report.options.query_options.legacy_linkdomain,
        },
        "contour_institutional": report.contour_institutional,
        "contour_external": report.contour_external,
        "internal_sum_institutional": report.internal_sum_institutional,
        "internal_sum_external": report.internal_sum_external,
        "coverage_ratio": report.coverage_ratio,
        "coverage_ratio_external": report.coverage_ratio_external,
        "top_institutional": [[r.url, r.institutional_count] for r in report.top_institutional],
        "top_external": [[r.url, r.external_count] for r in report.top_external],
        "top_shares": [[url, share] for url, share in report.top_shares],
        "mission_distribution": None
        if report.mission_distribution is None
        else report.mission_distribution.as_dict(),
        "mission_in_top": report.mission_in_top,
        "mention_consistency": None
        if report.mention_consistency is None
        else report.mention_consistency.as_dict(),
        "pearson": {"r": report.pearson_r, "n": report.pearson_n},
        "nested_shares": report.nested_shares,
        "satellites": [p.as_dict() for p in report.satellites],
        "rows": [r.as_dict() for r in report.rows],
        "diagnostics": [f.as_dict() for f in report.diagnostics],
        "missing": [{"query_id": q, "rendered_query": r} for q, r in report.missing],
    }
    if generated_at is not None:
        d["generated_at"] = generated_at
    return d


def report_to_json(report: AnalysisReport, generated_at: Optional[str] = None) -> str:
    return json.dumps(report_to_dict(report, generated_at), ensure_ascii=False, indent=2) + "\n"


def _cell(v: Any) -> str:
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list[UnitRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in rows:
        d = r.as_dict()
        d["flags"] = ";".join(d["flags"])
        w.writerow([_cell(d[c]) for c in ROW_COLUMNS])
    return buf.getvalue()


def _n(v: Optional[int]) -> str:
    return "-" if v is None else f"{v:,}"


def _pct(v: Optional[float], decimals: Optional[int] = None) -> str:
    return "-" if v is None else format_percent(v, decimals)


def _table(header: list[str], body: list[list[str]], right: set[int] = frozenset()) -> list[str]:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)] if body else [len(h) for h in header]
    lines = []
    for row in [header] + body:
        cells = [c.rjust(w) if i in right else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return lines


def report_to_text(report: AnalysisReport) -> str:
    out = [f"{report.registry_name} ({report.contour_url})", ""]
    if report.partial:
        out += [f"PARTIAL REPORT: {len(report.missing)} measurement(s) missing", ""]

    out.append("Core level")
    out += _table(
        ["", "count page", "url mentions"],
        [
            ["contour", _n(report.contour_institutional), _n(report.contour_external)],
            ["internal sum", _n(report.internal_sum_institutional), _n(report.internal_sum_external)],
            ["coverage", _pct(report.coverage_ratio, 2), _pct(report.coverage_ratio_external, 2)],
        ],
        right={1, 2},
    )
    out.append("")

    k = report.options.top_k
    n = max(len(report.top_institutional), len(report.top_external))
    body = []
    share = dict(report.top_shares)
    for i in range(n):
        a = report.top_institutional[i] if i < len(report.top_institutional) else None
        b = report.top_external[i] if i < len(report.top_external) else None
        body.append(
            [
                str(i + 1),
                a.url if a else "",
                a.mission.value if a else "",
                _n(a.institutional_count) if a else "",
                _pct(share.get(a.url)) if a else "",
                b.url if b else "",
                b.mission.value if b else "",
                _n(b.external_count) if b else "",
            ]
        )
    out.append(f"Top {k} internal units")
    out += _table(
        ["#", "url", "mission", "count page", "share", "url", "mission", "url mentions"],
        body,
        right={0, 3, 4, 7},
    )
    out.append("")

    dist = report.mission_distribution
    if dist is not None:
        out.append(f"Mission distribution ({dist.total} internal units)")
        out += _table(
            ["mission", "units", "percent"],
            [[m.value, str(dist.counts[m]), _pct(p / 100)] for m, p in dist.percents.items()]
            + [["unassigned", str(dist.unassigned), ""]],
            right={1, 2},
        )
        out.append("")

    if report.pearson_r is not None:
        out += [f"Pearson r (count page vs url mentions): {report.pearson_r:.4f} (n={report.pearson_n})", ""]

    if report.satellites:
        out.append("Satellite level")
        body = []
        for p in report.satellites:
            for i, c in enumerate(p.contour):
                body.append([p.name if i == 0 else "", c["url"], _n(c["institutional"]), _n(c["external"])])
            body.append(
                [
                    "",
                    f"internal sum ({p.internal_units} units, {p.internal_urls} urls)",
                    _n(p.internal_sum_institutional),
                    _n(p.internal_sum_external),
                ]
            )
        out += _table(["platform", "url", "count page", "url mentions"], body, right={2, 3})
        out.append("")

    if report.diagnostics:
        out.append("Diagnostics")
        for f in report.diagnostics:
            if f.kind in ("missing_measurement",):
                continue
            out.append(f"  [{f.severity}] {f.kind} {f.subject}: {f.message}")
        if report.missing:
            out.append(f"  [warning] {len(report.missing)} missing measurement(s)")
    return "\n".join(out) + "\n"


def audit_to_text(audit: SyntaxAudit) -> str:
    out = ["Signature frequencies (subdomains, directories below contour)"]
    out += _table(
        ["subdomains", "directories", "units"],
        [[str(s), str(d), str(n)] for (s, d), n in sorted(audit.signature_counts.items())],
        right={0, 1, 2},
    )
    out.append("")
    out.append("Units")
    out += _table(
        ["url", "entity", "mission", "signature", "flags"],
        [
            [
                e.url,
                e.entity_name,
                e.mission.value,
                "-" if e.signature is None else f"({e.signature[0]}, {e.signature[1]})",
                ",".join(e.flags),
            ]
            for e in audit.entries
        ],
    )
    if audit.unassigned:
        out += ["", f"WARNING: {len(audit.unassigned)} unit(s) without mission: " + ", ".join(audit.unassigned)]
    return "\n".join(out) + "\n"


def audit_to_csv(audit: SyntaxAudit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["url", "entity_name", "mission", "subdomains", "directories", "flags"])
    for e in audit.entries:
        sig = e.signature or (None, None)
        w.writerow([e.url, e.entity_name, e.mission.value, _cell(sig[0]), _cell(sig[1]), ";".join(e.flags)])
    return buf.getvalue()


def audit_to_json(audit: SyntaxAudit) -> str:
    return json.dumps(audit.as_dict(), ensure_ascii=False, indent=2) + "\n"
