"""Report rows, CSV/JSON serialization, atomic writes and the R-vs-L SVG chart."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Sequence

from .analysis import BoundReport
from .protocol import SweepStats

SWEEP_COLUMNS = (
    "L", "xi0", "trials", "emp_P0", "se_P0", "emp_R", "analytic_R", "emp_success_rate",
    "mean_cycles", "mean_reuses", "qram_queries_per_success",
    # extras, always after the fixed block
    "se_R", "analytic_P0", "se_success_rate", "se_cycles", "geometric_mean_reuses",
    "paper_mean_reuse", "emp_Q0_consistent", "emp_Q1_consistent",
    "analytic_Q0_consistent", "analytic_Q1_consistent",
)

BOUND_COLUMNS = (
    "points", "unitaries", "evaluations", "max_R_candidate", "max_excess", "violations",
    "witness_failures", "conclusive_candidates", "optimal_max_deviation",
)


def sweep_row(s: SweepStats) -> dict[str, Any]:
    return {
        "L": s.reliability, "xi0": s.xi0, "trials": s.trials,
        "emp_P0": s.emp_P0, "se_P0": s.se_P0, "emp_R": s.emp_R, "analytic_R": s.analytic_R,
        "emp_success_rate": s.emp_success_rate, "mean_cycles": s.mean_cycles,
        "mean_reuses": s.mean_reuses, "qram_queries_per_success": s.qram_queries_per_success,
        "se_R": s.se_R, "analytic_P0": s.analytic_P0, "se_success_rate": s.se_success_rate,
        "se_cycles": s.se_cycles, "geometric_mean_reuses": s.geometric_mean_reuses,
        "paper_mean_reuse": s.paper_mean_reuse,
        "emp_Q0_consistent": s.emp_Q_consistent[0], "emp_Q1_consistent": s.emp_Q_consistent[1],
        "analytic_Q0_consistent": s.analytic_Q_consistent[0],
        "analytic_Q1_consistent": s.analytic_Q_consistent[1],
    }


def bound_row(r: BoundReport) -> dict[str, Any]:
    return {c: getattr(r, c) for c in BOUND_COLUMNS}


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def _json_value(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.6g}") if math.isfinite(value) else None
    return value


def to_json(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    data = [{c: _json_value(row[c]) for c in columns} for row in rows]
    return json.dumps(data, indent=2) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename; no partial file survives a failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def render_svg(rows: Sequence[dict[str, Any]], width: int = 480, height: int = 360) -> str:
    """Static chart of reusability against reliability.

    Draws the bound ``1 - L`` as a line and each row's ``emp_R`` as a point
    with a +-2 standard error bar.
    """
    ml, mr, mt, mb = 56, 20, 20, 44
    pw, ph = width - ml - mr, height - mt - mb

    def x(v: float) -> float:
        return ml + v * pw

    def y(v: float) -> float:
        return mt + (1.0 - v) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(6):
        t = i / 5
        out.append(f'<line x1="{x(t):.2f}" y1="{y(0):.2f}" x2="{x(t):.2f}" y2="{y(0) + 4:.2f}" stroke="black"/>')
        out.append(f'<text x="{x(t):.2f}" y="{y(0) + 16:.2f}" text-anchor="middle">{t:.1f}</text>')
        out.append(f'<line x1="{x(0) - 4:.2f}" y1="{y(t):.2f}" x2="{x(0):.2f}" y2="{y(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{x(0) - 7:.2f}" y="{y(t) + 4:.2f}" text-anchor="end">{t:.1f}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" text-anchor="middle">oracle reliability L</text>')
    out.append(f'<text transform="translate(14 {mt + ph / 2:.2f}) rotate(-90)" '
               f'text-anchor="middle">reusability R</text>')
    out.append(f'<line x1="{x(0):.2f}" y1="{y(1):.2f}" x2="{x(1):.2f}" y2="{y(0):.2f}" '
               f'stroke="#1f77b4" stroke-width="1.5"/>')
    for row in rows:
        L, r, se = float(row["L"]), float(row["emp_R"]), float(row.get("se_R", math.nan))
        if not math.isfinite(r):
            continue
        if math.isfinite(se) and se > 0:
            lo, hi = max(0.0, r - 2 * se), min(1.0, r + 2 * se)
            out.append(f'<line x1="{x(L):.2f}" y1="{y(lo):.2f}" x2="{x(L):.2f}" y2="{y(hi):.2f}" '
                       f'stroke="#d62728"/>')
        out.append(f'<circle cx="{x(L):.2f}" cy="{y(r):.2f}" r="3" fill="#d62728"/>')
    lx, ly = ml + pw - 150, mt + 14
    out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="#1f77b4" stroke-width="1.5"/>')
    out.append(f'<text x="{lx + 26}" y="{ly + 4}">bound 1 - L</text>')
    out.append(f'<circle cx="{lx + 10}" cy="{ly + 16}" r="3" fill="#d62728"/>')
    out.append(f'<text x="{lx + 26}" y="{ly + 20}">Monte Carlo (2 SE)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
