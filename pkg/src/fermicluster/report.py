"""Run reports and their text, csv and json renderings.

Floats are always written with 17 significant digits so that every number
parses back to the identical double.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

FORMATS = ("text", "csv", "json")
NA = "n/a"


@dataclass
class Verdict:
    name: str
    passed: bool | None
    detail: str = ""


@dataclass
class RunReport:
    command: str
    model: str
    config: dict
    columns: list[str]
    rows: list[list]
    results: dict = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = ""
    seed: int = 0

    @property
    def failures(self) -> list[Verdict]:
        return [v for v in self.verdicts if v.passed is False]

    @property
    def ok(self) -> bool:
        return not self.failures

    def comparable(self) -> dict:
        """Every field except the wall-clock time."""
        d = to_dict(self)
        d.pop("wall_clock")
        return d


def fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return {True: "yes", False: "no", None: NA}[x]
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return format(x, ".17g")
    return str(x)


def to_dict(report: RunReport) -> dict:
    d = asdict(report)
    d["verdicts"] = [asdict(v) for v in report.verdicts]
    return d


def from_dict(d: dict) -> RunReport:
    d = dict(d)
    d["verdicts"] = [Verdict(**v) for v in d.get("verdicts", [])]
    return RunReport(**d)


def _json_value(x, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return json.dumps(str(x))
        s = format(x, ".17g")
        return s if any(c in s for c in ".e") else s + ".0"
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in x):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in x) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in x]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def render_json(report: RunReport) -> str:
    return _json_value(to_dict(report), 2, 0) + "\n"


def render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _table(columns, rows) -> list[str]:
    cells = [[fmt(v) for v in row] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    line = "  ".join(c.rjust(w) for c, w in zip(columns, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return out


def render_text(report: RunReport) -> str:
    out = [f"fermicluster {report.version}  command: {report.command}  model: {report.model}  seed: {report.seed}"]
    for k, v in report.config.items():
        out.append(f"  {k} = {fmt(v) if not isinstance(v, list) else ', '.join(fmt(x) for x in v)}")
    out.append("")
    for k, v in report.results.items():
        out.append(f"{k} = {fmt(v)}")
    if report.results:
        out.append("")
    out += report.notes
    if report.notes:
        out.append("")
    if report.columns:
        out += _table(report.columns, report.rows)
        out.append("")
    for v in report.verdicts:
        status = {True: "PASS", False: "FAIL", None: "N/A "}[v.passed]
        out.append(f"[{status}] {v.name}" + (f": {v.detail}" if v.detail else ""))
    out.append(f"overall: {'PASS' if report.ok else 'FAIL'}   wall clock {report.wall_clock:.3f} s")
    return "\n".join(out) + "\n"


def render(report: RunReport, format: str = "text") -> str:
    if format == "text":
        return render_text(report)
    if format == "csv":
        return render_csv(report)
    if format == "json":
        return render_json(report)
    raise ValueError(f"unknown format {format!r}")


def emit(report: RunReport, format: str = "text", out_path=None) -> str:
    """Render and write to ``out_path`` (returns the text either way)."""
    text = render(report, format)
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


def parse_json(text: str) -> RunReport:
    return from_dict(json.loads(text))
