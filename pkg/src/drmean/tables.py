"""Machine-readable output tables (CSV or markdown), lossless for floats."""

from __future__ import annotations

import csv
import io


def fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def render_table(columns, rows, fmt: str = "csv", comments=()) -> str:
    """Render rows (dicts keyed by column name) with leading comment lines."""
    if fmt == "csv":
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    if fmt == "markdown":
        lines = [f"<!-- {line} -->" for line in comments]
        lines.append("| " + " | ".join(columns) + " |")
        lines.append("|" + "|".join(" --- " for _ in columns) + "|")
        for row in rows:
            lines.append(
                "| " + " | ".join(fmt_cell(row.get(c)) for c in columns) + " |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")


def parse_table(text: str):
    """Read back a CSV table written by render_table; returns (comments, rows)."""
    comments = []
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            comments.append(line[2:])
        elif line:
            body.append(line)
    reader = csv.DictReader(body)
    return comments, list(reader)
