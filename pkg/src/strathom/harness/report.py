"""Report emission: CSV, aligned text tables, plot-data blocks and a metadata sidecar.

Data files depend only on the report values, so rerunning a configuration
reproduces them byte for byte; the timestamp and configuration hash go to
``<name>.meta.json``.
"""

from __future__ import annotations

import json
import math
import os
import sys
from datetime import datetime, timezone

from ..errors import ConfigError

FLOAT_FMT = ".17g"


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, FLOAT_FMT)
    return str(v)


def to_csv(report):
    """Header row naming every column, then one line per row."""
    lines = [",".join(report.columns)]
    for r in report.rows:
        lines.append(",".join(_cell(r.get(c, "")) for c in report.columns))
    return "\n".join(lines) + "\n"


def to_table(report, precision=4):
    """Aligned text table for terminals."""
    def short(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.{precision}e}"
        return str(v)

    cells = [list(report.columns)] + [[short(r.get(c, "")) for c in report.columns] for r in report.rows]
    widths = [max(len(row[k]) for row in cells) for k in range(len(report.columns))]
    out = []
    for i, row in enumerate(cells):
        out.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def to_plotdata(report, x="eps"):
    """One ``x y`` block per numeric column (and resolution), blocks separated by blank lines."""
    blocks = []
    resolutions = sorted({r.get("resolution") for r in report.rows if "resolution" in r}) or [None]
    for col in report.columns:
        if col in (x, "status", "resolution"):
            continue
        for res in resolutions:
            rows = [r for r in report.rows if res is None or r.get("resolution") == res]
            pts = [(r[x], r[col]) for r in rows if isinstance(r.get(col), (int, float))]
            if not pts:
                continue
            label = col if res is None else f"{col} resolution={res}"
            body = "\n".join(f"{_cell(float(a))} {_cell(float(b))}" for a, b in pts)
            blocks.append(f"# {label}\n{body}")
    return "\n\n".join(blocks) + "\n"


def sidecar(report, config=None, command=None):
    meta = {
        "name": report.name,
        "kind": report.kind,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "rows": len(report.rows),
        "details": report.metadata,
    }
    if config is not None:
        meta["config_sha256"] = config.digest()
    if command is not None:
        meta["command"] = command
    return json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n"


def emit(report, formats=("csv", "table", "plotdata"), out_dir=None, config=None,
         stream=None, command=None):
    """Write the requested formats; returns the list of written paths.

    ``table`` goes to ``stream`` (standard output by default). Files are
    ``<out_dir>/<name>.csv`` and ``<name>.plotdata`` plus the sidecar
    ``<name>.meta.json``.
    """
    stream = sys.stdout if stream is None else stream
    written = []
    if "table" in formats:
        stream.write(to_table(report))
    file_formats = [f for f in formats if f in ("csv", "plotdata")]
    if not file_formats or out_dir is None:
        return written
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")
    render = {"csv": to_csv, "plotdata": to_plotdata}
    for fmt in file_formats:
        path = os.path.join(out_dir, f"{report.name}.{fmt}")
        with open(path, "w", newline="\n") as fh:
            fh.write(render[fmt](report))
        written.append(path)
    path = os.path.join(out_dir, f"{report.name}.meta.json")
    with open(path, "w") as fh:
        fh.write(sidecar(report, config, command))
    written.append(path)
    return written
