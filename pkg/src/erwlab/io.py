"""CSV and JSON campaign records.

A record set is a resolved config, a list of row dicts with identical keys
and a summary dict.  CSV files carry the config and summary as ``# key:``
JSON comment lines above the column header; floats are written with 17
significant digits so every value round-trips exactly.
"""

import json
import math

import numpy as np

FORMATS = ("csv", "json")


def _plain(v):
    # numpy scalars and arrays to JSON-friendly python values
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = format(float(v), ".17g")
        # keep floats distinguishable from ints on the way back
        return s if any(ch in s for ch in ".eni") else s + ".0"
    if v is None:
        return ""
    return str(v)


def _parse_cell(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def dumps(config: dict, rows: list, summary: dict, fmt: str = "csv") -> str:
    if fmt == "json":
        doc = {"config": _plain(config), "rows": _plain(rows), "summary": _plain(summary)}
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ValueError(f"format must be one of {FORMATS}")
    lines = ["# config: " + json.dumps(_plain(config)),
             "# summary: " + json.dumps(_plain(summary))]
    cols = list(rows[0]) if rows else []
    lines.append(",".join(cols))
    for r in rows:
        lines.append(",".join(_cell(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def loads(text: str, fmt: str = "csv"):
    """Inverse of :func:`dumps`: returns (config, rows, summary)."""
    if fmt == "json":
        doc = json.loads(text)
        return doc["config"], doc["rows"], doc["summary"]
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        elif line:
            body.append(line)
    rows = []
    if body:
        cols = body[0].split(",")
        for line in body[1:]:
            rows.append(dict(zip(cols, (_parse_cell(c) for c in line.split(",")))))
    return meta.get("config", {}), rows, meta.get("summary", {})
