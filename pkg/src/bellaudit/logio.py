"""Line-delimited JSON trial logs.

One trial per line, fields in this order::

    {"index":0,"a":1,"b":2,"x":1,"y":-1,"revealed":[1,-1,1,1]}

``revealed`` is the quadruple (x1, x2, y1, y2) or ``null``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from bellaudit.engine import TrialLog
from bellaudit.errors import ConfigError

_READ_CHUNK = 1 << 16


def format_line(index: int, a: int, b: int, x: int, y: int, revealed) -> str:
    rec = {"index": index, "a": a, "b": b, "x": x, "y": y,
           "revealed": None if revealed is None else [int(v) for v in revealed]}
    return json.dumps(rec, separators=(",", ":"))


def write_log(log: TrialLog, path: str | Path) -> None:
    cols = [c.tolist() for c in (log.index, log.a, log.b, log.x, log.y)]
    rev = None if log.revealed is None else log.revealed.tolist()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in range(len(log)):
            fh.write(format_line(cols[0][t], cols[1][t], cols[2][t], cols[3][t], cols[4][t],
                                 None if rev is None else rev[t]))
            fh.write("\n")


def _parse_line(line: str, lineno: int, path) -> tuple:
    try:
        rec = json.loads(line)
        idx, a, b, x, y = rec["index"], rec["a"], rec["b"], rec["x"], rec["y"]
        rev = rec.get("revealed")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}:{lineno}: malformed trial record ({exc})") from exc
    ok = (
        type(idx) is int and idx >= 0
        and a in (1, 2) and b in (1, 2) and x in (1, -1) and y in (1, -1)
        and all(type(v) is int for v in (a, b, x, y))
        and (rev is None or (isinstance(rev, list) and len(rev) == 4
                             and all(type(v) is int and v in (1, -1) for v in rev)))
    )
    if not ok:
        raise ConfigError(f"{path}:{lineno}: field outside its domain: {line.strip()}")
    if rev is not None and (x, y) != (rev[a - 1], rev[1 + b]):
        raise ConfigError(f"{path}:{lineno}: outcomes disagree with the revealed quadruple")
    return idx, a, b, x, y, rev


def read_log(path: str | Path) -> TrialLog:
    """Parse a log into compact columns, a chunk of lines at a time."""
    parts: list[TrialLog] = []
    rows: list[tuple] = []
    has_rev: bool | None = None

    def flush():
        if rows:
            cols = list(zip(*rows))
            rev = np.array(cols[5], dtype=np.int8) if has_rev else None
            parts.append(TrialLog(np.array(cols[0], dtype=np.int64),
                                  *(np.array(c, dtype=np.int8) for c in cols[1:5]), rev))
            rows.clear()

    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read log {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = _parse_line(line, lineno, path)
            if has_rev is None:
                has_rev = row[5] is not None
            elif has_rev != (row[5] is not None):
                raise ConfigError(f"{path}:{lineno}: revealed must be present on all lines or on none")
            rows.append(row)
            if len(rows) >= _READ_CHUNK:
                flush()
    flush()
    return TrialLog.concat(parts) if parts else TrialLog.empty()
