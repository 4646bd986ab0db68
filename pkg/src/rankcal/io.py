"""Plain-text artifacts: case and series CSV files, histograms, JSON summaries, SVG charts.

Floats in CSV files are written with 17 significant digits so every value
reads back bit-identically.
"""
import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .core import ForecastCase, RankHistogram, histogram_summary
from .errors import EmptyHistogramError, ParseError
from .postprocess import ForecastSeries

__all__ = [
    "fmt_float",
    "read_cases",
    "write_cases",
    "read_series",
    "write_series",
    "write_ranks",
    "read_ranks",
    "write_histogram_csv",
    "read_histogram_csv",
    "summary_dict",
    "write_json",
    "histogram_svg",
    "write_text",
]


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read_table(path, lead: tuple):
    """Parse a CSV whose header is ``lead`` columns then ``v1..vd``.

    Returns a list of ``(line, lead_values, vector)`` with integer lead
    columns and float vectors.
    """
    rows = []
    d = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for fields in reader:
            line = reader.line_num
            if not fields or not any(f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if header is None:
                header = fields
                n = len(lead)
                if header[:n] != list(lead) or len(header) <= n:
                    raise ParseError(
                        f"expected header {','.join(lead)},v1,...,vd; got {','.join(header)}", line
                    )
                expect = [f"v{k}" for k in range(1, len(header) - n + 1)]
                if header[n:] != expect:
                    raise ParseError("value columns must be named v1..vd in order", line)
                d = len(expect)
                continue
            if len(fields) != len(lead) + d:
                raise ParseError(f"expected {len(lead) + d} fields, found {len(fields)}", line)
            try:
                keys = [int(f) for f in fields[1:len(lead)]]
            except ValueError:
                raise ParseError(f"{lead[1]} must be an integer", line) from None
            try:
                vec = [float(f) for f in fields[len(lead):]]
            except ValueError:
                raise ParseError("values must be numbers", line) from None
            if not all(math.isfinite(v) for v in vec):
                raise ParseError("values must be finite", line)
            rows.append((line, [fields[0]] + keys, vec))
    return rows, d


def read_cases(path):
    """Read a case file ``case_id,member_id,v1..vd``; ``member_id`` 0 is the observation.

    Rows of a case need not be contiguous; cases keep the order in which
    their ids first appear. Each case needs one observation and members
    numbered ``1..m-1``.
    """
    rows, d = _read_table(path, ("case_id", "member_id"))
    groups = {}
    for line, (cid, mid), vec in rows:
        groups.setdefault(cid, []).append((mid, line, vec))
    cases = []
    for cid, items in groups.items():
        first = items[0][1]
        by_id = {}
        for mid, line, vec in items:
            if mid in by_id:
                raise ParseError(f"case {cid}: duplicate member_id {mid}", line)
            by_id[mid] = vec
        if 0 not in by_id:
            raise ParseError(f"case {cid}: no observation row (member_id 0)", first)
        n = len(by_id) - 1
        if n < 1 or sorted(by_id) != list(range(n + 1)):
            raise ParseError(f"case {cid}: members must be numbered 1..{max(n, 1)}", first)
        members = [by_id[j] for j in range(1, n + 1)]
        cases.append(ForecastCase(np.array(members), np.array(by_id[0]), cid))
    return cases


def write_cases(path, sets, case_ids=None):
    """Write ensemble sets ``(n, m, d)`` (observation last) as a case file."""
    S = np.asarray(sets, dtype=float)
    n, m, d = S.shape
    ids = range(n) if case_ids is None else case_ids
    rows = []
    for cid, block in zip(ids, S):
        rows.append([cid, 0, *map(fmt_float, block[-1])])
        for j in range(m - 1):
            rows.append([cid, j + 1, *map(fmt_float, block[j])])
    header = ["case_id", "member_id"] + [f"v{k}" for k in range(1, d + 1)]
    return write_text(path, _csv_text(header, rows))


def read_series(path) -> ForecastSeries:
    """Read a series file ``day,member_id,v1..vd`` (``member_id`` 0 is the observation)."""
    rows, d = _read_table(path, ("day", "member_id"))
    if not rows:
        raise ParseError("series file has no data rows", 1)
    days, raw, obs = [], [], []
    current = None
    for line, (day_text, mid), vec in rows:
        try:
            day = int(day_text)
        except ValueError:
            raise ParseError("day must be an integer", line) from None
        if day != current:
            if current is not None and day < current:
                raise ParseError("days must be sorted ascending", line)
            if current is not None:
                _close_day(days, raw, obs, current, line)
            current = day
            days.append(day)
            raw.append({})
            obs.append(None)
        if mid == 0:
            if obs[-1] is not None:
                raise ParseError(f"day {day}: duplicate observation", line)
            obs[-1] = vec
        elif mid in raw[-1] or mid < 0:
            raise ParseError(f"day {day}: bad or duplicate member_id {mid}", line)
        else:
            raw[-1][mid] = vec
    _close_day(days, raw, obs, current, rows[-1][0])
    sizes = {len(r) for r in raw}
    if len(sizes) != 1:
        raise ParseError("every day needs the same number of raw members", rows[-1][0])
    m_raw = sizes.pop()
    raw_arr = np.array([[r[j] for j in range(1, m_raw + 1)] for r in raw])
    return ForecastSeries(np.array(days), raw_arr.reshape(len(days), m_raw, d), np.array(obs))


def _close_day(days, raw, obs, day, line):
    if obs[-1] is None:
        raise ParseError(f"day {day}: no observation row (member_id 0)", line)
    n = len(raw[-1])
    if n < 1 or sorted(raw[-1]) != list(range(1, n + 1)):
        raise ParseError(f"day {day}: raw members must be numbered 1..m_raw", line)


def write_series(path, series: ForecastSeries):
    rows = []
    for t, day in enumerate(series.days):
        rows.append([int(day), 0, *map(fmt_float, series.obs[t])])
        for j in range(series.m_raw):
            rows.append([int(day), j + 1, *map(fmt_float, series.raw[t, j])])
    header = ["day", "member_id"] + [f"v{k}" for k in range(1, series.d + 1)]
    return write_text(path, _csv_text(header, rows))


def write_ranks(path, case_ids, ranks):
    rows = [[cid, int(r)] for cid, r in zip(case_ids, ranks)]
    return write_text(path, _csv_text(["case_id", "rank"], rows))


def read_ranks(path):
    ids, ranks = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["case_id", "rank"]:
            raise ParseError("expected header case_id,rank", 1)
        for fields in reader:
            if len(fields) != 2:
                raise ParseError("expected 2 fields", reader.line_num)
            ids.append(fields[0])
            ranks.append(int(fields[1]))
    return ids, np.array(ranks, dtype=np.int64)


def write_histogram_csv(path, hist: RankHistogram):
    rows = [[i + 1, int(c)] for i, c in enumerate(hist.counts)]
    return write_text(path, _csv_text(["rank", "count"], rows))


def read_histogram_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["rank", "count"]:
            raise ParseError("expected header rank,count", 1)
        counts = []
        for fields in reader:
            try:
                rank, count = int(fields[0]), int(fields[1])
            except (ValueError, IndexError):
                raise ParseError("expected integer rank,count", reader.line_num) from None
            if rank != len(counts) + 1:
                raise ParseError("ranks must run 1..m in order", reader.line_num)
            counts.append(count)
    return np.array(counts, dtype=np.int64)


def summary_dict(method: str, hist: RankHistogram) -> dict:
    """JSON-ready summary; statistics are ``None`` for an empty histogram."""
    out = {"method": str(method), "m": int(hist.m), "n_cases": int(hist.n_cases),
           "counts": [int(c) for c in hist.counts]}
    try:
        s = histogram_summary(hist)
        out.update(mean_rank=s.mean_rank, rank_variance=s.rank_variance, chi_square=s.chi_square)
    except EmptyHistogramError:
        out.update(mean_rank=None, rank_variance=None, chi_square=None)
    return out


def write_json(path, obj):
    # json writes floats with repr, the shortest exact round-trip form
    return write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def histogram_svg(hist: RankHistogram, title: str = "") -> str:
    """Bar chart of a rank histogram with a dashed line at the uniform expectation."""
    bar, gap, height, pad = 20, 2, 200, 30
    counts = np.asarray(hist.counts)
    m = counts.size
    expected = hist.n_cases / m if m else 0.0
    top = max(float(counts.max(initial=0)), expected, 1.0)
    width = pad * 2 + m * (bar + gap)
    total_h = height + pad * 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
        f'viewBox="0 0 {width} {total_h}">',
        f'<title>{_escape(title)}</title>',
        f'<rect x="0" y="0" width="{width}" height="{total_h}" fill="white"/>',
    ]
    for i, c in enumerate(counts):
        h = height * float(c) / top
        x = pad + i * (bar + gap)
        y = pad + height - h
        parts.append(
            f'<rect x="{x}" y="{y:.3f}" width="{bar}" height="{h:.3f}" fill="#4c72b0">'
            f'<title>rank {i + 1}: {int(c)}</title></rect>'
        )
    ey = pad + height - height * expected / top
    parts.append(
        f'<line x1="{pad}" y1="{ey:.3f}" x2="{width - pad}" y2="{ey:.3f}" '
        'stroke="#c44e52" stroke-dasharray="4 3"/>'
    )
    parts.append(
        f'<text x="{pad}" y="{pad - 10}" font-family="sans-serif" font-size="12">'
        f'{_escape(title)} (n={hist.n_cases})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
