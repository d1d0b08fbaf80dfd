"""Deterministic CSV/JSON writers and a native SVG phase portrait.

Floats are written with ``repr`` (shortest round-trip form), JSON keys are
sorted, and line endings are ``\\n``, so equal data give equal bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json", "svg")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _clean(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps_json(obj):
    return json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))
    return str(path)


def read_json(path):
    return json.loads(Path(path).read_text())


def _cell(a):
    if isinstance(a, (float, np.floating)):
        return repr(float(a))
    if isinstance(a, (np.integer,)):
        return str(int(a))
    return str(a)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(a) for a in row])
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_orbit_csv(path, x, y, k0=0):
    """Orbit CSV with columns k, x, y."""
    return write_csv(path, ["k", "x", "y"], ((k0 + k, float(a), float(b)) for k, (a, b) in enumerate(zip(x, y))))


def write_cylinder_csv(path, t, x, r):
    return write_csv(path, ["t", "x", "r"], ((float(a), float(b), float(c)) for a, b, c in zip(t, x, r)))


# --------------------------------------------------------------------------
# phase portrait
# --------------------------------------------------------------------------

def portrait_series(name, x, y, style="points", color=None):
    """One layer of a portrait: x is reduced mod 1 for display."""
    return {"name": name, "style": style, "color": color,
            "x": [float(a) for a in np.mod(np.asarray(x, dtype=float), 1.0)],
            "y": [float(b) for b in np.asarray(y, dtype=float)]}


def portrait(series, title="", ylim=None):
    ys = [b for s in series for b in s["y"] if math.isfinite(b)]
    if ylim is None:
        if ys:
            lo, hi = min(ys), max(ys)
            pad = 0.05 * (hi - lo) if hi > lo else 0.5
            ylim = (lo - pad, hi + pad)
        else:
            ylim = (-1.0, 1.0)
    for k, s in enumerate(series):
        if s.get("color") is None:
            s["color"] = PALETTE[k % len(PALETTE)]
    return {"title": title, "ylim": [float(ylim[0]), float(ylim[1])], "series": series}


def _f(a):
    return f"{a:.3f}"


def render_svg(data, width=640, height=480, margin=48):
    """SVG text for a portrait dict (see ``portrait``)."""
    y0, y1 = data["ylim"]
    if not y1 > y0:
        y1 = y0 + 1.0
    pw, ph = width - 2 * margin, height - 2 * margin

    def sx(x):
        return margin + pw * x

    def sy(y):
        return margin + ph * (1.0 - (y - y0) / (y1 - y0))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(5):
        xv = k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{_f(sx(xv))}" y="{height - margin + 16}" font-size="11" '
                   f'text-anchor="middle">{xv:g}</text>')
        out.append(f'<text x="{margin - 6}" y="{_f(sy(yv) + 4)}" font-size="11" '
                   f'text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{width / 2:g}" y="{height - 8}" font-size="12" text-anchor="middle">x</text>')
    out.append(f'<text x="14" y="{height / 2:g}" font-size="12" text-anchor="middle">y</text>')
    if data.get("title"):
        out.append(f'<text x="{width / 2:g}" y="20" font-size="14" text-anchor="middle">'
                   f'{_escape(data["title"])}</text>')
    out.append(f'<clipPath id="plot"><rect x="{margin}" y="{margin}" width="{pw}" height="{ph}"/></clipPath>')
    out.append('<g clip-path="url(#plot)">')
    for s in data["series"]:
        pts = [(sx(a), sy(b)) for a, b in zip(s["x"], s["y"]) if math.isfinite(b)]
        color = s["color"]
        out.append(f'<g id="{_escape(s["name"])}">')
        if s["style"] == "line":
            order = sorted(pts)
            if order:
                path = " ".join(f"{_f(a)},{_f(b)}" for a, b in order)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        else:
            r = 2.5 if s["style"] == "markers" else 0.8
            for a, b in pts:
                out.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{r}" fill="{color}"/>')
        out.append("</g>")
    out.append("</g>")
    ly = margin + 14
    for s in data["series"]:
        out.append(f'<text x="{width - margin - 4}" y="{ly}" font-size="11" text-anchor="end" '
                   f'fill="{s["color"]}">{_escape(s["name"])}</text>')
        ly += 14
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def write_svg(path, data):
    Path(path).write_text(render_svg(data))
    return str(path)


def portrait_rows(data):
    for s in data["series"]:
        for k, (a, b) in enumerate(zip(s["x"], s["y"])):
            yield s["name"], k, a, b


def export_run(run_dir, fmt):
    """Re-render stored run data in ``fmt``; returns the files written."""
    run = Path(run_dir)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r} (choose from {', '.join(FORMATS)})")
    if not run.is_dir():
        raise FileNotFoundError(f"run directory not found: {run}")
    written = []
    pdata = run / "portrait.json"
    if fmt == "svg":
        if not pdata.is_file():
            raise FileNotFoundError(f"no portrait data in {run}")
        written.append(write_svg(run / "portrait.svg", read_json(pdata)))
    elif fmt == "csv":
        if pdata.is_file():
            written.append(write_csv(run / "portrait.csv", ["series", "k", "x", "y"],
                                     portrait_rows(read_json(pdata))))
    else:
        for p in sorted(run.glob("*.json")):
            p.write_text(dumps_json(read_json(p)))
            written.append(str(p))
    return written
