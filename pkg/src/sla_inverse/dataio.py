"""Loading-curve ingestion and resampling, and export of analysis outputs.

All curves are stored in N and mm.  CSV is the only ingestion format: comma
delimited, decimal point, one header row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from sla_inverse.cohesive import TSCurve, fracture_energy, write_ts_csv

#: multipliers to the N-mm system
UNIT_FACTORS = {
    "N": 1.0,
    "kN": 1.0e3,
    "MN": 1.0e6,
    "mm": 1.0,
    "um": 1.0e-3,
    "cm": 10.0,
    "m": 1.0e3,
}
_CANONICAL = {"N": "N", "kN": "N", "MN": "N", "mm": "mm", "um": "mm", "cm": "mm", "m": "mm"}


class CurveError(ValueError):
    """Invalid loading-curve data."""


@dataclass(frozen=True, eq=False)
class LoadingCurve:
    """Ordered (control, response) polyline.

    Consecutive duplicate points are collapsed on construction.  Arc length is
    measured in coordinates divided by ``scale`` (by default the largest
    absolute value of each column), so that both monitors weigh equally.
    """

    control: np.ndarray
    response: np.ndarray
    control_unit: str = "N"
    response_unit: str = "mm"
    scale: tuple[float, float] | None = None
    _arc: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        c = np.array(self.control, dtype=float).ravel()
        r = np.array(self.response, dtype=float).ravel()
        if c.shape != r.shape:
            raise CurveError("control and response must have equal length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise CurveError("loading curve contains NaN or infinite values")
        if c.size:
            keep = np.ones(c.size, dtype=bool)
            keep[1:] = (np.diff(c) != 0.0) | (np.diff(r) != 0.0)
            c, r = c[keep], r[keep]
        if c.size < 2:
            raise CurveError("a loading curve needs at least two distinct points")
        scale = self.scale
        if scale is None:
            sc = float(np.max(np.abs(c))) or 1.0
            sr = float(np.max(np.abs(r))) or 1.0
            scale = (sc, sr)
        scale = (float(scale[0]), float(scale[1]))
        if not (scale[0] > 0.0 and scale[1] > 0.0):
            raise CurveError("curve scales must be positive")
        arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(c) / scale[0], np.diff(r) / scale[1]))])
        for a in (c, r, arc):
            a.setflags(write=False)
        object.__setattr__(self, "control", c)
        object.__setattr__(self, "response", r)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "_arc", arc)

    def __len__(self) -> int:
        return self.control.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoadingCurve):
            return NotImplemented
        return (
            np.array_equal(self.control, other.control)
            and np.array_equal(self.response, other.response)
            and self.control_unit == other.control_unit
            and self.response_unit == other.response_unit
        )

    @property
    def arc_length(self) -> np.ndarray:
        """Cumulative normalised arc length at every vertex."""
        return self._arc

    @property
    def total_length(self) -> float:
        return float(self._arc[-1])

    def points(self) -> np.ndarray:
        return np.column_stack([self.control, self.response])

    def point_at(self, s: float) -> tuple[float, float]:
        """Point at normalised arc length ``s`` (clamped to the curve)."""
        s = min(max(float(s), 0.0), self.total_length)
        return float(np.interp(s, self._arc, self.control)), float(np.interp(s, self._arc, self.response))

    def truncated(self, s_end: float) -> "LoadingCurve":
        """Curve cut at arc length ``s_end`` (same scales)."""
        s_end = min(max(float(s_end), 0.0), self.total_length)
        idx = int(np.searchsorted(self._arc, s_end, side="right"))
        c, r = list(self.control[:idx]), list(self.response[:idx])
        pc, pr = self.point_at(s_end)
        if not c or (c[-1], r[-1]) != (pc, pr):
            c.append(pc)
            r.append(pr)
        return LoadingCurve(c, r, self.control_unit, self.response_unit, self.scale)


def _unit_factor(unit: str) -> tuple[float, str]:
    try:
        return UNIT_FACTORS[unit], _CANONICAL[unit]
    except KeyError:
        raise CurveError(f"unknown unit {unit!r}; known: {', '.join(UNIT_FACTORS)}") from None


def _column_index(header: list[str], key, path) -> int:
    if isinstance(key, int):
        if not 0 <= key < len(header):
            raise CurveError(f"{path}: column {key} out of range")
        return key
    try:
        return [h.strip() for h in header].index(str(key))
    except ValueError:
        raise CurveError(f"{path}: no column named {key!r}") from None


def load_curve(
    path,
    units: Sequence[str] = ("N", "mm"),
    columns: Mapping[str, int | str] | None = None,
) -> LoadingCurve:
    """Read a loading curve from CSV.

    Parameters
    ----------
    path : path-like
        CSV file with a header row.
    units : (control_unit, response_unit)
        Units of the two columns as stored, e.g. ``("kN", "mm")``; values
        are converted to N and mm.
    columns : mapping, optional
        ``{"control": name_or_index, "response": name_or_index}``; defaults
        to the first two columns.
    """
    path = Path(path)
    columns = dict(columns or {"control": 0, "response": 1})
    fc, uc = _unit_factor(units[0])
    fr, ur = _unit_factor(units[1])
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CurveError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise CurveError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    ic = _column_index(header, columns["control"], path)
    ir = _column_index(header, columns["response"], path)
    c, r = [], []
    for lineno, row in enumerate(body, start=2):
        try:
            vc, vr = float(row[ic]), float(row[ir])
        except (ValueError, IndexError):
            raise CurveError(f"{path}:{lineno}: non-numeric or missing value") from None
        if not (math.isfinite(vc) and math.isfinite(vr)):
            raise CurveError(f"{path}:{lineno}: NaN or infinite value")
        c.append(vc * fc)
        r.append(vr * fr)
    try:
        return LoadingCurve(c, r, uc, ur)
    except CurveError as exc:
        raise CurveError(f"{path}: {exc}") from None


def write_curve_csv(curve: LoadingCurve, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("control,response\n")
        for c, r in zip(curve.control, curve.response):
            fh.write(f"{float(c)!r},{float(r)!r}\n")
    return path


def decimate_curve(curve: LoadingCurve, n_points: int) -> LoadingCurve:
    """Subsample ``n_points`` vertices spread uniformly in arc length.

    For every uniform arc-length station the nearest vertex is taken, keeping
    the sequence strictly increasing; both endpoints are always kept.  The
    result keeps the scales of ``curve`` so arc lengths stay comparable.
    """
    n_points = int(n_points)
    if n_points < 2:
        raise CurveError("decimation needs at least two points")
    m = len(curve)
    if n_points >= m:
        return curve
    arc = curve.arc_length
    stations = np.linspace(0.0, arc[-1], n_points)
    picked = [0]
    for j in range(1, n_points - 1):
        lo = picked[-1] + 1
        hi = m - (n_points - j)  # leave room for the remaining stations
        i = int(np.searchsorted(arc, stations[j]))
        cands = [c for c in (i - 1, i) if lo <= c <= hi]
        if cands:
            best = min(cands, key=lambda c: abs(arc[c] - stations[j]))
        else:
            best = lo if i - 1 < lo else hi
        picked.append(best)
    picked.append(m - 1)
    idx = np.array(picked)
    return LoadingCurve(
        curve.control[idx], curve.response[idx], curve.control_unit, curve.response_unit, curve.scale
    )


def hausdorff_to_polyline(points: np.ndarray, polyline: np.ndarray) -> float:
    """Largest distance from any of ``points`` to the polyline."""
    a, b = polyline[:-1], polyline[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    best = np.full(len(points), np.inf)
    for k in range(len(a)):
        if dd[k] == 0.0:
            dist = np.hypot(*(points - a[k]).T)
        else:
            t = np.clip((points - a[k]) @ d[k] / dd[k], 0.0, 1.0)
            dist = np.hypot(*(points - (a[k] + t[:, None] * d[k])).T)
        best = np.minimum(best, dist)
    return float(best.max())


# ---------------------------------------------------------------- exports


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    try:
        with path.open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def write_forward(result, directory, stem: str = "forward") -> list[Path]:
    """Curve CSV (origin prepended) and events CSV of a forward analysis."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    c, r = result.control, result.response
    curve_rows = [(0.0, 0.0)] + list(zip(c.tolist(), r.tolist())) if len(c) else []
    return [
        _write_rows(out / f"{stem}_curve.csv", ("control", "response"), curve_rows),
        _write_rows(
            out / f"{stem}_events.csv",
            ("step", "ip", "lambda", "k", "strength"),
            ((e.step, e.ip, e.lam, e.k, e.strength) for e in result.events),
        ),
    ]


TRACE_HEADER = ("event", "pass", "case", "lambda", "ip", "cursor", "control", "response", "k", "strength")


def write_trace_csv(traces: Sequence, path) -> Path:
    rows = []
    for tr in traces:
        for e in tr.events:
            rows.append((e.step, tr.pass_index, e.case, e.lam, e.ip, e.cursor, e.control, e.response, e.k, e.strength))
    return _write_rows(Path(path), TRACE_HEADER, rows)


def write_summary_csv(traces: Sequence, path) -> Path:
    rows = []
    for tr in traces:
        ts = tr.ts
        if ts is None:
            rows.append((tr.pass_index, "nan", "nan", "nan", 0, tr.reason))
            continue
        g = fracture_energy(ts) if len(ts) >= 2 else 0.0
        w_c = ts.critical_opening if ts.is_complete else float("nan")
        rows.append((tr.pass_index, ts.tensile_strength, w_c, g, ts.is_complete, tr.reason))
    return _write_rows(Path(path), ("pass", "f_t_MPa", "w_c_mm", "G_F_N_per_mm", "complete", "reason"), rows)


def write_outputs(traces: Sequence, directory, experiment: LoadingCurve | None = None, svg: bool = True) -> list[Path]:
    """Write TS CSV per pass, the trace, the summary and optional SVG plots."""
    from sla_inverse.cohesive import average_ts

    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = []
    complete = []
    for tr in traces:
        if tr.ts is not None and len(tr.ts) >= 1:
            files.append(write_ts_csv(tr.ts, out / f"ts_pass{tr.pass_index}.csv"))
            if tr.ts.is_complete:
                complete.append(tr.ts)
    if len(complete) > 1:
        files.append(write_ts_csv(average_ts(complete), out / "ts_average.csv"))
    files.append(write_trace_csv(traces, out / "trace.csv"))
    files.append(write_summary_csv(traces, out / "summary.csv"))
    if svg:
        files.append(write_curve_svg(traces, out / "curve.svg", experiment))
        files.append(write_ts_svg([tr.ts for tr in traces if tr.ts is not None and len(tr.ts) >= 2], out / "ts.svg"))
    return files


# ---------------------------------------------------------------- SVG

_W, _H, _PAD = 640.0, 420.0, 50.0
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class _Frame:
    def __init__(self, xs: np.ndarray, ys: np.ndarray):
        xs = np.concatenate([[0.0], xs]) if xs.size else np.array([0.0, 1.0])
        ys = np.concatenate([[0.0], ys]) if ys.size else np.array([0.0, 1.0])
        self.x0, self.x1 = float(xs.min()), float(xs.max()) or 1.0
        self.y0, self.y1 = float(ys.min()), float(ys.max()) or 1.0
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0

    def map(self, x, y) -> tuple[float, float]:
        px = _PAD + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)
        py = _H - _PAD - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)
        return px, py

    def path(self, xs, ys) -> str:
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in (self.map(x, y) for x, y in zip(xs, ys)))


def _svg(body: list[str], xlabel: str, ylabel: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:.0f}" height="{_H:.0f}" '
        f'viewBox="0 0 {_W:.0f} {_H:.0f}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>\n'
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>\n'
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>\n'
        f'<text x="14" y="{_H / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {_H / 2})">{escape(ylabel)}</text>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def write_curve_svg(traces: Sequence, path, experiment: LoadingCurve | None = None) -> Path:
    """Response on x, control on y; small markers on Case A events, a large
    marker at the last Case A event of every pass."""
    xs = [np.asarray(tr.response_curve()[1]) for tr in traces]
    ys = [np.asarray(tr.response_curve()[0]) for tr in traces]
    if experiment is not None:
        xs.append(experiment.response)
        ys.append(experiment.control)
    frame = _Frame(np.concatenate(xs) if xs else np.zeros(0), np.concatenate(ys) if ys else np.zeros(0))
    body = []
    if experiment is not None:
        body.append(
            f'<polyline class="experiment" fill="none" stroke="black" stroke-dasharray="5,3" '
            f'points="{frame.path(experiment.response, experiment.control)}"/>'
        )
    for p, tr in enumerate(traces):
        color = _COLORS[p % len(_COLORS)]
        c, r = tr.response_curve()
        body.append(f'<polyline class="reproduced" fill="none" stroke="{color}" points="{frame.path(r, c)}"/>')
        last = None
        for e in tr.events:
            if e.case == "A":
                x, y = frame.map(e.response, e.control)
                body.append(f'<circle class="case-a" cx="{x:.2f}" cy="{y:.2f}" r="1.5" fill="{color}"/>')
                last = (x, y)
        if last is not None:
            body.append(f'<circle class="terminus" cx="{last[0]:.2f}" cy="{last[1]:.2f}" r="6" fill="{color}"/>')
    return _write_text(Path(path), _svg(body, "response [mm]", "control [N]"))


def write_ts_svg(curves: Sequence[TSCurve], path) -> Path:
    xs = [c.w for c in curves]
    ys = [c.sigma for c in curves]
    frame = _Frame(np.concatenate(xs) if xs else np.zeros(0), np.concatenate(ys) if ys else np.zeros(0))
    body = [
        f'<polyline class="ts" fill="none" stroke="{_COLORS[i % len(_COLORS)]}" points="{frame.path(c.w, c.sigma)}"/>'
        for i, c in enumerate(curves)
    ]
    return _write_text(Path(path), _svg(body, "w [mm]", "sigma [MPa]"))


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
