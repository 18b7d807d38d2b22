"""Traction-separation curves and their saw-tooth approximations.

A traction-separation (TS) curve is stored as a piecewise-linear list of
``(w, sigma)`` points, where ``w`` is the crack opening [mm] and ``sigma``
the cohesive normal stress [MPa].  Intermediate values are always obtained
by linear interpolation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

#: stiffness of a fully cracked integration point, relative to the penalty
RESIDUAL_STIFFNESS_RATIO = 1e-6

_trapz = getattr(np, "trapezoid", None) or np.trapz


class SawtoothError(ValueError):
    """The TS curve cannot be traced by secant stiffness reduction."""


@dataclass(frozen=True)
class TSCurve:
    """Piecewise-linear traction-separation relation.

    Parameters
    ----------
    w : array_like
        Crack openings [mm], strictly increasing, ``w[0] >= 0``.
    sigma : array_like
        Cohesive stresses [MPa], non-negative.
    provenance : str
        ``"prescribed"`` or ``"identified"``.
    """

    w: np.ndarray
    sigma: np.ndarray
    provenance: str = "prescribed"

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        s = np.array(self.sigma, dtype=float).ravel()
        if w.shape != s.shape:
            raise ValueError("w and sigma must have the same length")
        if w.size < 1:
            raise ValueError("a TS curve needs at least one point")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(s))):
            raise ValueError("TS curve values must be finite")
        if w[0] < 0.0:
            raise ValueError("first crack opening must be >= 0")
        if np.any(np.diff(w) <= 0.0):
            raise ValueError("crack openings must be strictly increasing")
        if np.any(s < 0.0):
            raise ValueError("cohesive stresses must be >= 0")
        w.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma", s)

    def __len__(self) -> int:
        return self.w.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TSCurve):
            return NotImplemented
        return (
            self.provenance == other.provenance
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.sigma, other.sigma)
        )

    __hash__ = None

    @property
    def tensile_strength(self) -> float:
        return float(self.sigma[0])

    @property
    def is_complete(self) -> bool:
        """True when the curve closes at zero stress (traction-free crack)."""
        return len(self) >= 2 and self.sigma[-1] == 0.0

    @property
    def critical_opening(self) -> float:
        """Opening at which the crack becomes traction free (``nan`` if incomplete)."""
        return float(self.w[-1]) if self.is_complete else float("nan")

    def stress_at(self, w):
        """Linear interpolation; constant to the left, zero beyond a closed end."""
        right = 0.0 if self.is_complete else float(self.sigma[-1])
        return np.interp(w, self.w, self.sigma, left=float(self.sigma[0]), right=right)

    def points(self) -> np.ndarray:
        return np.column_stack([self.w, self.sigma])


@dataclass(frozen=True)
class SawtoothLaw:
    """Sequence of elastic-brittle teeth ``(k_i, strength_i)``.

    The last tooth has zero strength and a residual stiffness; it represents
    the traction-free crack.
    """

    stiffness: np.ndarray
    strength: np.ndarray
    construction: str = "stress-band"
    parameter: float = float("nan")

    def __post_init__(self):
        k = np.array(self.stiffness, dtype=float).ravel()
        s = np.array(self.strength, dtype=float).ravel()
        if k.shape != s.shape or k.size < 2:
            raise ValueError("a saw-tooth law needs at least two teeth")
        if np.any(k <= 0.0) or np.any(np.diff(k) >= 0.0):
            raise ValueError("tooth stiffnesses must be positive and strictly decreasing")
        if s[-1] != 0.0 or np.any(s[:-1] <= 0.0):
            raise ValueError("only the last tooth may (and must) have zero strength")
        k.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "strength", s)

    def __len__(self) -> int:
        return self.stiffness.size

    @property
    def peak_openings(self) -> np.ndarray:
        """Opening at the peak of each loaded tooth (last tooth excluded)."""
        return self.strength[:-1] / self.stiffness[:-1]

    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        """Stress-opening path followed under monotonic opening."""
        wp = self.peak_openings
        ws, ss = [0.0], [0.0]
        for i, (k, s) in enumerate(zip(self.stiffness[:-1], self.strength[:-1])):
            if i > 0:
                ws.append(wp[i - 1])
                ss.append(k * wp[i - 1])
            ws.append(wp[i])
            ss.append(s)
        ws.append(wp[-1])
        ss.append(0.0)
        return np.array(ws), np.array(ss)

    def dissipated_energy(self) -> float:
        """Area under the envelope [N/mm]."""
        wp = self.peak_openings
        prev = np.concatenate([[0.0], wp[:-1]])
        return float(np.sum(0.5 * self.stiffness[:-1] * (wp**2 - prev**2)))


class SecantHit(NamedTuple):
    w: float
    sigma: float
    provisional: bool


def fracture_energy(ts: TSCurve) -> float:
    """Trapezoidal area under the TS curve [N/mm].

    For an incomplete curve (``ts.is_complete`` is False) the value is only a
    lower bound of the fracture energy.
    """
    if len(ts) < 2:
        raise ValueError("fracture energy needs at least two points")
    return float(_trapz(ts.sigma, ts.w))


def linear_ts(f_t: float, w_c: float, provenance: str = "prescribed") -> TSCurve:
    return TSCurve([0.0, w_c], [f_t, 0.0], provenance)


def exponential_ts(f_t: float, g_f: float, n_points: int = 400, cutoff: float = 0.01) -> TSCurve:
    """Exponential softening ``f_t * exp(-w f_t / G_F)``.

    The exponential is truncated where the stress falls to ``cutoff * f_t`` and
    closed by a straight line to zero, placed so that the exact area of the
    law equals ``g_f``.
    """
    if f_t <= 0.0 or g_f <= 0.0:
        raise ValueError("f_t and G_F must be positive")
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    scale = g_f / f_t
    w_t = -scale * np.log(cutoff)
    w = np.linspace(0.0, w_t, n_points)
    sigma = f_t * np.exp(-w / scale)
    # remaining tail energy cutoff*g_f goes into the closing triangle
    w_c = w_t + 2.0 * scale
    return TSCurve(np.append(w, w_c), np.append(sigma, 0.0))


def check_secant_traceable(ts: TSCurve, rtol: float = 1e-9) -> None:
    """Raise :class:`SawtoothError` if a segment hardens faster than its secant.

    Along a linear segment ``sigma = a + b w`` the secant ``sigma / w`` is
    non-increasing iff ``a >= 0``.
    """
    w, s = ts.w, ts.sigma
    if len(ts) < 2:
        return
    b = np.diff(s) / np.diff(w)
    a = s[:-1] - b * w[:-1]
    bad = np.nonzero(a < -rtol * ts.sigma.max())[0]
    if bad.size:
        i = int(bad[0])
        raise SawtoothError(
            f"TS segment {i} (w={w[i]:.6g}..{w[i + 1]:.6g} mm) hardens with slope "
            f"{b[i]:.6g} MPa/mm, steeper than the secant stiffness {s[i] / max(w[i], 1e-300):.6g}"
        )


def ts_strength_at_secant(ts: TSCurve, k: float) -> SecantHit:
    """First intersection of the line ``sigma = k w`` with the TS curve.

    If the line passes above the first point the first point is returned.  If
    it exits beyond the last point of an incomplete curve, the last point is
    returned with ``provisional=True``.
    """
    if k <= 0.0:
        raise ValueError("secant stiffness must be positive")
    w, s = ts.w, ts.sigma
    g = s - k * w
    if g[0] <= 0.0:
        return SecantHit(float(w[0]), float(s[0]), False)
    below = np.nonzero(g <= 0.0)[0]
    if below.size == 0:
        return SecantHit(float(w[-1]), float(s[-1]), True)
    i = int(below[0])
    t = g[i - 1] / (g[i - 1] - g[i])
    wi = w[i - 1] + t * (w[i] - w[i - 1])
    return SecantHit(float(wi), float(k * wi), False)


def _final_stiffness(k_last: float, k0: float) -> float:
    k_res = RESIDUAL_STIFFNESS_RATIO * k0
    return k_res if k_res < k_last else 1e-3 * k_last


def sawtooth_from_ts(
    ts: TSCurve,
    method: str = "stress-band",
    parameter: float = 0.01,
    k0: float = 1.0e4,
    min_strength_ratio: float = 1e-3,
    max_teeth: int = 100_000,
) -> SawtoothLaw:
    """Saw-tooth approximation of a complete TS curve.

    Parameters
    ----------
    ts : TSCurve
        Complete curve; its first stress is the tensile strength.
    method : {"stress-band", "stiffness-factor", "decrement"}
        ``stress-band``: tooth peaks on ``sigma + band/2`` and drops to
        ``sigma - band/2`` (``parameter`` = band width [MPa]).
        ``stiffness-factor``: ``k_{i+1} = rho k_i`` with strengths read on the
        curve (``parameter`` = rho).
        ``decrement``: ``k_{i+1} = k_i (s_i - d) / s_i`` with strengths read
        on the curve (``parameter`` = d [MPa]); this is the reduction rule of
        the inverse analysis.
    k0 : float
        Penalty stiffness of the first tooth [MPa/mm].
    min_strength_ratio : float
        ``stiffness-factor`` stops once strengths fall below this fraction of
        ``f_t``.
    """
    if not ts.is_complete:
        raise ValueError("saw-tooth construction needs a complete TS curve")
    if k0 <= 0.0:
        raise ValueError("penalty stiffness must be positive")
    check_secant_traceable(ts)
    f_t = ts.tensile_strength
    ks, ss = [k0], [f_t]

    if method == "stress-band":
        band = float(parameter)
        if band <= 0.0:
            raise ValueError("band width must be positive")
        half = 0.5 * band
        w_p = f_t / k0
        while len(ks) < max_teeth:
            lower = float(ts.stress_at(w_p)) - half
            if lower <= 0.0:
                break
            k_next = lower / w_p
            w_next = _band_crossing(ts, k_next, w_p, half)
            ks.append(k_next)
            ss.append(k_next * w_next)
            w_p = w_next
    elif method == "stiffness-factor":
        rho = float(parameter)
        if not 0.0 < rho < 1.0:
            raise ValueError("stiffness factor must lie in (0, 1)")
        while len(ks) < max_teeth:
            k_next = rho * ks[-1]
            hit = ts_strength_at_secant(ts, k_next)
            if hit.sigma < min_strength_ratio * f_t:
                break
            ks.append(k_next)
            ss.append(hit.sigma)
    elif method == "decrement":
        dec = float(parameter)
        if dec <= 0.0:
            raise ValueError("stress decrement must be positive")
        while len(ks) < max_teeth and ss[-1] > dec:
            k_next = ks[-1] * (ss[-1] - dec) / ss[-1]
            hit = ts_strength_at_secant(ts, k_next)
            if hit.sigma <= 0.0:
                break
            ks.append(k_next)
            ss.append(hit.sigma)
    else:
        raise ValueError(f"unknown saw-tooth method {method!r}")

    if len(ks) >= max_teeth:
        raise SawtoothError(f"saw-tooth construction exceeded {max_teeth} teeth")
    ks.append(_final_stiffness(ks[-1], k0))
    ss.append(0.0)
    return SawtoothLaw(np.array(ks), np.array(ss), method, float(parameter))


def _band_crossing(ts: TSCurve, k: float, w_start: float, half: float) -> float:
    """First ``w > w_start`` with ``k w = sigma(w) + half``."""
    w, s = ts.w, ts.sigma
    idx = np.searchsorted(w, w_start, side="right")
    nodes = np.concatenate([[w_start], w[idx:]])
    h = ts.stress_at(nodes) + half - k * nodes
    down = np.nonzero(h <= 0.0)[0]
    if down.size:
        i = int(down[0])
        t = h[i - 1] / (h[i - 1] - h[i])
        return float(nodes[i - 1] + t * (nodes[i] - nodes[i - 1]))
    # beyond the closed end the band is the constant ``half``
    return max(float(w[-1]), half / k)


def smooth_ts(ts: TSCurve, window: int = 5) -> TSCurve:
    """Area-preserving smoothing of an (identified) TS curve.

    Each point is replaced by a local linear least-squares fit over a centred
    window of ``window`` points (shrunk symmetrically near the ends, so both
    end points are kept).  The stresses after the first point are then scaled
    by a common factor so that the trapezoidal area is unchanged.
    """
    n = len(ts)
    if n < 3:
        raise ValueError("smoothing needs at least three points")
    half = max(int(window) // 2, 0)
    w, s = ts.w, ts.sigma
    out = s.copy()
    for i in range(1, n - 1):
        h = min(half, i, n - 1 - i)
        if h == 0:
            continue
        ww = w[i - h : i + h + 1]
        ss = s[i - h : i + h + 1]
        wm, sm = ww.mean(), ss.mean()
        dw = ww - wm
        denom = float(dw @ dw)
        slope = float(dw @ (ss - sm)) / denom if denom > 0.0 else 0.0
        out[i] = sm + slope * (w[i] - wm)
    out = np.maximum(out, 0.0)
    target = _trapz(s, w)
    head = 0.5 * out[0] * (w[1] - w[0])
    rest = _trapz(out, w) - head
    if rest > 0.0:
        out[1:] *= (target - head) / rest
    return TSCurve(w, np.maximum(out, 0.0), ts.provenance)


def average_ts(curves: Sequence[TSCurve]) -> TSCurve:
    """Pointwise mean of complete curves on the union of their abscissae."""
    curves = list(curves)
    if not curves:
        raise ValueError("cannot average an empty list of TS curves")
    grid = np.unique(np.concatenate([c.w for c in curves]))
    mean = np.mean([c.stress_at(grid) for c in curves], axis=0)
    prov = "identified" if any(c.provenance == "identified" for c in curves) else "prescribed"
    return TSCurve(grid, mean, prov)


def ts_deviation(a: TSCurve, b: TSCurve, w_max: float | None = None) -> np.ndarray:
    """Pointwise stress difference ``a - b`` on the union of both abscissae."""
    grid = np.unique(np.concatenate([a.w, b.w]))
    if w_max is not None:
        grid = grid[grid <= w_max]
    return a.stress_at(grid) - b.stress_at(grid)


def write_ts_csv(ts: TSCurve, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w_mm", "sigma_MPa"])
        for w, s in zip(ts.w, ts.sigma):
            writer.writerow([repr(float(w)), repr(float(s))])
    return path


def read_ts_csv(path, provenance: str = "prescribed") -> TSCurve:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["w_mm", "sigma_MPa"]:
        raise ValueError(f"{path}: expected header 'w_mm,sigma_MPa'")
    w, s = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            w.append(float(row[0]))
            s.append(float(row[1]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: bad TS row {row!r}") from exc
    return TSCurve(w, s, provenance)
