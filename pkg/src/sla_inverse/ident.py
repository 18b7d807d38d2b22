"""Inverse identification of a traction-separation curve from a loading curve.

The finite-element model is loaded by a reference load ``L``.  Every step
compares the *global* load factor, at which the model's proportional ray
meets the experimental curve, with the *local* load factors, at which a
cracking integration point reaches its current strength:

* Case A (global factor smallest): the model state lies on the experimental
  curve.  The lead integration point contributes a new TS point and its
  secant stiffness is reduced by ``(sigma - dsigma) / sigma``.
* Case B (a local factor smallest): a follower cracks in between two
  experimental states.  Its stiffness is reduced by the same rule and its new
  strength is read from the TS curve identified so far.

Multi-pass identification re-runs the analysis with the curves of earlier
passes assigned to their lead points, so that the rest of the experimental
record yields further TS curves.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from sla_inverse.cohesive import (
    RESIDUAL_STIFFNESS_RATIO,
    SawtoothLaw,
    TSCurve,
    fracture_energy,
    sawtooth_from_ts,
    ts_strength_at_secant,
)
from sla_inverse.dataio import LoadingCurve
from sla_inverse.fem import InterfaceSystem, Material, load_vector
from sla_inverse.mesh import Mesh
from sla_inverse.sla import ForwardResult, run_forward

log = logging.getLogger(__name__)

STIFFNESS_LIMIT_MESSAGE = (
    "initial stiffness of the numerical model must be equal or less than the measured stiffness"
)


class IdentificationError(RuntimeError):
    """The identification cannot proceed."""


class ModelTooStiffError(IdentificationError):
    """The elastic model ray never meets the experimental curve."""


class UnreachableStateError(IdentificationError):
    """The experimental curve stiffens faster than any secant state allows."""


@dataclass(frozen=True)
class IdentConfig:
    """Identification settings.

    Parameters
    ----------
    delta_sigma : float
        Maximum stress decrement between TS points.  A fraction of the
        identified tensile strength when ``delta_sigma_relative`` (default
        1 %), otherwise an absolute value in MPa.  Fixed for the whole run.
    reference_load : float, optional
        Magnitude of the control force under the reference load [N].  Must
        exceed the largest experimental control value; defaults to twice it.
    k0, g0 : float, optional
        Interface penalty stiffnesses [MPa/mm]; default ``E`` and ``1e4 E``.
    collinear_tol : float
        Relative tolerance for a model ray coinciding with a curve segment.
    cursor_tol : float
        Forward-progress tolerance as a fraction of the curve arc length.
    angle_tol : float
        Allowed decrease [rad] of the normalised secant compliance angle of
        the experimental curve before it counts as unreachable.
    """

    delta_sigma: float = 0.01
    delta_sigma_relative: bool = True
    reference_load: float | None = None
    k0: float | None = None
    g0: float | None = None
    collinear_tol: float = 1e-9
    cursor_tol: float = 1e-9
    angle_tol: float = 1e-4
    max_events: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if not self.delta_sigma > 0.0:
            raise ValueError("delta_sigma must be positive")
        if self.delta_sigma_relative and not self.delta_sigma < 1.0:
            raise ValueError("relative delta_sigma must be below 1")
        if self.reference_load is not None and not self.reference_load > 0.0:
            raise ValueError("reference load must be positive")


class IdentEvent(NamedTuple):
    step: int
    case: str  # "A" or "B"
    lam: float
    ip: int
    cursor: float
    control: float
    response: float
    k_prev: float
    k: float
    strength: float  # strength assigned to ``ip`` after the event (nan for the lead)
    sigma: float  # scaled stress at ``ip`` that drove the reduction
    w: float  # scaled opening at ``ip``
    lam_g: float  # nan when the model ray misses the curve
    lam_l: float  # smallest local factor (inf when none)
    admissibility: float  # max(lam * sigma_j - strength_j) over non-critical followers
    ts_point: bool


@dataclass
class IdentTrace:
    """Record of one identification pass."""

    pass_index: int
    events: list[IdentEvent]
    ts: TSCurve | None
    reason: str
    lead_ips: list[int]
    delta_sigma: float
    cursor: float
    assigned: dict[int, int] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.ts is not None and self.ts.is_complete

    @property
    def f_t(self) -> float:
        return self.ts.tensile_strength if self.ts is not None else float("nan")

    @property
    def fracture_energy(self) -> float:
        """Area under the identified curve; a lower bound when incomplete."""
        if self.ts is None or len(self.ts) < 2:
            return 0.0
        return fracture_energy(self.ts)

    def response_curve(self) -> tuple[np.ndarray, np.ndarray]:
        """Reproduced (control, response), Case A and B states, origin first."""
        c = np.array([0.0] + [e.control for e in self.events])
        r = np.array([0.0] + [e.response for e in self.events])
        return c, r


class LoadHit(NamedTuple):
    lam: float
    s: float  # arc-length position of the intersection


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def global_load_factor(
    ray: tuple[float, float],
    curve: LoadingCurve,
    cursor: float = 0.0,
    collinear_tol: float = 1e-9,
    cursor_tol: float = 1e-9,
) -> LoadHit | None:
    """First intersection of the ray ``lam * ray`` with the curve beyond ``cursor``.

    Works in monitor coordinates normalised by the curve scales.  A stretch
    of the curve lying on the ray returns its far end.  ``None`` when the
    ray does not meet the curve ahead of the cursor.
    """
    d = np.array(ray, dtype=float) / np.array(curve.scale)
    dn = float(np.hypot(*d))
    if dn == 0.0:
        return None
    P = curve.points() / np.array(curve.scale)
    arc = curve.arc_length
    a, b = P[:-1], P[1:]
    e = b - a
    en = np.hypot(e[:, 0], e[:, 1])
    den = _cross(d, e)
    s_min = cursor + cursor_tol * curve.total_length
    on_ray = np.abs(_cross(d[None, :], P)) <= collinear_tol * dn * np.maximum(np.hypot(P[:, 0], P[:, 1]), 1.0e-300)
    on_ray |= np.hypot(P[:, 0], P[:, 1]) <= collinear_tol * dn
    along = (P @ d) / (dn * dn)
    collinear = on_ray[:-1] & on_ray[1:]

    with np.errstate(divide="ignore", invalid="ignore"):
        lam = _cross(a, e) / den
        t = _cross(a, d[None, :]) / den
    crossing = (~collinear) & (np.abs(den) > collinear_tol * dn * en)
    crossing &= (t >= -1e-12) & (t <= 1.0 + 1e-12) & (lam > 0.0)
    s_cross = arc[:-1] + np.clip(t, 0.0, 1.0) * (arc[1:] - arc[:-1])

    n = len(e)
    ahead = arc[1:] > s_min
    coincident = ahead & collinear & (along[1:] > 0.0)
    hits = coincident | (ahead & crossing & (s_cross > s_min))
    if not np.any(hits):
        return None
    i = int(np.argmax(hits))
    if coincident[i] or t[i] >= 1.0 - 1e-12:
        # extend over a coincident stretch to its far end
        j = i if coincident[i] else i + 1
        while j < n and collinear[j] and along[j + 1] > 0.0:
            j += 1
        if j > i and (coincident[i] or j > i + 1):
            return LoadHit(float(along[j]), float(arc[j]))
    return LoadHit(float(lam[i]), float(s_cross[i]))


def _segment_distance(q, a, b) -> float:
    e = b - a
    ee = float(e @ e)
    t = 0.0 if ee == 0.0 else min(max(float((q - a) @ e) / ee, 0.0), 1.0)
    return float(np.hypot(*(q - a - t * e)))


def local_load_factors(stresses, strengths, exclude=()) -> np.ndarray:
    """``strength / stress`` for tensile points with positive strength, else ``inf``."""
    stresses = np.asarray(stresses, dtype=float)
    strengths = np.asarray(strengths, dtype=float)
    ok = (stresses > 0.0) & (strengths > 0.0)
    lam = np.full(stresses.shape, np.inf)
    lam[ok] = strengths[ok] / stresses[ok]
    lam[list(exclude)] = np.inf
    return lam


def _compliance_angle(curve: LoadingCurve) -> np.ndarray:
    """Angle of every vertex seen from the origin, response over control."""
    c = curve.control / curve.scale[0]
    r = curve.response / curve.scale[1]
    ang = np.arctan2(r, c)
    ang[np.hypot(c, r) < 1e-12] = np.nan
    return ang


def reference_scale(mesh: Mesh, reference_load: float) -> float:
    """Multiplier on the mesh loads giving a control force of ``reference_load``."""
    mon = mesh.control
    if mon.kind != "force":
        return float(reference_load)
    F = load_vector(mesh)
    base = abs(float(mon.coefficients() @ F[mon.dofs()]))
    if base == 0.0:
        raise IdentificationError("the reference load does not act on the control monitor")
    return float(reference_load) / base


def fit_young_modulus(
    mesh: Mesh,
    material: Material,
    curve: LoadingCurve,
    n_initial: int = 1,
    bias: float = 1e-3,
) -> float:
    """Modulus matching the initial slope of the curve, biased low by ``bias``.

    The model compliance scales with ``1/E`` (interface penalties default to
    multiples of ``E``), so one elastic solve suffices.  The slope is the
    least-squares ratio control/response over vertices ``1..n_initial``.
    """
    if n_initial < 1 or n_initial >= len(curve):
        raise ValueError("n_initial must select at least one vertex after the first")
    sys_ = InterfaceSystem(mesh, material)
    resp = sys_.response(np.full(mesh.n_ips, sys_.k0))
    c = curve.control[1 : n_initial + 1]
    r = curve.response[1 : n_initial + 1]
    slope_exp = float(c @ r) / float(r @ r)
    slope_model = resp.control / resp.response
    return float(material.reference_modulus * slope_exp / slope_model * (1.0 - bias))


class _Pass:
    """Mutable state of one identification pass."""

    def __init__(
        self,
        system: InterfaceSystem,
        curve: LoadingCurve,
        config: IdentConfig,
        pass_index: int,
        assigned: dict[int, TSCurve],
        delta_sigma: float | None,
        rng: np.random.Generator,
    ):
        self.sys = system
        self.curve = curve
        self.cfg = config
        self.pass_index = pass_index
        self.assigned = assigned  # ip -> complete TS of an earlier pass
        self.rng = rng
        n = system.n_ips
        self.k0 = system.k0
        self.k = np.full(n, self.k0)
        self.s = np.full(n, np.nan)
        for ip, ts in assigned.items():
            self.s[ip] = ts.tensile_strength
        self.cracked = np.zeros(n, dtype=bool)  # strength floored to zero
        self.provisional: set[int] = set()
        self.lead: int | None = None
        self.leads: list[int] = []
        self.ts_w: list[float] = []
        self.ts_s: list[float] = []
        self._ts: TSCurve | None = None
        self.dsigma = delta_sigma
        self.cursor = 0.0
        self.closed = None
        self.events: list[IdentEvent] = []
        self.angles = _compliance_angle(curve)
        self.ref_angle = math.nan

    # ------------------------------------------------------------ TS curve
    @property
    def ts(self) -> TSCurve | None:
        if self._ts is None and self.ts_w:
            self._ts = TSCurve(self.ts_w, self.ts_s, "identified")
        return self._ts

    def _add_point(self, w: float, s: float) -> bool:
        if self.ts_w and w <= self.ts_w[-1]:
            return False
        self.ts_w.append(float(w))
        self.ts_s.append(float(max(s, 0.0)))
        self._ts = None
        return True

    def _close(self) -> None:
        w, s = self.ts_w, self.ts_s
        w_m = w[-1]
        w_c = w_m * (1.0 + 1e-6) if w_m > 0.0 else 1e-12
        if len(w) >= 2 and s[-1] > 0.0:
            slope = (s[-1] - s[-2]) / (w[-1] - w[-2])
            if slope < 0.0:
                w_c = min(w_m - s[-1] / slope, 2.0 * w_m)
        if s[-1] == 0.0:
            return
        w.append(max(w_c, w_m * (1.0 + 1e-12)))
        s.append(0.0)
        self._ts = None

    # ------------------------------------------------------------ helpers
    def _reduce(self, ip: int, sigma: float) -> None:
        """Secant reduction ``k *= (sigma - dsigma) / sigma``; floor when exhausted."""
        floor = RESIDUAL_STIFFNESS_RATIO * self.k0
        reduced = self.k[ip] * ((sigma - self.dsigma) / sigma) if sigma > self.dsigma else 0.0
        if reduced > floor:
            self.k[ip] = reduced
        else:
            self.k[ip] = RESIDUAL_STIFFNESS_RATIO * self.k0
            self.s[ip] = 0.0
            self.cracked[ip] = True

    def _follower_strength(self, ip: int) -> None:
        if self.cracked[ip]:
            return
        ts = self.assigned.get(ip) or self.ts
        hit = ts_strength_at_secant(ts, self.k[ip])
        self.s[ip] = hit.sigma
        if hit.sigma <= 0.0:
            self.k[ip] = min(self.k[ip], RESIDUAL_STIFFNESS_RATIO * self.k0)
            self.s[ip] = 0.0
            self.cracked[ip] = True
            self.provisional.discard(ip)
        elif hit.provisional and ip not in self.assigned:
            self.provisional.add(ip)
        else:
            self.provisional.discard(ip)

    def _pick(self, candidates: np.ndarray, key_primary: np.ndarray, prefer_low: bool, stress: np.ndarray):
        vals = key_primary[candidates]
        best = vals.min() if prefer_low else vals.max()
        tol = 1e-12 * abs(best)
        tied = candidates[np.abs(vals - best) <= tol]
        if tied.size > 1 and stress is not None:
            sv = stress[tied]
            top = sv.max()
            tied = tied[sv >= top - 1e-12 * abs(top)]
        return int(self.rng.choice(tied)) if tied.size > 1 else int(tied[0])

    def _eligible(self) -> np.ndarray:
        return np.array(
            [ip for ip in range(self.sys.n_ips) if ip not in self.assigned and not self.cracked[ip]], dtype=int
        )

    def _update_lead(self, stress: np.ndarray) -> None:
        """Hand the lead to the most damaged point before any load factor is formed.

        A follower whose secant stiffness fell below the lead's takes over;
        the former lead becomes a follower with a strength read from the curve
        identified so far, so it takes part in the local factors of this step.
        """
        if self.cracked[self.lead]:
            return
        eligible = self._eligible()
        if eligible.size == 0:
            return
        lead = self._pick(eligible, self.k, prefer_low=True, stress=stress)
        if lead == self.lead:
            return
        old, self.lead = self.lead, lead
        self.provisional.discard(lead)
        self._follower_strength(old)

    def _check_reachable(self, s_to: float | None) -> None:
        """Raise when the curve ahead stiffens faster than any secant can follow.

        Secant states only grow more compliant, so a vertex between the cursor
        and ``s_to`` (or the curve end) whose compliance angle falls below the
        running maximum of the reference angle and the preceding vertices
        cannot be reached.
        """
        if math.isnan(self.ref_angle):
            return
        arc = self.curve.arc_length
        hi = np.inf if s_to is None else s_to
        idx = np.nonzero((arc > self.cursor) & (arc < hi) & ~np.isnan(self.angles))[0]
        if idx.size == 0:
            return
        ang = self.angles[idx]
        reach = np.maximum.accumulate(np.r_[self.ref_angle, ang])[:-1]
        bad = np.nonzero(ang < reach - self.cfg.angle_tol)[0]
        if bad.size:
            j = int(idx[bad[0]])
            raise UnreachableStateError(
                "unreachable experimental state: the curve stiffens faster than the secant "
                f"stiffness near point {j} (control={self.curve.control[j]:.6g}, "
                f"response={self.curve.response[j]:.6g})"
            )

    def _admissibility(self, lam: float, stress: np.ndarray, skip: int) -> float:
        active = ~np.isnan(self.s) & ~self.cracked
        if self.lead is not None:
            active[self.lead] = False
        active[skip] = False
        if not np.any(active):
            return -np.inf
        return float(np.max(lam * stress[active] - self.s[active]))

    # ------------------------------------------------------------ step
    def step(self) -> str | None:
        """One event; returns a termination reason or ``None``."""
        resp = self.sys.response(self.k, self.closed)
        self.closed = resp.closed
        if self.lead is not None:
            self._update_lead(resp.sigma)
        hit = global_load_factor(
            (resp.control, resp.response), self.curve, self.cursor, self.cfg.collinear_tol, self.cfg.cursor_tol
        )
        exclude = [] if self.lead is None else [self.lead]
        lam_l = local_load_factors(resp.sigma, np.nan_to_num(self.s, nan=0.0), exclude)
        lam_l[self.cracked] = np.inf
        lam_l_min = float(lam_l.min()) if lam_l.size else np.inf
        lam_g = hit.lam if hit is not None else math.nan

        if hit is None:
            self._check_reachable(None)
            if self.lead is None and self.pass_index == 1:
                raise ModelTooStiffError(STIFFNESS_LIMIT_MESSAGE)
            return "curve_exhausted"

        if lam_g < (1.0 - 1e-9) * lam_l_min and not self._on_curve_near(resp, lam_l_min, hit):
            self._check_reachable(hit.s)
            self._case_a(resp, hit, lam_l_min)
            if self.ts is not None and self.ts.is_complete:
                return "ts_complete"
            return None
        self._case_b(resp, lam_l, hit, lam_l_min)
        return None

    def _on_curve_near(self, resp, lam: float, hit: LoadHit) -> bool:
        """Whether ``lam * ray`` lies on the curve next to the hit.

        Where the curve grazes the ray, the crossing parameter is badly
        conditioned and a local event that lands on the curve shows up as a
        slightly larger factor than the crossing.  Such pairs are ties.
        """
        if not math.isfinite(lam):
            return False
        scale = np.asarray(self.curve.scale)
        q = lam * np.array([resp.control, resp.response]) / scale
        P = self.curve.points() / scale
        i = int(np.searchsorted(self.curve.arc_length, hit.s, side="right")) - 1
        i = min(max(i, 0), len(P) - 2)
        tol = self.cfg.collinear_tol * max(float(np.hypot(*q)), 1e-300)
        return any(_segment_distance(q, P[j], P[j + 1]) <= tol for j in range(i, min(i + 2, len(P) - 1)))

    def _case_a(self, resp, hit: LoadHit, lam_l_min: float) -> None:
        lam = hit.lam
        stress = lam * resp.sigma
        w = lam * resp.w
        first = self.lead is None
        if first:
            eligible = self._eligible()
            if eligible.size == 0:
                raise IdentificationError("no integration point left to lead the identification")
            lead = self._pick(eligible, stress, prefer_low=False, stress=None)
            f_t = float(stress[lead])
            if not f_t > 0.0:
                raise IdentificationError("lead integration point is not in tension")
            if self.dsigma is None:
                self.dsigma = self.cfg.delta_sigma * f_t if self.cfg.delta_sigma_relative else self.cfg.delta_sigma
            unset = np.isnan(self.s)
            self.s[unset] = f_t
        else:
            lead = self.lead
        self.lead = lead
        if not self.leads or self.leads[-1] != lead:
            self.leads.append(lead)
        adm = self._admissibility(lam, resp.sigma, lead)
        sigma_m = float(stress[lead])
        added = self._add_point(float(w[lead]), sigma_m)
        k_prev = float(self.k[lead])
        self._reduce(lead, sigma_m)
        if self.cracked[lead]:
            self._close()
        self.cursor = hit.s
        self.ref_angle = math.atan2(
            resp.response / self.curve.scale[1], resp.control / self.curve.scale[0]
        )
        self.events.append(
            IdentEvent(
                len(self.events), "A", lam, lead, self.cursor, lam * resp.control, lam * resp.response,
                k_prev, float(self.k[lead]), math.nan, sigma_m, float(w[lead]), lam, lam_l_min, adm, added,
            )
        )
        log.debug("pass %d event %d case A ip %d lambda %.6g", self.pass_index, len(self.events) - 1, lead, lam)
        if self.provisional:
            for ip in sorted(self.provisional):
                self._follower_strength(ip)

    def _case_b(self, resp, lam_l: np.ndarray, hit: LoadHit, lam_l_min: float) -> None:
        # a tie with the global factor resolves to the smaller of the two
        lam = min(lam_l_min, hit.lam)
        tied = np.nonzero(lam_l <= lam_l_min * (1.0 + 1e-12))[0]
        ip = int(self.rng.choice(tied)) if tied.size > 1 else int(tied[0])
        adm = self._admissibility(lam, resp.sigma, ip)
        sigma = float(self.s[ip])
        k_prev = float(self.k[ip])
        self._reduce(ip, sigma)
        self._follower_strength(ip)
        self.events.append(
            IdentEvent(
                len(self.events), "B", lam, ip, self.cursor, lam * resp.control, lam * resp.response,
                k_prev, float(self.k[ip]), float(self.s[ip]), sigma, float(lam * resp.w[ip]),
                hit.lam, lam_l_min, adm, False,
            )
        )
        log.debug("pass %d event %d case B ip %d lambda %.6g", self.pass_index, len(self.events) - 1, ip, lam)

    def run(self) -> IdentTrace:
        reason = "max_events"
        while len(self.events) < self.cfg.max_events:
            out = self.step()
            if out is not None:
                reason = out
                break
        return IdentTrace(
            self.pass_index, self.events, self.ts, reason, list(self.leads), float(self.dsigma or math.nan),
            self.cursor, {ip: -1 for ip in self.assigned},
        )


def _build_system(mesh: Mesh, material: Material, curve: LoadingCurve, config: IdentConfig) -> InterfaceSystem:
    peak = float(np.max(np.abs(curve.control)))
    L = config.reference_load if config.reference_load is not None else 2.0 * peak
    if mesh.control.kind == "force" and not L > peak:
        raise IdentificationError(
            f"reference load {L:.6g} N must exceed the largest experimental control value {peak:.6g} N"
        )
    return InterfaceSystem(mesh, material, k0=config.k0, g0=config.g0, load_scale=reference_scale(mesh, L))


def run_inverse(
    mesh: Mesh,
    material: Material,
    curve: LoadingCurve,
    config: IdentConfig = IdentConfig(),
    system: InterfaceSystem | None = None,
) -> IdentTrace:
    """Single-pass identification of the TS curve.

    Terminates with reason ``"ts_complete"`` when the lead point becomes
    traction free, ``"curve_exhausted"`` when the model ray no longer meets
    the curve (the TS curve is then incomplete and its area only a lower
    bound), or ``"max_events"``.

    Raises
    ------
    ModelTooStiffError
        The elastic model is stiffer than the experiment.
    UnreachableStateError
        The curve stiffens faster than the secant stiffness allows.
    """
    system = system or _build_system(mesh, material, curve, config)
    rng = np.random.default_rng(config.seed)
    return _Pass(system, curve, config, 1, {}, None, rng).run()


def run_multipass(
    mesh: Mesh,
    material: Material,
    curve: LoadingCurve,
    config: IdentConfig = IdentConfig(),
    max_passes: int = 3,
    arc_tol: float = 1e-6,
) -> list[IdentTrace]:
    """Multi-pass identification.

    Pass ``p`` re-runs the identification from the start of the curve with
    the curves of passes ``1..p-1`` assigned to their lead points (and to the
    points co-located with them).  A new pass starts only while the previous
    one completed its curve before the end of the record.
    """
    system = _build_system(mesh, material, curve, config)
    rng = np.random.default_rng(config.seed)
    partners = {}
    for group in mesh.ip_colocated_groups():
        for ip in group:
            partners[ip] = group
    traces: list[IdentTrace] = []
    assigned: dict[int, TSCurve] = {}
    owner: dict[int, int] = {}
    dsigma = None
    for p in range(1, max_passes + 1):
        tr = _Pass(system, curve, config, p, dict(assigned), dsigma, rng).run()
        tr.assigned = dict(owner)
        traces.append(tr)
        dsigma = tr.delta_sigma
        if not tr.complete:
            if p == 1:
                warnings.warn("first pass did not complete its TS curve; returning a single pass", stacklevel=2)
            break
        if curve.total_length - tr.cursor <= arc_tol * curve.total_length:
            break
        for lead in tr.lead_ips:
            for ip in partners.get(lead, [lead]):
                if ip not in assigned:
                    assigned[ip] = tr.ts
                    owner[ip] = p
    return traces


def replay_laws(
    n_ips: int, traces: Sequence[IdentTrace], k0: float
) -> list[SawtoothLaw]:
    """Per-ip saw-tooth laws from a multi-pass result.

    Points assigned in a later pass follow the curve of the pass that owns
    them; every other point follows the last complete curve.
    """
    complete = [tr for tr in traces if tr.complete]
    if not complete:
        raise IdentificationError("no complete TS curve to replay")
    laws = {
        tr.pass_index: sawtooth_from_ts(tr.ts, "decrement", tr.delta_sigma, k0=k0) for tr in complete
    }
    default = laws[complete[-1].pass_index]
    owner = dict(traces[-1].assigned)
    return [laws.get(owner.get(ip, -1), default) for ip in range(n_ips)]


def replay(
    mesh: Mesh,
    material: Material,
    curve: LoadingCurve,
    traces: Sequence[IdentTrace],
    config: IdentConfig = IdentConfig(),
) -> ForwardResult:
    """Forward analysis with the identified laws, up to the curve's last response."""
    system = _build_system(mesh, material, curve, config)
    laws = replay_laws(mesh.n_ips, traces, system.k0)
    limit = float(np.max(np.abs(curve.response)))
    return run_forward(mesh, material, laws, response_limit=limit, seed=config.seed, system=system)


def ray_deviation(points: np.ndarray, polyline: np.ndarray, scale=(1.0, 1.0)) -> np.ndarray:
    """Control-direction gap between each point and the polyline along its ray.

    Each point ``p`` defines the ray ``lam * p``; the nearest intersection
    ``lam*`` with the polyline gives the gap ``|lam* - 1| * |p_control|``.
    Points whose ray misses the polyline get ``inf``.
    """
    sc = np.array(scale, dtype=float)
    P = np.asarray(polyline, dtype=float) / sc
    a, e = P[:-1], np.diff(P, axis=0)
    out = np.empty(len(points))
    for i, p in enumerate(np.asarray(points, dtype=float)):
        d = p / sc
        den = _cross(d, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = _cross(a, e) / den
            t = _cross(a, d[None, :]) / den
        ok = np.isfinite(lam) & (t >= -1e-12) & (t <= 1.0 + 1e-12) & (lam >= 0.0)
        # segments through the point itself (collinear with the ray)
        par = np.abs(den) <= 1e-12 * np.hypot(*d) * np.hypot(e[:, 0], e[:, 1])
        through = par & (np.abs(_cross(a, d[None, :])) <= 1e-12 * max(np.hypot(*d), 1e-300) * np.maximum(np.hypot(a[:, 0], a[:, 1]), 1.0))
        cands = list(lam[ok])
        if np.any(through):
            # the ray runs along those segments: distance to their lam-interval
            for j in np.nonzero(through)[0]:
                dd = float(d @ d)
                l0, l1 = sorted((float(P[j] @ d) / dd, float(P[j + 1] @ d) / dd))
                cands.append(min(max(1.0, l0), l1))
        out[i] = min((abs(c - 1.0) for c in cands), default=np.inf) * abs(p[0])
    return out


def summarize(traces: Sequence[IdentTrace]) -> list[dict]:
    rows = []
    for tr in traces:
        rows.append(
            {
                "pass": tr.pass_index,
                "f_t": tr.f_t,
                "w_c": tr.ts.critical_opening if tr.ts is not None else math.nan,
                "G_F": tr.fracture_energy,
                "complete": tr.complete,
                "reason": tr.reason,
                "events": len(tr.events),
            }
        )
    return rows


__all__ = [
    "IdentConfig",
    "IdentEvent",
    "IdentTrace",
    "IdentificationError",
    "LoadHit",
    "ModelTooStiffError",
    "UnreachableStateError",
    "fit_young_modulus",
    "global_load_factor",
    "local_load_factors",
    "ray_deviation",
    "replay",
    "replay_laws",
    "run_inverse",
    "run_multipass",
    "summarize",
]
