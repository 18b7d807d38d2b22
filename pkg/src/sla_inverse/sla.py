"""Event-by-event sequentially linear analysis with saw-tooth interface laws."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from sla_inverse.cohesive import SawtoothLaw
from sla_inverse.dataio import LoadingCurve
from sla_inverse.fem import InterfaceSystem, Material
from sla_inverse.mesh import Mesh

log = logging.getLogger(__name__)

#: relative tolerance within which critical load factors count as tied
TIE_RTOL = 1e-12


class NoTensileIPError(RuntimeError):
    """No integration point is in tension, so no load factor exists."""


class EventRecord(NamedTuple):
    step: int
    ip: int
    lam: float
    control: float
    response: float
    k: float  # secant stiffness after the update
    strength: float  # strength after the update


def critical_event(stresses, strengths, rng: np.random.Generator | None = None) -> tuple[int, float]:
    """Critical integration point and load multiplier.

    ``lambda = min(strength / stress)`` over points in tension.  Ties within
    a relative ``1e-12`` are broken by a draw from ``rng``.
    """
    stresses = np.asarray(stresses, dtype=float)
    strengths = np.asarray(strengths, dtype=float)
    tensile = np.nonzero(stresses > 0.0)[0]
    if tensile.size == 0:
        raise NoTensileIPError("no integration point in tension")
    ratio = strengths[tensile] / stresses[tensile]
    lam = float(ratio.min())
    tied = tensile[ratio <= lam * (1.0 + TIE_RTOL)]
    if tied.size > 1:
        rng = rng if rng is not None else np.random.default_rng(0)
        ip = int(rng.choice(tied))
    else:
        ip = int(tied[0])
    return ip, lam


@dataclass
class ForwardResult:
    """Per-event monitor pairs and records.

    ``control`` and ``response`` hold one entry per event (the origin is not
    included); :meth:`loading_curve` prepends it.
    """

    control: np.ndarray
    response: np.ndarray
    events: list[EventRecord]
    reason: str
    states: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)

    def loading_curve(self, include_origin: bool = True) -> LoadingCurve:
        c, r = self.control, self.response
        if include_origin:
            c, r = np.concatenate([[0.0], c]), np.concatenate([[0.0], r])
        return LoadingCurve(c, r)

    @property
    def peak_control(self) -> float:
        return float(np.max(self.control)) if len(self.control) else 0.0


def _per_ip_laws(law, n_ips: int) -> list[SawtoothLaw]:
    if isinstance(law, SawtoothLaw):
        return [law] * n_ips
    laws = list(law)
    if len(laws) != n_ips:
        raise ValueError(f"expected {n_ips} saw-tooth laws, got {len(laws)}")
    return laws


def run_forward(
    mesh: Mesh,
    material: Material,
    law: SawtoothLaw | Sequence[SawtoothLaw],
    load_scale: float = 1.0,
    *,
    max_events: int | None = None,
    response_limit: float | None = None,
    control_drop: float | None = None,
    seed: int = 0,
    g0: float | None = None,
    record_states: bool = False,
    system: InterfaceSystem | None = None,
) -> ForwardResult:
    """Sequentially linear analysis under a proportional reference load.

    Parameters
    ----------
    law
        One saw-tooth law for every interface ip, or one per ip.  The first
        tooth stiffness is the penalty stiffness ``k0``.
    load_scale
        Multiplier on the mesh reference load.
    max_events, response_limit, control_drop
        Stop criteria: event count, ``|response|`` exceeding a limit, or the
        control value falling below ``control_drop`` times its running peak.
    record_states
        Keep the stiffness and strength vectors after every event.

    Returns
    -------
    ForwardResult
        ``reason`` is ``"fully_cracked"``, ``"no_tensile_ip"``,
        ``"max_events"``, ``"response_limit"`` or ``"control_drop"``.
    """
    laws = _per_ip_laws(law, mesh.n_ips)
    k0 = max(float(lw.stiffness[0]) for lw in laws)
    if system is None:
        system = InterfaceSystem(mesh, material, k0=k0, g0=g0, load_scale=load_scale)
    rng = np.random.default_rng(seed)
    tooth = np.zeros(mesh.n_ips, dtype=np.int64)
    last = np.array([len(lw) - 1 for lw in laws])
    k = np.array([lw.stiffness[0] for lw in laws], dtype=float)
    s = np.array([lw.strength[0] for lw in laws], dtype=float)

    controls, responses, events, states = [], [], [], []
    closed = None
    peak = 0.0
    reason = "max_events"
    step = 0
    while max_events is None or step < max_events:
        active = tooth < last
        if not np.any(active):
            reason = "fully_cracked"
            break
        resp = system.response(k, closed)
        closed = resp.closed
        stress = np.where(active, resp.sigma, 0.0)
        try:
            ip, lam = critical_event(stress, s, rng)
        except NoTensileIPError:
            reason = "no_tensile_ip"
            break
        c, r = lam * resp.control, lam * resp.response
        tooth[ip] += 1
        law_ip = laws[ip]
        if law_ip.stiffness[tooth[ip]] >= k[ip]:
            raise RuntimeError(f"non-decreasing stiffness update at ip {ip}")
        k[ip] = law_ip.stiffness[tooth[ip]]
        s[ip] = law_ip.strength[tooth[ip]]
        events.append(EventRecord(step, ip, lam, c, r, float(k[ip]), float(s[ip])))
        controls.append(c)
        responses.append(r)
        if record_states:
            states.append((k.copy(), s.copy()))
        log.debug("event %d ip %d lambda %.6g control %.6g response %.6g", step, ip, lam, c, r)
        step += 1
        peak = max(peak, c)
        if response_limit is not None and abs(r) >= response_limit:
            reason = "response_limit"
            break
        if control_drop is not None and c < control_drop * peak:
            reason = "control_drop"
            break
    return ForwardResult(np.array(controls), np.array(responses), events, reason, states)
