"""Event-level checks shared by the identification and acceptance tests."""

import math

import numpy as np

from sla_inverse.cohesive import RESIDUAL_STIFFNESS_RATIO

REL = 1e-12


def trace_violations(trace, k0):
    """List of human-readable invariant violations of one identification pass."""
    out = []
    f_t = trace.f_t
    ds = trace.delta_sigma
    floor = RESIDUAL_STIFFNESS_RATIO * k0
    last_w = -math.inf
    for e in trace.events:
        # minimum rule
        if math.isfinite(e.lam_g) and e.lam > e.lam_g * (1.0 + REL):
            out.append(f"event {e.step}: lambda {e.lam!r} above global factor {e.lam_g!r}")
        if e.lam > e.lam_l * (1.0 + REL):
            out.append(f"event {e.step}: lambda {e.lam!r} above local factor {e.lam_l!r}")
        expected = "A" if math.isfinite(e.lam_g) and e.lam == e.lam_g and e.lam < e.lam_l else "B"
        if e.case == "A" and expected != "A":
            out.append(f"event {e.step}: case A but lambda is not the strict global minimum")
        # admissibility of every non-critical ip after scaling
        if e.admissibility > 1e-9 * f_t:
            out.append(f"event {e.step}: strength exceeded by {e.admissibility!r}")
        # secant reduction rule
        expected_ratio = (e.sigma - ds) / e.sigma if e.sigma > ds else 0.0
        if e.k > floor * (1.0 + 1e-9):
            ratio = e.k / e.k_prev
            if abs(ratio - expected_ratio) > REL:
                out.append(f"event {e.step}: reduction ratio {ratio!r} != {expected_ratio!r}")
        elif e.case == "A" and e.k_prev * expected_ratio > floor * (1.0 + 1e-9):
            out.append(f"event {e.step}: stiffness floored although the reduced value is above the floor")
        if not e.k < e.k_prev:
            out.append(f"event {e.step}: stiffness did not decrease")
        # lead opening grows across Case A events
        if e.case == "A":
            if e.w < last_w:
                out.append(f"event {e.step}: lead opening decreased")
            last_w = max(last_w, e.w)
    ts_events = [e for e in trace.events if e.ts_point]
    if ts_events and any(e.case != "A" for e in ts_events):
        out.append("TS point recorded by a Case B event")
    if trace.ts is not None and len(trace.ts) > 1 and np.any(np.diff(trace.ts.w) <= 0):
        out.append("TS abscissae not strictly increasing")
    return out
