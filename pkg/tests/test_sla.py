import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sla_inverse.cohesive import SawtoothLaw, exponential_ts, linear_ts, sawtooth_from_ts
from sla_inverse.fem import InterfaceSystem, Material, assemble_and_solve, default_penalties
from sla_inverse.mesh import Monitor, insert_cohesive_path, structured_grid
from sla_inverse.sla import NoTensileIPError, critical_event, run_forward

from conftest import BAND, E, F_T


LOAD = 1000.0


def single_ip_plate(load=LOAD, thickness=10.0):
    """2x2 plate split from the bottom edge to the centre node.

    The path ends inside the plate, so only the bottom node pair opens: the
    second ip of the interface element sits on a shared node and never
    carries stress.  The response monitor is the opening of that pair.
    """
    g = structured_grid([0.0, 10.0, 20.0], [0.0, 10.0, 20.0], thickness)
    m = insert_cohesive_path(g, [(10.0, 0.0), (10.0, 10.0)])
    (a, dup), (b, b2) = m.ip_nodes()
    assert b == b2
    left = [0, 3, 6]
    right = [2, 5, 8]
    supports = [(n, 0) for n in left] + [(0, 1)]
    loads = [(n, 0, load * w) for n, w in zip(right, (0.25, 0.5, 0.25))]
    mons = (
        Monitor("load", "force", tuple((n, 0, 1.0) for n in right)),
        Monitor("cod", "disp", ((a, 0, 1.0), (dup, 0, -1.0))),
    )
    return m.replace(supports=tuple(supports), loads=tuple(loads), monitors=mons).validate()


def rank_one_coefficients(mesh, material, g0):
    """Opening under the reference load, ``w(k) = w0 / (1 + c k)``, from two direct solves."""
    k1, k2 = 1.0, 1e3
    inv = []
    for k in (k1, k2):
        sol = assemble_and_solve(mesh, material, [k, k], g0)
        inv.append(1.0 / sol.response)
    slope = (inv[1] - inv[0]) / (k2 - k1)
    w0 = 1.0 / (inv[0] - slope * k1)
    return w0, slope * w0


class TestCriticalEvent:
    def test_smallest_ratio(self):
        # ratios 1.5 and 3: the first ip (index 0) is critical
        assert critical_event([2.0, 1.0], [3.0, 3.0]) == (0, 1.5)

    def test_compressive_ips_ignored(self):
        assert critical_event([-5.0, 1.0, 0.0], [1.0, 2.0, 1.0]) == (1, 2.0)
        with pytest.raises(NoTensileIPError):
            critical_event([-1.0, 0.0], [1.0, 1.0])

    def test_tie_is_random_but_reproducible(self):
        picks = {critical_event([1.0, 2.0, 2.0], [2.0, 4.0, 4.0], np.random.default_rng(s))[0] for s in range(20)}
        assert picks == {0, 1, 2}
        a = [critical_event([1.0, 1.0], [1.0, 1.0], np.random.default_rng(7))[0] for _ in range(3)]
        assert len(set(a)) == 1

    @given(st.integers(0, 2**31 - 1))
    def test_matches_brute_force(self, seed):
        r = np.random.default_rng(seed)
        stress = r.normal(size=50)
        strength = r.uniform(0.1, 3.0, size=50)
        if not np.any(stress > 0):
            return
        ip, lam = critical_event(stress, strength, r)
        best = min((strength[i] / stress[i], i) for i in range(50) if stress[i] > 0)
        assert (ip, lam) == (best[1], best[0])


class TestSingleIp:
    def test_sawtooth_trace_matches_closed_form(self):
        mesh = single_ip_plate()
        mat = Material.isotropic(E, 0.0)
        k0, g0 = default_penalties(mat)
        law = sawtooth_from_ts(linear_ts(F_T, 0.05), "stress-band", 0.3, k0=k0)
        res = run_forward(mesh, mat, law)
        assert res.reason == "no_tensile_ip"  # the pinned ip never opens
        assert len(res.events) == len(law) - 1
        w0, c = rank_one_coefficients(mesh, mat, g0)
        for i, ev in enumerate(res.events):
            k, s = law.stiffness[i], law.strength[i]
            # critical state: opening s / k, load multiplier s / (k w(k))
            assert ev.response == pytest.approx(s / k, rel=1e-9)
            assert ev.control == pytest.approx(LOAD * s / (k * w0 / (1.0 + c * k)), rel=1e-9)
            assert ev.ip == 0

    def test_envelope_converges_as_band_shrinks(self):
        mesh = single_ip_plate()
        mat = Material.isotropic(E, 0.0)
        k0, g0 = default_penalties(mat)
        ts = exponential_ts(F_T, 0.08)
        w0, c = rank_one_coefficients(mesh, mat, g0)

        def smooth_control(w):
            s = ts.stress_at(w)
            k = s / w
            return LOAD * s / (k * w0 / (1.0 + c * k))

        errors = []
        for band in (0.3, 0.1, 0.03):
            res = run_forward(mesh, mat, sawtooth_from_ts(ts, "stress-band", band, k0=k0))
            w = res.response[1:-1]
            errors.append(np.max(np.abs(res.control[1:-1] - smooth_control(w))))
        assert errors[0] > errors[1] > errors[2]

    def test_elastic_brittle(self):
        mesh = single_ip_plate()
        mat = Material.isotropic(E, 0.0)
        law = SawtoothLaw([E, 1e-6 * E], [F_T, 0.0])
        res = run_forward(mesh, mat, law)
        assert len(res.events) == 1
        assert res.events[0].response == pytest.approx(F_T / E, rel=1e-12)


class TestBeamForward:
    def test_peak_and_softening(self, forward10):
        c = forward10.control
        i = int(np.argmax(c))
        assert np.isfinite(c[i]) and 0 < i < len(c) - 1
        assert c[-1] < 0.5 * c[i]
        # snap-back representable: lambda is not monotone after the peak
        assert np.any(np.diff(c[i:]) > 0.0)

    def test_peak_within_two_percent_of_fine_band(self, beam10, concrete, prescribed_ts, forward10):
        fine = sawtooth_from_ts(prescribed_ts, "stress-band", 0.1 * BAND, k0=E)
        ref = run_forward(beam10, concrete, fine, control_drop=0.8)
        assert forward10.peak_control == pytest.approx(ref.peak_control, rel=0.02)

    def test_elastic_brittle_drops_after_peak(self, beam10, concrete):
        law = SawtoothLaw([E, 1e-6 * E], [F_T, 0.0])
        res = run_forward(beam10, concrete, law)
        assert res.control[0] == res.control.max()
        assert res.control[1] < res.control[0]

    def test_invariants_on_every_event(self, beam10, concrete, prescribed_ts):
        law = sawtooth_from_ts(prescribed_ts, "stress-band", BAND, k0=E)
        res = run_forward(beam10, concrete, law, max_events=400, record_states=True)
        sys_ = InterfaceSystem(beam10, concrete, k0=E)
        k = np.full(beam10.n_ips, law.stiffness[0])
        s = np.full(beam10.n_ips, law.strength[0])
        closed = None
        for ev, (k_after, s_after) in zip(res.events, res.states):
            resp = sys_.response(k, closed)
            closed = resp.closed
            excess = ev.lam * resp.sigma - s
            excess[s == 0.0] = -np.inf
            assert excess.max() <= 1e-9 * F_T
            assert abs(excess[ev.ip]) <= 1e-9 * F_T
            assert np.all(k_after <= k)
            k, s = k_after, s_after

    def test_deterministic(self, beam10, concrete, prescribed_ts):
        law = sawtooth_from_ts(prescribed_ts, "stress-band", BAND, k0=E)
        a = run_forward(beam10, concrete, law, max_events=500, seed=3)
        b = run_forward(beam10, concrete, law, max_events=500, seed=3)
        assert a.events == b.events

    def test_stop_criteria(self, beam10, concrete, prescribed_ts):
        law = sawtooth_from_ts(prescribed_ts, "stress-band", BAND, k0=E)
        assert run_forward(beam10, concrete, law, max_events=10).reason == "max_events"
        assert run_forward(beam10, concrete, law, response_limit=0.01).reason == "response_limit"
        assert run_forward(beam10, concrete, law, control_drop=0.9).reason == "control_drop"

    def test_per_ip_law_count_checked(self, beam10, concrete):
        law = SawtoothLaw([E, 1.0], [F_T, 0.0])
        with pytest.raises(ValueError):
            run_forward(beam10, concrete, [law] * 3)
