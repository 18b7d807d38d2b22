import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sla_inverse.cohesive import RESIDUAL_STIFFNESS_RATIO, TSCurve, fracture_energy, sawtooth_from_ts
from sla_inverse.dataio import LoadingCurve
from sla_inverse.fem import InterfaceSystem, Material, default_penalties
from sla_inverse.ident import (
    STIFFNESS_LIMIT_MESSAGE,
    IdentConfig,
    IdentificationError,
    ModelTooStiffError,
    UnreachableStateError,
    fit_young_modulus,
    global_load_factor,
    local_load_factors,
    ray_deviation,
    replay_laws,
    run_inverse,
    run_multipass,
    summarize,
)
from sla_inverse.mesh import insert_cohesive_path

from conftest import E, F_T, NU
from invariants import trace_violations
from test_mesh import tension_plate


def ray_oracle(ray, pts, s_min):
    """Brute-force ray-polyline crossings in raw coordinates; smallest arc beyond ``s_min``."""
    d = np.asarray(ray, float)
    scale = np.max(np.abs(pts), axis=0)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*(np.diff(pts, axis=0) / scale).T))])
    best = None
    for i in range(len(pts) - 1):
        a, e = pts[i], pts[i + 1] - pts[i]
        A = np.array([[d[0], -e[0]], [d[1], -e[1]]])
        if abs(np.linalg.det(A)) < 1e-12 * np.linalg.norm(d) * np.linalg.norm(e):
            continue
        lam, t = np.linalg.solve(A, a)
        if lam > 0 and -1e-12 <= t <= 1 + 1e-12:
            s = arc[i] + t * (arc[i + 1] - arc[i])
            if s > s_min and (best is None or s < best[1]):
                best = (lam, s)
    return best


@pytest.fixture(scope="module")
def plate():
    mesh, _ = tension_plate(nx=4, ny=2, sigma=1.0)
    return insert_cohesive_path(mesh, [(50.0, 0.0), (50.0, 50.0)])


def plate_curve(mesh, material, shape):
    """Curve through the model's elastic ray up to ``P1`` then along ``shape``."""
    sys_ = InterfaceSystem(mesh, material)
    resp = sys_.response(np.full(mesh.n_ips, sys_.k0))
    slope = resp.control / resp.response
    P1 = 1000.0
    u1 = P1 / slope
    pts = [(0.0, 0.0), (P1, u1)] + [(P1 * c, u1 * r) for c, r in shape]
    return LoadingCurve(*np.array(pts).T)


class TestGlobalLoadFactor:
    def test_collinear_stretch_returns_far_end(self):
        curve = LoadingCurve([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 1.0])
        hit = global_load_factor((1.0, 1.0), curve)
        assert hit.lam == pytest.approx(2.0, rel=1e-14)
        assert hit.s == pytest.approx(curve.arc_length[2], rel=1e-14)

    def test_crossing_on_second_segment(self):
        pts = np.array([[0.0, 0.0], [2.0, 1.8], [4.0, 1.0]])
        curve = LoadingCurve(pts[:, 0], pts[:, 1])
        hit = global_load_factor((1.0, 0.5), curve)
        # lambda (1, 0.5) = (2, 1.8) + t (2, -0.8)  ->  t = 4/9
        assert hit.lam == pytest.approx(2.0 + 8.0 / 9.0, rel=1e-13)
        lam, s = ray_oracle((1.0, 0.5), pts, 1e-9 * curve.total_length)
        assert hit.lam == pytest.approx(lam, rel=1e-12) and hit.s == pytest.approx(s, rel=1e-12)

    def test_cursor_past_last_intersection(self):
        curve = LoadingCurve([0.0, 2.0, 4.0], [0.0, 1.8, 1.0])
        hit = global_load_factor((1.0, 0.5), curve)
        assert global_load_factor((1.0, 0.5), curve, cursor=hit.s) is None
        assert global_load_factor((1.0, 0.0), curve) is None

    @given(st.integers(0, 2**31 - 1))
    def test_matches_exhaustive_oracle(self, seed):
        r = np.random.default_rng(seed)
        pts = np.vstack([[0.0, 0.0], np.cumsum(r.uniform(-0.5, 1.0, size=(12, 2)), axis=0) + [0.5, 0.5]])
        ray = r.uniform(0.1, 1.0, size=2)
        curve = LoadingCurve(pts[:, 0], pts[:, 1], scale=tuple(np.max(np.abs(pts), axis=0)))
        cursor = r.uniform(0.0, 0.5) * curve.total_length
        hit = global_load_factor(tuple(ray), curve, cursor)
        ref = ray_oracle(ray, pts, cursor + 1e-9 * curve.total_length)
        if ref is None:
            assert hit is None
        else:
            assert hit is not None
            assert hit.lam == pytest.approx(ref[0], rel=1e-9)
            assert hit.s == pytest.approx(ref[1], rel=1e-9, abs=1e-12)


class TestLocalLoadFactors:
    def test_ratio(self):
        assert local_load_factors([2.0], [3.0])[0] == 1.5

    def test_compressive_and_excluded(self):
        lam = local_load_factors([-1.0, 2.0, 1.0], [3.0, 3.0, 3.0], exclude=[1])
        assert lam[0] == math.inf and lam[1] == math.inf and lam[2] == 3.0

    @given(st.integers(0, 2**31 - 1))
    def test_brute_force(self, seed):
        r = np.random.default_rng(seed)
        sig = r.normal(size=20)
        s = r.uniform(0.1, 3.0, size=20)
        lam = local_load_factors(sig, s)
        for j in range(20):
            assert lam[j] == (s[j] / sig[j] if sig[j] > 0 else math.inf)


@pytest.fixture(scope="module")
def trace(beam10, concrete, experiment10):
    return run_inverse(beam10, concrete, experiment10, IdentConfig())


class TestRoundTrip:
    def test_tensile_strength(self, trace):
        assert trace.f_t == pytest.approx(F_T, rel=0.02)

    def test_first_reduction(self, trace):
        first = trace.events[0]
        assert first.case == "A" and first.ts_point
        assert trace.delta_sigma == pytest.approx(0.01 * trace.f_t, rel=1e-15)
        assert first.k / first.k_prev == pytest.approx(0.99, rel=1e-12)

    def test_invariants(self, trace):
        assert trace_violations(trace, E) == []

    def test_case_a_points_lie_on_curve_case_b_between(self, trace, experiment10):
        pts = np.array([(e.control, e.response) for e in trace.events])
        dev = ray_deviation(pts, experiment10.points(), experiment10.scale) / experiment10.control.max()
        is_a = np.array([e.case == "A" for e in trace.events])
        assert dev[is_a].max() <= 1e-9
        assert dev[~is_a].max() > 1e-6  # some Case B states sit off the measured curve

    def test_termination_closes_curve(self, trace):
        assert trace.reason == "ts_complete" and trace.complete
        last = trace.events[-1]
        assert last.case == "A" and last.sigma <= trace.delta_sigma
        assert last.k == pytest.approx(RESIDUAL_STIFFNESS_RATIO * E)
        assert trace.ts.sigma[-1] == 0.0
        assert trace.ts.tensile_strength == trace.events[0].sigma  # stress at crack initiation

    def test_truncated_curve_is_incomplete_lower_bound(self, beam10, concrete, experiment10, trace):
        c = experiment10.control
        peak_s = experiment10.arc_length[int(np.argmax(c))]
        cut = peak_s + 0.6 * (trace.cursor - peak_s)  # stop before the pass would complete
        short = run_inverse(beam10, concrete, experiment10.truncated(cut), IdentConfig())
        assert short.reason == "curve_exhausted" and not short.complete
        assert 0.0 < short.fracture_energy < trace.fracture_energy

    def test_coarse_decrement_floors_instead_of_undershooting(self, beam10, concrete, experiment10):
        tr = run_inverse(beam10, concrete, experiment10, IdentConfig(delta_sigma=0.05))
        assert tr.complete
        assert trace_violations(tr, E) == []

    def test_deterministic(self, beam10, concrete, experiment10, trace):
        again = run_inverse(beam10, concrete, experiment10, IdentConfig())
        assert again.events == trace.events

    def test_spd_at_every_event(self, beam10, concrete, experiment10):
        cfg = IdentConfig(max_events=300)
        L = 2.0 * experiment10.control.max()
        sys_ = InterfaceSystem(beam10, concrete, load_scale=L / 1e5)
        tr = run_inverse(beam10, concrete, experiment10, cfg, system=sys_)
        assert len(tr.events) == 300
        # every event needs at least one Cholesky factorization; a failure raises
        assert sys_.factorizations >= len(tr.events)

    def test_summary(self, trace):
        (row,) = summarize([trace])
        assert row["pass"] == 1 and row["complete"] and row["reason"] == "ts_complete"
        assert row["G_F"] == pytest.approx(fracture_energy(trace.ts))


class TestLimits:
    def test_model_too_stiff(self, beam10, experiment10):
        with pytest.raises(ModelTooStiffError, match="equal or less than the measured stiffness"):
            run_inverse(beam10, Material.isotropic(2.0 * E, NU), experiment10, IdentConfig())
        assert "equal or less than the measured stiffness" in STIFFNESS_LIMIT_MESSAGE

    def test_reference_load_must_exceed_peak(self, beam10, concrete, experiment10):
        with pytest.raises(IdentificationError, match="must exceed"):
            run_inverse(beam10, concrete, experiment10, IdentConfig(reference_load=experiment10.control.max()))

    def test_unreachable_state(self, plate):
        mat = Material.isotropic(E, NU)
        # softening, then a stiffening branch that climbs back above the secant
        curve = plate_curve(plate, mat, [(0.95, 1.5), (0.9, 2.0), (3.0, 2.2)])
        with pytest.raises(UnreachableStateError, match="unreachable experimental state"):
            run_inverse(plate, mat, curve, IdentConfig())

    def test_tied_lead_is_seeded(self, plate):
        mat = Material.isotropic(E, 0.0)
        curve = plate_curve(plate, mat, [(0.9, 3.0), (0.5, 10.0)])
        leads = {run_inverse(plate, mat, curve, IdentConfig(max_events=1, seed=s)).lead_ips[0] for s in range(16)}
        assert len(leads) > 1
        a = run_inverse(plate, mat, curve, IdentConfig(max_events=1, seed=5)).lead_ips
        b = run_inverse(plate, mat, curve, IdentConfig(max_events=1, seed=5)).lead_ips
        assert a == b

    @pytest.mark.parametrize("kw", [dict(delta_sigma=0.0), dict(delta_sigma=1.5), dict(reference_load=-1.0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            IdentConfig(**kw)


class TestYoungModulus:
    def test_recovers_elastic_slope(self, beam10, concrete):
        sys_ = InterfaceSystem(beam10, concrete)
        resp = sys_.response(np.full(beam10.n_ips, sys_.k0))
        curve = LoadingCurve([0.0, resp.control, 2 * resp.control], [0.0, resp.response, 2 * resp.response])
        guess = Material.isotropic(20000.0, NU)
        assert fit_young_modulus(beam10, guess, curve, n_initial=2) == pytest.approx(E * (1 - 1e-3), rel=1e-8)  # condensed-solve accuracy


class TestMultipass:
    def test_single_pass_when_curve_ends_at_completion(self, beam10, concrete, experiment10):
        first = run_inverse(beam10, concrete, experiment10, IdentConfig())
        short = experiment10.truncated(first.cursor)
        traces = run_multipass(beam10, concrete, short, IdentConfig(), max_passes=3)
        assert len(traces) == 1 and traces[0].complete

    def test_replay_laws_follow_owner(self):
        ts = TSCurve([0.0, 0.05], [3.0, 0.0], "identified")

        class T:
            def __init__(self, p, assigned):
                self.pass_index, self.ts, self.delta_sigma, self.assigned = p, ts, 0.03, assigned
                self.complete = True

        laws = replay_laws(4, [T(1, {}), T(2, {0: 1, 3: 1})], 3e4)
        assert laws[0] is laws[3] and laws[1] is laws[2]
        ref = sawtooth_from_ts(ts, "decrement", 0.03, k0=3e4)
        np.testing.assert_array_equal(laws[0].stiffness, ref.stiffness)
        np.testing.assert_array_equal(laws[0].strength, ref.strength)


class TestRayDeviation:
    def test_points_on_and_off_polyline(self):
        poly = np.array([[0.0, 0.0], [10.0, 1.0], [5.0, 2.0]])
        pts = np.array([[5.0, 0.5], [11.0, 1.1], [7.5, 1.5]])
        dev = ray_deviation(pts, poly)
        assert dev[0] == pytest.approx(0.0, abs=1e-12)
        assert dev[1] == pytest.approx(1.0, rel=1e-12)  # ray back to (10, 1)
        assert dev[2] == pytest.approx(0.0, abs=1e-12)

    def test_missing_ray(self):
        poly = np.array([[5.0, 0.0], [10.0, 1.0]])
        assert ray_deviation(np.array([[1.0, 5.0]]), poly)[0] == math.inf


def test_default_penalties_follow_modulus(concrete):
    k0, g0 = default_penalties(concrete)
    assert (k0, g0) == (E, 1e4 * E)
