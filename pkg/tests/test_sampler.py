"""Trajectory sampler: forces, paths, smoothing, speed profiles, pipeline."""
import math
from dataclasses import replace

import numpy as np
import pytest

from smirl import dynamics, sampler
from smirl.errors import (InfeasibleProfileError, ParameterError,
                          SmoothingError)
from smirl.geometry import segment_polygon_intersects
from smirl.sampler import (ElasticNode, PathCandidate, compose_trajectory,
                           conflict_crossing_time, decision_windows,
                           enumerate_decisions, generate_sample_set,
                           generate_samples_detailed, node_force,
                           profile_respects_limits, sample_paths,
                           sample_speed_profiles, smooth_path,
                           suggested_speed_profile)
from smirl.types import (Demonstration, ReferencePath, SamplerConfig,
                         Scenario, State, Trajectory)

from conftest import make_straight_trajectory


def box(x0, y0, w, h):
    return np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]])


@pytest.fixture
def cfg():
    return SamplerConfig(k_samples=40)


class TestNodeForce:
    def test_centered_collinear_is_zero(self, straight_scenario, cfg):
        node = ElasticNode(position=np.array([10.0, 0.0]),
                           prev_position=np.array([5.0, 0.0]),
                           next_position=np.array([15.0, 0.0]))
        assert node_force(node, straight_scenario, cfg) == 0.0

    def test_lateral_offset_attraction(self, straight_scenario, cfg):
        # collinear nodes displaced laterally: only attraction remains
        delta = 1.2
        node = ElasticNode(position=np.array([10.0, delta]),
                           prev_position=np.array([5.0, delta]),
                           next_position=np.array([15.0, delta]))
        got = node_force(node, straight_scenario, cfg)
        assert got == pytest.approx(cfg.w_attract * cfg.k_att * delta,
                                    abs=1e-12)

    def test_obstacle_increases_force(self, straight_scenario, cfg):
        node = ElasticNode(position=np.array([10.0, 0.0]),
                           prev_position=np.array([5.0, 0.0]),
                           next_position=np.array([15.0, 0.0]))
        free = node_force(node, straight_scenario, cfg)
        sc = replace(straight_scenario, obstacles=(box(9.0, 2.0, 2.0, 2.0),))
        near = node_force(node, sc, cfg)
        assert near > free


class TestSamplePaths:
    def test_free_straight_contains_centerline(self, straight_scenario, cfg):
        start = (np.array([0.0, 0.0]), 0.0)
        paths = sample_paths(straight_scenario, start, np.array([40.0, 0.0]),
                             cfg)
        assert paths
        lateral = [np.max(np.abs(p.points[:, 1])) for p in paths]
        assert min(lateral) < 1e-9  # the zero-offset path is present
        assert all(p.collision_free for p in paths)

    def test_blocked_center_avoids_obstacle(self, straight_scenario, cfg):
        # intrudes from the left up to the centerline: the zero-offset
        # path is blocked by the footprint radius, the right side is open
        obstacle = box(18.0, 0.0, 3.0, 1.2)
        sc = replace(straight_scenario, obstacles=(obstacle,))
        paths = sample_paths(sc, (np.array([0.0, 0.0]), 0.0),
                             np.array([40.0, 0.0]), cfg)
        assert paths
        for p in paths:
            pts = p.points
            for a, b in zip(pts[:-1], pts[1:]):
                assert not segment_polygon_intersects(a, b, obstacle)

    def test_zero_threshold_generic_data_empty(self, straight_scenario):
        cfg0 = SamplerConfig(f_threshold=0.0)
        # off-center start: attraction never balances exactly
        paths = sample_paths(straight_scenario, (np.array([0.0, 0.4]), 0.0),
                             np.array([40.0, 0.0]), cfg0)
        assert paths == []

    def test_goal_behind_start_rejected(self, straight_scenario, cfg):
        with pytest.raises(ParameterError):
            sample_paths(straight_scenario, (np.array([40.0, 0.0]), 0.0),
                         np.array([0.0, 0.0]), cfg)


class TestSmoothPath:
    def test_straight_stays_straight(self, cfg, vp):
        path = PathCandidate(points=np.array([[0.0, 0.0], [40.0, 0.0]]))
        out = smooth_path(path, State(0, 0, 0, 8.0), cfg, vp,
                          tracking_speed=8.0)
        assert np.max(np.abs(out.points[:, 1])) < 1e-9
        assert np.max(out.curvatures()) < 1e-12

    def test_corner_bounded_curvature(self, cfg, vp):
        path = PathCandidate(points=np.array([[0.0, 0.0], [25.0, 0.0],
                                              [25.0, 25.0]]))
        out = smooth_path(path, State(0, 0, 0, 6.0), cfg, vp,
                          tracking_speed=6.0)
        assert np.max(out.curvatures()) <= vp.kappa_max + 1e-9
        assert np.hypot(*(out.points[-1] - path.points[-1])) \
            <= cfg.goal_tolerance

    def test_single_point_rejected(self, cfg, vp):
        with pytest.raises((ParameterError, ValueError)):
            smooth_path(PathCandidate(points=np.array([[0.0, 0.0]])),
                        State(0, 0, 0, 5.0), cfg, vp)

    def test_unreachable_goal_raises(self, cfg, vp):
        # goal directly behind the start: tracker runs out of arc budget
        path = PathCandidate(points=np.array([[0.0, 0.0], [-10.0, 0.0]]))
        with pytest.raises(SmoothingError):
            smooth_path(path, State(0, 0, 0, 5.0), cfg, vp,
                        tracking_speed=5.0)


def dp_speed_oracle(s, cap, v0, a_max, a_min, n_speed=400):
    """Exhaustive reachability DP over a dense speed grid.

    Returns the per-station maximum speed reachable forward from v0 and
    backward-safe under the braking limit; the pointwise-maximal profile.
    """
    v_hi = cap.max()
    grid = np.linspace(0.0, v_hi, n_speed)
    ds = np.diff(s)
    reach = [grid[grid <= min(v0, cap[0])] if v0 <= cap[0] else np.array([v0])]
    reach[0] = np.array([v0])
    for i, d in enumerate(ds):
        prev = reach[-1]
        nxt = []
        for v in grid:
            if v > cap[i + 1]:
                continue
            lo2 = v * v - 2 * a_max * d      # needs prev^2 >= this
            hi2 = v * v + 2 * abs(a_min) * d  # and prev^2 <= this
            p2 = prev * prev
            if np.any((p2 >= lo2 - 1e-12) & (p2 <= hi2 + 1e-12)):
                nxt.append(v)
        reach.append(np.array(nxt))
    # backward prune: keep speeds from which the rest stays reachable
    for i in range(len(reach) - 2, -1, -1):
        keep = []
        nxt2 = reach[i + 1] ** 2
        for v in reach[i]:
            lo2 = v * v - 2 * abs(a_min) * ds[i]
            hi2 = v * v + 2 * a_max * ds[i]
            if np.any((nxt2 >= lo2 - 1e-12) & (nxt2 <= hi2 + 1e-12)):
                keep.append(v)
        reach[i] = np.array(keep)
    return np.array([r.max() if r.size else np.nan for r in reach])


class TestSuggestedSpeedProfile:
    def test_straight_at_limit_constant(self, cfg):
        path = PathCandidate(points=np.array([[0.0, 0.0], [60.0, 0.0]]))
        prof = suggested_speed_profile(path, 10.0, None, cfg, v_limit=10.0)
        np.testing.assert_allclose(prof.v_of_t, 10.0, atol=1e-9)

    def test_tight_arc_caps_speed(self, cfg):
        r = 15.0
        ang = np.linspace(0, np.pi / 2, 40)
        pts = np.stack([r * np.sin(ang), r * (1 - np.cos(ang))], axis=1)
        entry = np.stack([np.linspace(-20, -1, 10), np.zeros(10)], axis=1)
        path = PathCandidate(points=np.vstack([entry, pts]))
        prof = suggested_speed_profile(path, 8.0, None, cfg, v_limit=20.0)
        v_cap_arc = math.sqrt(cfg.a_lat_max * r)
        assert prof.v_of_t.min() <= v_cap_arc + 0.1
        assert profile_respects_limits(prof, cfg, tol=1e-6)

    def test_accelerates_at_amax_from_rest(self, cfg):
        path = PathCandidate(points=np.array([[0.0, 0.0], [80.0, 0.0]]))
        prof = suggested_speed_profile(path, 0.0, None, cfg, v_limit=30.0)
        a = np.diff(prof.v_of_t) / prof.dt
        # free straight: accelerate at a_max until the limit binds
        assert np.all(a[:5] == pytest.approx(cfg.a_max, abs=1e-9))

    def test_matches_dp_oracle(self, cfg):
        rng = np.random.default_rng(5)
        s = np.cumsum(np.concatenate([[0.0], rng.uniform(1.5, 2.5, 25)]))
        cap = rng.uniform(4.0, 12.0, len(s))
        cap[0] = max(cap[0], 6.0)
        path = PathCandidate(points=np.stack([s, np.zeros_like(s)], axis=1))
        prof = suggested_speed_profile(path, 6.0, None, cfg, v_limit=30.0)
        # evaluate our v(s) at the stations via the exact fw/bw pass value
        v_ours = sampler._forward_backward(6.0, None, s, np.minimum(cap, 30.0),
                                           cfg)
        v_dp = dp_speed_oracle(s, np.minimum(cap, 30.0), 6.0, cfg.a_max,
                               cfg.a_min)
        # our pass is pointwise maximal up to the oracle's grid resolution
        np.testing.assert_array_less(v_dp - 0.05, v_ours + 1e-9)
        np.testing.assert_array_less(v_ours - 0.05, v_dp + 0.05)

    def test_infeasible_initial_speed(self, cfg):
        r = 5.0
        ang = np.linspace(0, np.pi / 2, 30)
        pts = np.stack([r * np.sin(ang), r * (1 - np.cos(ang))], axis=1)
        path = PathCandidate(points=pts)
        with pytest.raises(InfeasibleProfileError):
            suggested_speed_profile(path, 15.0, None, cfg, v_limit=20.0)


class TestSampleSpeedProfiles:
    def _suggested(self, cfg):
        path = PathCandidate(points=np.array([[0.0, 0.0], [50.0, 0.0]]))
        return suggested_speed_profile(path, 7.0, None, cfg, v_limit=10.0)

    def test_identity_grid_returns_suggested(self, cfg):
        sugg = self._suggested(cfg)
        out = sample_speed_profiles(sugg, cfg, time_factors=[1.0],
                                    speed_offsets=[0.0])
        assert out == [sugg]

    def test_unreachable_terminal_speed_absent(self, cfg):
        # dropping ~10 m/s at the very end needs deceleration beyond a_min
        sugg = self._suggested(cfg)
        out = sample_speed_profiles(sugg, cfg, time_factors=[1.0],
                                    speed_offsets=[0.0, -30.0])
        assert out == [sugg]

    def test_three_by_three_grid_boundary_conditions(self, cfg):
        sugg = self._suggested(cfg)
        out = sample_speed_profiles(sugg, cfg,
                                    time_factors=[1.0, 1.1, 1.25],
                                    speed_offsets=[-2.0, -1.0, 0.0])
        assert len(out) == 9
        for prof in out:
            assert prof.s_of_t[0] == pytest.approx(0.0, abs=1e-9)
            assert prof.v_of_t[0] == pytest.approx(7.0, abs=1e-9)
            assert profile_respects_limits(prof, cfg, tol=1e-6)


class TestDecisions:
    def _id_scenario(self, other_y0=20.0, v_other=5.0, n=60):
        ref = ReferencePath(vertices=np.array([[-40.0, 0.0], [60.0, 0.0]]))
        other = Trajectory(dt=0.1, x=np.full(n, 10.0),
                           y=other_y0 - v_other * 0.1 * np.arange(n),
                           psi=np.full(n, -np.pi / 2), v=np.full(n, v_other))
        return Scenario(reference_paths=(ref,), other_agent=other,
                        conflict_point=np.array([10.0, 0.0]))

    def test_nid_has_none(self, straight_scenario):
        assert enumerate_decisions(straight_scenario) == ["none"]

    def test_id_has_yield_and_pass(self):
        sc = self._id_scenario()
        assert enumerate_decisions(sc) == ["yield", "pass"]
        t_cross = conflict_crossing_time(sc)
        assert t_cross == pytest.approx(20.0 / 5.0, abs=1e-6)

    def test_other_already_past_leaves_pass_only(self):
        sc = self._id_scenario(other_y0=-5.0)
        assert enumerate_decisions(sc) == ["pass"]

    def test_windows_carry_margin(self):
        sc = self._id_scenario()
        cfg = SamplerConfig(decision_margin=0.5)
        wins = decision_windows(sc, cfg)
        assert wins[0] == ("yield", pytest.approx(4.5), None)
        assert wins[1] == ("pass", None, pytest.approx(3.5))


class TestGenerateSampleSet:
    def test_free_straight_properties(self, straight_demo, cfg, vp):
        ss = generate_sample_set(straight_demo, cfg, vp)
        assert ss.size >= 2
        assert ss.demo is straight_demo.ego
        s0 = straight_demo.ego.initial_state
        for m in ss.members:
            assert (m.x[0], m.y[0], m.psi[0], m.v[0]) == \
                (s0.x, s0.y, s0.psi, s0.v)
            assert dynamics.check_feasible(m, vp, tol=0.05)
        goal = straight_demo.ego.terminal_state.position
        for m in ss.members:
            assert np.hypot(m.x[-1] - goal[0], m.y[-1] - goal[1]) \
                <= cfg.goal_tolerance

    def test_demo_is_member_of_own_set(self, straight_demo, cfg, vp):
        ss = generate_sample_set(straight_demo, cfg, vp)
        assert ss.members[ss.demo_index] == straight_demo.ego
        assert ss.labels[ss.demo_index] == "demo"

    def test_id_set_has_both_decisions_when_feasible(self, vp):
        ref = ReferencePath(vertices=np.array([[-40.0, 0.0], [60.0, 0.0]]))
        n = 120
        other = Trajectory(dt=0.1, x=np.full(n, 12.0),
                           y=25.0 - 6.0 * 0.1 * np.arange(n),
                           psi=np.full(n, -np.pi / 2), v=np.full(n, 6.0))
        sc = Scenario(reference_paths=(ref,), other_agent=other,
                      conflict_point=np.array([12.0, 0.0]), v_desired=12.0)
        # ego 18 m out at 8 m/s: can beat the 4.2 s crossing or wait it out
        ego = make_straight_trajectory(n=45, v=8.0)
        ego = Trajectory(dt=0.1, x=ego.x - 6.0, y=ego.y, psi=ego.psi, v=ego.v)
        d = Demonstration(ego=ego, scenario=sc, id="id0")
        cfg = SamplerConfig(k_samples=120)
        ss = generate_sample_set(d, cfg, vp)
        labels = set(ss.labels)
        assert "yield" in labels and "pass" in labels

    def test_deterministic(self, straight_demo, cfg, vp):
        a = generate_sample_set(straight_demo, cfg, vp)
        b = generate_sample_set(straight_demo, cfg, vp)
        assert a.size == b.size
        assert all(x == y for x, y in zip(a.members, b.members))
        assert a.labels == b.labels

    def test_safety_no_swept_volume_contact(self, straight_scenario, cfg, vp):
        sc = replace(straight_scenario, obstacles=(box(14.0, 0.0, 3.0, 1.2),))
        demo = make_straight_trajectory()
        # demo itself would clip the obstacle; samples must not
        d = Demonstration(ego=demo, scenario=sc, id="obs")
        ss, details = generate_samples_detailed(d, cfg, vp)
        assert details
        polys = sampler.swept_obstacles(sc, cfg)
        for det in details:
            assert not sampler.trajectory_collides(det.trajectory, polys,
                                                   cfg.vehicle_radius)
            assert profile_respects_limits(det.profile, cfg, tol=1e-6)
