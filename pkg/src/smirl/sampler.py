"""Feasible spatiotemporal trajectory sampling around a demonstration.

Per demonstration the sampler runs three stages:

  I.   Discrete elastic-band path sampling: lateral candidates on a
       (station, offset) lattice along the reference path are filtered by a
       weighted node force (contraction + repulsion + attraction), edges by
       collision checks, and depth-first graph search enumerates the
       collision-free paths.
  II.  Path smoothing: a pure-pursuit tracking controller drives the
       kinematic bicycle along each piecewise-linear path; its trace is the
       smoothed, curvature-bounded path.
  III. Speed sampling: a time-optimal speed plan (forward-backward pass
       under acceleration and lateral-acceleration limits) suggests one
       profile per driving decision (yield/pass against an interacting
       vehicle), and cubic polynomials in s(t) explore its neighborhood.

Every output shares the demonstration's initial state exactly and ends
within the goal tolerance of its terminal position; the demonstration is
appended as a member of its own sample set. The pipeline is deterministic:
lattices and grids are fixed by the config, so equal inputs give equal sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import dynamics, features
from .errors import (InfeasibleProfileError, ParameterError, SamplingError,
                     SmoothingError)
from .geometry import (Polyline, convex_hull, disc_polygon,
                       menger_curvature_batch, points_polygon_distance,
                       point_polygon_distance, closest_polygon_point,
                       segment_polygon_distance, wrap_angle)
from .types import (DEFAULT_DT, Demonstration, SampleSet, SamplerConfig,
                    Scenario, State, Trajectory)

_MAX_EXPANSIONS = 20000   # lattice search budget
_MAX_STATIONS = 40
_YIELD_SPEED_FLOOR = 0.5  # m/s lowest crawl speed tried when delaying
_MAX_PROFILE_TIME = 60.0  # s sanity cap on any speed profile


@dataclass
class ElasticNode:
    """Lattice node with its IN/OUT edge endpoints and evaluated force."""

    position: np.ndarray
    prev_position: np.ndarray  # tail of the IN edge
    next_position: np.ndarray  # head of the OUT edge
    force: float = float("nan")


@dataclass
class PathCandidate:
    """Piecewise-linear path with arc-length parameterization."""

    points: np.ndarray
    collision_free: bool = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self._polyline = None

    @property
    def polyline(self) -> Polyline:
        if self._polyline is None:
            self._polyline = Polyline(self.points)
        return self._polyline

    @property
    def s(self) -> np.ndarray:
        return self.polyline.cum_s

    def curvatures(self) -> np.ndarray:
        """Unsigned curvature per vertex (circumradius of neighbors)."""
        pts = self.polyline.points
        kappa = np.zeros(len(pts))
        if len(pts) >= 3:
            kappa[1:-1] = menger_curvature_batch(pts[:-2], pts[1:-1], pts[2:])
        return kappa


@dataclass
class SpeedProfile:
    """Arc length and speed against time at period dt, plus its caps."""

    dt: float
    s_of_t: np.ndarray
    v_of_t: np.ndarray
    decision_label: str = "none"
    s_grid: Optional[np.ndarray] = None   # path arc stations of the caps
    v_cap: Optional[np.ndarray] = None    # speed cap at s_grid
    total_length: float = 0.0
    t_total_raw: float = 0.0              # un-gridded terminal time
    conflict_s: Optional[float] = None
    arrival_min: Optional[float] = None
    arrival_max: Optional[float] = None

    @property
    def duration(self) -> float:
        return (len(self.s_of_t) - 1) * self.dt

    @property
    def terminal_speed(self) -> float:
        return float(self.v_of_t[-1])

    def cap_at(self, s) -> np.ndarray:
        # interpolate in squared-speed space: v^2 is linear in arc length
        # under constant acceleration, so riding the cap stays within it
        return np.sqrt(np.interp(s, self.s_grid, self.v_cap ** 2))

    def arrival_time(self, s_target: float) -> float:
        """First time the profile reaches arc length s_target."""
        s = self.s_of_t
        if s_target <= s[0]:
            return 0.0
        if s_target > s[-1]:
            return float("inf")
        i = int(np.searchsorted(s, s_target, side="left"))
        if s[i] == s_target or s[i] == s[i - 1]:
            return i * self.dt
        frac = (s_target - s[i - 1]) / (s[i] - s[i - 1])
        return (i - 1 + frac) * self.dt


@dataclass
class SampleDetail:
    """One generated sample with the path and profile that produced it."""

    trajectory: Trajectory
    path: PathCandidate
    profile: SpeedProfile
    label: str


# ---------------------------------------------------------------------------
# collision machinery

def swept_obstacles(scenario: Scenario, cfg: SamplerConfig) -> list:
    """Static polygons plus the other agent's predicted swept footprint.

    The moving agent occupies the convex hull of its footprint discs at the
    start and at tau_predict ahead, under constant-velocity prediction.
    """
    polys = list(scenario.static_polygons())
    other = scenario.other_agent
    if other is not None:
        p0 = np.array([other.x[0], other.y[0]])
        vel = other.v[0] * np.array([np.cos(other.psi[0]), np.sin(other.psi[0])])
        p1 = p0 + vel * cfg.tau_predict
        r = cfg.vehicle_radius
        pts = np.vstack([disc_polygon(p0, r, 12), disc_polygon(p1, r, 12)])
        polys.append(convex_hull(pts))
    return polys


def _segment_blocked(p0, p1, polys, radius: float) -> bool:
    return any(segment_polygon_distance(p0, p1, poly) < radius for poly in polys)


def trajectory_collides(traj: Trajectory, polys, radius: float) -> bool:
    """Footprint-disc collision check of every state (plus chord midpoints)."""
    if not polys:
        return False
    pos = traj.positions
    mids = 0.5 * (pos[:-1] + pos[1:])
    pts = np.vstack([pos, mids])
    for poly in polys:
        if np.any(points_polygon_distance(poly, pts) < radius):
            return True
    return False


# ---------------------------------------------------------------------------
# Step I: elastic-band path sampling

def node_force(node: ElasticNode, scenario: Scenario, cfg: SamplerConfig,
               polys=None) -> float:
    """Weighted sum of contraction, repulsion and attraction magnitudes.

    Contraction is the discrete Laplacian toward the neighbors, repulsion a
    bounded-support inverse-distance field from the obstacle swept volumes,
    attraction a linear spring to the nearest reference-path point.
    """
    if polys is None:
        polys = swept_obstacles(scenario, cfg)
    p = np.asarray(node.position, dtype=float)
    f_contract = (node.prev_position - p) + (node.next_position - p)
    f_rep = np.zeros(2)
    for poly in polys:
        d = point_polygon_distance(poly, p)
        if d <= 1e-9:
            return float("inf")
        if d < cfg.d_influence:
            away = p - closest_polygon_point(poly, p)
            nrm = np.hypot(*away)
            if nrm > 1e-12:
                f_rep += cfg.k_rep * (1.0 / d - 1.0 / cfg.d_influence) * away / nrm
    ref = scenario.main_path.polyline
    s_ref, _, _ = ref.project(p)
    f_att = cfg.k_att * (ref.point_at(s_ref) - p)
    force = (cfg.w_contract * float(np.hypot(*f_contract))
             + cfg.w_repel * float(np.hypot(*f_rep))
             + cfg.w_attract * float(np.hypot(*f_att)))
    node.force = force
    return force


def sample_paths(scenario: Scenario, start, goal,
                 cfg: SamplerConfig) -> List[PathCandidate]:
    """Collision-free lattice paths from start to goal along the lane.

    start: ((x, y), heading); goal: (x, y). Nodes under the force threshold
    and collision-free edges survive; depth-first search over the
    (station, offset) lattice enumerates up to cfg.max_paths paths,
    preferring small lateral offsets. No feasible path gives an empty list.
    """
    start_pt = np.asarray(start[0], dtype=float)
    start_psi = float(start[1])
    goal_pt = np.asarray(goal, dtype=float)
    ref = scenario.main_path.polyline
    s0, _, d_start = ref.project(start_pt)
    s1, _, _ = ref.project(goal_pt)
    if s1 - s0 < 1e-6:
        raise ParameterError("goal does not lie ahead of start on the "
                             "reference path")
    if d_start > scenario.main_path.lane_width * 2.0:
        raise ParameterError("start is far off the reference path")
    polys = swept_obstacles(scenario, cfg)
    radius = cfg.vehicle_radius

    # stations spread evenly so collinear center nodes carry zero
    # contraction force regardless of the start/goal arc distance
    n_mid = min(max(int(round((s1 - s0) / cfg.node_spacing)) - 1, 0),
                _MAX_STATIONS)
    spacing = (s1 - s0) / (n_mid + 1)
    stations = [s0 + (j + 1) * spacing for j in range(n_mid)]

    offsets = sorted(cfg.lateral_offsets, key=lambda o: (abs(o), o))
    offset_by_rank = list(offsets)
    # candidate points per station, in preference order
    cand = []
    for s in stations:
        c = ref.point_at(s)
        nrm = ref.normal_at(s)
        cand.append([c + off * nrm for off in offset_by_rank])

    if not stations:
        # short hop: single edge start -> goal
        if _segment_blocked(start_pt, goal_pt, polys, radius):
            return []
        return [PathCandidate(points=np.vstack([start_pt, goal_pt]))]

    # sorted-index neighbors: transitions limited to adjacent offset ranks
    sorted_vals = sorted(offset_by_rank)
    rank_sorted_pos = {i: sorted_vals.index(offset_by_rank[i])
                       for i in range(len(offset_by_rank))}

    results: List[PathCandidate] = []
    force_memo = {}
    edge_memo = {}
    expansions = 0

    def edge_free(key, p, q) -> bool:
        hit = edge_memo.get(key)
        if hit is None:
            hit = not _segment_blocked(p, q, polys, radius)
            edge_memo[key] = hit
        return hit

    def force_ok(k: int, i_prev: int, i_cur: int, nxt_pt) -> bool:
        key = (k, i_prev, i_cur, tuple(np.round(nxt_pt, 6)))
        val = force_memo.get(key)
        if val is None:
            prev_pt = start_pt if k == 0 else cand[k - 1][i_prev]
            node = ElasticNode(position=cand[k][i_cur], prev_position=prev_pt,
                               next_position=np.asarray(nxt_pt, dtype=float))
            val = node_force(node, scenario, cfg, polys=polys)
            force_memo[key] = val
        return val <= cfg.f_threshold

    n_st = len(stations)

    def dfs(k: int, i_prev: int, i_cur: int, chain: list):
        nonlocal expansions
        if len(results) >= cfg.max_paths or expansions > _MAX_EXPANSIONS:
            return
        expansions += 1
        if k == n_st - 1:
            # close with the goal node
            if force_ok(k, i_prev, i_cur, goal_pt) and \
                    edge_free((k, i_cur, "goal"), cand[k][i_cur], goal_pt):
                pts = np.vstack([start_pt] + [cand[j][c] for j, c in
                                              enumerate(chain)] + [goal_pt])
                results.append(PathCandidate(points=pts))
            return
        pos_cur = rank_sorted_pos[i_cur]
        for i_nxt in range(len(offset_by_rank)):
            if abs(rank_sorted_pos[i_nxt] - pos_cur) > 1:
                continue
            nxt_pt = cand[k + 1][i_nxt]
            if not force_ok(k, i_prev, i_cur, nxt_pt):
                continue
            if not edge_free((k, i_cur, i_nxt), cand[k][i_cur], nxt_pt):
                continue
            dfs(k + 1, i_cur, i_nxt, chain + [i_nxt])
            if len(results) >= cfg.max_paths:
                return

    heading_vec = np.array([np.cos(start_psi), np.sin(start_psi)])
    for i0 in range(len(offset_by_rank)):
        first_pt = cand[0][i0]
        to_first = first_pt - start_pt
        nrm = np.hypot(*to_first)
        if nrm > 1e-9 and float(to_first @ heading_vec) / nrm < 0.25:
            continue  # candidate behind or sharply sideways
        if not edge_free(("start", i0), start_pt, first_pt):
            continue
        dfs(0, -1, i0, [i0])
        if len(results) >= cfg.max_paths:
            break
    return results


# ---------------------------------------------------------------------------
# Step II: pure-pursuit smoothing

def smooth_path(path: PathCandidate, start_state: State, cfg: SamplerConfig,
                vp: dynamics.VehicleParams, tracking_speed: Optional[float] = None,
                dt: float = DEFAULT_DT) -> PathCandidate:
    """Trace of the kinematic bicycle tracking the path with pure pursuit.

    The trace starts at start_state's position and heading, runs at a
    constant nominal tracking speed, and stops once the projection reaches
    the end of the input path. Raises SmoothingError when the tracker has
    not reached the goal within twice the input arc length.
    """
    if len(np.atleast_2d(path.points)) < 2:
        raise ParameterError("path needs at least 2 points to smooth")
    pl = path.polyline
    v_track = tracking_speed if tracking_speed is not None \
        else max(start_state.v, 2.0)
    v_track = max(float(v_track), 0.5)
    goal_pt = pl.points[-1]
    step_len = v_track * dt
    max_steps = int(math.ceil(2.0 * pl.length / step_len)) + 10

    x, y, psi = start_state.x, start_state.y, start_state.psi
    pts = [(x, y)]
    end_eps = max(0.45 * step_len, 0.05)
    for _ in range(max_steps):
        s_here, _, _ = pl.project(np.array([x, y]))
        if s_here >= pl.length - end_eps:
            break
        target = pl.point_at(s_here + cfg.lookahead)
        dxy = target - np.array([x, y])
        dist = float(np.hypot(*dxy))
        alpha = wrap_angle(math.atan2(dxy[1], dxy[0]) - psi)
        kappa_cmd = 2.0 * math.sin(alpha) / max(dist, 0.1)
        delta = float(np.clip(math.atan(kappa_cmd * vp.wheelbase),
                              -vp.delta_max, vp.delta_max))
        x += v_track * math.cos(psi) * dt
        y += v_track * math.sin(psi) * dt
        psi = float(wrap_angle(psi + (v_track / vp.wheelbase)
                               * math.tan(delta) * dt))
        pts.append((x, y))
    else:
        raise SmoothingError("pure-pursuit tracker exceeded 2x input arc "
                             "length without reaching the goal")
    final = np.array(pts[-1])
    if float(np.hypot(*(final - goal_pt))) > cfg.goal_tolerance:
        raise SmoothingError("tracker stopped outside the goal tolerance")
    if len(pts) < 3:
        raise SmoothingError("smoothed path degenerated to fewer than 3 points")
    return PathCandidate(points=np.asarray(pts, dtype=float),
                         collision_free=path.collision_free)


# ---------------------------------------------------------------------------
# Step III: speed profiles

def _pooled_caps(path: PathCandidate, cfg: SamplerConfig,
                 v_limit: float) -> Tuple[np.ndarray, np.ndarray]:
    """Speed cap per path vertex from curvature max-pooled over +-1 spacing.

    Pooling guarantees the cap also holds at points interpolated between
    vertices, so profile samples never exceed the local lateral limit.
    """
    pl = path.polyline
    kappa = path.curvatures()
    s = pl.cum_s
    window = float(np.max(pl.seg_len)) * 1.001 if len(pl.seg_len) else 0.0
    pooled = np.empty_like(kappa)
    for i, si in enumerate(s):
        lo = np.searchsorted(s, si - window, side="left")
        hi = np.searchsorted(s, si + window, side="right")
        pooled[i] = kappa[lo:hi].max()
    with np.errstate(divide="ignore"):
        cap = np.sqrt(cfg.a_lat_max / np.maximum(pooled, 1e-9))
    return s, np.minimum(cap, v_limit)


def _forward_backward(v0: float, v_goal: Optional[float], s: np.ndarray,
                      cap: np.ndarray, cfg: SamplerConfig) -> np.ndarray:
    ds = np.diff(s)
    v = np.empty_like(cap)
    v[0] = v0
    for i in range(len(ds)):
        v[i + 1] = min(cap[i + 1], math.sqrt(v[i] ** 2 + 2.0 * cfg.a_max * ds[i]))
    if v_goal is not None:
        v[-1] = min(v[-1], v_goal)
    for i in range(len(ds) - 1, -1, -1):
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * abs(cfg.a_min) * ds[i]))
    return v


def _timeline(s: np.ndarray, v: np.ndarray):
    """Per-segment constant-acceleration timeline: (t_nodes, a_segs)."""
    ds = np.diff(s)
    a = (v[1:] ** 2 - v[:-1] ** 2) / (2.0 * ds)
    dt_seg = np.where(np.abs(a) > 1e-9, (v[1:] - v[:-1]) / np.where(a == 0, 1.0, a),
                      ds / np.maximum(0.5 * (v[1:] + v[:-1]), 1e-9))
    t = np.concatenate([[0.0], np.cumsum(dt_seg)])
    return t, a


def _arrival_on_timeline(s_nodes, v_nodes, t_nodes, a_segs, s_target: float) -> float:
    if s_target <= s_nodes[0]:
        return 0.0
    if s_target >= s_nodes[-1]:
        return float(t_nodes[-1])
    i = int(np.searchsorted(s_nodes, s_target, side="right")) - 1
    rem = s_target - s_nodes[i]
    vi, ai = v_nodes[i], a_segs[i]
    if abs(ai) < 1e-9:
        tau = rem / max(vi, 1e-9)
    else:
        disc = max(vi * vi + 2.0 * ai * rem, 0.0)
        tau = (math.sqrt(disc) - vi) / ai
    return float(t_nodes[i] + tau)


def _resample_timeline(s_nodes, v_nodes, t_nodes, a_segs, dt: float):
    total = float(t_nodes[-1])
    n = int(math.floor(total / dt + 1e-9))
    tj = np.arange(n + 1) * dt
    idx = np.clip(np.searchsorted(t_nodes, tj, side="right") - 1, 0,
                  len(a_segs) - 1)
    tau = tj - t_nodes[idx]
    v = v_nodes[idx] + a_segs[idx] * tau
    s = s_nodes[idx] + v_nodes[idx] * tau + 0.5 * a_segs[idx] * tau * tau
    return s, np.maximum(v, 0.0)


def suggested_speed_profile(path: PathCandidate, v0: float,
                            v_goal: Optional[float], cfg: SamplerConfig,
                            v_limit: float = float("inf"), dt: float = DEFAULT_DT,
                            decision_label: str = "none",
                            conflict_s: Optional[float] = None,
                            arrival_min: Optional[float] = None,
                            arrival_max: Optional[float] = None) -> SpeedProfile:
    """Time-optimal speed plan via a forward-backward pass.

    v(s) never exceeds min(v_limit, sqrt(a_lat_max/kappa)); accelerations
    stay within [a_min, a_max]. Optional arrival bounds at conflict_s
    implement yield (arrive no earlier than arrival_min, by capping speed
    before the conflict point) and pass (no later than arrival_max)
    decisions. Raises InfeasibleProfileError when boundary speeds or timing
    cannot be met.
    """
    if v0 < 0:
        raise ParameterError("v0 must be >= 0")
    s, cap = _pooled_caps(path, cfg, v_limit)
    if v0 > cap[0] + 1e-6:
        raise InfeasibleProfileError("initial speed exceeds the lateral "
                                     "acceleration limit at the start")

    def plan(cap_arr):
        v = _forward_backward(v0, v_goal, s, cap_arr, cfg)
        if v[0] < v0 - 1e-6:
            raise InfeasibleProfileError("cannot decelerate in time for "
                                         "downstream speed limits")
        t, a = _timeline(s, v)
        return v, t, a

    v, t, a = plan(cap)
    if conflict_s is not None and (arrival_min is not None or
                                   arrival_max is not None):
        arr = _arrival_on_timeline(s, v, t, a, conflict_s)
        if arrival_max is not None and arr > arrival_max + 1e-9:
            raise InfeasibleProfileError("cannot reach the conflict point "
                                         "before the pass window closes")
        if arrival_min is not None and arr < arrival_min - 1e-9:
            lo, hi = _YIELD_SPEED_FLOOR, float(cap.max())
            best = None
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                # hold the cap only past the distance needed to brake down
                # to it, so the anchored initial speed stays reachable
                brake = max(0.0, (v0 * v0 - mid * mid)
                            / (2.0 * 0.9 * abs(cfg.a_min)))
                capped = np.where((s >= brake) & (s <= conflict_s),
                                  np.minimum(cap, mid), cap)
                capped[0] = cap[0]
                try:
                    v_m, t_m, a_m = plan(capped)
                except InfeasibleProfileError:
                    lo = mid
                    continue
                if _arrival_on_timeline(s, v_m, t_m, a_m, conflict_s) >= arrival_min:
                    best = (v_m, t_m, a_m)
                    lo = mid
                else:
                    hi = mid
            if best is None:
                raise InfeasibleProfileError("cannot delay arrival enough "
                                             "to yield")
            v, t, a = best
    if t[-1] > _MAX_PROFILE_TIME:
        raise InfeasibleProfileError("speed profile exceeds the duration cap")
    s_of_t, v_of_t = _resample_timeline(s, v, t, a, dt)
    if len(s_of_t) < 3:
        raise InfeasibleProfileError("profile shorter than 3 samples")
    return SpeedProfile(dt=dt, s_of_t=s_of_t, v_of_t=v_of_t,
                        decision_label=decision_label, s_grid=s, v_cap=cap,
                        total_length=float(s[-1]), t_total_raw=float(t[-1]),
                        conflict_s=conflict_s, arrival_min=arrival_min,
                        arrival_max=arrival_max)


def _cubic_profile(suggested: SpeedProfile, t_final: float, v_final: float,
                   cfg: SamplerConfig) -> Optional[SpeedProfile]:
    """Cubic s(t) matching s(0)=0, ds(0)=v0, s(T)=S, ds(T)=v_final."""
    dt = suggested.dt
    v0 = float(suggested.v_of_t[0])
    total = suggested.total_length
    T = t_final
    if T < 2 * dt:
        return None
    c2 = (3.0 * (total - v0 * T) - T * (v_final - v0)) / (T * T)
    c3 = (T * (v_final - v0) - 2.0 * (total - v0 * T)) / (T * T * T)
    a0 = 2.0 * c2
    aT = 2.0 * c2 + 6.0 * c3 * T
    if not (cfg.a_min - 1e-9 <= a0 <= cfg.a_max + 1e-9):
        return None
    if not (cfg.a_min - 1e-9 <= aT <= cfg.a_max + 1e-9):
        return None
    # speed is a parabola; check its interior extremum for sign
    if abs(c3) > 1e-12:
        t_ext = -c2 / (3.0 * c3)
        if 0.0 < t_ext < T and v0 + 2.0 * c2 * t_ext + 3.0 * c3 * t_ext ** 2 < -1e-9:
            return None
    n = int(round(T / dt))
    tj = np.arange(n + 1) * dt
    s = v0 * tj + c2 * tj ** 2 + c3 * tj ** 3
    v = v0 + 2.0 * c2 * tj + 3.0 * c3 * tj ** 2
    if np.any(v < -1e-9):
        return None
    v = np.maximum(v, 0.0)
    if np.any(v > suggested.cap_at(s) + 1e-9):
        return None
    prof = SpeedProfile(dt=dt, s_of_t=s, v_of_t=v,
                        decision_label=suggested.decision_label,
                        s_grid=suggested.s_grid, v_cap=suggested.v_cap,
                        total_length=suggested.total_length, t_total_raw=T,
                        conflict_s=suggested.conflict_s,
                        arrival_min=suggested.arrival_min,
                        arrival_max=suggested.arrival_max)
    if suggested.conflict_s is not None:
        arr = prof.arrival_time(suggested.conflict_s)
        if suggested.arrival_min is not None and arr < suggested.arrival_min:
            return None
        if suggested.arrival_max is not None and arr > suggested.arrival_max:
            return None
    return prof


def sample_speed_profiles(suggested: SpeedProfile, cfg: SamplerConfig,
                          time_factors: Sequence[float] = (0.85, 1.0, 1.3),
                          speed_offsets: Sequence[float] = (-2.0, 0.0, 2.0),
                          ) -> List[SpeedProfile]:
    """Cubic-polynomial speed samples around the suggested profile.

    Terminal time and terminal speed are drawn from a grid around the
    suggested profile's terminal conditions; the grid cell matching them
    exactly returns the suggested profile itself. Samples violating
    acceleration bounds, the lateral speed cap, or the decision's arrival
    window are discarded.
    """
    dt = suggested.dt
    t_base = max(suggested.t_total_raw, 2 * dt)
    v_base = suggested.terminal_speed
    cap_end = float(suggested.v_cap[-1]) if suggested.v_cap is not None \
        else float("inf")
    out: List[SpeedProfile] = []
    seen = set()
    for fac in time_factors:
        for off in speed_offsets:
            if fac == 1.0 and off == 0.0:
                if ("sugg",) not in seen:
                    out.append(suggested)
                    seen.add(("sugg",))
                continue
            t_final = max(2 * dt, round(fac * t_base / dt) * dt)
            v_final = float(np.clip(v_base + off, 0.0, cap_end))
            key = (round(t_final, 9), round(v_final, 9))
            if key in seen:
                continue
            seen.add(key)
            prof = _cubic_profile(suggested, t_final, v_final, cfg)
            if prof is not None:
                out.append(prof)
    return out


def profile_respects_limits(prof: SpeedProfile, cfg: SamplerConfig,
                            tol: float = 1e-6) -> bool:
    """Acceleration within [a_min, a_max], v within the lateral cap."""
    a = np.diff(prof.v_of_t) / prof.dt
    if a.size and (a.min() < cfg.a_min - tol or a.max() > cfg.a_max + tol):
        return False
    if np.any(prof.v_of_t < -tol):
        return False
    if prof.s_grid is not None:
        if np.any(prof.v_of_t > prof.cap_at(prof.s_of_t) + tol):
            return False
    return True


# ---------------------------------------------------------------------------
# driving decisions

def conflict_crossing_time(scenario: Scenario) -> Optional[float]:
    """Time at which the other agent reaches the conflict point.

    Interpolated from its recorded trajectory, extrapolated at its final
    speed beyond the recording; None when it never reaches the point.
    """
    other = scenario.other_agent
    cp = scenario.conflict_point
    if other is None or cp is None:
        return None
    s_to = features.arc_distance_to_point(other.x, other.y, cp)
    if s_to[0] <= 0:
        return 0.0
    below = np.nonzero(s_to <= 0)[0]
    if below.size:
        i = int(below[0])
        s_prev, s_cur = s_to[i - 1], s_to[i]
        frac = s_prev / (s_prev - s_cur) if s_prev != s_cur else 0.0
        return float((i - 1 + frac) * other.dt)
    if other.v[-1] > 0.1:
        return float((other.n - 1) * other.dt + s_to[-1] / other.v[-1])
    return None


def decision_windows(scenario: Scenario, cfg: SamplerConfig):
    """(label, arrival_min, arrival_max) per available driving decision."""
    if scenario.other_agent is None or scenario.conflict_point is None:
        return [("none", None, None)]
    t_cross = conflict_crossing_time(scenario)
    if t_cross is None or t_cross <= 0.0:
        return [("pass", None, None)]
    m = cfg.decision_margin
    return [("yield", t_cross + m, None), ("pass", None, t_cross - m)]


def enumerate_decisions(scenario: Scenario) -> List[str]:
    """Available decision labels for the scenario."""
    return [w[0] for w in decision_windows(scenario, SamplerConfig())]


# ---------------------------------------------------------------------------
# full pipeline

def compose_trajectory(path: PathCandidate, prof: SpeedProfile,
                       start_state: State) -> Trajectory:
    """Spatiotemporal trajectory: path positions at the profile's arc grid."""
    pl = path.polyline
    pts = pl.point_at(prof.s_of_t)
    psi = pl.heading_at(prof.s_of_t)
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    v = np.maximum(prof.v_of_t, 0.0).copy()
    psi = np.asarray(psi, dtype=float).copy()
    # anchor the initial state exactly
    x[0], y[0], psi[0], v[0] = (start_state.x, start_state.y,
                                start_state.psi, start_state.v)
    return Trajectory(dt=prof.dt, x=x, y=y, psi=psi, v=v)


def generate_samples_detailed(d: Demonstration, cfg: SamplerConfig,
                              vp: dynamics.VehicleParams
                              ) -> Tuple[SampleSet, List[SampleDetail]]:
    """generate_sample_set plus per-sample path/profile diagnostics."""
    ego = d.ego
    scenario = d.scenario
    start_state = ego.initial_state
    goal_pt = ego.terminal_state.position
    v0 = start_state.v
    # goal condition is the terminal *position*; terminal speed stays free
    # so the family is anchored by geometry, not by the demo's speed quirks
    v_goal = None
    v_track = max(ego.mean_speed(), 1.0)
    dt = ego.dt

    raw_paths = sample_paths(scenario, (start_state.position, start_state.psi),
                             goal_pt, cfg)
    polys = swept_obstacles(scenario, cfg)
    smoothed: List[PathCandidate] = []
    for pc in raw_paths:
        try:
            sm = smooth_path(pc, start_state, cfg, vp, tracking_speed=v_track,
                             dt=dt)
        except SmoothingError:
            continue
        pts = sm.polyline.points
        blocked = False
        for poly in polys:
            if np.any(points_polygon_distance(poly, pts) < cfg.vehicle_radius):
                blocked = True
                break
        if not blocked:
            smoothed.append(sm)

    windows = decision_windows(scenario, cfg)
    suggestions = []  # feasible (path, suggested profile) combos
    for path in smoothed:
        conflict_s = None
        if scenario.conflict_point is not None and scenario.other_agent is not None:
            conflict_s = max(0.0, path.polyline.project(scenario.conflict_point)[0])
        for label, t_min, t_max in windows:
            try:
                sugg = suggested_speed_profile(
                    path, v0, v_goal, cfg, v_limit=scenario.v_desired, dt=dt,
                    decision_label=label, conflict_s=conflict_s,
                    arrival_min=t_min, arrival_max=t_max)
            except InfeasibleProfileError:
                continue
            suggestions.append((path, sugg))

    details: List[SampleDetail] = []
    if suggestions:
        quota = max(1, math.ceil(2.6 * cfg.k_samples / len(suggestions)))
        n_v = min(9, max(1, math.ceil(math.sqrt(quota))))
        if n_v % 2 == 0:
            n_v += 1
        n_t = min(14, max(1, math.ceil(quota / n_v)))
        # arrival-constrained decisions only admit one side of the time grid
        factor_range = {"yield": (1.0, 1.9), "pass": (0.75, 1.05),
                        "none": (0.8, 1.6)}
        profile_lists = []
        for path, sugg in suggestions:
            lo, hi = factor_range.get(sugg.decision_label, (0.8, 1.6))
            if n_t == 1:
                time_factors = [1.0]
            else:
                time_factors = list(np.linspace(lo, hi, n_t))
                time_factors[int(np.argmin(np.abs(np.array(time_factors)
                                                  - 1.0)))] = 1.0
            if n_v == 1:
                speed_offsets = [0.0]
            else:
                # window the terminal-speed grid into the reachable band
                cap_end = float(sugg.v_cap[-1])
                hi_off = min(3.0, max(cap_end - sugg.terminal_speed, 0.0))
                lo_off = -min(4.0, sugg.terminal_speed + 1.0)
                speed_offsets = list(np.linspace(lo_off, hi_off, n_v))
                speed_offsets[int(np.argmin(np.abs(speed_offsets)))] = 0.0
            profile_lists.append(sample_speed_profiles(sugg, cfg, time_factors,
                                                       speed_offsets))
        # round-robin over suggestions so early paths don't hog the budget
        cursor = [0] * len(profile_lists)
        while len(details) < cfg.k_samples:
            progressed = False
            for li, (path, _) in enumerate(suggestions):
                if cursor[li] >= len(profile_lists[li]):
                    continue
                prof = profile_lists[li][cursor[li]]
                cursor[li] += 1
                progressed = True
                traj = compose_trajectory(path, prof, start_state)
                if traj.n < 3:
                    continue
                if not dynamics.check_feasible(traj, vp, tol=0.05):
                    continue
                if trajectory_collides(traj, polys, cfg.vehicle_radius):
                    continue
                details.append(SampleDetail(traj, path, prof,
                                            prof.decision_label))
                if len(details) >= cfg.k_samples:
                    break
            if not progressed:
                break
    members = tuple(dd.trajectory for dd in details) + (ego,)
    labels = tuple(dd.label for dd in details) + ("demo",)
    if len(members) < 2:
        raise SamplingError(f"sampling failed for demonstration {d.id}: "
                            "fewer than 2 members")
    ss = SampleSet(demo_id=d.id, scenario=scenario, members=members,
                   demo_index=len(members) - 1, labels=labels)
    return ss, details


def generate_sample_set(d: Demonstration, cfg: SamplerConfig,
                        vp: dynamics.VehicleParams) -> SampleSet:
    """Feasible, collision-free sample family for one demonstration.

    Composes path sampling, smoothing, and per-decision speed sampling;
    every member starts at the demonstration's initial state and the
    demonstration itself is appended as the last member.
    """
    ss, _ = generate_samples_detailed(d, cfg, vp)
    return ss
