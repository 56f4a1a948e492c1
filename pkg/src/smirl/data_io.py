"""Trajectory ingestion, scenario geometry files, synthetic corpora, and
sample-set persistence.

Track files are comma-separated with the header
  case_id,track_id,frame_id,timestamp_ms,agent_role,x_m,y_m,vx_mps,vy_mps,psi_rad
sampled every 100 ms; unknown extra columns are ignored. Geometry files are
JSON, either one scenario or a {"cases": {case_id: scenario}} map.

Synthetic corpora draw each demonstration from the Boltzmann distribution
over its own (re-distributed) sample set under known ground-truth weights,
so recovery tests are well-specified by construction.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from . import redistribution, sampler
from .dynamics import VehicleParams
from .errors import (InfeasibleProfileError, ParameterError, ParseError,
                     SamplingError, SmoothingError)
from .geometry import Polyline
from .types import (DEFAULT_DT, Demonstration, ReferencePath, RewardParams,
                    SampleSet, SamplerConfig, Scenario, State, Trajectory)

log = logging.getLogger(__name__)

TRACK_COLUMNS = ("case_id", "track_id", "frame_id", "timestamp_ms",
                 "agent_role", "x_m", "y_m", "vx_mps", "vy_mps", "psi_rad")
FRAME_SPACING_MS = 100
TRAIN_FRACTIONS = {"nid": 80 / 113, "id": 150 / 233}


@dataclass
class TrackRow:
    case_id: str
    track_id: int
    frame_id: int
    timestamp_ms: int
    agent_role: str
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    psi_rad: float


@dataclass
class TrackFile:
    """Parsed track rows; writing reproduces them bit-exactly."""

    rows: List[TrackRow] = field(default_factory=list)

    @classmethod
    def read(cls, path) -> "TrackFile":
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(f"{path}: empty file")
            missing = [c for c in TRACK_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise ParseError(f"{path}: missing columns {missing}")
            for lineno, rec in enumerate(reader, start=2):
                try:
                    rows.append(TrackRow(
                        case_id=rec["case_id"],
                        track_id=int(rec["track_id"]),
                        frame_id=int(rec["frame_id"]),
                        timestamp_ms=int(rec["timestamp_ms"]),
                        agent_role=rec["agent_role"],
                        x_m=float(rec["x_m"]),
                        y_m=float(rec["y_m"]),
                        vx_mps=float(rec["vx_mps"]),
                        vy_mps=float(rec["vy_mps"]),
                        psi_rad=float(rec["psi_rad"]),
                    ))
                except (TypeError, ValueError, KeyError) as exc:
                    raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        return cls(rows=rows)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACK_COLUMNS)
            for r in self.rows:
                writer.writerow([r.case_id, r.track_id, r.frame_id,
                                 r.timestamp_ms, r.agent_role,
                                 repr(r.x_m), repr(r.y_m), repr(r.vx_mps),
                                 repr(r.vy_mps), repr(r.psi_rad)])

    @classmethod
    def from_demonstrations(cls, demos: Sequence[Demonstration]) -> "TrackFile":
        rows = []
        for d in demos:
            rows.extend(_trajectory_rows(d.id, 1, "ego", d.ego))
            if d.scenario.other_agent is not None:
                rows.extend(_trajectory_rows(d.id, 2, "other",
                                             d.scenario.other_agent))
        return cls(rows=rows)

    def to_demonstrations(self, geometry) -> List[Demonstration]:
        """Group rows into demonstrations; bad cases are skipped with a
        warning, and a file yielding none raises a parse error."""
        by_case: Dict[str, Dict[str, List[TrackRow]]] = {}
        order: List[str] = []
        for r in self.rows:
            if r.case_id not in by_case:
                by_case[r.case_id] = {}
                order.append(r.case_id)
            by_case[r.case_id].setdefault(r.agent_role, []).append(r)
        demos = []
        skips = []
        for case_id in order:
            roles = by_case[case_id]
            try:
                demos.append(_build_demonstration(case_id, roles, geometry))
            except ParseError as exc:
                skips.append((case_id, str(exc)))
                log.warning("skipping case %s: %s", case_id, exc)
        if not demos:
            first = skips[0][1] if skips else "file holds no track rows"
            raise ParseError(f"no valid demonstrations: {first}")
        return demos


def _trajectory_rows(case_id: str, track_id: int, role: str,
                     t: Trajectory) -> List[TrackRow]:
    step_ms = int(round(t.dt * 1000))
    vx = t.v * np.cos(t.psi)
    vy = t.v * np.sin(t.psi)
    return [TrackRow(case_id=case_id, track_id=track_id, frame_id=i,
                     timestamp_ms=i * step_ms, agent_role=role,
                     x_m=float(t.x[i]), y_m=float(t.y[i]),
                     vx_mps=float(vx[i]), vy_mps=float(vy[i]),
                     psi_rad=float(t.psi[i]))
            for i in range(t.n)]


def _rows_to_trajectory(rows: List[TrackRow], case_id: str) -> Tuple[Trajectory, int]:
    rows = sorted(rows, key=lambda r: r.frame_id)
    ts = np.array([r.timestamp_ms for r in rows])
    if len(rows) < 3:
        raise ParseError(f"case {case_id}: N >= 3 violated (N={len(rows)})")
    spacing = np.diff(ts)
    if np.any(spacing <= 0):
        raise ParseError(f"case {case_id}: timestamps not strictly increasing")
    if np.any(spacing != FRAME_SPACING_MS):
        raise ParseError(f"case {case_id}: gaps in frames "
                         f"(expected {FRAME_SPACING_MS} ms spacing)")
    v = np.hypot([r.vx_mps for r in rows], [r.vy_mps for r in rows])
    traj = Trajectory(dt=FRAME_SPACING_MS / 1000.0,
                      x=[r.x_m for r in rows], y=[r.y_m for r in rows],
                      psi=[r.psi_rad for r in rows], v=v)
    return traj, int(ts[0])


def _build_demonstration(case_id: str, roles: Dict[str, List[TrackRow]],
                         geometry) -> Demonstration:
    if "ego" not in roles:
        raise ParseError(f"case {case_id}: no ego track")
    ego, ego_t0 = _rows_to_trajectory(roles["ego"], case_id)
    other = None
    if "other" in roles:
        oth, oth_t0 = _rows_to_trajectory(roles["other"], case_id)
        # align to the overlap window
        t0 = max(ego_t0, oth_t0)
        t1 = min(ego_t0 + round((ego.n - 1) * ego.dt * 1000),
                 oth_t0 + round((oth.n - 1) * oth.dt * 1000))
        if t1 - t0 < 2 * FRAME_SPACING_MS:
            raise ParseError(f"case {case_id}: ego/other time ranges are "
                             "disjoint or overlap too briefly")
        ego = _slice_ms(ego, ego_t0, t0, t1)
        other = _slice_ms(oth, oth_t0, t0, t1)
    scenario = _scenario_for(case_id, geometry)
    if other is not None:
        scenario = replace(scenario, other_agent=other)
    return Demonstration(ego=ego, scenario=scenario, id=case_id)


def _slice_ms(t: Trajectory, t0_ms: int, lo_ms: int, hi_ms: int) -> Trajectory:
    i0 = (lo_ms - t0_ms) // FRAME_SPACING_MS
    i1 = (hi_ms - t0_ms) // FRAME_SPACING_MS + 1
    return Trajectory(dt=t.dt, x=t.x[i0:i1], y=t.y[i0:i1],
                      psi=t.psi[i0:i1], v=t.v[i0:i1])


def _scenario_for(case_id: str, geometry) -> Scenario:
    if isinstance(geometry, Scenario):
        return geometry
    if isinstance(geometry, dict):
        if case_id not in geometry:
            raise ParseError(f"case {case_id}: no scenario geometry")
        return geometry[case_id]
    raise ParameterError("geometry must be a Scenario or a case mapping")


def load_tracks(path, scenario_geometry) -> List[Demonstration]:
    """Parse a track file into demonstrations.

    scenario_geometry: a Scenario applied to every case, a {case_id:
    Scenario} map, or a geometry file path.
    """
    if isinstance(scenario_geometry, (str, os.PathLike)):
        scenario_geometry = load_geometry(scenario_geometry)
    return TrackFile.read(path).to_demonstrations(scenario_geometry)


def save_tracks(path, demos: Sequence[Demonstration]) -> None:
    TrackFile.from_demonstrations(demos).write(path)


# ---------------------------------------------------------------------------
# geometry files

def save_geometry(path, geometry) -> None:
    if isinstance(geometry, Scenario):
        payload = geometry.to_dict()
    else:
        payload = {"cases": {cid: sc.to_dict() for cid, sc in geometry.items()}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_geometry(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "cases" in payload:
        return {cid: Scenario.from_dict(sc)
                for cid, sc in payload["cases"].items()}
    return Scenario.from_dict(payload)


# ---------------------------------------------------------------------------
# synthetic corpora

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic Boltzmann-rational corpus."""

    template: str                 # straight | curve | roundabout-merge
    theta_star: np.ndarray
    n_demos: int = 20
    temperature: float = 1.0      # Boltzmann beta = 1 / temperature
    seed: int = 0
    pos_noise_sigma: float = 0.0  # m observation noise on demo positions
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.n_demos < 1:
            raise ParameterError("n_demos must be >= 1")
        if self.template not in ("straight", "curve", "roundabout-merge"):
            raise ParameterError(f"unknown template {self.template!r}")
        if self.temperature <= 0:
            raise ParameterError("temperature must be positive")
        object.__setattr__(self, "theta_star",
                           np.asarray(self.theta_star, dtype=float))

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def interactive(self) -> bool:
        return self.template == "roundabout-merge"


@dataclass
class SyntheticResult:
    demos: List[Demonstration]
    reward_params: RewardParams           # ground truth
    sample_sets: List[SampleSet]          # generation-time sets, demo-indexed
    n_skipped: int = 0


def boltzmann_draw(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    """Index drawn with probability softmax(log_weights)."""
    z = np.asarray(log_weights, dtype=float)
    z = z - np.max(z)
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def _case_scenario(spec: SyntheticSpec, rng: np.random.Generator,
                   idx: int) -> Tuple[Scenario, float, float, float]:
    """Scenario plus (start arc position, start speed, case duration)."""
    if spec.template == "straight":
        ref = ReferencePath(vertices=np.array([[-10.0, 0.0], [140.0, 0.0]]),
                            lane_width=3.5)
        obstacles = []
        if idx % 3 == 1:
            # parked intrusion; inner edge clears the centerline footprint
            ahead = rng.uniform(15.0, 28.0)
            inner = rng.uniform(1.2, 1.9)
            x0 = 10.0 + ahead
            obstacles.append(np.array([[x0, inner], [x0 + 2.0, inner],
                                       [x0 + 2.0, inner + 1.6],
                                       [x0, inner + 1.6]]))
        scenario = Scenario(reference_paths=(ref,), obstacles=tuple(obstacles),
                            v_desired=10.0)
        s_start = 10.0 + rng.uniform(0.0, 4.0)
        v0 = rng.uniform(5.0, 9.0)
        t_case = rng.uniform(3.2, 4.4)
        return scenario, s_start, v0, t_case
    if spec.template == "curve":
        radius = rng.uniform(12.0, 20.0)
        ang = np.linspace(0.0, np.deg2rad(75.0), 30)
        entry = np.stack([np.linspace(-15.0, 0.0, 8), np.zeros(8)], axis=1)
        arc = np.stack([radius * np.sin(ang),
                        radius * (1.0 - np.cos(ang))], axis=1)
        tail_dir = np.array([np.cos(ang[-1]), np.sin(ang[-1])])
        tail = arc[-1] + np.outer(np.linspace(2.0, 40.0, 12), tail_dir)
        ref = ReferencePath(vertices=np.vstack([entry[:-1], arc, tail]),
                            lane_width=3.5)
        scenario = Scenario(reference_paths=(ref,), v_desired=9.0)
        s_start = rng.uniform(0.0, 4.0)
        v0 = rng.uniform(4.0, 7.0)
        t_case = rng.uniform(3.5, 4.5)
        return scenario, s_start, v0, t_case
    # roundabout-merge: the circulating lane crosses the entry lane at the
    # conflict point at ~65 deg (entering traffic yields to it)
    ref = ReferencePath(vertices=np.array([[-40.0, 0.0], [70.0, 0.0]]),
                        lane_width=3.5)
    conflict = np.array([15.0, 0.0])
    r0 = 20.0
    cross_dir = np.array([np.cos(np.deg2rad(-65.0)),
                          np.sin(np.deg2rad(-65.0))])  # other's travel dir
    center = conflict + r0 * np.array([-cross_dir[1], cross_dir[0]])
    a0 = math.atan2(conflict[1] - center[1], conflict[0] - center[0])
    ang = a0 + np.deg2rad(np.linspace(-120.0, 60.0, 121))  # CCW through a0
    other_pts = np.stack([center[0] + r0 * np.cos(ang),
                          center[1] + r0 * np.sin(ang)], axis=1)
    obstacles = []
    if idx % 4 == 2:
        inner = rng.uniform(1.2, 1.8)
        x0 = rng.uniform(-6.0, 2.0)
        obstacles.append(np.array([[x0, inner], [x0 + 2.0, inner],
                                   [x0 + 2.0, inner + 1.5],
                                   [x0, inner + 1.5]]))
    t_case = rng.uniform(4.0, 5.0)
    v_other = rng.uniform(5.0, 9.0)
    d0 = v_other * rng.uniform(1.6, 4.5)  # crossing time 1.6-4.5 s out
    other = _path_follow_trajectory(other_pts, d0, v_other,
                                    duration=2.0 * t_case, dt=spec.dt,
                                    distance_to=conflict)
    scenario = Scenario(reference_paths=(ref,), obstacles=tuple(obstacles),
                        other_agent=other, conflict_point=conflict,
                        v_desired=10.0)
    s_start = rng.uniform(24.0, 30.0)  # 25-31 m before the conflict
    v0 = rng.uniform(6.0, 9.0)
    return scenario, s_start, v0, t_case


def _path_follow_trajectory(path_pts: np.ndarray, dist_before: float,
                            speed: float, duration: float, dt: float,
                            distance_to: np.ndarray) -> Trajectory:
    """Constant-speed polyline follower, parked once the lane ends."""
    pl = Polyline(path_pts)
    s_target, _, _ = pl.project(distance_to)
    s0 = max(0.0, s_target - dist_before)
    n = int(round(duration / dt)) + 1
    s = np.minimum(s0 + speed * dt * np.arange(n), pl.length)
    pts = pl.point_at(s)
    psi = pl.heading_at(s)
    v = np.where(s >= pl.length - 1e-9, 0.0, speed)
    return Trajectory(dt=dt, x=pts[:, 0], y=pts[:, 1], psi=psi, v=v)


def _nominal_demo(scenario: Scenario, s_start: float, v0: float,
                  t_case: float, spec: SyntheticSpec, cfg: SamplerConfig,
                  case_id: str) -> Demonstration:
    """Reference-following, time-optimal scaffold trajectory."""
    pl = scenario.main_path.polyline
    horizon = min(pl.length - s_start - 1.0,
                  scenario.v_desired * t_case + 25.0)
    s_vals = np.arange(0.0, horizon, 2.0)
    if s_vals[-1] < horizon:
        s_vals = np.append(s_vals, horizon)
    pts = pl.point_at(s_start + s_vals)
    path = sampler.PathCandidate(points=pts)
    prof = sampler.suggested_speed_profile(path, v0, None, cfg,
                                           v_limit=scenario.v_desired,
                                           dt=spec.dt)
    n_keep = int(round(t_case / spec.dt)) + 1
    keep = min(n_keep, len(prof.s_of_t))
    prof = replace_profile(prof, prof.s_of_t[:keep], prof.v_of_t[:keep])
    start = State(float(pts[0][0]), float(pts[0][1]),
                  float(pl.heading_at(s_start)), v0)
    traj = sampler.compose_trajectory(path, prof, start)
    return Demonstration(ego=traj, scenario=scenario, id=case_id)


def replace_profile(prof: sampler.SpeedProfile, s_of_t, v_of_t
                    ) -> sampler.SpeedProfile:
    return sampler.SpeedProfile(dt=prof.dt, s_of_t=np.asarray(s_of_t),
                                v_of_t=np.asarray(v_of_t),
                                decision_label=prof.decision_label,
                                s_grid=prof.s_grid, v_cap=prof.v_cap,
                                total_length=prof.total_length,
                                t_total_raw=prof.t_total_raw)


def generate_synthetic(spec: SyntheticSpec, sampler_cfg: SamplerConfig,
                       vp: VehicleParams) -> SyntheticResult:
    """Boltzmann-rational corpus with known ground-truth reward.

    Per case: build a scenario, scaffold a nominal demonstration, run the
    trajectory sampler, re-distribute, and draw the demonstration from the
    Boltzmann distribution (under theta_star and the corpus-wide max
    normalizer) over the re-distributed members. Sampler failures skip the
    case and are counted.
    """
    dim = 6 if spec.interactive else 4
    if spec.theta_star.shape != (dim,):
        raise ParameterError(f"theta_star must have {dim} entries for "
                             f"template {spec.template!r}")
    seeds = np.random.SeedSequence(spec.seed).spawn(2 * spec.n_demos)
    cases = []
    n_skipped = 0
    attempt = 0
    while len(cases) < spec.n_demos and attempt < 2 * spec.n_demos:
        rng = np.random.default_rng(seeds[attempt])
        idx = attempt
        attempt += 1
        case_id = f"{spec.template}_{idx:04d}"
        scenario, s_start, v0, t_case = _case_scenario(spec, rng, idx)
        try:
            nominal = _nominal_demo(scenario, s_start, v0, t_case, spec,
                                    sampler_cfg, case_id)
            ss = sampler.generate_sample_set(nominal, sampler_cfg, vp)
        except (SamplingError, ParameterError, InfeasibleProfileError,
                SmoothingError) as exc:
            n_skipped += 1
            log.warning("skipping synthetic case %s: %s", case_id, exc)
            continue
        raw = feat.extract_matrix(ss.members, scenario, sampler_cfg.tau_predict)
        ss = ss.with_features(raw, feat.FEATURE_NAMES[:raw.shape[1]])
        cases.append((nominal, ss, rng))
    if len(cases) < spec.n_demos:
        raise SamplingError(f"could only generate {len(cases)} of "
                            f"{spec.n_demos} synthetic cases")

    norm = feat.fit_normalizer_matrix(
        np.vstack([ss.features for _, ss, _ in cases]),
        feat.FEATURE_NAMES[:dim])
    gt = RewardParams(theta=spec.theta_star, beta=spec.beta,
                      normalizers=norm.max_per_feature, names=norm.names)

    demos: List[Demonstration] = []
    sets: List[SampleSet] = []
    for nominal, ss, rng in cases:
        red = redistribution.redistribute(ss, norm, seed=int(rng.integers(2**31)))
        rewards = gt.beta * ((red.features / gt.normalizers) @ gt.theta)
        candidates = [i for i in range(red.size) if i != red.demo_index]
        drawn_local = candidates[boltzmann_draw(rewards[candidates], rng)]
        chosen = red.members[drawn_local]
        ego = chosen
        if spec.pos_noise_sigma > 0:
            ego = Trajectory(
                dt=chosen.dt,
                x=chosen.x + rng.normal(0.0, spec.pos_noise_sigma, chosen.n),
                y=chosen.y + rng.normal(0.0, spec.pos_noise_sigma, chosen.n),
                psi=chosen.psi, v=chosen.v)
        demos.append(Demonstration(ego=ego, scenario=nominal.scenario,
                                   id=nominal.id))
        sets.append(replace(red, demo_id=nominal.id, demo_index=drawn_local))
    return SyntheticResult(demos=demos, reward_params=gt, sample_sets=sets,
                           n_skipped=n_skipped)


def split_demos(demos: Sequence[Demonstration], kind: str
                ) -> Tuple[list, list]:
    """Train/test split replicating the per-scenario reported ratios."""
    if kind not in TRAIN_FRACTIONS:
        raise ParameterError(f"kind must be one of {sorted(TRAIN_FRACTIONS)}")
    n_train = int(round(len(demos) * TRAIN_FRACTIONS[kind]))
    n_train = min(max(n_train, 1), len(demos) - 1) if len(demos) > 1 else 1
    return list(demos[:n_train]), list(demos[n_train:])


# ---------------------------------------------------------------------------
# corpus directories

def write_corpus(dir_path, demos: Sequence[Demonstration],
                 ground_truth: Optional[dict] = None) -> None:
    """tracks.csv + geometry.json (+ ground_truth.json) under dir_path."""
    os.makedirs(dir_path, exist_ok=True)
    save_tracks(os.path.join(dir_path, "tracks.csv"), demos)
    geometry = {d.id: replace(d.scenario, other_agent=None) for d in demos}
    save_geometry(os.path.join(dir_path, "geometry.json"), geometry)
    if ground_truth is not None:
        with open(os.path.join(dir_path, "ground_truth.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(ground_truth, fh, sort_keys=True, separators=(",", ":"))


def read_corpus(dir_path) -> Tuple[List[Demonstration], Optional[dict]]:
    demos = load_tracks(os.path.join(dir_path, "tracks.csv"),
                        os.path.join(dir_path, "geometry.json"))
    gt_path = os.path.join(dir_path, "ground_truth.json")
    gt = None
    if os.path.exists(gt_path):
        with open(gt_path, "r", encoding="utf-8") as fh:
            gt = json.load(fh)
    return demos, gt


# ---------------------------------------------------------------------------
# sample-set persistence (JSON index + one flat .npy state array)

def write_sample_sets(dir_path, sample_sets: Sequence[SampleSet]) -> None:
    os.makedirs(dir_path, exist_ok=True)
    index = {"order": [], "sets": {}}
    blocks = []
    for ss in sample_sets:
        lengths = [t.n for t in ss.members]
        index["order"].append(ss.demo_id)
        index["sets"][ss.demo_id] = {
            "lengths": lengths,
            "demo_index": ss.demo_index,
            "labels": list(ss.labels),
            "dt": ss.members[0].dt,
            "flags": list(ss.flags),
        }
        for t in ss.members:
            blocks.append(np.stack([t.x, t.y, t.psi, t.v], axis=1))
    data = np.vstack(blocks) if blocks else np.zeros((0, 4))
    with open(os.path.join(dir_path, "samples_index.json"), "w",
              encoding="utf-8") as fh:
        json.dump(index, fh, sort_keys=True, separators=(",", ":"))
    np.save(os.path.join(dir_path, "samples_data.npy"), data)


def read_sample_sets(dir_path, demos: Sequence[Demonstration]
                     ) -> List[SampleSet]:
    """Rebuild sample sets, reattaching scenarios from the demonstrations."""
    with open(os.path.join(dir_path, "samples_index.json"), "r",
              encoding="utf-8") as fh:
        index = json.load(fh)
    data = np.load(os.path.join(dir_path, "samples_data.npy"))
    by_id = {d.id: d for d in demos}
    sets = []
    offset = 0
    for demo_id in index["order"]:
        meta = index["sets"][demo_id]
        if demo_id not in by_id:
            raise ParameterError(f"sample sets reference unknown demo "
                                 f"{demo_id!r}")
        demo = by_id[demo_id]
        members = []
        for n in meta["lengths"]:
            block = data[offset:offset + n]
            offset += n
            members.append(Trajectory(dt=meta["dt"], x=block[:, 0],
                                      y=block[:, 1], psi=block[:, 2],
                                      v=block[:, 3]))
        sets.append(SampleSet(demo_id=demo_id, scenario=demo.scenario,
                              members=tuple(members),
                              demo_index=meta["demo_index"],
                              labels=tuple(meta["labels"]),
                              flags=tuple(meta.get("flags", []))))
    return sets
