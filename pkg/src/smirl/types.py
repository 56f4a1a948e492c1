"""Shared domain types: states, trajectories, scenarios, configs.

All types are immutable value objects after construction (arrays are made
read-only), safe to share across threads and worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .geometry import Polyline, wrap_angle

# Global feature ordering; every module indexes feature vectors by this.
FEATURE_NAMES = ("v_des", "a_lon", "a_lat", "j_lon", "fut_dis", "fut_int_dis")
NONINTERACTIVE_FEATURES = FEATURE_NAMES[:4]
DEFAULT_DT = 0.1  # s


def _freeze(arr):
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class State:
    """Vehicle state: planar position, heading, speed."""

    x: float   # m east
    y: float   # m north
    psi: float  # rad, wrapped to (-pi, pi]
    v: float   # m/s, >= 0

    def __post_init__(self):
        if not np.isfinite([self.x, self.y, self.psi, self.v]).all():
            raise ParameterError("state fields must be finite")
        if self.v < 0:
            raise ParameterError(f"speed must be >= 0, got {self.v}")
        object.__setattr__(self, "psi", float(wrap_angle(self.psi)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "v", float(self.v))

    @property
    def position(self):
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Control:
    """Longitudinal acceleration and front steering angle."""

    a: float      # m/s^2
    delta: float  # rad

    def __post_init__(self):
        if not np.isfinite([self.a, self.delta]).all():
            raise ParameterError("control fields must be finite")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timed state sequence sampled every dt seconds.

    Controls are optional; when ingested data provides positions/speeds only
    they are reconstructed by finite differences (see dynamics module).
    """

    dt: float
    x: np.ndarray    # (N,)
    y: np.ndarray    # (N,)
    psi: np.ndarray  # (N,) rad, wrapped
    v: np.ndarray    # (N,) m/s
    a: Optional[np.ndarray] = None      # (N-1,) m/s^2
    delta: Optional[np.ndarray] = None  # (N-1,) rad

    def __post_init__(self):
        for name in ("x", "y", "psi", "v"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ParameterError(f"{name} must be 1-D")
            object.__setattr__(self, name, arr)
        n = len(self.x)
        if n < 2:
            raise ParameterError(f"trajectory needs at least 2 states, got {n}")
        if not (len(self.y) == len(self.psi) == len(self.v) == n):
            raise ParameterError("state arrays must share one length")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        for name in ("x", "y", "psi", "v"):
            if not np.isfinite(getattr(self, name)).all():
                raise ParameterError(f"{name} contains non-finite values")
        if np.any(self.v < 0):
            raise ParameterError("speeds must be >= 0")
        object.__setattr__(self, "psi", wrap_angle(self.psi))
        for name in ("a", "delta"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (n - 1,):
                    raise ParameterError(f"{name} must have shape (N-1,)")
                if not np.isfinite(arr).all():
                    raise ParameterError(f"{name} contains non-finite values")
                object.__setattr__(self, name, _freeze(arr))
        for name in ("x", "y", "psi", "v"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def duration(self) -> float:
        return (self.n - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    @property
    def positions(self) -> np.ndarray:
        """(N, 2) stacked x, y."""
        return np.stack([self.x, self.y], axis=1)

    @property
    def has_controls(self) -> bool:
        return self.a is not None and self.delta is not None

    def state(self, i: int) -> State:
        return State(self.x[i], self.y[i], self.psi[i], self.v[i])

    @property
    def initial_state(self) -> State:
        return self.state(0)

    @property
    def terminal_state(self) -> State:
        return self.state(self.n - 1)

    def mean_speed(self) -> float:
        return float(np.mean(self.v))

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        if self.dt != other.dt or self.n != other.n:
            return False
        same = (np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)
                and np.array_equal(self.psi, other.psi)
                and np.array_equal(self.v, other.v))
        for name in ("a", "delta"):
            mine, theirs = getattr(self, name), getattr(other, name)
            if (mine is None) != (theirs is None):
                return False
            if mine is not None and not np.array_equal(mine, theirs):
                return False
        return same

    __hash__ = object.__hash__

    def to_dict(self) -> dict:
        d = {"dt": self.dt, "x": self.x.tolist(), "y": self.y.tolist(),
             "psi": self.psi.tolist(), "v": self.v.tolist()}
        if self.a is not None:
            d["a"] = self.a.tolist()
        if self.delta is not None:
            d["delta"] = self.delta.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(dt=d["dt"], x=d["x"], y=d["y"], psi=d["psi"], v=d["v"],
                   a=d.get("a"), delta=d.get("delta"))

    @classmethod
    def from_states(cls, states: Sequence[State], dt: float) -> "Trajectory":
        return cls(dt=dt,
                   x=[s.x for s in states], y=[s.y for s in states],
                   psi=[s.psi for s in states], v=[s.v for s in states])


@dataclass(frozen=True)
class ReferencePath:
    """Lane centerline polyline with a nominal lane width."""

    vertices: np.ndarray  # (M, 2)
    lane_width: float = 3.5  # m

    def __post_init__(self):
        object.__setattr__(self, "vertices", _freeze(self.vertices))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ParameterError("reference path vertices must be (M, 2)")
        if self.lane_width <= 0:
            raise ParameterError("lane width must be positive")
        # validates arc length > 0
        object.__setattr__(self, "_polyline", Polyline(self.vertices))

    @property
    def polyline(self) -> Polyline:
        return self._polyline

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "lane_width": self.lane_width}

    @classmethod
    def from_dict(cls, d: dict) -> "ReferencePath":
        return cls(vertices=np.asarray(d["vertices"], dtype=float),
                   lane_width=float(d["lane_width"]))


@dataclass(frozen=True)
class OccupancyGrid:
    """Binary occupancy raster; occupied cells act as square obstacles."""

    origin: np.ndarray      # (2,) world position of cell (0, 0) corner
    resolution: float       # m per cell
    data: np.ndarray        # (H, W) bool

    def __post_init__(self):
        if self.resolution <= 0:
            raise ParameterError("grid resolution must be positive")
        object.__setattr__(self, "origin", _freeze(self.origin))
        data = np.asarray(self.data, dtype=bool)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def occupied_polygons(self) -> list:
        """Occupied cells as square polygons in world coordinates."""
        polys = []
        res = self.resolution
        ox, oy = self.origin
        rows, cols = np.nonzero(self.data)
        for r, c in zip(rows, cols):
            x0, y0 = ox + c * res, oy + r * res
            polys.append(np.array([[x0, y0], [x0 + res, y0],
                                   [x0 + res, y0 + res], [x0, y0 + res]]))
        return polys

    def to_dict(self) -> dict:
        return {"origin": self.origin.tolist(), "resolution": self.resolution,
                "data": self.data.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "OccupancyGrid":
        return cls(origin=np.asarray(d["origin"], dtype=float),
                   resolution=float(d["resolution"]),
                   data=np.asarray(d["data"], dtype=bool))


@dataclass(frozen=True)
class Scenario:
    """The world a trajectory lives in.

    Obstacles are static convex polygons; an optional occupancy grid
    contributes its occupied cells as additional square obstacles.
    """

    reference_paths: tuple        # of ReferencePath, len >= 1
    obstacles: tuple = ()         # of (K, 2) polygons
    grid: Optional[OccupancyGrid] = None
    other_agent: Optional[Trajectory] = None
    conflict_point: Optional[np.ndarray] = None  # (2,)
    v_desired: float = 10.0      # m/s speed limit

    def __post_init__(self):
        paths = tuple(self.reference_paths)
        if not paths:
            raise ParameterError("scenario needs at least one reference path")
        for p in paths:
            if not isinstance(p, ReferencePath):
                raise ParameterError("reference_paths must hold ReferencePath")
        object.__setattr__(self, "reference_paths", paths)
        obs = tuple(_freeze(o) for o in self.obstacles)
        for o in obs:
            if o.ndim != 2 or o.shape[1] != 2 or o.shape[0] < 3:
                raise ParameterError("obstacle polygons must be (K>=3, 2)")
        object.__setattr__(self, "obstacles", obs)
        if self.conflict_point is not None:
            object.__setattr__(self, "conflict_point", _freeze(self.conflict_point))
        if self.v_desired <= 0:
            raise ParameterError("v_desired must be positive")
        static = list(obs)
        if self.grid is not None:
            static.extend(self.grid.occupied_polygons())
        object.__setattr__(self, "_static_polygons", tuple(static))

    @property
    def is_interactive(self) -> bool:
        return self.other_agent is not None

    def static_polygons(self) -> tuple:
        """All static obstacle polygons, grid cells included."""
        return self._static_polygons

    @property
    def main_path(self) -> ReferencePath:
        return self.reference_paths[0]

    def to_dict(self) -> dict:
        d = {"reference_paths": [p.to_dict() for p in self.reference_paths],
             "obstacles": [o.tolist() for o in self.obstacles],
             "v_desired": self.v_desired}
        if self.grid is not None:
            d["grid"] = self.grid.to_dict()
        if self.other_agent is not None:
            d["other_agent"] = self.other_agent.to_dict()
        if self.conflict_point is not None:
            d["conflict_point"] = self.conflict_point.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            reference_paths=tuple(ReferencePath.from_dict(p)
                                  for p in d["reference_paths"]),
            obstacles=tuple(np.asarray(o, dtype=float) for o in d.get("obstacles", [])),
            grid=OccupancyGrid.from_dict(d["grid"]) if d.get("grid") else None,
            other_agent=(Trajectory.from_dict(d["other_agent"])
                         if d.get("other_agent") else None),
            conflict_point=(np.asarray(d["conflict_point"], dtype=float)
                            if d.get("conflict_point") is not None else None),
            v_desired=float(d.get("v_desired", 10.0)),
        )


@dataclass(frozen=True)
class Demonstration:
    """A recorded expert trajectory plus the scenario it was driven in."""

    ego: Trajectory
    scenario: Scenario
    id: str

    def to_dict(self) -> dict:
        return {"id": self.id, "ego": self.ego.to_dict(),
                "scenario": self.scenario.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Demonstration":
        return cls(ego=Trajectory.from_dict(d["ego"]),
                   scenario=Scenario.from_dict(d["scenario"]), id=str(d["id"]))


@dataclass(frozen=True)
class FeatureVector:
    """Ordered per-trajectory feature values, keyed by FEATURE_NAMES prefix."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        if names != FEATURE_NAMES[:len(names)]:
            raise ParameterError(f"feature names must be a prefix of "
                                 f"{FEATURE_NAMES}, got {names}")
        vals = _freeze(self.values)
        if vals.shape != (len(names),):
            raise ParameterError("values length must match names")
        if not np.isfinite(vals).all():
            raise ParameterError("feature values must be finite")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(self.names, self.values)}

    @property
    def dim(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class RewardParams:
    """Linear reward weights plus rationality and normalization constants."""

    theta: np.ndarray       # aligned with `names`
    beta: float = 1.0       # > 0; Boltzmann rationality
    normalizers: Optional[np.ndarray] = None  # per-feature max, > 0
    names: tuple = NONINTERACTIVE_FEATURES

    def __post_init__(self):
        theta = _freeze(self.theta)
        names = tuple(self.names)
        if theta.shape != (len(names),):
            raise ParameterError("theta length must match names")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ParameterError("beta must be positive")
        norm = self.normalizers
        if norm is None:
            norm = np.ones(len(names))
        norm = _freeze(norm)
        if norm.shape != theta.shape or np.any(norm <= 0):
            raise ParameterError("normalizers must be positive, one per feature")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "normalizers", norm)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-ascent settings for the maximum-entropy trainer."""

    alpha: float = 1.0        # learning rate
    epsilon: float = 1e-3     # convergence threshold on the feature-count gap
    l1_lambda: float = 1e-3   # l1 regularization weight
    max_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ParameterError("alpha must be positive")
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if self.l1_lambda < 0:
            raise ParameterError("l1_lambda must be >= 0")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be >= 0")


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the trajectory sampler (paths, smoothing, speed profiles)."""

    k_samples: int = 200          # target samples per demonstration
    f_threshold: float = 1.0      # elastic-node force threshold
    w_contract: float = 1.0 / 3.0
    w_repel: float = 1.0 / 3.0
    w_attract: float = 1.0 / 3.0
    lateral_offsets: tuple = (-1.5, -0.75, 0.0, 0.75, 1.5)  # m
    node_spacing: float = 5.0     # m between stations
    lookahead: float = 4.0        # m pure-pursuit lookahead
    a_min: float = -4.0           # m/s^2
    a_max: float = 3.0            # m/s^2
    a_lat_max: float = 4.0        # m/s^2
    tau_predict: float = 1.0      # s interaction prediction horizon
    k_rep: float = 1.0            # repulsion gain
    k_att: float = 1.0            # attraction gain
    d_influence: float = 5.0      # m repulsion support radius
    decision_margin: float = 0.5  # s yield/pass time gap at conflict point
    goal_tolerance: float = 2.0   # m terminal position tolerance
    vehicle_radius: float = 1.0   # m footprint disc radius
    max_paths: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.k_samples < 2:
            raise ParameterError("k_samples must be >= 2")
        w = self.w_contract + self.w_repel + self.w_attract
        if abs(w - 1.0) > 1e-9:
            raise ParameterError(f"force weights must sum to 1, got {w}")
        if not (self.a_min < 0 < self.a_max):
            raise ParameterError("need a_min < 0 < a_max")
        if self.f_threshold < 0:
            raise ParameterError("f_threshold must be >= 0")
        object.__setattr__(self, "lateral_offsets",
                           tuple(float(o) for o in self.lateral_offsets))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Per-demonstration trajectory family sharing initial/goal conditions.

    `members` includes the demonstration itself at `demo_index` (None once
    the demonstration has been stripped for evaluation). `features`, when
    attached, holds the raw (unnormalized) feature matrix, one row per
    member in order.
    """

    demo_id: str
    scenario: Scenario
    members: tuple                      # of Trajectory
    demo_index: Optional[int] = None
    labels: tuple = ()                  # decision label per member
    features: Optional[np.ndarray] = None      # (K, F) raw
    feature_names: Optional[tuple] = None
    flags: tuple = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ParameterError("sample set must not be empty")
        object.__setattr__(self, "members", members)
        labels = tuple(self.labels) if self.labels else ("none",) * len(members)
        if len(labels) != len(members):
            raise ParameterError("labels must match members")
        object.__setattr__(self, "labels", labels)
        if self.demo_index is not None and not (0 <= self.demo_index < len(members)):
            raise ParameterError("demo_index out of range")
        if self.features is not None:
            feats = _freeze(self.features)
            if feats.shape[0] != len(members):
                raise ParameterError("feature matrix must have one row per member")
            object.__setattr__(self, "features", feats)
            if self.feature_names is not None:
                object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def demo(self) -> Trajectory:
        if self.demo_index is None:
            raise ParameterError("sample set has no demonstration member")
        return self.members[self.demo_index]

    def with_features(self, matrix, names) -> "SampleSet":
        return replace(self, features=np.asarray(matrix, dtype=float),
                       feature_names=tuple(names))

    def subset(self, indices, demo_index=None) -> "SampleSet":
        """New set from member indices (duplicates allowed)."""
        idx = list(indices)
        feats = self.features[idx] if self.features is not None else None
        return replace(self, members=tuple(self.members[i] for i in idx),
                       labels=tuple(self.labels[i] for i in idx),
                       features=feats, demo_index=demo_index)

    def without_demo(self) -> "SampleSet":
        """Drop the demonstration member (for evaluation likelihoods)."""
        if self.demo_index is None:
            return self
        idx = [i for i in range(self.size) if i != self.demo_index]
        return self.subset(idx, demo_index=None)


def validate_demonstration(d: Demonstration) -> list:
    """Check type invariants; returns violations (empty means valid)."""
    violations = []
    ego = d.ego
    if ego.n < 3:
        violations.append(f"ego: N >= 3 violated (N={ego.n})")
    if ego.dt <= 0:
        violations.append(f"ego.dt: dt > 0 violated (dt={ego.dt})")
    if np.any(ego.v < 0):
        violations.append("ego.v: v >= 0 violated")
    if np.any((ego.psi <= -np.pi) | (ego.psi > np.pi)):
        violations.append("ego.psi: psi in (-pi, pi] violated")
    other = d.scenario.other_agent
    if other is not None:
        ego_end = (ego.n - 1) * ego.dt
        other_end = (other.n - 1) * other.dt
        if other_end < ego_end - 1e-9:
            violations.append(
                "scenario.other_agent: time ranges overlap fully violated "
                f"(ego {ego_end:.2f} s, other {other_end:.2f} s)")
    for path in d.scenario.reference_paths:
        if path.polyline.length <= 0:
            violations.append("scenario.reference_paths: arc length > 0 violated")
    if d.scenario.grid is not None and d.scenario.grid.resolution <= 0:
        violations.append("scenario.grid: resolution > 0 violated")
    if ego.has_controls:
        # consistency with the kinematic model is checked against speed only
        # here; full dynamics checks live in dynamics.check_feasible
        dv = np.diff(ego.v) - ego.a * ego.dt
        # allow clamping at v = 0
        ok = (np.abs(dv) <= 1e-6) | (ego.v[1:] == 0)
        if not np.all(ok):
            violations.append("ego: states inconsistent with given controls")
    return violations
