"""Reward features over trajectories and their dataset max-normalization.

Six features: squared speed deviation from the limit, squared longitudinal
and lateral accelerations, squared longitudinal jerk, and in interactive
scenarios the exponentially-decayed future distance and future interaction
distance to the other vehicle. Non-interactive scenarios use the first four.

All quantities derive from positions, headings and speeds by finite
differences (recorded datasets carry no controls). Every public scalar op is
a thin wrapper over batched array kernels so single-trajectory and batched
callers share one code path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ParameterError
from .geometry import project_onto_polyline_arrays
from .types import (FEATURE_NAMES, NONINTERACTIVE_FEATURES, FeatureVector,
                    Scenario, Trajectory)

DEFAULT_TAU_PREDICT = 1.0  # s
TAU_GRID_STEP = 0.05       # s fallback when no closed form applies


# ---------------------------------------------------------------------------
# array kernels; leading axes are batch axes, trailing axis is time

def central_diff(y: np.ndarray, dt: float) -> np.ndarray:
    """Central finite differences, one-sided at the ends; same length as y."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    out[..., 1:-1] = (y[..., 2:] - y[..., :-2]) / (2.0 * dt)
    out[..., 0] = (y[..., 1] - y[..., 0]) / dt
    out[..., -1] = (y[..., -1] - y[..., -2]) / dt
    return out


def lon_accel(v: np.ndarray, dt: float) -> np.ndarray:
    return central_diff(v, dt)


def curvature_est(x: np.ndarray, y: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Heading rate of change per arc length, by central differences.

    Stationary stretches (no arc accumulated) get curvature 0.
    """
    psi_u = np.unwrap(np.asarray(psi, dtype=float), axis=-1)
    ds = np.hypot(np.diff(x, axis=-1), np.diff(y, axis=-1))
    s = np.concatenate([np.zeros(ds.shape[:-1] + (1,)), np.cumsum(ds, axis=-1)],
                       axis=-1)
    kappa = np.zeros_like(psi_u)
    span = s[..., 2:] - s[..., :-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = (psi_u[..., 2:] - psi_u[..., :-2]) / span
    kappa[..., 1:-1] = np.where(span > 1e-9, mid, 0.0)
    first = s[..., 1] - s[..., 0]
    last = s[..., -1] - s[..., -2]
    with np.errstate(divide="ignore", invalid="ignore"):
        k0 = (psi_u[..., 1] - psi_u[..., 0]) / first
        k1 = (psi_u[..., -1] - psi_u[..., -2]) / last
    kappa[..., 0] = np.where(first > 1e-9, k0, 0.0)
    kappa[..., -1] = np.where(last > 1e-9, k1, 0.0)
    return kappa


def jerk_mean_sq(a: np.ndarray, dt: float) -> np.ndarray:
    """Mean squared finite-difference jerk: sum over the N-1 consecutive
    acceleration differences divided by N acceleration samples."""
    a = np.asarray(a, dtype=float)
    j = np.diff(a, axis=-1) / dt
    return np.sum(j * j, axis=-1) / a.shape[-1]


def min_future_distance(rel_p: np.ndarray, rel_v: np.ndarray,
                        tau: float) -> np.ndarray:
    """Min over t in [0, tau] of |rel_p + rel_v t| (closed form)."""
    a2 = np.sum(rel_v * rel_v, axis=-1)
    dot = np.sum(rel_p * rel_v, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(a2 > 1e-12, -dot / np.maximum(a2, 1e-12), 0.0)
    t_star = np.clip(t_star, 0.0, tau)
    closest = rel_p + rel_v * t_star[..., None]
    return np.hypot(closest[..., 0], closest[..., 1])


def min_future_gap(ds: np.ndarray, dv: np.ndarray, tau: float) -> np.ndarray:
    """Min over t in [0, tau] of |ds - dv t| (piecewise linear, closed form)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_zero = np.where(np.abs(dv) > 1e-12, ds / np.where(dv == 0, 1.0, dv), -1.0)
    hit = (t_zero >= 0.0) & (t_zero <= tau)
    ends = np.minimum(np.abs(ds), np.abs(ds - dv * tau))
    return np.where(hit, 0.0, ends)


def align_other(other: Trajectory, n: int) -> dict:
    """Other-agent arrays on the first n ego time steps.

    Beyond the recording the agent is extrapolated at constant velocity from
    its final state (consistent with the features' own prediction model).
    """
    m = other.n
    if m >= n:
        x, y = other.x[:n].copy(), other.y[:n].copy()
        psi, v = other.psi[:n].copy(), other.v[:n].copy()
    else:
        extra = n - m
        tail = np.arange(1, extra + 1) * other.dt
        vx = other.v[-1] * np.cos(other.psi[-1])
        vy = other.v[-1] * np.sin(other.psi[-1])
        x = np.concatenate([other.x, other.x[-1] + vx * tail])
        y = np.concatenate([other.y, other.y[-1] + vy * tail])
        psi = np.concatenate([other.psi, np.full(extra, other.psi[-1])])
        v = np.concatenate([other.v, np.full(extra, other.v[-1])])
    return {"x": x, "y": y, "psi": psi, "v": v}


def arc_distance_to_point(x: np.ndarray, y: np.ndarray, point) -> np.ndarray:
    """Signed arc-length distance to `point` along each row's own polyline.

    Positive before reaching the projection of the point, negative after.
    The polyline is virtually extended straight beyond both ends so a point
    lying behind the start or past the end keeps its metric offset; a
    degenerate (stationary) polyline falls back to Euclidean distance.
    Shape in: (..., N); shape out: (..., N).
    """
    was_1d = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    ext = 1e5
    px, py = float(point[0]), float(point[1])
    dx = np.diff(x, axis=-1)
    dy = np.diff(y, axis=-1)
    seg = np.hypot(dx, dy)
    ok = (seg[:, 0] > 1e-9) & (seg[:, -1] > 1e-9)
    out = np.empty_like(x)
    if np.any(ok):
        u0x = dx[ok, 0] / seg[ok, 0]
        u0y = dy[ok, 0] / seg[ok, 0]
        u1x = dx[ok, -1] / seg[ok, -1]
        u1y = dy[ok, -1] / seg[ok, -1]
        xe = np.concatenate([(x[ok, 0] - ext * u0x)[:, None], x[ok],
                             (x[ok, -1] + ext * u1x)[:, None]], axis=-1)
        ye = np.concatenate([(y[ok, 0] - ext * u0y)[:, None], y[ok],
                             (y[ok, -1] + ext * u1y)[:, None]], axis=-1)
        s_proj, cum = project_onto_polyline_arrays(xe, ye, point)
        out[ok] = s_proj[:, None] - cum[:, 1:-1]
    for b in np.nonzero(~ok)[0]:
        nz = np.nonzero(seg[b] > 1e-9)[0]
        if nz.size == 0:
            out[b] = np.hypot(px - x[b], py - y[b])
            continue
        u0 = np.array([dx[b, nz[0]], dy[b, nz[0]]]) / seg[b, nz[0]]
        u1 = np.array([dx[b, nz[-1]], dy[b, nz[-1]]]) / seg[b, nz[-1]]
        xe = np.concatenate([[x[b, 0] - ext * u0[0]], x[b],
                             [x[b, -1] + ext * u1[0]]])
        ye = np.concatenate([[y[b, 0] - ext * u0[1]], y[b],
                             [y[b, -1] + ext * u1[1]]])
        s_proj, cum = project_onto_polyline_arrays(xe, ye, point)
        out[b] = s_proj - cum[1:-1]
    return out[0] if was_1d else out


def batch_features(x, y, psi, v, dt: float, scenario: Scenario,
                   tau_predict: float = DEFAULT_TAU_PREDICT) -> np.ndarray:
    """Feature matrix for a batch of equal-length trajectories.

    Arrays are (B, N). Returns (B, 4) or (B, 6) depending on whether the
    scenario has an interacting agent.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = v.shape[-1]
    dev = v - scenario.v_desired
    f_v = np.mean(dev * dev, axis=-1)
    a = lon_accel(v, dt)
    f_alon = np.mean(a * a, axis=-1)
    kappa = curvature_est(x, y, psi)
    alat = v * v * kappa
    f_alat = np.mean(alat * alat, axis=-1)
    f_j = jerk_mean_sq(a, dt)
    cols = [f_v, f_alon, f_alat, f_j]
    if scenario.other_agent is not None:
        other = align_other(scenario.other_agent, n)
        op = np.stack([other["x"], other["y"]], axis=-1)          # (N, 2)
        ov = other["v"][:, None] * np.stack([np.cos(other["psi"]),
                                             np.sin(other["psi"])], axis=-1)
        ep = np.stack([x, y], axis=-1)                            # (B, N, 2)
        ev = v[..., None] * np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        dmin = min_future_distance(ep - op[None], ev - ov[None], tau_predict)
        f_dist = np.mean(np.exp(-dmin), axis=-1)
        cols.append(f_dist)
        if scenario.conflict_point is not None:
            s_ego = arc_distance_to_point(x, y, scenario.conflict_point)
            s_oth = arc_distance_to_point(other["x"], other["y"],
                                          scenario.conflict_point)
            gap = min_future_gap(s_ego - s_oth[None], v - other["v"][None],
                                 tau_predict)
            f_int = np.mean(np.exp(-gap), axis=-1)
        else:
            f_int = np.zeros_like(f_dist)  # non-interactive flag case
        cols.append(f_int)
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# scalar feature ops

def f_speed(t: Trajectory, v_desired: float) -> float:
    """Mean squared deviation of speed from the limit."""
    dev = t.v - v_desired
    return float(np.mean(dev * dev))


def f_accel_lon(t: Trajectory) -> float:
    """Mean squared longitudinal acceleration (central differences)."""
    if t.n < 3:
        raise ParameterError("need N >= 3 for acceleration features")
    a = lon_accel(t.v, t.dt)
    return float(np.mean(a * a))


def f_accel_lat(t: Trajectory) -> float:
    """Mean squared lateral acceleration, a_lat = v^2 * curvature."""
    if t.n < 3:
        raise ParameterError("need N >= 3 for acceleration features")
    kappa = curvature_est(t.x, t.y, t.psi)
    alat = t.v * t.v * kappa
    return float(np.mean(alat * alat))


def f_jerk(t: Trajectory) -> float:
    """Mean squared longitudinal jerk."""
    if t.n < 4:
        raise ParameterError("need N >= 4 for the jerk feature")
    a = lon_accel(t.v, t.dt)
    return float(jerk_mean_sq(a, t.dt))


def f_future_distance(ego: Trajectory, other: Trajectory,
                      tau_predict: float = DEFAULT_TAU_PREDICT) -> float:
    """Mean of exp(-min distance within the prediction horizon).

    Both vehicles are extrapolated at their current speed along their
    current heading over [0, tau_predict].
    """
    if tau_predict <= 0:
        raise ParameterError("tau_predict must be positive")
    oth = align_other(other, ego.n)
    op = np.stack([oth["x"], oth["y"]], axis=-1)
    ov = oth["v"][:, None] * np.stack([np.cos(oth["psi"]),
                                       np.sin(oth["psi"])], axis=-1)
    ep = ego.positions
    ev = ego.v[:, None] * np.stack([np.cos(ego.psi), np.sin(ego.psi)], axis=-1)
    dmin = min_future_distance(ep - op, ev - ov, tau_predict)
    return float(np.mean(np.exp(-dmin)))


def f_future_interaction_distance(ego: Trajectory, other: Trajectory,
                                  scenario: Scenario,
                                  tau_predict: float = DEFAULT_TAU_PREDICT,
                                  ) -> Tuple[float, bool]:
    """Mean of exp(-min |s_ego - s_other|) where s is the signed arc-length
    distance to the conflict point along each vehicle's own path.

    Returns (value, interactive). A missing conflict point yields (0.0,
    False): the feature is inert for non-interactive geometry.
    """
    if scenario.conflict_point is None:
        return 0.0, False
    oth = align_other(other, ego.n)
    s_ego = arc_distance_to_point(ego.x, ego.y, scenario.conflict_point)
    s_oth = arc_distance_to_point(oth["x"], oth["y"], scenario.conflict_point)
    gap = min_future_gap(s_ego - s_oth, ego.v - oth["v"], tau_predict)
    return float(np.mean(np.exp(-gap))), True


def extract(t: Trajectory, scenario: Scenario,
            tau_predict: float = DEFAULT_TAU_PREDICT) -> FeatureVector:
    """Raw (unnormalized) feature vector; 6 entries when the scenario has an
    interacting agent, 4 otherwise."""
    row = batch_features(t.x[None], t.y[None], t.psi[None], t.v[None], t.dt,
                         scenario, tau_predict)[0]
    names = FEATURE_NAMES if scenario.other_agent is not None \
        else NONINTERACTIVE_FEATURES
    return FeatureVector(names=names, values=row)


def extract_matrix(trajectories: Sequence[Trajectory], scenario: Scenario,
                   tau_predict: float = DEFAULT_TAU_PREDICT) -> np.ndarray:
    """Stacked raw feature rows for trajectories sharing one scenario."""
    return np.stack([extract(t, scenario, tau_predict).values
                     for t in trajectories])


# ---------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class FeatureNormalizer:
    """Per-feature maxima over a fitting dataset; zero maxima become 1."""

    names: tuple
    max_per_feature: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.max_per_feature, dtype=float)
        vals.setflags(write=False)
        if np.any(vals <= 0):
            raise ParameterError("normalizer maxima must be positive")
        object.__setattr__(self, "max_per_feature", vals)
        object.__setattr__(self, "names", tuple(self.names))

    def normalize_matrix(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=float) / self.max_per_feature


def fit_normalizer(dataset) -> FeatureNormalizer:
    """Max over the dataset per feature; identically-zero features get 1.

    Accepts a list of FeatureVector (all with identical names) or a raw
    matrix plus names via fit_normalizer_matrix.
    """
    if len(dataset) == 0:
        raise ParameterError("cannot fit a normalizer on an empty dataset")
    names = dataset[0].names
    for fv in dataset:
        if fv.names != names:
            raise ParameterError("mixed feature dimensions in dataset")
    matrix = np.stack([fv.values for fv in dataset])
    return fit_normalizer_matrix(matrix, names)


def fit_normalizer_matrix(matrix: np.ndarray, names) -> FeatureNormalizer:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ParameterError("need a nonempty (K, F) feature matrix")
    maxima = matrix.max(axis=0)
    maxima = np.where(maxima > 0, maxima, 1.0)
    return FeatureNormalizer(names=tuple(names), max_per_feature=maxima)


def apply_normalizer(fv: FeatureVector, norm: FeatureNormalizer) -> FeatureVector:
    if fv.names != norm.names:
        raise ParameterError("feature vector and normalizer names differ")
    return FeatureVector(names=fv.names,
                         values=fv.values / norm.max_per_feature)
