"""Discrete-time kinematic bicycle model and feasibility checks.

Update rule (period dt):
    x'   = x + v cos(psi) dt
    y'   = y + v sin(psi) dt
    psi' = psi + (v / wheelbase) tan(delta) dt      (wrapped)
    v'   = max(0, v + a dt)

Speed is clamped at zero: all supported scenarios are forward driving.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .geometry import menger_curvature, wrap_angle
from .types import Control, State, Trajectory

_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.7    # m
    delta_max: float = 0.6    # rad
    a_max_abs: float = 8.0    # m/s^2

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ParameterError("wheelbase must be positive")

    @property
    def kappa_max(self) -> float:
        """Maximum path curvature reachable at full steering lock."""
        return float(np.tan(self.delta_max) / self.wheelbase)


def step(s: State, u: Control, dt: float, p: VehicleParams) -> State:
    """One kinematic bicycle update."""
    if not (dt > 0 and np.isfinite(dt)):
        raise ParameterError(f"dt must be positive, got {dt}")
    if abs(u.a) > p.a_max_abs + _BOUND_EPS:
        raise ParameterError(f"|a|={abs(u.a)} exceeds a_max_abs={p.a_max_abs}")
    if abs(u.delta) > p.delta_max + _BOUND_EPS:
        raise ParameterError(f"|delta|={abs(u.delta)} exceeds delta_max={p.delta_max}")
    x = s.x + s.v * np.cos(s.psi) * dt
    y = s.y + s.v * np.sin(s.psi) * dt
    psi = wrap_angle(s.psi + (s.v / p.wheelbase) * np.tan(u.delta) * dt)
    v = max(0.0, s.v + u.a * dt)
    return State(x, y, psi, v)


def rollout(s0: State, controls: Sequence[Control], dt: float,
            p: VehicleParams) -> Trajectory:
    """Iterate `step` over a control sequence; controls are attached."""
    if len(controls) == 0:
        raise ParameterError("rollout needs a nonempty control sequence")
    a = np.array([u.a for u in controls])
    delta = np.array([u.delta for u in controls])
    arrays = rollout_arrays(np.array([s0.x, s0.y, s0.psi, s0.v]),
                            a[None, :], delta[None, :], dt, p)
    return Trajectory(dt=dt, x=arrays["x"][0], y=arrays["y"][0],
                      psi=arrays["psi"][0], v=arrays["v"][0], a=a, delta=delta)


def rollout_arrays(x0, a, delta, dt: float, p: VehicleParams) -> dict:
    """Vectorized rollout over a batch of control sequences.

    x0: (4,) or (B, 4) initial [x, y, psi, v]; a, delta: (B, N-1).
    Returns dict of (B, N) arrays. Control bounds are checked in bulk.
    """
    if not (dt > 0 and np.isfinite(dt)):
        raise ParameterError(f"dt must be positive, got {dt}")
    a = np.asarray(a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if a.ndim != 2 or a.shape != delta.shape or a.shape[1] < 1:
        raise ParameterError("controls must be (B, N-1) with N >= 2")
    if np.max(np.abs(a), initial=0.0) > p.a_max_abs + _BOUND_EPS:
        raise ParameterError("acceleration exceeds a_max_abs")
    if np.max(np.abs(delta), initial=0.0) > p.delta_max + _BOUND_EPS:
        raise ParameterError("steering exceeds delta_max")
    b, m = a.shape
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (b, 4))
    x = np.empty((b, m + 1))
    y = np.empty((b, m + 1))
    psi = np.empty((b, m + 1))
    v = np.empty((b, m + 1))
    x[:, 0], y[:, 0], psi[:, 0], v[:, 0] = x0.T
    tan_delta = np.tan(delta)
    for k in range(m):
        x[:, k + 1] = x[:, k] + v[:, k] * np.cos(psi[:, k]) * dt
        y[:, k + 1] = y[:, k] + v[:, k] * np.sin(psi[:, k]) * dt
        psi[:, k + 1] = psi[:, k] + (v[:, k] / p.wheelbase) * tan_delta[:, k] * dt
        v[:, k + 1] = np.maximum(0.0, v[:, k] + a[:, k] * dt)
    psi = wrap_angle(psi)
    return {"x": x, "y": y, "psi": psi, "v": v}


def reconstruct_controls(t: Trajectory, p: VehicleParams):
    """Recover (a, delta) from a trajectory by inverting the update rule.

    Rolling the result out from t.initial_state reproduces the input exactly
    (up to float rounding) when the input itself came from a rollout.
    """
    a = np.diff(t.v) / t.dt
    dpsi = wrap_angle(np.diff(t.psi))
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.arctan(p.wheelbase * dpsi / (t.v[:-1] * t.dt))
    delta = np.where(t.v[:-1] * t.dt > 1e-12, delta, 0.0)
    a = np.clip(a, -p.a_max_abs, p.a_max_abs)
    delta = np.clip(delta, -p.delta_max, p.delta_max)
    return a, delta


def check_feasible(t: Trajectory, p: VehicleParams, tol: float = 1e-6,
                   curvature_window: float = 1.0) -> bool:
    """True iff implied accelerations and curvature stay within bounds +- tol.

    Accelerations come from chord speeds |p_{i+1} - p_i| / dt; curvature from
    Menger circumradius over point triplets strided so the spanned arc is at
    least `curvature_window` (sub-step chords on piecewise-linear paths are
    vertex-noise dominated at low speed).
    """
    pos = t.positions
    chords = np.diff(pos, axis=0)
    chord_len = np.hypot(chords[:, 0], chords[:, 1])
    v_disp = chord_len / t.dt
    if len(v_disp) >= 2:
        accel = np.diff(v_disp) / t.dt
        if np.max(np.abs(accel), initial=0.0) > p.a_max_abs + tol:
            return False
    # curvature: pick stride so each half-arc spans >= curvature_window
    cum = np.concatenate([[0.0], np.cumsum(chord_len)])
    total = cum[-1]
    if total < 1e-9:
        return True  # stationary
    mean_chord = total / len(chord_len)
    stride = max(1, int(np.ceil(curvature_window / max(mean_chord, 1e-9))))
    kappa_bound = p.kappa_max + tol
    n = t.n
    for i in range(0, n - 2 * stride):
        j, k = i + stride, i + 2 * stride
        if cum[k] - cum[i] < 1e-6:
            continue
        if menger_curvature(pos[i], pos[j], pos[k]) > kappa_bound:
            return False
    return True
