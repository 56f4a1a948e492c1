"""Model-based baseline partition estimators: CIOC and Opt-IRL.

Both keep the maximum-entropy likelihood but estimate Z differently:

  CIOC    replaces the reward along a demonstration by its second-order
          Taylor expansion in the control sequence, turning Z into a
          Gaussian integral:
            log Z = beta R + (beta/2) g^T (-H)^{-1} g
                    + (U/2) log(2 pi / beta) - (1/2) log det(-H)
  Opt-IRL re-solves the forward problem each iteration and uses the single
          optimal trajectory: Z ~ exp(beta R(xi_opt)).

Gradients and Hessians over controls come from central finite differences
on batched rollouts. -H must be positive definite; indefinite Hessians are
shift-regularized, but an exactly flat direction (zero eigenvalue) leaves
the Gaussian integral divergent and raises DegenerateHessianError.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from .dynamics import VehicleParams, reconstruct_controls, rollout_arrays
from .errors import (DegenerateHessianError, ForwardOptimizationError,
                     ParameterError)
from .irl import IterationRecord, TrainingState
from .types import Demonstration, RewardParams, TrainConfig, Trajectory

FD_STEP = 1e-4        # control-space finite-difference step
SHIFT_EPS = 1e-6      # extra shift after making -H positive definite
SING_TOL_REL = 1e-9   # |eigenvalue| below this (relative) is a flat direction


@dataclass(frozen=True)
class LaplaceTerms:
    """Gradient and Hessian of the reward w.r.t. the control sequence."""

    g: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if H.shape != (g.size, g.size):
            raise ParameterError("H must be (U, U) matching g")
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "g", g)


@dataclass
class ControlDerivatives:
    """Per-feature control-space derivatives of one demonstration."""

    u0: np.ndarray        # (U,) flattened [a..., delta...]
    f0: np.ndarray        # (F,) raw features at u0
    jac: np.ndarray       # (F, U)
    hessians: np.ndarray  # (F, U, U), symmetric


def _flat_to_controls(u_flat: np.ndarray, m: int, vp: VehicleParams):
    a = np.clip(u_flat[..., :m], -vp.a_max_abs, vp.a_max_abs)
    delta = np.clip(u_flat[..., m:], -vp.delta_max, vp.delta_max)
    return a, delta


def _batch_reward_features(u_batch: np.ndarray, d: Demonstration,
                           vp: VehicleParams, tau_predict: float) -> np.ndarray:
    """Raw feature rows of rollouts from the demo's initial state."""
    m = d.ego.n - 1
    a, delta = _flat_to_controls(u_batch, m, vp)
    s0 = d.ego.initial_state
    arrays = rollout_arrays(np.array([s0.x, s0.y, s0.psi, s0.v]),
                            a, delta, d.ego.dt, vp)
    return feat.batch_features(arrays["x"], arrays["y"], arrays["psi"],
                               arrays["v"], d.ego.dt, d.scenario, tau_predict)


def feature_control_derivatives(d: Demonstration, vp: VehicleParams,
                                tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                                fd_step: float = FD_STEP) -> ControlDerivatives:
    """Jacobian and per-feature Hessians of raw features w.r.t. controls.

    Central differences; perturbations are clipped into the control bounds
    (a bound-saturated direction then contributes zero derivative).
    """
    a0, delta0 = reconstruct_controls(d.ego, vp)
    u0 = np.concatenate([a0, delta0])
    n_u = u0.size
    h = fd_step
    # evaluation plan: center, +-h e_j, and the four corners per (i < j)
    plans = [u0]
    for j in range(n_u):
        for sgn in (+1.0, -1.0):
            u = u0.copy()
            u[j] += sgn * h
            plans.append(u)
    pair_index = {}
    for i in range(n_u):
        for j in range(i + 1, n_u):
            pair_index[(i, j)] = len(plans)
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                u = u0.copy()
                u[i] += si * h
                u[j] += sj * h
                plans.append(u)
    batch = np.stack(plans)
    vals = _batch_reward_features(batch, d, vp, tau_predict)  # (B, F)
    n_f = vals.shape[1]
    f0 = vals[0]
    plus = vals[1:1 + 2 * n_u:2]
    minus = vals[2:2 + 2 * n_u:2]
    jac = (plus - minus).T / (2.0 * h)                        # (F, U)
    hess = np.empty((n_f, n_u, n_u))
    diag = (plus + minus - 2.0 * f0[None, :]).T / (h * h)
    for j in range(n_u):
        hess[:, j, j] = diag[:, j]
    for (i, j), base in pair_index.items():
        pp, pm, mp, mm = vals[base:base + 4]
        hij = (pp - pm - mp + mm) / (4.0 * h * h)
        hess[:, i, j] = hij
        hess[:, j, i] = hij
    return ControlDerivatives(u0=u0, f0=f0, jac=jac, hessians=hess)


def laplace_log_likelihood(g: np.ndarray, H: np.ndarray, beta: float = 1.0,
                           shift_eps: float = SHIFT_EPS,
                           sing_tol_rel: float = SING_TOL_REL) -> float:
    """Log-likelihood of a demo under the Gaussian (Laplace) partition.

    beta R - log Z with the quadratic model's Gaussian integral:
    -(beta/2) g^T (-H)^{-1} g - (U/2) log(2 pi / beta) + (1/2) log det(-H).
    """
    terms = LaplaceTerms(g=g, H=H)
    if not (np.isfinite(terms.g).all() and np.isfinite(terms.H).all()):
        raise DegenerateHessianError("non-finite reward gradient or Hessian")
    p = -terms.H
    w, v = np.linalg.eigh(p)
    scale = max(1.0, float(np.max(np.abs(w))))
    if float(np.min(np.abs(w))) < sing_tol_rel * scale:
        # an exactly flat direction cannot be rescued by shifting: the
        # Gaussian integral diverges along it
        raise DegenerateHessianError(
            "flat direction in the reward Hessian: Gaussian integral diverges")
    lam_min = float(w.min())
    if lam_min < 0:
        w = w + (-lam_min + shift_eps)
    gv = v.T @ terms.g
    quad = float(np.sum(gv * gv / w))
    logdet = float(np.sum(np.log(w)))
    n_u = terms.g.size
    return (-0.5 * beta * quad - 0.5 * n_u * math.log(2.0 * math.pi / beta)
            + 0.5 * logdet)


def laplace_terms(d: Demonstration, rp: RewardParams, vp: VehicleParams,
                  tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                  fd_step: float = FD_STEP,
                  derivs: Optional[ControlDerivatives] = None) -> LaplaceTerms:
    """Reward gradient/Hessian at the demo for the given weights."""
    if derivs is None:
        derivs = feature_control_derivatives(d, vp, tau_predict, fd_step)
    inv_norm = 1.0 / rp.normalizers
    g = derivs.jac.T @ (rp.theta * inv_norm)
    h = np.einsum("f,fuv->uv", rp.theta * inv_norm, derivs.hessians)
    return LaplaceTerms(g=g, H=h)


def cioc_log_likelihood(d: Demonstration, rp: RewardParams, vp: VehicleParams,
                        tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                        fd_step: float = FD_STEP,
                        reward_fn: Optional[Callable] = None) -> float:
    """CIOC likelihood of one demonstration.

    reward_fn, when given, maps a flat control vector to a scalar reward
    and replaces the feature-based reward (used by quadratic fixtures).
    """
    if reward_fn is not None:
        a0, delta0 = reconstruct_controls(d.ego, vp)
        u0 = np.concatenate([a0, delta0])
        g, h = _fd_gradient_hessian(reward_fn, u0, fd_step)
        return laplace_log_likelihood(g, h, rp.beta)
    terms = laplace_terms(d, rp, vp, tau_predict, fd_step)
    return laplace_log_likelihood(terms.g, terms.H, rp.beta)


def _fd_gradient_hessian(fn: Callable, u0: np.ndarray, h: float):
    n = u0.size
    g = np.empty(n)
    hess = np.empty((n, n))
    f0 = fn(u0)
    for i in range(n):
        up, um = u0.copy(), u0.copy()
        up[i] += h
        um[i] -= h
        fp, fm = fn(up), fn(um)
        g[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp + fm - 2 * f0) / (h * h)
    for i in range(n):
        for j in range(i + 1, n):
            upp, upm, ump, umm = (u0.copy() for _ in range(4))
            upp[[i, j]] += h
            umm[[i, j]] -= h
            upm[i] += h
            upm[j] -= h
            ump[i] -= h
            ump[j] += h
            val = (fn(upp) - fn(upm) - fn(ump) + fn(umm)) / (4 * h * h)
            hess[i, j] = hess[j, i] = val
    return g, hess


# ---------------------------------------------------------------------------
# Opt-IRL forward optimizer

@dataclass(frozen=True)
class ForwardOptConfig:
    iterations: int = 500
    step: float = 1e-2
    fd_step: float = 1e-4
    backtracking: bool = True


def forward_optimize(d: Demonstration, rp: RewardParams, vp: VehicleParams,
                     opt_cfg: ForwardOptConfig = ForwardOptConfig(),
                     tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                     ) -> Trajectory:
    """Projected gradient ascent on the control sequence.

    Starts from the demo's reconstructed controls; controls are clipped to
    the vehicle bounds after every step. Runs the full iteration budget.
    """
    m = d.ego.n - 1
    a0, delta0 = reconstruct_controls(d.ego, vp)
    u = np.concatenate([a0, delta0])
    lo = np.concatenate([np.full(m, -vp.a_max_abs), np.full(m, -vp.delta_max)])
    hi = -lo
    inv_norm = 1.0 / rp.normalizers

    def reward_of(u_batch):
        f = _batch_reward_features(u_batch, d, vp, tau_predict)
        return (f * inv_norm) @ rp.theta

    r_cur = float(reward_of(u[None])[0])
    step = opt_cfg.step
    n_u = u.size
    eye = np.eye(n_u)
    for _ in range(opt_cfg.iterations):
        probes = np.vstack([u[None] + opt_cfg.fd_step * eye,
                            u[None] - opt_cfg.fd_step * eye])
        vals = reward_of(probes)
        grad = (vals[:n_u] - vals[n_u:]) / (2 * opt_cfg.fd_step)
        cand = np.clip(u + step * grad, lo, hi)
        r_new = float(reward_of(cand[None])[0])
        if not math.isfinite(r_new):
            raise ForwardOptimizationError("forward optimizer diverged")
        if opt_cfg.backtracking and r_new < r_cur:
            step *= 0.5
            continue
        u, r_cur = cand, r_new
    a, delta = _flat_to_controls(u, m, vp)
    s0 = d.ego.initial_state
    arrays = rollout_arrays(np.array([s0.x, s0.y, s0.psi, s0.v]),
                            a[None], delta[None], d.ego.dt, vp)
    return Trajectory(dt=d.ego.dt, x=arrays["x"][0], y=arrays["y"][0],
                      psi=arrays["psi"][0], v=arrays["v"][0],
                      a=a, delta=delta)


def optirl_step(demos: Sequence[Demonstration], rp: RewardParams,
                vp: VehicleParams,
                forward_opt_cfg: ForwardOptConfig = ForwardOptConfig(),
                tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                ) -> Tuple[np.ndarray, List[Trajectory]]:
    """Feature-matching gradient against the per-demo optimal trajectory.

    (beta/M) sum_i (f(xi_i) - f(xi_opt_i)) over normalized features;
    returns the gradient together with the optima for logging.
    """
    opts = [forward_optimize(d, rp, vp, forward_opt_cfg, tau_predict)
            for d in demos]
    inv_norm = 1.0 / rp.normalizers
    acc = np.zeros(rp.dim)
    for d, opt in zip(demos, opts):
        f_demo = feat.extract(d.ego, d.scenario, tau_predict).values * inv_norm
        f_opt = feat.extract(opt, d.scenario, tau_predict).values * inv_norm
        acc += f_demo - f_opt
    return rp.beta * acc / len(demos), opts


# ---------------------------------------------------------------------------
# baseline training loops

def _demo_normalizer(demos: Sequence[Demonstration],
                     tau_predict: float) -> feat.FeatureNormalizer:
    fvs = [feat.extract(d.ego, d.scenario, tau_predict) for d in demos]
    return feat.fit_normalizer(fvs)


def train_cioc(demos: Sequence[Demonstration], cfg: TrainConfig,
               vp: VehicleParams, beta: float = 1.0,
               tau_predict: float = feat.DEFAULT_TAU_PREDICT,
               theta0: Optional[np.ndarray] = None,
               derivative_provider: Optional[Callable] = None,
               normalizer: Optional[feat.FeatureNormalizer] = None,
               ) -> Tuple[np.ndarray, TrainingState]:
    """Gradient ascent on the summed Laplace log-likelihood.

    Control derivatives are computed once per demo (they do not depend on
    theta); the theta-gradient uses central differences over the few reward
    weights. theta0 defaults to -0.5 per feature: the Laplace model is
    undefined at an exactly flat reward, so a zero start is outside its
    domain.
    """
    if normalizer is None:
        normalizer = _demo_normalizer(demos, tau_predict)
    inv_norm = 1.0 / normalizer.max_per_feature
    dim = inv_norm.size
    provider = derivative_provider or (
        lambda d: feature_control_derivatives(d, vp, tau_predict))
    derivs = [provider(d) for d in demos]
    # normalized-feature derivatives
    jacs = [dv.jac * inv_norm[:, None] for dv in derivs]
    hesses = [dv.hessians * inv_norm[:, None, None] for dv in derivs]

    def mean_ll(theta):
        tot = 0.0
        for jac, hs in zip(jacs, hesses):
            g = jac.T @ theta
            h = np.einsum("f,fuv->uv", theta, hs)
            tot += laplace_log_likelihood(g, h, beta)
        return tot / len(demos)

    theta = (np.full(dim, -0.5) if theta0 is None
             else np.asarray(theta0, dtype=float))
    state = TrainingState(theta=theta.copy(), iteration=0, gap=np.inf)
    h_t = 1e-4

    def probe(t):
        # an eigenvalue crossing zero at the probed point is a measure-zero
        # coincidence; nudging the step recovers it
        for h_try in (0.0, h_t / 3.0, -h_t / 3.0):
            try:
                return mean_ll(t + h_try)
            except DegenerateHessianError:
                continue
        raise DegenerateHessianError("reward Hessian degenerate around the "
                                     "current weights")

    ll = probe(theta)
    k = 0
    while True:
        grad = np.empty(dim)
        for j in range(dim):
            tp, tm = theta.copy(), theta.copy()
            tp[j] += h_t
            tm[j] -= h_t
            grad[j] = (probe(tp) - probe(tm)) / (2 * h_t)
        gap = float(np.linalg.norm(grad))
        state.history.append(IterationRecord(k=k, gap=gap, log_likelihood=ll))
        if gap < cfg.epsilon:
            state.converged = True
            break
        if k >= cfg.max_iters:
            break
        alpha = cfg.alpha
        accepted = False
        for _ in range(40):
            cand = theta + alpha * grad
            try:
                ll_c = mean_ll(cand)
            except DegenerateHessianError:
                alpha *= 0.5
                continue
            if ll_c >= ll - 1e-15:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        theta, ll = cand, ll_c
        k += 1
    state.theta = theta.copy()
    state.iteration = k
    state.gap = state.history[-1].gap if state.history else np.inf
    return theta, state


def train_optirl(demos: Sequence[Demonstration], cfg: TrainConfig,
                 vp: VehicleParams, beta: float = 1.0,
                 tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                 forward_opt_cfg: ForwardOptConfig = ForwardOptConfig(),
                 theta0: Optional[np.ndarray] = None,
                 normalizer: Optional[feat.FeatureNormalizer] = None,
                 ) -> Tuple[np.ndarray, TrainingState]:
    """Fixed-rate feature matching against re-optimized trajectories.

    Each iteration re-solves the forward problem per demo under the current
    weights (the dominant cost of this baseline) and steps theta along the
    feature gap, converging when the gap norm drops below cfg.epsilon.
    """
    if normalizer is None:
        normalizer = _demo_normalizer(demos, tau_predict)
    dim = normalizer.max_per_feature.size
    names = tuple(normalizer.names)
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float)
    inv_norm = 1.0 / normalizer.max_per_feature
    demo_feats = np.stack([feat.extract(d.ego, d.scenario, tau_predict).values
                           for d in demos]) * inv_norm
    state = TrainingState(theta=theta.copy(), iteration=0, gap=np.inf)
    k = 0
    while True:
        rp = RewardParams(theta=theta, beta=beta,
                          normalizers=normalizer.max_per_feature, names=names)
        grad, opts = optirl_step(demos, rp, vp, forward_opt_cfg, tau_predict)
        gap = float(np.linalg.norm(grad / beta))
        opt_feats = np.stack([feat.extract(o, d.scenario, tau_predict).values
                              for o, d in zip(opts, demos)]) * inv_norm
        # surrogate likelihood with Z ~ exp(beta R(xi_opt))
        ll = float(np.mean(beta * (demo_feats @ theta - opt_feats @ theta)))
        state.history.append(IterationRecord(k=k, gap=gap, log_likelihood=ll))
        if gap < cfg.epsilon:
            state.converged = True
            break
        if k >= cfg.max_iters:
            break
        theta = theta + cfg.alpha * grad
        k += 1
    state.theta = theta.copy()
    state.iteration = k
    state.gap = state.history[-1].gap if state.history else np.inf
    return theta, state


def train_baseline(method: str, demos: Sequence[Demonstration],
                   cfg: TrainConfig, vp: Optional[VehicleParams] = None,
                   beta: float = 1.0,
                   tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                   forward_opt_cfg: ForwardOptConfig = ForwardOptConfig(),
                   ) -> Tuple[np.ndarray, TrainingState]:
    """Train one of the baseline estimators ('cioc' or 'optirl')."""
    vp = vp or VehicleParams()
    if method == "cioc":
        return train_cioc(demos, cfg, vp, beta, tau_predict)
    if method == "optirl":
        return train_optirl(demos, cfg, vp, beta, tau_predict, forward_opt_cfg)
    raise ParameterError(f"unknown baseline method {method!r}")
