"""Sampling-based maximum-entropy IRL: partition estimates, expected
feature counts, likelihood, gradient, and the training loop.

The trajectory distribution is Boltzmann: P(xi) proportional to
exp(beta * theta^T f(xi)), with the partition function per demonstration
approximated by the sum over its sample set (which contains the
demonstration itself, so log-likelihoods are always <= 0). Rewards act on
max-normalized features; the weights update is plain gradient ascent on the
average log-likelihood with an l1 subgradient, safeguarded by a
backtracking halving of the learning rate.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from .errors import ContractError, ParameterError
from .types import (Demonstration, FeatureVector, RewardParams, SampleSet,
                    TrainConfig)

_MAX_BACKTRACK = 40


@dataclass
class IterationRecord:
    k: int
    gap: float               # ||mean demo features - expected counts||_2
    log_likelihood: float    # mean over demonstrations


@dataclass
class TrainingState:
    """Final iterate plus the per-iteration history of the trainer."""

    theta: np.ndarray
    iteration: int
    gap: float
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = False


def reward(fv: FeatureVector, rp: RewardParams) -> float:
    """Linear reward theta . f for one (already normalized) feature vector."""
    if fv.dim != rp.dim:
        raise ParameterError(f"feature dim {fv.dim} != theta dim {rp.dim}")
    return float(rp.theta @ fv.values)


def _require_features(ss: SampleSet) -> np.ndarray:
    if ss.features is None:
        raise ContractError("sample set has no attached feature matrix; "
                            "run the feature extraction step first")
    return ss.features


def member_rewards(ss: SampleSet, rp: RewardParams) -> np.ndarray:
    """Rewards of every member under rp (features normalized by rp)."""
    raw = _require_features(ss)
    if raw.shape[1] != rp.dim:
        raise ParameterError(f"feature dim {raw.shape[1]} != theta dim {rp.dim}")
    return (raw / rp.normalizers) @ rp.theta


def log_partition(ss: SampleSet, rp: RewardParams) -> float:
    """log sum_m exp(beta R(tau_m)) with max-shift stabilization."""
    z = rp.beta * member_rewards(ss, rp)
    m = float(np.max(z))
    return m + float(np.log(np.sum(np.exp(z - m))))


def softmax_weights(ss: SampleSet, rp: RewardParams) -> np.ndarray:
    z = rp.beta * member_rewards(ss, rp)
    z = z - np.max(z)
    w = np.exp(z)
    return w / w.sum()


def expected_feature_counts(ss: SampleSet, rp: RewardParams) -> FeatureVector:
    """Boltzmann-weighted mean of the (normalized) member features."""
    raw = _require_features(ss)
    w = softmax_weights(ss, rp)
    names = ss.feature_names or feat.FEATURE_NAMES[:raw.shape[1]]
    return FeatureVector(names=tuple(names),
                         values=w @ (raw / rp.normalizers))


def log_likelihood(d: Demonstration, ss: SampleSet, rp: RewardParams) -> float:
    """beta R(demo) - log Z over the demo's sample set; always <= 0."""
    if ss.demo_index is None:
        raise ContractError("sample set does not contain its demonstration")
    if ss.demo_id != d.id:
        raise ContractError(f"sample set belongs to {ss.demo_id!r}, "
                            f"not {d.id!r}")
    r = rp.beta * member_rewards(ss, rp)
    m = float(np.max(r))
    return float(r[ss.demo_index] - (m + np.log(np.sum(np.exp(r - m)))))


def mean_log_likelihood(demos: Sequence[Demonstration],
                        sample_sets: Sequence[SampleSet],
                        rp: RewardParams) -> float:
    return float(np.mean([log_likelihood(d, ss, rp)
                          for d, ss in zip(demos, sample_sets)]))


def gradient(demos: Sequence[Demonstration], sample_sets: Sequence[SampleSet],
             rp: RewardParams, l1_lambda: float = 0.0) -> np.ndarray:
    """(beta/M) sum_i (f(xi_i) - f~(xi_i)) minus the l1 subgradient.

    f(xi_i) is the demonstration's normalized feature row of its own set;
    the subgradient of lambda*||theta||_1 is lambda*sign(theta) (0 at 0).
    """
    if len(demos) != len(sample_sets):
        raise ParameterError("demos and sample sets must pair up")
    acc = np.zeros(rp.dim)
    for d, ss in zip(demos, sample_sets):
        if ss.demo_index is None:
            raise ContractError("sample set does not contain its demonstration")
        raw = _require_features(ss)
        f_demo = raw[ss.demo_index] / rp.normalizers
        f_exp = expected_feature_counts(ss, rp).values
        acc += f_demo - f_exp
    g = rp.beta * acc / len(demos)
    if l1_lambda > 0:
        g = g - l1_lambda * np.sign(rp.theta)
    return g


def fit_union_normalizer(sample_sets: Sequence[SampleSet]) -> feat.FeatureNormalizer:
    """Normalizer over the union of all members (demonstrations included)."""
    mats = [_require_features(ss) for ss in sample_sets]
    names = sample_sets[0].feature_names or \
        feat.FEATURE_NAMES[:mats[0].shape[1]]
    return feat.fit_normalizer_matrix(np.vstack(mats), names)


def train(demos: Sequence[Demonstration], sample_sets: Sequence[SampleSet],
          cfg: TrainConfig, beta: float = 1.0,
          normalizer: Optional[feat.FeatureNormalizer] = None,
          theta0: Optional[np.ndarray] = None,
          ) -> Tuple[np.ndarray, TrainingState]:
    """Gradient-ascent loop: theta <- theta + alpha * gradient.

    Stops when the feature-count gap drops below cfg.epsilon or after
    cfg.max_iters iterations (returning the best iterate seen, flagged
    non-converged). The learning rate is halved within an iteration while
    the (l1-penalized) mean log-likelihood would decrease, and reset each
    iteration, so the objective never decreases across accepted steps.
    """
    if len(demos) == 0 or len(demos) != len(sample_sets):
        raise ParameterError("need matching nonempty demos and sample sets")
    for ss in sample_sets:
        if ss.demo_index is None:
            raise ContractError("every sample set must contain its "
                                "demonstration")
    if normalizer is None:
        normalizer = fit_union_normalizer(sample_sets)
    dim = _require_features(sample_sets[0]).shape[1]
    names = tuple(normalizer.names)
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float)

    demo_rows = np.stack([
        _require_features(ss)[ss.demo_index] / normalizer.max_per_feature
        for ss in sample_sets])
    f_bar = demo_rows.mean(axis=0)

    lam = cfg.l1_lambda

    def params(t):
        return RewardParams(theta=t, beta=beta,
                            normalizers=normalizer.max_per_feature, names=names)

    def objective(t):
        ll = mean_log_likelihood(demos, sample_sets, params(t))
        return ll, ll - lam * float(np.sum(np.abs(t)))

    state = TrainingState(theta=theta.copy(), iteration=0, gap=np.inf)
    ll, obj = objective(theta)
    best_obj, best_theta = obj, theta.copy()
    k = 0
    while True:
        rp = params(theta)
        f_tilde = np.mean([expected_feature_counts(ss, rp).values
                           for ss in sample_sets], axis=0)
        gap = float(np.linalg.norm(f_bar - f_tilde))
        state.history.append(IterationRecord(k=k, gap=gap, log_likelihood=ll))
        if gap < cfg.epsilon:
            state.converged = True
            break
        if k >= cfg.max_iters:
            break
        g = beta * (f_bar - f_tilde)
        if lam > 0:
            g = g - lam * np.sign(theta)
        alpha = cfg.alpha
        accepted = False
        for _ in range(_MAX_BACKTRACK):
            cand = theta + alpha * g
            ll_c, obj_c = objective(cand)
            if obj_c >= obj - 1e-15:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break  # stalled; keep best-so-far
        theta, ll, obj = cand, ll_c, obj_c
        if obj > best_obj:
            best_obj, best_theta = obj, theta.copy()
        k += 1

    if not state.converged:
        theta = best_theta if best_obj > obj else theta
    state.theta = theta.copy()
    state.iteration = k
    state.gap = state.history[-1].gap if state.history else np.inf
    return theta, state


# ---------------------------------------------------------------------------
# reward artifact (key-value text)

def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_reward_artifact(path, rp: RewardParams, converged: bool,
                          cfg_hash: str = "", method: str = "smirl",
                          extra: Optional[dict] = None) -> None:
    """Key-value text artifact: names, weights, beta, normalizers, hash.

    Weights are also reported divided by max|theta_j| for comparability.
    """
    scale = float(np.max(np.abs(rp.theta))) or 1.0
    lines = [
        "format = smirl-reward-v1",
        f"method = {method}",
        "feature_names = " + ",".join(rp.names),
        "theta = " + ",".join(repr(float(t)) for t in rp.theta),
        "theta_over_max_abs = " + ",".join(repr(float(t / scale))
                                           for t in rp.theta),
        f"beta = {rp.beta!r}",
        "normalizers = " + ",".join(repr(float(n)) for n in rp.normalizers),
        f"converged = {str(bool(converged)).lower()}",
        f"config_hash = {cfg_hash}",
    ]
    for key, val in sorted((extra or {}).items()):
        lines.append(f"{key} = {val}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_reward_artifact(path) -> Tuple[RewardParams, dict]:
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = line.split("=", 1)
            meta[key.strip()] = val.strip()
    names = tuple(meta["feature_names"].split(","))
    theta = np.array([float(t) for t in meta["theta"].split(",")])
    normalizers = np.array([float(n) for n in meta["normalizers"].split(",")])
    rp = RewardParams(theta=theta, beta=float(meta["beta"]),
                      normalizers=normalizers, names=names)
    return rp, meta
