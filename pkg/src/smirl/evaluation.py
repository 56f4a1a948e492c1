"""Prediction metrics and cross-method comparison reports.

Three metrics: per-feature relative deviation of the best predicted
trajectory from the ground truth (FD), mean Euclidean distance between the
stacked positions (MED), and the Boltzmann likelihood of the ground truth
against the shared sample set. A method "wins" a test case when it assigns
the ground truth the highest likelihood among the compared methods.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from . import irl
from .errors import ContractError, ParameterError, PredictionError
from .types import Demonstration, FeatureVector, RewardParams, SampleSet, Trajectory


def predict_best(d: Demonstration, ss: SampleSet, rp: RewardParams
                 ) -> Tuple[Trajectory, int]:
    """Argmax-reward member of the sample set, excluding the demonstration.

    Ties break toward the lowest member index. Returns (trajectory, index).
    """
    rewards = irl.member_rewards(ss, rp)
    order = np.arange(ss.size)
    if ss.demo_index is not None:
        mask = order != ss.demo_index
        order = order[mask]
    if order.size == 0:
        raise PredictionError("sample set contains only the demonstration")
    best = int(order[np.argmax(rewards[order])])
    return ss.members[best], best


def med_from_positions(gt: np.ndarray, pred: np.ndarray) -> float:
    """(1/N) * ||stacked gt - pred positions||_2 over (N, 2) arrays."""
    gt = np.atleast_2d(np.asarray(gt, dtype=float))
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    if gt.shape != pred.shape:
        raise ParameterError(f"position shapes differ: {gt.shape} vs "
                             f"{pred.shape}")
    n = gt.shape[0]
    return float(np.linalg.norm((gt - pred).ravel()) / n)


def resample_to_times(t: Trajectory, times: np.ndarray) -> np.ndarray:
    """Positions linearly interpolated at the given times.

    Times beyond the trajectory hold the terminal position.
    """
    own = t.times
    x = np.interp(times, own, t.x)
    y = np.interp(times, own, t.y)
    return np.stack([x, y], axis=1)


def mean_euclidean_distance(gt: Trajectory, pred: Trajectory) -> float:
    """Per-trajectory MED; pred is resampled onto gt's timestamps."""
    pred_pos = resample_to_times(pred, gt.times)
    return med_from_positions(gt.positions, pred_pos)


def per_step_rms(gt: Trajectory, pred: Trajectory) -> float:
    """Secondary, more interpretable column: RMS point distance per step.

    Equals MED * sqrt(N): the plain 1/N weighting on a stacked 2-norm
    shrinks with trajectory length, RMS does not.
    """
    pred_pos = resample_to_times(pred, gt.times)
    d = gt.positions - pred_pos
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


@dataclass
class FeatureDeviation:
    """Per-feature mean and std of the relative deviations, plus the count
    of terms skipped because the ground-truth feature was zero."""

    names: tuple
    mean: np.ndarray
    std: np.ndarray
    n_cases: int
    n_skipped: np.ndarray


def feature_deviation(cases: Sequence[Tuple[FeatureVector, FeatureVector, int]]
                      ) -> FeatureDeviation:
    """Relative feature deviation over (gt, pred, n_steps) cases.

    Each case contributes (1/N_i) * |f_gt - f_pred| / f_gt elementwise;
    entries with f_gt = 0 are skipped and counted separately.
    """
    if not cases:
        raise ParameterError("feature_deviation needs at least one case")
    names = cases[0][0].names
    dim = len(names)
    vals = np.full((len(cases), dim), np.nan)
    for row, (gt, pred, n_steps) in enumerate(cases):
        if gt.names != names or pred.names != names:
            raise ParameterError("mixed feature dimensions across cases")
        if n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        ok = gt.values != 0
        vals[row, ok] = (np.abs(gt.values[ok] - pred.values[ok])
                         / gt.values[ok]) / n_steps
    n_skipped = np.sum(np.isnan(vals), axis=0).astype(int)
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(vals, axis=0)
        std = np.nanstd(vals, axis=0)
    return FeatureDeviation(names=names, mean=mean, std=std,
                            n_cases=len(cases), n_skipped=n_skipped)


def membership_probabilities(ss: SampleSet, rp: RewardParams) -> np.ndarray:
    """Boltzmann probability of each member; sums to 1."""
    return irl.softmax_weights(ss, rp)


def trajectory_likelihood(d: Demonstration, ss: SampleSet, rp: RewardParams,
                          tau_predict: float = feat.DEFAULT_TAU_PREDICT
                          ) -> float:
    """P(xi) = exp(beta R(xi)) / (exp(beta R(xi)) + sum_m exp(beta R(tau_m))).

    The sample set must exclude the demonstration (its term is added
    explicitly); the result lies strictly in (0, 1).
    """
    if ss.demo_index is not None:
        raise ContractError("sample set must exclude the demonstration; "
                            "use SampleSet.without_demo()")
    return math.exp(log_trajectory_likelihood(d, ss, rp, tau_predict))


def log_trajectory_likelihood(d: Demonstration, ss: SampleSet,
                              rp: RewardParams,
                              tau_predict: float = feat.DEFAULT_TAU_PREDICT
                              ) -> float:
    if ss.demo_index is not None:
        raise ContractError("sample set must exclude the demonstration")
    f_demo = feat.extract(d.ego, d.scenario, tau_predict).values
    r_demo = rp.beta * float((f_demo / rp.normalizers) @ rp.theta)
    r_all = np.concatenate([[r_demo], rp.beta * irl.member_rewards(ss, rp)])
    m = float(np.max(r_all))
    return float(r_demo - (m + np.log(np.sum(np.exp(r_all - m)))))


@dataclass
class CaseRecord:
    case_id: str
    fd: Optional[np.ndarray]      # per-feature relative deviation / N
    med: float
    likelihood: float
    log_likelihood: float
    med_rms: float = 0.0          # per-step RMS companion of med


@dataclass
class EvalReport:
    """Per-case metric records for one method on one test set."""

    method: str
    feature_names: tuple
    cases: List[CaseRecord]
    samples_fingerprint: str
    fd_summary: Optional[FeatureDeviation] = None

    @property
    def case_ids(self) -> list:
        return [c.case_id for c in self.cases]

    @property
    def sum_log_likelihood(self) -> float:
        return float(sum(c.log_likelihood for c in self.cases))

    @property
    def mean_med(self) -> float:
        return float(np.mean([c.med for c in self.cases]))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "feature_names": list(self.feature_names),
            "samples_fingerprint": self.samples_fingerprint,
            "cases": [{
                "id": c.case_id,
                "fd": None if c.fd is None else [None if np.isnan(v) else float(v)
                                                 for v in c.fd],
                "med": c.med,
                "med_rms": c.med_rms,
                "likelihood": c.likelihood,
                "log_likelihood": c.log_likelihood,
            } for c in self.cases],
            "summary": {
                "sum_log_likelihood": self.sum_log_likelihood,
                "mean_med": self.mean_med,
                "mean_med_rms": float(np.mean([c.med_rms
                                               for c in self.cases])),
                "fd_mean": (None if self.fd_summary is None
                            else self.fd_summary.mean.tolist()),
                "fd_std": (None if self.fd_summary is None
                           else self.fd_summary.std.tolist()),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        cases = [CaseRecord(case_id=c["id"],
                            fd=(None if c["fd"] is None else
                                np.array([np.nan if v is None else v
                                          for v in c["fd"]])),
                            med=c["med"], likelihood=c["likelihood"],
                            log_likelihood=c["log_likelihood"],
                            med_rms=c.get("med_rms", 0.0))
                 for c in d["cases"]]
        return cls(method=d["method"], feature_names=tuple(d["feature_names"]),
                   cases=cases, samples_fingerprint=d["samples_fingerprint"])


def sample_sets_fingerprint(sample_sets: Sequence[SampleSet]) -> str:
    """Content hash over member geometry; guards cross-method comparisons."""
    h = hashlib.sha256()
    for ss in sample_sets:
        h.update(ss.demo_id.encode())
        for t in ss.members:
            h.update(np.ascontiguousarray(t.x).tobytes())
            h.update(np.ascontiguousarray(t.y).tobytes())
    return h.hexdigest()[:16]


def evaluate_method(method: str, demos: Sequence[Demonstration],
                    sample_sets: Sequence[SampleSet], rp: RewardParams,
                    tau_predict: float = feat.DEFAULT_TAU_PREDICT
                    ) -> EvalReport:
    """Full per-case evaluation of one trained reward on a test set."""
    if len(demos) != len(sample_sets):
        raise ParameterError("demos and sample sets must pair up")
    records = []
    fd_cases = []
    for d, ss in zip(demos, sample_sets):
        pred, _ = predict_best(d, ss, rp)
        gt_fv = feat.extract(d.ego, d.scenario, tau_predict)
        pred_fv = feat.extract(pred, d.scenario, tau_predict)
        fd_cases.append((gt_fv, pred_fv, d.ego.n))
        med = mean_euclidean_distance(d.ego, pred)
        rms = per_step_rms(d.ego, pred)
        ll = log_trajectory_likelihood(d, ss.without_demo(), rp, tau_predict)
        ok = gt_fv.values != 0
        fd_row = np.full(gt_fv.dim, np.nan)
        fd_row[ok] = (np.abs(gt_fv.values[ok] - pred_fv.values[ok])
                      / gt_fv.values[ok]) / d.ego.n
        records.append(CaseRecord(case_id=d.id, fd=fd_row, med=med,
                                  likelihood=math.exp(ll), log_likelihood=ll,
                                  med_rms=rms))
    return EvalReport(method=method, feature_names=rp.names, cases=records,
                      samples_fingerprint=sample_sets_fingerprint(sample_sets),
                      fd_summary=feature_deviation(fd_cases))


@dataclass
class Comparison:
    methods: list
    case_ids: list
    winners: list            # method name per case
    ties: list               # case ids with tied best likelihood
    win_counts: dict
    sum_log_likelihood: dict

    def to_dict(self) -> dict:
        return {"methods": self.methods, "case_ids": self.case_ids,
                "winners": self.winners, "ties": self.ties,
                "win_counts": self.win_counts,
                "sum_log_likelihood": self.sum_log_likelihood}


def compare(reports: Sequence[EvalReport]) -> Comparison:
    """Win counts and summed log-likelihood across methods.

    All reports must cover the same test cases with the same sample sets.
    Ties go to the earliest method in the argument order and are flagged.
    """
    if not reports:
        raise ParameterError("compare needs at least one report")
    ids = reports[0].case_ids
    fp = reports[0].samples_fingerprint
    for rep in reports[1:]:
        if rep.case_ids != ids:
            raise ParameterError("reports cover different test cases")
        if rep.samples_fingerprint != fp:
            raise ParameterError("reports were computed on different sample "
                                 "sets")
    methods = [rep.method for rep in reports]
    winners, ties = [], []
    for i, cid in enumerate(ids):
        lls = [rep.cases[i].log_likelihood for rep in reports]
        best = max(lls)
        idx = [j for j, v in enumerate(lls) if v == best]
        winners.append(methods[idx[0]])
        if len(idx) > 1:
            ties.append(cid)
    win_counts = {m: winners.count(m) for m in methods}
    sums = {rep.method: rep.sum_log_likelihood for rep in reports}
    return Comparison(methods=methods, case_ids=ids, winners=winners,
                      ties=ties, win_counts=win_counts,
                      sum_log_likelihood=sums)


def render_comparison(cmp: Comparison) -> str:
    """Plain-text summary table."""
    lines = [f"{'method':<12} {'win count':>10} {'log likelihood':>16}"]
    for m in cmp.methods:
        lines.append(f"{m:<12} {cmp.win_counts[m]:>10d} "
                     f"{cmp.sum_log_likelihood[m]:>16.3f}")
    if cmp.ties:
        lines.append(f"ties ({len(cmp.ties)} cases): {', '.join(cmp.ties)}")
    return "\n".join(lines)
