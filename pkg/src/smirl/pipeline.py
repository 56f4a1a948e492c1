"""End-to-end orchestration shared by the CLI and the test harness."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence, Tuple

import numpy as np

from . import features as feat
from . import irl, redistribution, sampler
from .dynamics import VehicleParams
from .errors import SamplingError
from .types import (Demonstration, RewardParams, SampleSet, SamplerConfig,
                    TrainConfig)


def attach_features(ss: SampleSet, tau_predict: float = feat.DEFAULT_TAU_PREDICT
                    ) -> SampleSet:
    """Compute and cache the raw feature matrix when missing."""
    if ss.features is not None:
        return ss
    raw = feat.extract_matrix(ss.members, ss.scenario, tau_predict)
    return ss.with_features(raw, feat.FEATURE_NAMES[:raw.shape[1]])


def _sample_one(args):
    demo, cfg, vp = args
    try:
        return sampler.generate_sample_set(demo, cfg, vp), None
    except SamplingError as exc:
        return None, str(exc)


def sample_corpus(demos: Sequence[Demonstration], cfg: SamplerConfig,
                  vp: VehicleParams, jobs: int = 1
                  ) -> Tuple[List[SampleSet], List[Tuple[str, str]]]:
    """Sample sets per demonstration; failures are collected, not raised.

    With jobs > 1 demonstrations are distributed over worker processes;
    outputs keep the input order, so results match the sequential run.
    """
    work = [(d, cfg, vp) for d in demos]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sample_one, work, chunksize=4))
    else:
        outcomes = [_sample_one(w) for w in work]
    sets, failures = [], []
    for d, (ss, err) in zip(demos, outcomes):
        if ss is None:
            failures.append((d.id, err))
        else:
            sets.append(ss)
    return sets, failures


def train_smirl(demos: Sequence[Demonstration],
                sample_sets: Sequence[SampleSet], cfg: TrainConfig,
                beta: float = 1.0, bins: int = redistribution.DEFAULT_BINS,
                redistribute: bool = True,
                tau_predict: float = feat.DEFAULT_TAU_PREDICT,
                ) -> Tuple[np.ndarray, irl.TrainingState, RewardParams]:
    """Feature extraction + normalization (+ redistribution) + training.

    The normalizer is fit on the union of demonstrations and samples; with
    redistribute=True each sample set is re-balanced in normalized feature
    space before the trainer runs (bins=0 also disables it).
    """
    by_id = {ss.demo_id: ss for ss in sample_sets}
    ordered = [by_id[d.id] for d in demos]
    ordered = [attach_features(ss, tau_predict) for ss in ordered]
    norm = irl.fit_union_normalizer(ordered)
    if redistribute and bins > 0:
        ordered = [redistribution.redistribute(ss, norm, bins_per_dim=bins,
                                               seed=cfg.seed + i)
                   for i, ss in enumerate(ordered)]
    theta, state = irl.train(demos, ordered, cfg, beta=beta, normalizer=norm)
    rp = RewardParams(theta=theta, beta=beta,
                      normalizers=norm.max_per_feature, names=norm.names)
    return theta, state, rp
