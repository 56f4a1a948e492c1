"""Re-distribution of sample sets toward uniform feature-space coverage.

Normalized features are binned on an equal-width grid; each occupied bin is
resampled to the median occupied-bin count (down-sampling without
replacement, up-sampling by drawing the deficit with replacement). Euclidean
structure of the feature space defines similarity: nothing new is
synthesized, members are only re-weighted by repetition.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import features as feat
from .errors import ParameterError
from .types import SampleSet

DEFAULT_BINS = 5


@dataclass(frozen=True)
class BinGrid:
    """Equal-width binning of a normalized feature matrix."""

    bins_per_dim: int
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if self.bins_per_dim < 1:
            raise ParameterError("bins_per_dim must be >= 1")

    @property
    def widths(self) -> np.ndarray:
        return self.maxs - self.mins

    def assign(self, matrix: np.ndarray) -> list:
        """Bin-index tuple per row; degenerate dims collapse to bin 0."""
        matrix = np.asarray(matrix, dtype=float)
        w = self.widths
        idx = np.zeros(matrix.shape, dtype=int)
        ok = w > 1e-12
        scaled = (matrix[:, ok] - self.mins[ok]) / w[ok] * self.bins_per_dim
        idx[:, ok] = np.clip(scaled.astype(int), 0, self.bins_per_dim - 1)
        return [tuple(row) for row in idx]


def build_bin_grid(norm_matrix: np.ndarray, bins_per_dim: int) -> BinGrid:
    norm_matrix = np.asarray(norm_matrix, dtype=float)
    return BinGrid(bins_per_dim=bins_per_dim,
                   mins=norm_matrix.min(axis=0), maxs=norm_matrix.max(axis=0))


def redistribute(ss: SampleSet, norm: feat.FeatureNormalizer,
                 bins_per_dim: int = DEFAULT_BINS, seed: int = 0) -> SampleSet:
    """Equalize occupied-bin counts of a sample set in feature space.

    The demonstration member is always retained (appended when the draws
    dropped it). Degenerate feature ranges (all members identical) return
    the input unchanged with a "redistribution_degenerate" flag.
    """
    if ss.size < 2:
        raise ParameterError("redistribution needs at least 2 members")
    if ss.features is not None:
        raw = ss.features
    else:
        raw = feat.extract_matrix(ss.members, ss.scenario)
        ss = ss.with_features(raw, feat.FEATURE_NAMES[:raw.shape[1]])
    matrix = norm.normalize_matrix(raw)
    grid = build_bin_grid(matrix, bins_per_dim)
    if np.all(grid.widths <= 1e-12):
        return replace(ss, flags=ss.flags + ("redistribution_degenerate",))
    assignments = grid.assign(matrix)
    bins = {}
    for i, key in enumerate(assignments):
        bins.setdefault(key, []).append(i)
    counts = np.array([len(v) for v in bins.values()])
    target = max(1, int(round(float(np.median(counts)))))
    rng = np.random.default_rng(seed)
    chosen = []
    for key in sorted(bins.keys()):
        idx = bins[key]
        if len(idx) == target:
            chosen.extend(idx)
        elif len(idx) > target:
            pick = rng.choice(len(idx), size=target, replace=False)
            chosen.extend(sorted(idx[i] for i in pick))
        else:
            extra = rng.choice(len(idx), size=target - len(idx), replace=True)
            chosen.extend(sorted(idx + [idx[i] for i in extra]))
    demo_pos = None
    if ss.demo_index is not None:
        if ss.demo_index in chosen:
            demo_pos = chosen.index(ss.demo_index)
        else:
            chosen.append(ss.demo_index)
            demo_pos = len(chosen) - 1
    return ss.subset(chosen, demo_index=demo_pos)
