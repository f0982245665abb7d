"""Entropy-derived intrinsic rewards and their mixing with the task reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mvmem.errors import KTooLarge, StreamLengthMismatch
from mvmem.exploration.knn import (
    as_points,
    knn_distances_batch,
    knn_query_distances,
    knn_table,
    pairwise_distances,
)


@dataclass(frozen=True)
class BetaSchedule:
    beta0: float
    kappa: float

    def __post_init__(self):
        if self.beta0 < 0:
            raise ValueError(f"beta0 must be >= 0, got {self.beta0}")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"kappa must lie in [0, 1), got {self.kappa}")


def beta_at(schedule: BetaSchedule, t: int) -> float:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return schedule.beta0 * (1.0 - schedule.kappa) ** t


def total_reward(extrinsic, intrinsic, beta):
    return extrinsic + beta * intrinsic


def _streams(specific, shared_mean, k):
    streams = [as_points(s) for s in specific] + [as_points(shared_mean)]
    lengths = {s.shape[0] for s in streams}
    if len(lengths) != 1:
        raise StreamLengthMismatch(f"feature streams have lengths {sorted(lengths)}")
    (t,) = lengths
    if k > t - 1:
        raise KTooLarge(f"k={k} needs a pool of at least {k + 1}, got {t}")
    return streams


def multiview_intrinsic_rewards(specific, shared_mean, k, method="brute"):
    """Reward per pool entry from the k-NN distances of each specific stream and the shared mean.

    ``specific`` holds N arrays [T, p] (one per view), ``shared_mean`` is [T, p].
    Every stream searches neighbours only among its own T entries.
    """
    streams = _streams(specific, shared_mean, k)
    acc = np.zeros(streams[0].shape[0])
    for s in streams:
        acc += np.log1p(knn_distances_batch(s, k, method))
    return acc / len(streams)


def multiview_query_rewards(specific, shared_mean, pool_specific, pool_shared_mean, k):
    """Same reward for points outside the pool, neighbours drawn from the pool."""
    queries = [as_points(s) for s in specific] + [as_points(shared_mean)]
    pools = [as_points(s) for s in pool_specific] + [as_points(pool_shared_mean)]
    if len(queries) != len(pools):
        raise StreamLengthMismatch("query and pool view counts differ")
    acc = np.zeros(queries[0].shape[0])
    for q, p in zip(queries, pools):
        acc += np.log1p(knn_query_distances(p, q, k))
    return acc / len(queries)


def _re3_from_table(dists, k, form, aggregate):
    if aggregate == "kth":
        d = dists[:, k - 1]
    elif aggregate == "mean_of_k":
        d = dists[:, :k].mean(axis=1)
    else:
        raise ValueError(f"unknown aggregate {aggregate!r}")
    if form == "raw_distance":
        return d
    if form == "log1p_distance":
        return np.log1p(d)
    raise ValueError(f"unknown form {form!r}")


def re3_rewards(features, k, form="raw_distance", aggregate="kth", method="brute"):
    """Single-view baseline reward from k-NN distances of fixed random-encoder features."""
    dists, _ = knn_table(as_points(features), k, method)
    return _re3_from_table(dists, k, form, aggregate)


def re3_query_rewards(features, pool, k, form="raw_distance", aggregate="kth"):
    q = as_points(features)
    p = as_points(pool)
    if k > p.shape[0]:
        raise KTooLarge(f"k={k} exceeds pool size {p.shape[0]}")
    dists = np.sort(pairwise_distances(q, p), axis=1)[:, :k]
    return _re3_from_table(dists, k, form, aggregate)
