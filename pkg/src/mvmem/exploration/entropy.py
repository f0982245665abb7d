"""Particle (k-NN) estimator of differential entropy."""

from __future__ import annotations

import math

import numpy as np

from mvmem.errors import DegenerateSample
from mvmem.exploration.knn import as_points, knn_distances_batch
from mvmem.exploration.special import DEFAULT_CONSTANTS


def entropy_terms(points, k, method="brute", constants=DEFAULT_CONSTANTS):
    """Per-point log terms of the estimator (before the log k - psi(k) correction).

    Term i is log(n * d_i^q * pi^(q/2) / (k * Gamma(q/2 + 1))) with d_i the
    distance to the k-th nearest other sample.
    """
    pts = as_points(points)
    n, q = pts.shape
    d = knn_distances_batch(pts, k, method)
    if np.any(d == 0.0):
        raise DegenerateSample(f"{int(np.sum(d == 0.0))} samples have a zero k-NN distance; dedupe or jitter")
    const = math.log(n) + 0.5 * q * math.log(constants.pi_hat) - math.log(k) - constants.lgamma_fn(0.5 * q + 1.0)
    return q * np.log(d) + const


def estimate_entropy(points, k, method="brute", constants=DEFAULT_CONSTANTS):
    """Entropy estimate in nats."""
    terms = entropy_terms(points, k, method, constants)
    return float(terms.mean() + math.log(k) - constants.digamma_fn(k))


def simplified_entropy_score(points, k, method="brute"):
    """Mean log k-NN distance, the estimator with its constants dropped."""
    d = knn_distances_batch(as_points(points), k, method)
    if np.any(d == 0.0):
        raise DegenerateSample("zero k-NN distance in sample")
    return float(np.log(d).mean())
