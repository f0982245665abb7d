"""Entropy-estimator accuracy and k-NN timing on samples with known entropy."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from mvmem.exploration.entropy import estimate_entropy

DISTRIBUTIONS = ("gaussian", "uniform")


def analytic_entropy(distribution, q):
    """Entropy in nats of the standard normal or the unit cube in q dimensions."""
    if distribution == "gaussian":
        return 0.5 * q * math.log(2.0 * math.pi * math.e)
    if distribution == "uniform":
        return 0.0
    raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")


def draw(distribution, n, q, rng):
    if distribution == "gaussian":
        return rng.standard_normal((n, q))
    if distribution == "uniform":
        return rng.random((n, q))
    raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")


@dataclass
class BenchReport:
    distribution: str
    n: int
    q: int
    k: int
    target: float
    estimates: list = field(default_factory=list)
    brute_seconds: list = field(default_factory=list)
    tree_seconds: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def mae(self):
        return float(np.mean(np.abs(np.asarray(self.estimates) - self.target)))

    def lines(self):
        out = [f"distribution={self.distribution} n={self.n} q={self.q} k={self.k} target={self.target:.4f}"]
        for i, (est, tb, tt) in enumerate(zip(self.estimates, self.brute_seconds, self.tree_seconds)):
            tree = f"{tt:.4f}s" if tt is not None else "-"
            out.append(f"trial {i}: estimate={est:.4f} brute={tb:.4f}s tree={tree}")
        out.append(f"mae={self.mae:.4f}")
        out.append(f"brute_total={sum(self.brute_seconds):.3f}s"
                   + (f" tree_total={sum(self.tree_seconds):.3f}s" if None not in self.tree_seconds else ""))
        out.append(f"elapsed={self.elapsed:.3f}s")
        return out


def entropy_bench(n=4096, q=1, k=3, distribution="gaussian", trials=10, seed=0, tree=True):
    """Estimate entropy of ``trials`` fresh samples with brute-force and tree k-NN search, timing both."""
    if k >= n:
        raise ValueError(f"k must be < n, got k={k}, n={n}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    started = time.perf_counter()
    report = BenchReport(distribution, n, q, k, analytic_entropy(distribution, q))
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        pts = draw(distribution, n, q, rng)
        t0 = time.perf_counter()
        estimate = estimate_entropy(pts, k, "brute")
        report.brute_seconds.append(time.perf_counter() - t0)
        report.estimates.append(estimate)
        if tree:
            t0 = time.perf_counter()
            same = estimate_entropy(pts, k, "tree")
            report.tree_seconds.append(time.perf_counter() - t0)
            if same != estimate:
                raise AssertionError(f"tree estimate {same!r} differs from brute force {estimate!r}")
        else:
            report.tree_seconds.append(None)
    report.elapsed = time.perf_counter() - started
    return report
