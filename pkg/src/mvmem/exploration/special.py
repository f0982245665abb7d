"""Gamma and digamma evaluators used by the particle entropy estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

# B_2n / (2n) for the asymptotic digamma tail
_TAIL = (1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132, -691.0 / 32760, 1.0 / 12)


def digamma(x: float) -> float:
    """Psi(x) for x > 0 via upward recurrence then the asymptotic series."""
    if x <= 0:
        raise ValueError(f"digamma is only implemented for x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    power = inv2
    for c in _TAIL:
        tail += c * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - tail


@dataclass(frozen=True)
class EstimatorConstants:
    gamma_fn: Callable[[float], float] = math.gamma
    lgamma_fn: Callable[[float], float] = math.lgamma
    digamma_fn: Callable[[float], float] = digamma
    pi_hat: float = math.pi


DEFAULT_CONSTANTS = EstimatorConstants()
