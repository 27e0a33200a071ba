"""Gittins indices for Bernoulli arms with Beta posteriors.

The index is found by calibration: an arm is compared against a retirement
option paying ``lam`` forever, and ``lam`` is bisected until the two are
worth the same.  The arm side is a finite-horizon dynamic program over the
Beta posterior states reachable from the prior.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import DiscountSpec, max_depth


@dataclass(frozen=True)
class BetaArm:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


Arm = Union[BetaArm, float]


def _posterior_means(arm: BetaArm, t: int) -> np.ndarray:
    """Success probability at every state ``t`` pulls in; index = number of successes."""
    succ = np.arange(t + 1)
    return (arm.alpha + succ) / (arm.alpha + arm.beta + t)


def _calibration_value(arm: BetaArm, lam: float, gamma: float, horizon: int) -> float:
    """Value of the arm with a standing option to retire on ``lam`` per step."""
    retire = lam / (1.0 - gamma)
    p = _posterior_means(arm, horizon)
    v = np.maximum(retire, p / (1.0 - gamma))
    for t in range(horizon - 1, -1, -1):
        p = _posterior_means(arm, t)
        cont = p * (1.0 + gamma * v[1:]) + (1.0 - p) * gamma * v[:-1]
        v = np.maximum(retire, cont)
    return float(v[0])


def gittins_index(arm: BetaArm, gamma: float, tol: float = 1e-4, horizon: int | None = None,
                  iterations: int = 40) -> float:
    """Gittins index of a Beta-Bernoulli arm.

    The horizon defaults to the depth at which ``gamma**H`` drops below
    ``tol``; beyond it the posterior is frozen and the better of retiring or
    playing on at the posterior mean is taken.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if horizon is None:
        horizon = max(1, max_depth(DiscountSpec(gamma=gamma, rmax=1.0, epsilon=tol)))
    lo, hi = arm.mean, 1.0
    # the retire-at-lam option is worth at least the arm when lam = 1
    if _calibration_value(arm, hi, gamma, horizon) > hi / (1.0 - gamma) + 1e-9:
        raise ArithmeticError(f"calibration bracket [{lo}, {hi}] does not contain the index of {arm}")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _calibration_value(arm, mid, gamma, horizon) > mid / (1.0 - gamma) * (1.0 + 1e-15):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def arm_index(arm: Arm, gamma: float, tol: float = 1e-4) -> float:
    """Gittins index; a deterministic arm (a plain number) is its own index."""
    if isinstance(arm, BetaArm):
        return gittins_index(arm, gamma, tol)
    return float(arm)


def bayes_optimal_bandit_action(arms: Sequence[Arm], gamma: float, tol: float = 1e-4) -> int:
    """Arm with the largest Gittins index (the first one on ties)."""
    if not arms:
        raise ValueError("at least one arm is needed")
    return int(np.argmax([arm_index(a, gamma, tol) for a in arms]))


def bayes_optimal_value(arms: Sequence[Arm], gamma: float, horizon: int) -> float:
    """Bayes-optimal expected discounted reward over ``horizon`` pulls.

    Supports any number of deterministic arms and at most one Beta arm: once a
    deterministic arm is worth pulling, nothing more is learnt, so it is
    pulled until the end.
    """
    stochastic = [a for a in arms if isinstance(a, BetaArm)]
    fixed = [float(a) for a in arms if not isinstance(a, BetaArm)]
    if len(stochastic) > 1:
        raise NotImplementedError("exact values are only computed for one stochastic arm")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    best_fixed = max(fixed) if fixed else -np.inf

    def settle(steps_left: int) -> float:
        if not fixed:
            return -np.inf
        return best_fixed * (1.0 - gamma**steps_left) / (1.0 - gamma)

    if not stochastic:
        return max(settle(horizon), 0.0) if fixed else 0.0
    arm = stochastic[0]
    v = np.zeros(horizon + 1)
    for t in range(horizon - 1, -1, -1):
        p = _posterior_means(arm, t)
        pull = p * (1.0 + gamma * v[1:]) + (1.0 - p) * gamma * v[:-1]
        v = np.maximum(settle(horizon - t), pull)
    return float(v[0])
