"""Priors and posteriors over transition dynamics.

Every tabular belief reduces, for a given (state, action), to a Dirichlet
parameter vector over successor states.  Zero entries mark successors the
belief rules out.  Rows may be shared between (state, action) pairs, which is
how bandit arms tie all states to one success probability.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Protocol

import numpy as np

from .core import ActionId, StateId, TransitionCounts


class DomainMismatch(ValueError):
    """A state or action that the belief model does not know about."""


class TabularBelief(Protocol):
    num_states: int

    def row_key(self, s: StateId, a: ActionId) -> Hashable: ...

    def row_params(self, counts: TransitionCounts, s: StateId, a: ActionId) -> np.ndarray: ...


def _check_state(num_states: int, s: StateId) -> None:
    if not 0 <= s < num_states:
        raise DomainMismatch(f"state {s} outside [0, {num_states})")


@dataclass(frozen=True)
class SymmetricDirichlet:
    """Independent Dirichlet(alpha, ..., alpha) prior on every transition row."""

    alpha: float
    num_states: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.num_states < 1:
            raise ValueError("num_states must be positive")

    def row_key(self, s, a):
        return (s, a)

    def row_params(self, counts, s, a):
        _check_state(self.num_states, s)
        params = np.full(self.num_states, self.alpha)
        for s_next, n in counts.row(s, a).items():
            _check_state(self.num_states, s_next)
            params[s_next] += n
        return params


@dataclass(frozen=True)
class SparseDirichlet:
    """Sparse Dirichlet-multinomial stand-in.

    Observed successors carry weight ``n + alpha``; all unobserved successors
    share ``new_state_mass`` uniformly.
    """

    num_states: int
    alpha: float = 1.0
    new_state_mass: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.new_state_mass <= 0:
            raise ValueError("alpha and new_state_mass must be positive")

    def row_key(self, s, a):
        return (s, a)

    def row_params(self, counts, s, a):
        _check_state(self.num_states, s)
        row = counts.row(s, a)
        params = np.zeros(self.num_states)
        for s_next, n in row.items():
            _check_state(self.num_states, s_next)
            params[s_next] = n + self.alpha
        unseen = self.num_states - len(row)
        if unseen:
            params[params == 0.0] = self.new_state_mass / unseen
        return params


# bandit outcome states
FAIL, SUCCESS, SAFE = 0, 1, 2


@dataclass(frozen=True)
class BetaBernoulliArms:
    """Bernoulli arms with Beta priors, plus optional arms with a known payout.

    ``arms`` holds ``(alpha, beta)`` for a stochastic arm or ``None`` for a
    deterministic one.  As a tabular model the states are the outcome of the
    last pull (FAIL, SUCCESS, SAFE), and each arm is one row shared by every
    state.
    """

    arms: tuple
    num_states: int = 3

    def __post_init__(self):
        for arm in self.arms:
            if arm is not None and (arm[0] <= 0 or arm[1] <= 0):
                raise ValueError(f"Beta parameters must be positive, got {arm}")

    def row_key(self, s, a):
        return a

    def row_params(self, counts, s, a):
        _check_state(self.num_states, s)
        if not 0 <= a < len(self.arms):
            raise DomainMismatch(f"arm {a} outside [0, {len(self.arms)})")
        arm = self.arms[a]
        if arm is None:
            return np.array([0.0, 0.0, 1.0])
        succ = sum(n for (_, b, s2), n in counts.items() if b == a and s2 == SUCCESS)
        fail = sum(n for (_, b, s2), n in counts.items() if b == a and s2 == FAIL)
        return np.array([arm[1] + fail, arm[0] + succ, 0.0])


@dataclass(frozen=True)
class StructuredGridPrior:
    """Column parameters ~ Beta(alpha1, beta1), row parameters ~ Beta(alpha2, beta2)."""

    alpha1: float = 1.0
    beta1: float = 2.0
    alpha2: float = 2.0
    beta2: float = 1.0

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise ValueError("all Beta hyperparameters must be positive")

    def swapped(self) -> "StructuredGridPrior":
        return StructuredGridPrior(self.alpha2, self.beta2, self.alpha1, self.beta1)


BeliefModel = SymmetricDirichlet | SparseDirichlet | BetaBernoulliArms | StructuredGridPrior


def predictive(belief: TabularBelief, counts: TransitionCounts, s: StateId, a: ActionId) -> np.ndarray:
    """Posterior predictive P(s' | s, a, counts), the closed-form BAMDP transition."""
    params = belief.row_params(counts, s, a)
    return params / params.sum()


def dirichlet_predictive(prior: SymmetricDirichlet, counts, s, a) -> np.ndarray:
    if not isinstance(prior, SymmetricDirichlet):
        raise TypeError("dirichlet_predictive needs a SymmetricDirichlet prior")
    return predictive(prior, counts, s, a)


def sparse_predictive(prior: SparseDirichlet, counts, s, a) -> np.ndarray:
    if not isinstance(prior, SparseDirichlet):
        raise TypeError("sparse_predictive needs a SparseDirichlet prior")
    return predictive(prior, counts, s, a)


def beta_predictive(arm: tuple[float, float]) -> float:
    alpha, beta = arm
    if alpha <= 0 or beta <= 0:
        raise ValueError("Beta parameters must be positive")
    return alpha / (alpha + beta)


def sample_dirichlet(params: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Normalised gamma draws; zero parameters give zero mass."""
    g = np.zeros_like(params)
    pos = params > 0
    g[pos] = rng.gamma(params[pos])
    total = g.sum()
    if total == 0.0:
        # every draw underflowed (tiny shapes); fall back on the largest parameter
        g[np.argmax(params)] = 1.0
        total = 1.0
    return g / total


def _categorical(p: np.ndarray, rng: np.random.Generator) -> int:
    idx = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
    return min(idx, len(p) - 1)


class SampledModel:
    """One transition model drawn from the posterior, materialised row by row.

    Rows are drawn on first use and then frozen for the lifetime of the model,
    which is one search simulation.
    """

    def __init__(self, belief: TabularBelief, counts: TransitionCounts, rng: np.random.Generator):
        self.belief = belief
        self.counts = counts
        self.rng = rng
        self.phi = None
        self.theta_cache: dict[Hashable, np.ndarray] = {}

    def theta(self, s: StateId, a: ActionId) -> np.ndarray:
        key = self.belief.row_key(s, a)
        row = self.theta_cache.get(key)
        if row is None:
            row = sample_dirichlet(self.belief.row_params(self.counts, s, a), self.rng)
            self.theta_cache[key] = row
        return row

    def transition(self, s: StateId, a: ActionId) -> StateId:
        return _categorical(self.theta(s, a), self.rng)


def sample_model_eager(
    posterior: TabularBelief,
    counts: TransitionCounts,
    rng: np.random.Generator,
    num_actions: int,
) -> SampledModel:
    """Draw every transition row up front."""
    if getattr(posterior, "num_states", None) is None:
        raise ValueError("eager sampling needs a finite state space; use lazy sampling")
    model = SampledModel(posterior, counts, rng)
    for s in range(posterior.num_states):
        for a in range(num_actions):
            model.theta(s, a)
    return model


def lazy_sample_transition(
    model: SampledModel,
    posterior: TabularBelief,
    counts: TransitionCounts,
    s: StateId,
    a: ActionId,
    rng: np.random.Generator,
) -> StateId:
    """Sample ``s'`` from the model, drawing ``theta[s, a]`` first if it is missing."""
    key = posterior.row_key(s, a)
    row = model.theta_cache.get(key)
    if row is None:
        row = sample_dirichlet(posterior.row_params(counts, s, a), rng)
        model.theta_cache[key] = row
    return _categorical(row, rng)


def collapsed_sample(belief: TabularBelief, counts: TransitionCounts, s, a, rng) -> StateId:
    """Sample a successor straight from the posterior predictive."""
    return _categorical(predictive(belief, counts, s, a), rng)
