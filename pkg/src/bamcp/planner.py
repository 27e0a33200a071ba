"""Bayes-adaptive Monte-Carlo planning over arbitrary sampled models.

This is the general-purpose search.  It works with any model object exposing

* ``step(s, a) -> (s', r)`` for transitions taken inside the search tree, and
* ``rollout_step(s, a) -> (s', r)`` for transitions taken by rollouts.

Under root sampling both methods use the same model drawn once per
simulation.  In BA-UCT mode the tree steps are sampled from the posterior
predictive of each node instead.  The tabular benchmarks use the compiled
search in :mod:`bamcp.tabular`, which runs the same algorithm much faster.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Hashable, Protocol

import numpy as np

from .beliefs import SampledModel, TabularBelief, collapsed_sample, sample_model_eager
from .core import ActionId, DiscountSpec, StateId, TransitionCounts

BAMCP = "bamcp"
BAUCT = "bauct"


class Model(Protocol):
    def step(self, s: StateId, a: ActionId) -> tuple[StateId, float]: ...

    def rollout_step(self, s: StateId, a: ActionId) -> tuple[StateId, float]: ...


class Problem(Protocol):
    """What the planner needs from a belief: fresh models for each simulation."""

    num_actions: int

    def root_model(self, rng: np.random.Generator, lazy: bool = True) -> Model: ...

    def bauct_model(self, rng: np.random.Generator) -> Model: ...


@dataclass
class PlannerConfig:
    exploration_c: float = 3.0
    num_simulations: int = 1000
    discount: DiscountSpec = field(default_factory=DiscountSpec)
    rollout_epsilon: float = 0.5
    lazy_sampling: bool = True
    mode: str = BAMCP

    def __post_init__(self):
        if self.exploration_c < 0:
            raise ValueError("exploration_c must be non-negative")
        if not 0.0 <= self.rollout_epsilon <= 1.0:
            raise ValueError("rollout_epsilon must lie in [0, 1]")
        if self.mode not in (BAMCP, BAUCT):
            raise ValueError(f"unknown mode {self.mode!r}")


def argmax_random(values, rng) -> int:
    """Index of the largest value, ties broken uniformly at random."""
    values = np.asarray(values, dtype=float)
    best = np.flatnonzero(values == values.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


class RolloutPolicy:
    """Epsilon-greedy policy over a Q-table learnt from real transitions only."""

    def __init__(self, num_actions: int, epsilon: float = 0.5, learning_rate: float = 0.1, gamma: float = 0.95):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        self.num_actions = num_actions
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.q_table: defaultdict[tuple[StateId, ActionId], float] = defaultdict(float)

    def values(self, s: StateId) -> list[float]:
        return [self.q_table.get((s, a), 0.0) for a in range(self.num_actions)]

    def action(self, s: StateId, rng: np.random.Generator) -> ActionId:
        return rollout_action(self, s, rng)

    def update(self, s: StateId, a: ActionId, r: float, s_next: StateId) -> None:
        rollout_policy_update(self, s, a, r, s_next)


def rollout_action(policy: RolloutPolicy, s: StateId, rng: np.random.Generator) -> ActionId:
    if policy.epsilon > 0.0 and rng.random() < policy.epsilon:
        return int(rng.integers(policy.num_actions))
    return argmax_random(policy.values(s), rng)


def rollout_policy_update(policy: RolloutPolicy, s, a, r, s_next) -> RolloutPolicy:
    """One Q-learning step on a real environment transition."""
    target = r + policy.gamma * max(policy.values(s_next))
    q = policy.q_table[(s, a)]
    policy.q_table[(s, a)] = q + policy.learning_rate * (target - q)
    return policy


class SearchNode:
    """A belief-state node: visit count plus per-action count, value and children."""

    __slots__ = ("visit_count", "n", "q", "children", "returns")

    def __init__(self, num_actions: int, record: bool = False):
        self.visit_count = 0
        self.n = [0] * num_actions
        self.q = [0.0] * num_actions
        # per action: (successor, reward) -> SearchNode
        self.children: list[dict[Hashable, SearchNode]] = [{} for _ in range(num_actions)]
        self.returns: list[list[float]] | None = [[] for _ in range(num_actions)] if record else None

    def walk(self, depth: int = 0):
        """Yield ``(depth, node)`` for this node and every descendant."""
        yield depth, self
        for kids in self.children:
            for child in kids.values():
                yield from child.walk(depth + 1)


def ucb_select(node: SearchNode, c: float, rng: np.random.Generator) -> ActionId:
    n = np.asarray(node.n, dtype=float)
    untried = np.flatnonzero(n == 0)
    if len(untried):
        return int(untried[rng.integers(len(untried))]) if len(untried) > 1 else int(untried[0])
    scores = np.asarray(node.q) + c * np.sqrt(math.log(node.visit_count) / n)
    return argmax_random(scores, rng)


def backup(q: float, n: int, ret: float) -> float:
    """Running mean update; ``n`` already includes the new return."""
    return q + (ret - q) / n


def ba_uct_node_sample(belief: TabularBelief, node_counts: TransitionCounts, s, a, rng) -> StateId:
    """Collapsed successor sample from the posterior at a node."""
    return collapsed_sample(belief, node_counts, s, a, rng)


class Planner:
    """Monte-Carlo tree search in the Bayes-adaptive MDP.

    :param config: search parameters
    :param rollout_policy: anything with ``action(s, rng)``; a uniform random
        policy (zero Q-table) when omitted
    :param record_returns: keep every backed-up return per edge, for checking
    """

    def __init__(self, config: PlannerConfig, rollout_policy: Any = None, num_actions: int | None = None,
                 record_returns: bool = False):
        self.config = config
        self.rollout_policy = rollout_policy
        self.record_returns = record_returns
        self.root: SearchNode | None = None
        if rollout_policy is None and num_actions is not None:
            self.rollout_policy = RolloutPolicy(num_actions, config.rollout_epsilon, gamma=config.discount.gamma)

    def search(self, root_state: StateId, problem: Problem, rng: np.random.Generator) -> ActionId:
        cfg = self.config
        if cfg.num_simulations < 1:
            raise ValueError("at least one simulation is needed to estimate action values")
        if self.rollout_policy is None:
            self.rollout_policy = RolloutPolicy(problem.num_actions, cfg.rollout_epsilon, gamma=cfg.discount.gamma)
        self._num_actions = problem.num_actions
        self.root = SearchNode(problem.num_actions, self.record_returns)
        for _ in range(cfg.num_simulations):
            if cfg.mode == BAMCP:
                model = problem.root_model(rng, lazy=cfg.lazy_sampling)
            else:
                model = problem.bauct_model(rng)
            self.simulate(self.root, root_state, model, 0, rng)
        return argmax_random(self.root.q, rng)

    def root_value(self) -> float:
        return max(self.root.q)

    def simulate(self, node: SearchNode, s: StateId, model: Model, depth: int, rng) -> float:
        spec = self.config.discount
        if spec.cutoff(depth):
            return 0.0
        if node.visit_count == 0:
            a = self.rollout_policy.action(s, rng)
            s_next, r = model.step(s, a)
            ret = r + spec.gamma * self.rollout(s_next, model, depth, rng)
            node.visit_count = 1
            node.n[a] = 1
            node.q[a] = ret
            if node.returns is not None:
                node.returns[a].append(ret)
            return ret
        a = ucb_select(node, self.config.exploration_c, rng)
        s_next, r = model.step(s, a)
        if spec.cutoff(depth + 1):
            ret = r
        else:
            kids = node.children[a]
            child = kids.get((s_next, r))
            if child is None:
                child = kids[(s_next, r)] = SearchNode(self._num_actions, self.record_returns)
            ret = r + spec.gamma * self.simulate(child, s_next, model, depth + 1, rng)
        node.visit_count += 1
        node.n[a] += 1
        node.q[a] = backup(node.q[a], node.n[a], ret)
        if node.returns is not None:
            node.returns[a].append(ret)
        return ret

    def rollout(self, s: StateId, model: Model, depth: int, rng) -> float:
        spec = self.config.discount
        total, disc = 0.0, 1.0
        while not spec.cutoff(depth):
            a = self.rollout_policy.action(s, rng)
            s, r = model.rollout_step(s, a)
            total += disc * r
            disc *= spec.gamma
            depth += 1
        return total


class TabularModel:
    """A sampled tabular model paired with a known reward function."""

    def __init__(self, sampled: SampledModel, reward):
        self.sampled = sampled
        self.reward = reward

    def step(self, s, a):
        s_next = self.sampled.transition(s, a)
        return s_next, float(self.reward[s, a, s_next])

    rollout_step = step


class BAUCTModel:
    """Per-simulation BA-UCT sampler.

    Tree steps are collapsed draws from the posterior of the current node
    (root counts plus the transitions on the path so far).  Rollouts use one
    model drawn lazily from the leaf posterior.
    """

    def __init__(self, belief: TabularBelief, counts: TransitionCounts, reward, rng):
        self.belief = belief
        self.path_counts = TransitionCounts(counts)
        self.reward = reward
        self.rng = rng
        self._leaf_model: SampledModel | None = None

    def step(self, s, a):
        s_next = ba_uct_node_sample(self.belief, self.path_counts, s, a, self.rng)
        self.path_counts.add(s, a, s_next)
        return s_next, float(self.reward[s, a, s_next])

    def rollout_step(self, s, a):
        if self._leaf_model is None:
            self._leaf_model = SampledModel(self.belief, self.path_counts, self.rng)
        s_next = self._leaf_model.transition(s, a)
        return s_next, float(self.reward[s, a, s_next])


class TabularProblem:
    """Tabular belief + observed counts + known rewards ``reward[s, a, s']``."""

    def __init__(self, belief: TabularBelief, counts: TransitionCounts, reward: np.ndarray):
        self.belief = belief
        self.counts = counts
        self.reward = np.asarray(reward, dtype=float)
        self.num_actions = self.reward.shape[1]

    def root_model(self, rng, lazy=True):
        if lazy:
            sampled = SampledModel(self.belief, self.counts, rng)
        else:
            sampled = sample_model_eager(self.belief, self.counts, rng, self.num_actions)
        return TabularModel(sampled, self.reward)

    def bauct_model(self, rng):
        return BAUCTModel(self.belief, self.counts, self.reward, rng)
