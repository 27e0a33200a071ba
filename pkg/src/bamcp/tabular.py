"""Fast search for tabular beliefs: array encoding plus the compiled kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .beliefs import BetaBernoulliArms, SparseDirichlet, SymmetricDirichlet, TabularBelief
from .core import TransitionCounts, max_depth
from .planner import BAUCT, PlannerConfig


class TabularEncoding:
    """A tabular belief as Dirichlet rows, with counts kept in sync incrementally."""

    def __init__(self, belief: TabularBelief, num_actions: int, reward: np.ndarray):
        S = belief.num_states
        self.belief = belief
        self.num_states = S
        self.num_actions = num_actions
        self.reward = np.ascontiguousarray(reward, dtype=float)
        if self.reward.shape != (S, num_actions, S):
            raise ValueError(f"reward must have shape {(S, num_actions, S)}, got {self.reward.shape}")
        self.kind = 0
        self.alpha = 0.0
        self.new_mass = 0.0
        if isinstance(belief, SymmetricDirichlet):
            self.row_of = np.arange(S * num_actions, dtype=np.int64).reshape(S, num_actions)
            self.prior = np.full((S * num_actions, S), belief.alpha)
        elif isinstance(belief, SparseDirichlet):
            self.row_of = np.arange(S * num_actions, dtype=np.int64).reshape(S, num_actions)
            self.prior = np.zeros((S * num_actions, S))
            self.kind = 1
            self.alpha = belief.alpha
            self.new_mass = belief.new_state_mass
        elif isinstance(belief, BetaBernoulliArms):
            if len(belief.arms) != num_actions:
                raise ValueError("one action per arm expected")
            self.row_of = np.tile(np.arange(num_actions, dtype=np.int64), (S, 1))
            empty = TransitionCounts()
            self.prior = np.array([belief.row_params(empty, 0, a) for a in range(num_actions)])
        else:
            raise TypeError(f"no tabular encoding for {type(belief).__name__}")
        self.counts = np.zeros((self.row_of.max() + 1, S))

    def observe(self, s: int, a: int, s_next: int, n: int = 1) -> None:
        self.counts[self.row_of[s, a], s_next] += n

    def load_counts(self, counts: TransitionCounts) -> None:
        self.counts[:] = 0.0
        for (s, a, s_next), n in counts.items():
            self.observe(s, a, s_next, n)

    def row_params(self, s: int, a: int) -> np.ndarray:
        """Dirichlet parameters of the posterior row used at (s, a)."""
        r = self.row_of[s, a]
        n = self.counts[r]
        if self.kind == 1:
            params = np.where(n > 0, n + self.alpha, 0.0)
            unseen = int((n == 0).sum())
            if unseen:
                params[n == 0] = self.new_mass / unseen
            return params
        return self.prior[r] + n


@dataclass
class TabularSearchResult:
    action: int
    visits: np.ndarray
    edge_n: np.ndarray
    edge_q: np.ndarray
    child: np.ndarray
    num_nodes: int

    @property
    def root_q(self) -> np.ndarray:
        return self.edge_q[0]

    @property
    def root_value(self) -> float:
        return float(self.edge_q[0].max())

    def children_of(self, node: int):
        """Yield ``(action, successor, child_node)`` for every child of ``node``."""
        acts, succ = np.nonzero(self.child[node] >= 0)
        for a, s in zip(acts, succ):
            yield int(a), int(s), int(self.child[node, a, s])

    def depths(self) -> np.ndarray:
        depth = np.full(self.num_nodes, -1)
        depth[0] = 0
        frontier = [0]
        while frontier:
            nxt = []
            for node in frontier:
                for _, _, kid in self.children_of(node):
                    depth[kid] = depth[node] + 1
                    nxt.append(kid)
            frontier = nxt
        return depth


def seed_state(rng: np.random.Generator) -> np.ndarray:
    st = rng.integers(0, 2**64, size=4, dtype=np.uint64)
    if not st.any():
        st[0] = 1
    return st


def tabular_search(
    enc: TabularEncoding,
    root_state: int,
    config: PlannerConfig,
    rng: np.random.Generator,
    rollout_q: np.ndarray | None = None,
) -> TabularSearchResult:
    """Run BAMCP (or BA-UCT) from ``root_state`` under the encoded belief."""
    n = config.num_simulations
    if n < 1:
        raise ValueError("at least one simulation is needed to estimate action values")
    S, A = enc.num_states, enc.num_actions
    if not 0 <= root_state < S:
        raise ValueError(f"root state {root_state} outside [0, {S})")
    if rollout_q is None:
        rollout_q = np.zeros((S, A))
    M = n + 1
    visits = np.zeros(M, np.int64)
    edge_n = np.zeros((M, A), np.int64)
    edge_q = np.zeros((M, A))
    child = np.full((M, A, S), -1, np.int32)
    st = seed_state(rng)
    depth = int(max_depth(config.discount))
    action, used = _kernel.search_kernel(
        enc.row_of, enc.counts, enc.prior, enc.kind, enc.alpha, enc.new_mass, enc.reward,
        np.ascontiguousarray(rollout_q, dtype=float), float(config.rollout_epsilon),
        float(config.discount.gamma), depth, float(config.exploration_c),
        int(n), bool(config.lazy_sampling), config.mode == BAUCT, int(root_state), st,
        visits, edge_n, edge_q, child, *_kernel.workspace(enc.counts.shape[0], S, A, depth),
    )
    return TabularSearchResult(int(action), visits[:used], edge_n[:used], edge_q[:used], child[:used], int(used))
