import math

import numpy as np
import pytest

from bamcp.beliefs import SymmetricDirichlet
from bamcp.core import DiscountSpec, TransitionCounts
from bamcp.planner import (BAUCT, Planner, PlannerConfig, RolloutPolicy, SearchNode, TabularProblem,
                           argmax_random, backup, rollout_action, rollout_policy_update, ucb_select)

GAMMA = 0.95


class FirstChoiceRng:
    """Stands in for a generator when a test scripts every random choice."""

    def integers(self, n):
        return 0

    def random(self):
        return 0.0


class FixedPolicy:
    def __init__(self, action=0):
        self.a = action

    def action(self, s, rng):
        return self.a


class ScriptedModel:
    """Always moves to state 1; pays the scripted rewards in order, then 0."""

    def __init__(self, rewards):
        self.rewards = list(rewards)

    def step(self, s, a):
        return 1, (self.rewards.pop(0) if self.rewards else 0.0)

    rollout_step = step


class ScriptedProblem:
    num_actions = 2

    def __init__(self, per_simulation):
        self.queue = list(per_simulation)

    def root_model(self, rng, lazy=True):
        return ScriptedModel(self.queue.pop(0))


def test_four_simulation_trace():
    # sim 1: a1 then a rollout worth 0; sim 2: a2, worth 0; sim 3: a1 (tie broken
    # towards a1), the new node takes a1 and earns 2; sim 4: UCB picks a1, the
    # inner node tries a2 and 2 arrives two steps later
    problem = ScriptedProblem([[], [], [0.0, 2.0], [0.0, 0.0, 0.0, 2.0]])
    planner = Planner(PlannerConfig(num_simulations=4), FixedPolicy(0), record_returns=True)
    planner.search(0, problem, FirstChoiceRng())
    root = planner.root
    assert root.visit_count == 4
    assert root.n == [3, 1]
    assert root.q[1] == 0.0
    assert root.q[0] == pytest.approx(2 / 3 * (GAMMA + GAMMA**3), abs=1e-12)
    inner = root.children[0][(1, 0.0)]
    assert inner.n == [1, 1]
    assert inner.q == pytest.approx([2.0, 2 * GAMMA**2])


def test_cutoff_returns_zero_without_touching_tree():
    planner = Planner(PlannerConfig(), FixedPolicy(0))
    node = SearchNode(2)
    depth = 90  # 0.95**90 < 0.01
    assert planner.simulate(node, 0, ScriptedModel([5.0]), depth, FirstChoiceRng()) == 0.0
    assert node.visit_count == 0 and node.n == [0, 0]


def test_first_visit_stores_immediate_reward_plus_rollout():
    planner = Planner(PlannerConfig(), FixedPolicy(1))
    node = SearchNode(2)
    ret = planner.simulate(node, 0, ScriptedModel([1.0, 3.0]), 0, FirstChoiceRng())
    assert ret == pytest.approx(1.0 + GAMMA * 3.0)
    assert node.visit_count == 1 and node.n == [0, 1]
    assert node.q[1] == pytest.approx(1.0 + GAMMA * 3.0)


def test_rollout_edge_cases():
    cfg = PlannerConfig(discount=DiscountSpec(gamma=0.5, epsilon=1e-8))
    planner = Planner(cfg, FixedPolicy(0))
    assert planner.rollout(0, ScriptedModel([]), 0, None) == 0.0
    assert planner.rollout(0, ScriptedModel([1.0]), 100, None) == 0.0


def test_rollout_geometric_series():
    class Ones:
        def rollout_step(self, s, a):
            return s, 1.0

    planner = Planner(PlannerConfig(discount=DiscountSpec(gamma=0.5, epsilon=1e-7)), FixedPolicy(0))
    ret = planner.rollout(0, Ones(), 0, None)
    assert 1.999999 <= ret <= 2.0


def test_ucb_prefers_untried_edge():
    node = SearchNode(3)
    node.visit_count, node.n, node.q = 5, [3, 0, 2], [9.0, 0.0, 9.0]
    assert ucb_select(node, 3.0, np.random.default_rng(0)) == 1


def test_ucb_hand_evaluated_scores():
    # 0.6 + 3 sqrt(ln 10 / 9) = 2.117 against 0 + 3 sqrt(ln 10) = 4.552
    node = SearchNode(2)
    node.visit_count, node.n, node.q = 10, [9, 1], [0.6, 0.0]
    assert 0.6 + 3 * math.sqrt(math.log(10) / 9) == pytest.approx(2.117, abs=1e-3)
    assert ucb_select(node, 3.0, np.random.default_rng(0)) == 1


def test_ucb_without_exploration_is_greedy():
    node = SearchNode(3)
    node.visit_count, node.n, node.q = 30, [10, 10, 10], [0.1, 0.7, 0.3]
    assert ucb_select(node, 0.0, np.random.default_rng(0)) == 1


def test_argmax_breaks_ties_uniformly():
    rng = np.random.default_rng(5)
    picks = np.bincount([argmax_random([1.0, 0.0, 1.0], rng) for _ in range(4000)], minlength=3)
    assert picks[1] == 0
    assert abs(picks[0] - picks[2]) < 300


@pytest.mark.parametrize("q, n, ret, expected", [
    (0.0, 1, 5.0, 5.0),
    (2.0, 2, 4.0, 3.0),
    (GAMMA, 3, 2 * GAMMA**3, 2 / 3 * (GAMMA + GAMMA**3)),
])
def test_backup_running_mean(q, n, ret, expected):
    assert backup(q, n, ret) == pytest.approx(expected, abs=1e-12)


def test_rollout_policy_uniform_when_fully_random():
    policy = RolloutPolicy(4, epsilon=1.0)
    policy.q_table[(0, 2)] = 10.0
    rng = np.random.default_rng(2)
    freq = np.bincount([rollout_action(policy, 0, rng) for _ in range(40_000)], minlength=4) / 40_000
    np.testing.assert_allclose(freq, 0.25, atol=0.01)


def test_rollout_policy_greedy():
    policy = RolloutPolicy(3, epsilon=0.0)
    for a, v in enumerate([0.0, 3.0, 1.0]):
        policy.q_table[(4, a)] = v
    assert rollout_action(policy, 4, np.random.default_rng(0)) == 1


def test_q_learning_single_update():
    policy = RolloutPolicy(2, learning_rate=0.1, gamma=0.95)
    rollout_policy_update(policy, 0, 1, 1.0, 1)
    assert policy.q_table[(0, 1)] == pytest.approx(0.1)


def test_q_learning_fixed_point_is_kept():
    # 0 -> 1 -> 0 ... paying 1 everywhere, one action: Q* = 1 / (1 - gamma)
    policy = RolloutPolicy(1, gamma=0.9)
    policy.q_table[(0, 0)] = policy.q_table[(1, 0)] = 10.0
    rollout_policy_update(policy, 0, 0, 1.0, 1)
    assert policy.q_table[(0, 0)] == pytest.approx(10.0, abs=1e-12)


def test_q_learning_converges_to_value_iteration():
    # two states, two actions: action 0 stays and pays 0 (state 0) or 1 (state 1),
    # action 1 switches state and pays 0.5
    gamma = 0.9
    nxt = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 0}
    rew = {(0, 0): 0.0, (0, 1): 0.5, (1, 0): 1.0, (1, 1): 0.5}
    q = np.zeros((2, 2))
    for _ in range(2000):
        q = np.array([[rew[s, a] + gamma * q[nxt[s, a]].max() for a in range(2)] for s in range(2)])
    policy = RolloutPolicy(2, learning_rate=0.1, gamma=gamma)
    for _ in range(10_000):
        for (s, a), s2 in nxt.items():
            rollout_policy_update(policy, s, a, rew[s, a], s2)
    for (s, a) in nxt:
        assert policy.q_table[(s, a)] == pytest.approx(q[s, a], abs=1e-3)


def known_chain_problem():
    # state 0: action 0 pays 0.5 and stays, action 1 moves to state 1 for free;
    # state 1 pays 1 forever.  Value iteration: Q(0,0) = 18.55, Q(0,1) = 19.0.
    S, A = 3, 2
    R = np.zeros((S, A, S))
    R[0, 0, :] = 0.5
    R[1, :, :] = 1.0
    c = TransitionCounts()
    for s, a, s2 in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1), (2, 0, 2), (2, 1, 2)]:
        c.add(s, a, s2, 10**6)
    return TabularProblem(SymmetricDirichlet(1.0, S), c, R)


def test_near_point_mass_belief_acts_optimally():
    planner = Planner(PlannerConfig(num_simulations=300), num_actions=2)
    assert planner.search(0, known_chain_problem(), np.random.default_rng(0)) == 1


def test_single_action_is_returned():
    R = np.zeros((2, 1, 2))
    problem = TabularProblem(SymmetricDirichlet(1.0, 2), TransitionCounts(), R)
    planner = Planner(PlannerConfig(num_simulations=5), num_actions=1)
    assert planner.search(0, problem, np.random.default_rng(0)) == 0


def test_zero_simulations_rejected():
    planner = Planner(PlannerConfig(num_simulations=0), num_actions=2)
    with pytest.raises(ValueError):
        planner.search(0, known_chain_problem(), np.random.default_rng(0))


def test_bauct_mode_runs_and_keeps_counts():
    planner = Planner(PlannerConfig(num_simulations=50, mode=BAUCT), num_actions=2)
    planner.search(0, known_chain_problem(), np.random.default_rng(0))
    for _, node in planner.root.walk():
        if node.visit_count:
            assert node.visit_count == sum(node.n)


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(exploration_c=-1.0)
    with pytest.raises(ValueError):
        PlannerConfig(rollout_epsilon=1.5)
    with pytest.raises(ValueError):
        PlannerConfig(mode="uct")
    with pytest.raises(ValueError):
        RolloutPolicy(2, learning_rate=0.0)
