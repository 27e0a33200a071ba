import math

import numpy as np
import pytest
from scipy.stats import beta as beta_dist

from bamcp.beliefs import StructuredGridPrior
from bamcp.grid_inference import (COUNT_CAP, GridChain, GridChainState, GridObservations, GridProposal,
                                  GridSample, GridSimModel, InfiniteGridProblem, ensure_linked,
                                  lazy_grid_cell, mh_acceptance, mh_log_ratio, mh_propose, mh_step,
                                  proposal_counts)

PRIOR = StructuredGridPrior(1, 2, 2, 1)

# posterior moments of p for one observed cell, by midpoint integration on a
# 4000 x 4000 grid over (p, q)
ORACLE = {0: (0.285714, 0.046939), 1: (0.5, 0.05)}


def test_positive_observation_counts():
    obs = GridObservations({(0, 0): 1})
    assert proposal_counts(obs, 0, 0, PRIOR) == (1.0, 0.0, 1.0, 0.0)


def test_negative_observation_correction():
    obs = GridObservations({(0, 0): 0})
    m1, n1, m2, n2 = proposal_counts(obs, 0, 0, PRIOR)
    assert n1 == pytest.approx(5 / 6)
    assert n2 == pytest.approx(2 / 3)
    assert m1 == m2 == 0


def test_counts_are_capped():
    obs = GridObservations({(0, j): 1 for j in range(80)})
    assert proposal_counts(obs, 0, 3, PRIOR)[0] == COUNT_CAP


def test_nothing_observed_means_prior_draws():
    rng = np.random.default_rng(0)
    state = GridChainState()
    assert mh_propose(state, GridObservations(), PRIOR, rng) is None
    assert mh_step(state, GridObservations(), PRIOR, rng) is state
    sample = GridSample(state, GridObservations(), PRIOR)
    assert 0 < sample.p(7, rng) < 1 and 7 in sample.p_extra


def _proposal(state, i, j, p_new, q_new, obs):
    m1, n1, m2, n2 = proposal_counts(obs, i, j, PRIOR)
    return GridProposal(i, j, p_new, q_new, m1, n1, m2, n2)


def test_identity_proposal_accepted():
    obs = GridObservations({(0, 0): 0, (1, 0): 1})
    state = GridChainState({0: 0.3, 1: 0.6}, {0: 0.7})
    assert mh_acceptance(state, _proposal(state, 0, 0, 0.3, 0.7, obs), obs) == 1.0


def test_negative_observation_ratio_against_explicit_densities():
    obs = GridObservations({(0, 0): 0})
    state = GridChainState({0: 0.5}, {0: 0.5})
    prop = _proposal(state, 0, 0, 0.2, 0.5, obs)

    def target(p, q):
        return beta_dist.pdf(p, 1, 2) * beta_dist.pdf(q, 2, 1) * (1 - p * q)

    def proposal_density(p, q):
        return beta_dist.pdf(p, 1, 2 + 5 / 6) * beta_dist.pdf(q, 2, 1 + 2 / 3)

    oracle = target(0.2, 0.5) / target(0.5, 0.5) * proposal_density(0.5, 0.5) / proposal_density(0.2, 0.5)
    assert oracle == pytest.approx(0.8111128, abs=1e-6)
    assert math.exp(mh_log_ratio(state, prop, obs)) == pytest.approx(oracle, rel=1e-9)
    assert mh_acceptance(state, prop, obs) == pytest.approx(0.81, abs=0.005)


def test_positive_observation_cancels_exactly():
    obs = GridObservations({(2, -1): 1})
    rng = np.random.default_rng(3)
    for _ in range(100):
        state = GridChainState({2: rng.uniform(0.01, 0.99)}, {-1: rng.uniform(0.01, 0.99)})
        prop = _proposal(state, 2, -1, rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99), obs)
        assert abs(math.exp(mh_log_ratio(state, prop, obs)) - 1.0) < 1e-12


def test_rejection_leaves_state_untouched():
    obs = GridObservations({(0, 0): 0, (0, 1): 0, (1, 0): 1})
    rng = np.random.default_rng(5)
    state = ensure_linked(GridChainState(), obs, PRIOR, rng)
    rejected = 0
    for _ in range(300):
        before = state.copy()
        new = mh_step(state, obs, PRIOR, rng)
        if new is state:
            rejected += 1
            assert state == before
        assert all(0 < v < 1 for v in list(new.p.values()) + list(new.q.values()))
        state = new
    assert rejected > 0


def test_always_accepted_with_positive_observations():
    obs = GridObservations({(0, 0): 1})
    rng = np.random.default_rng(6)
    state = ensure_linked(GridChainState(), obs, PRIOR, rng)
    for _ in range(200):
        state = mh_step(state, obs, PRIOR, rng)
    assert state.accepted == 200


@pytest.mark.parametrize("r", [0, 1])
def test_chain_matches_integrated_posterior(r):
    obs = GridObservations({(0, 0): r})
    chain = GridChain(PRIOR, burn=0)
    rng = np.random.default_rng(10 + r)
    chain.start_search(obs, rng)
    draws = np.array([chain.advance(obs, rng).p[0] for _ in range(100_000)])
    mean, var = ORACLE[r]
    assert draws.mean() == pytest.approx(mean, abs=0.02)
    assert draws.var() == pytest.approx(var, abs=0.02)


def test_lazy_cell_extremes():
    rng = np.random.default_rng(0)
    sure = GridSample(GridChainState({0: 1.0 - 1e-16}, {0: 1.0 - 1e-16}), GridObservations(), PRIOR)
    never = GridSample(GridChainState({0: 1e-12}, {0: 0.5}), GridObservations(), PRIOR)
    assert lazy_grid_cell(sure, 0, 0, rng) == 1
    assert lazy_grid_cell(never, 0, 0, rng) == 0


def test_lazy_cell_frequency():
    rng = np.random.default_rng(1)
    state = GridChainState({0: 0.5}, {0: 0.5})
    hits = sum(lazy_grid_cell(GridSample(state, GridObservations(), PRIOR), 0, 0, rng) for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.25, abs=0.01)


def test_lazy_values_are_drawn_once():
    rng = np.random.default_rng(2)
    obs = GridObservations({(0, 0): 1})
    sample = GridSample(GridChainState({0: 0.4}, {0: 0.6}), obs, PRIOR)
    first = [lazy_grid_cell(sample, i, j, rng) for i in range(-3, 4) for j in range(-3, 4)]
    p_extra, q_extra = dict(sample.p_extra), dict(sample.q_extra)
    again = [lazy_grid_cell(sample, i, j, rng) for i in range(-3, 4) for j in range(-3, 4)]
    assert first == again
    assert sample.p_extra == p_extra and sample.q_extra == q_extra
    assert lazy_grid_cell(sample, 0, 0, rng) == 1


def test_simulated_rewards_are_consumed():
    rng = np.random.default_rng(3)
    sample = GridSample(GridChainState({1: 1.0 - 1e-16}, {0: 1.0 - 1e-16}), GridObservations(), PRIOR)
    model = GridSimModel(sample, {(0, 0)}, rng)
    assert model.step((0, 0), 1) == ((1, 0), 1.0)
    assert model.step((2, 0), 3) == ((1, 0), 0.0)
    assert model.step((1, 0), 3) == ((0, 0), 0.0)


def test_problem_requires_lazy_sampling():
    problem = InfiniteGridProblem(GridChain(PRIOR), GridObservations(), set())
    with pytest.raises(ValueError):
        problem.root_model(np.random.default_rng(0), lazy=False)
    with pytest.raises(NotImplementedError):
        problem.bauct_model(np.random.default_rng(0))


def test_observation_conflicts_rejected():
    obs = GridObservations({(0, 0): 1})
    obs.add(0, 0, 1)
    with pytest.raises(ValueError):
        obs.add(0, 0, 0)
    with pytest.raises(ValueError):
        obs.add(1, 1, 2)
    with pytest.raises(ValueError):
        GridChain(PRIOR, burn=-1)
