import numpy as np
import pytest

from bamcp.beliefs import (SUCCESS, BetaBernoulliArms, DomainMismatch, SampledModel, SparseDirichlet,
                           StructuredGridPrior, SymmetricDirichlet, beta_predictive, collapsed_sample,
                           dirichlet_predictive, lazy_sample_transition, predictive, sample_dirichlet,
                           sample_model_eager, sparse_predictive)
from bamcp.core import TransitionCounts


def counts(*triples, n=1):
    c = TransitionCounts()
    for s, a, s2 in triples:
        c.add(s, a, s2, n)
    return c


def test_symmetric_prior_is_uniform():
    p = dirichlet_predictive(SymmetricDirichlet(1 / 9, 9), TransitionCounts(), 0, 0)
    np.testing.assert_allclose(p, np.full(9, 1 / 9))


def test_dirichlet_predictive_after_one_observation():
    # (1 + 1/9) / (1 + 1): closed form of the Dirichlet-multinomial predictive
    p = dirichlet_predictive(SymmetricDirichlet(1 / 9, 9), counts((0, 0, 3)), 0, 0)
    assert p[3] == pytest.approx(5 / 9, abs=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_sparse_prior_without_data_is_uniform():
    p = sparse_predictive(SparseDirichlet(25), TransitionCounts(), 0, 0)
    np.testing.assert_allclose(p, np.full(25, 1 / 25))


def test_sparse_predictive_concentrates_on_observed():
    p = sparse_predictive(SparseDirichlet(25), counts((0, 0, 7), n=3), 0, 0)
    assert p[7] == pytest.approx(4 / 5, abs=1e-12)
    others = np.delete(p, 7)
    np.testing.assert_allclose(others, np.full(24, 1 / 5 / 24))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_sparse_predictive_limit():
    p = sparse_predictive(SparseDirichlet(25), counts((0, 0, 4), n=10**6), 0, 0)
    assert p[4] == pytest.approx(1.0, abs=1e-5)


def test_predictive_helpers_check_prior_type():
    with pytest.raises(TypeError):
        dirichlet_predictive(SparseDirichlet(3), TransitionCounts(), 0, 0)
    with pytest.raises(TypeError):
        sparse_predictive(SymmetricDirichlet(1.0, 3), TransitionCounts(), 0, 0)


def test_unknown_state_is_rejected():
    with pytest.raises(DomainMismatch):
        predictive(SymmetricDirichlet(1.0, 3), TransitionCounts(), 5, 0)
    with pytest.raises(DomainMismatch):
        predictive(SymmetricDirichlet(1.0, 3), counts((0, 0, 7)), 0, 0)


@pytest.mark.parametrize("arm, mean", [((1, 1), 0.5), ((2, 1), 2 / 3), ((17, 19), 17 / 36)])
def test_beta_predictive(arm, mean):
    assert beta_predictive(arm) == pytest.approx(mean)


def test_bandit_rows_are_shared_across_states():
    arms = BetaBernoulliArms(((1.0, 1.0), None))
    c = counts((2, 0, SUCCESS), (1, 0, SUCCESS), (0, 0, 0))
    np.testing.assert_allclose(arms.row_params(c, 0, 0), [2.0, 3.0, 0.0])
    np.testing.assert_allclose(arms.row_params(c, 2, 0), [2.0, 3.0, 0.0])
    np.testing.assert_allclose(predictive(arms, c, 1, 1), [0.0, 0.0, 1.0])


def test_structured_prior_swap():
    prior = StructuredGridPrior(1, 2, 2, 1)
    assert prior.swapped() == StructuredGridPrior(2, 1, 1, 2)


def test_degenerate_dirichlet_is_a_point_mass():
    rng = np.random.default_rng(0)
    row = sample_dirichlet(np.array([1e9, 0.0, 0.0]), rng)
    np.testing.assert_array_equal(row, [1.0, 0.0, 0.0])


def test_large_counts_concentrate_samples():
    prior = SymmetricDirichlet(1 / 9, 9)
    c = counts((0, 0, 5), n=10**6)
    rng = np.random.default_rng(1)
    draws = [SampledModel(prior, c, rng).theta(0, 0)[5] for _ in range(2000)]
    assert np.mean([0.99 <= d <= 1.0 for d in draws]) >= 0.999


def test_eager_model_is_seed_deterministic():
    prior = SymmetricDirichlet(0.5, 4)
    c = counts((0, 1, 2), (2, 0, 3))
    m1 = sample_model_eager(prior, c, np.random.default_rng(7), 2)
    m2 = sample_model_eager(prior, c, np.random.default_rng(7), 2)
    assert m1.theta_cache.keys() == m2.theta_cache.keys()
    for key in m1.theta_cache:
        np.testing.assert_array_equal(m1.theta_cache[key], m2.theta_cache[key])


def test_eager_sampling_needs_finite_states():
    with pytest.raises(ValueError):
        sample_model_eager(StructuredGridPrior(), TransitionCounts(), np.random.default_rng(0), 4)


def test_lazy_rows_are_cached():
    prior = SymmetricDirichlet(1.0, 5)
    rng = np.random.default_rng(3)
    model = SampledModel(prior, TransitionCounts(), rng)
    lazy_sample_transition(model, prior, TransitionCounts(), 1, 0, rng)
    row = model.theta_cache[(1, 0)]
    lazy_sample_transition(model, prior, TransitionCounts(), 1, 0, rng)
    assert model.theta_cache[(1, 0)] is row
    assert list(model.theta_cache) == [(1, 0)]


def _tv(freq, p):
    return 0.5 * np.abs(freq - p).sum()


def test_lazy_marginal_matches_predictive():
    prior = SymmetricDirichlet(0.5, 4)
    c = counts((0, 0, 1), (0, 0, 1), (0, 0, 3))
    rng = np.random.default_rng(11)
    n = 100_000
    hits = np.zeros(4)
    for _ in range(n):
        model = SampledModel(prior, c, rng)
        hits[lazy_sample_transition(model, prior, c, 0, 0, rng)] += 1
    assert _tv(hits / n, predictive(prior, c, 0, 0)) < 0.02


def test_collapsed_marginal_matches_predictive():
    prior = SymmetricDirichlet(1.0, 3)
    c = counts((1, 1, 2))
    rng = np.random.default_rng(12)
    n = 100_000
    hits = np.bincount([collapsed_sample(prior, c, 1, 1, rng) for _ in range(n)], minlength=3)
    assert _tv(hits / n, predictive(prior, c, 1, 1)) < 0.02


def test_lazy_and_eager_models_agree_on_joint_paths():
    from scipy.stats import chi2_contingency

    prior = SymmetricDirichlet(0.7, 3)
    c = counts((0, 0, 1), (1, 1, 2), (2, 0, 0), (0, 1, 0))
    actions = (0, 1, 0)

    def path(model):
        s, code = 0, 0
        for a in actions:
            s = model.transition(s, a)
            code = 3 * code + s
        return code

    n = 100_000
    rng_l, rng_e = np.random.default_rng(21), np.random.default_rng(22)
    lazy = np.bincount([path(SampledModel(prior, c, rng_l)) for _ in range(n)], minlength=27)
    eager = np.bincount([path(sample_model_eager(prior, c, rng_e, 2)) for _ in range(n)], minlength=27)
    keep = (lazy + eager) > 0
    assert chi2_contingency(np.vstack([lazy[keep], eager[keep]]))[1] > 0.001
