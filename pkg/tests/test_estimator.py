import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning, NotFittedError
from sklearn.linear_model import Lasso

from pdconsensus.estimator import ConsensusLasso
from pdconsensus.graph import Graph


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 15)) / np.sqrt(60)
    w = np.zeros(15)
    w[[2, 7, 11]] = [1.5, -2.0, 0.7]
    return X, X @ w + 0.01 * rng.standard_normal(60)


def test_matches_sklearn_lasso(data):
    X, y = data
    est = ConsensusLasso(n_agents=4, edge_prob=0.7, tol=1e-10).fit(X, y)
    # sklearn scales the squared loss by 1 / (2 n_samples)
    ref = Lasso(alpha=est.lam_ / X.shape[0], fit_intercept=False, tol=1e-14, max_iter=100_000).fit(X, y)
    np.testing.assert_allclose(est.coef_, ref.coef_, atol=1e-7)
    assert np.abs(est.agent_coefs_ - est.coef_).max() <= 1e-8
    assert est.trace_.converged and est.n_rounds_ == est.trace_.rounds


def test_predict_and_score(data):
    X, y = data
    est = ConsensusLasso(n_agents=3, tol=1e-9).fit(X, y)
    assert est.predict(X).shape == (60,)
    assert est.score(X, y) > 0.9
    assert est.n_features_in_ == 15


def test_explicit_graph_and_lam(data):
    X, y = data
    est = ConsensusLasso(lam=0.01, graph=Graph.path(6), tol=1e-9).fit(X, y)
    assert est.lam_ == 0.01 and est.graph_.num_nodes == 6
    assert est.agent_coefs_.shape == (6, 15)


def test_params_and_clone():
    est = ConsensusLasso(theta=2.0, n_agents=7)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.get_params()["theta"] == 2.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ConsensusLasso().predict(np.zeros((2, 3)))


def test_too_many_agents(data):
    X, y = data
    with pytest.raises(ValueError, match="agents"):
        ConsensusLasso(n_agents=10, edge_prob=0.9).fit(X[:5], y[:5])


def test_round_budget_warns(data):
    X, y = data
    with pytest.warns(ConvergenceWarning):
        ConsensusLasso(max_rounds=5).fit(X, y)
