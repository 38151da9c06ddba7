import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deaiml import boost, treeshap
from deaiml.boost import GbtConfig

from dgp import random_gbt as _model
from oracles import shapley_bruteforce, shapley_interactions_bruteforce


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_local_accuracy(seed):
    model, X = _model(seed, missing=0.1)
    phi, phi0 = treeshap.shap_matrix(model, X)
    assert np.abs(phi0 + phi.sum(axis=1) - model.margin(X)).max() < 1e-8


@pytest.mark.parametrize("seed", range(12))
def test_matches_exhaustive_shapley(seed):
    model, X = _model(seed, p=[3, 5, 8][seed % 3], missing=0.1 if seed % 2 else 0.0)
    for x in X[:4]:
        sv = treeshap.shap_values(model, x)
        ref, v0 = shapley_bruteforce(model, x)
        assert np.abs(sv.phi - ref).max() < 1e-8
        assert sv.phi0 == pytest.approx(v0, abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_interactions_match_exhaustive(seed):
    model, X = _model(100 + seed, p=[3, 4, 6][seed % 3])
    for x in X[:3]:
        im = treeshap.shap_interactions(model, x)
        ref = shapley_interactions_bruteforce(model, x)
        assert np.abs(im.Phi - ref).max() < 1e-8
        assert np.abs(im.Phi - im.Phi.T).max() < 1e-8
        assert np.abs(im.Phi.sum(axis=1) - treeshap.shap_values(model, x).phi).max() < 1e-8


def test_dummy_feature_gets_exactly_zero():
    r = np.random.default_rng(1)
    X = r.normal(size=(100, 4))
    X[:, 2] = 0.0  # constant, so never split on
    y = (X[:, 0] > 0).astype(int)
    model = boost.train_gbt(X, y, GbtConfig(n_estimators=20, max_depth=3))
    phi, _ = treeshap.shap_matrix(model, X)
    assert (phi[:, 2] == 0.0).all()
    Phi = treeshap.interaction_tensor(model, X[:5])
    assert (Phi[:, 2, :] == 0.0).all() and (Phi[:, :, 2] == 0.0).all()


def test_symmetric_features_share_credit():
    # hand-built tree computing x0 + x1 on {0,1}^2 with equal covers: the function is symmetric
    def leaf(v):
        return {"leaf": v, "cover": 10}

    def inner(f, left, right):
        return {"feature": f, "threshold": 0.5, "default_left": True, "cover": 10 * 2 * (1 + ("feature" in left)),
                "left": left, "right": right}

    tree = boost.Tree.from_dict(inner(0, inner(1, leaf(0.0), leaf(1.0)), inner(1, leaf(1.0), leaf(2.0))))
    model = boost.TreeEnsemble([tree], 0.0, 1.0, 2)
    for x in ([1.0, 1.0], [0.0, 0.0]):
        sv = treeshap.shap_values(model, x)
        assert sv.phi[0] == sv.phi[1]
        np.testing.assert_allclose(sv.phi, shapley_bruteforce(model, np.array(x))[0], atol=1e-12)
    assert treeshap.shap_values(model, [1.0, 1.0]).phi[0] == pytest.approx(0.5)


def test_single_leaf_model():
    X = np.ones((10, 3))
    y = np.array([0, 1] * 5)
    model = boost.train_gbt(X, y, GbtConfig(n_estimators=3))
    sv = treeshap.shap_values(model, X[0])
    assert (sv.phi == 0).all() and sv.phi0 == pytest.approx(model.margin(X[:1])[0])


def test_ranking_and_profiles():
    model, X = _model(3, p=5, rounds=10)
    phi, _ = treeshap.shap_matrix(model, X)
    rk = treeshap.global_ranking(model, X, [f"v{i}" for i in range(5)])
    assert (np.diff(rk.mean_abs) <= 0).all()
    np.testing.assert_allclose(rk.mean_abs, np.abs(phi).mean(axis=0)[rk.order])
    assert rk.to_records()[0]["rank"] == 1 and len(rk.top(3)) == 3
    hi, lo = treeshap.extreme_profiles(model, X, [f"u{i}" for i in range(len(X))], k=3)
    tot = phi.sum(axis=1)
    assert hi.total == pytest.approx(tot.max()) and lo.total == pytest.approx(tot.min())
    assert len(hi.features) == 3 and set(hi.to_dict()) == {"dmu_id", "total_contribution", "note", "features"}


def test_interaction_feature_limit():
    model, X = _model(0, p=3)
    wide = boost.TreeEnsemble(model.trees, model.base_score, model.learning_rate, 65)
    with pytest.raises(ValueError):
        treeshap.interaction_tensor(wide, np.zeros((1, 65)))
