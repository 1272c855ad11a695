import itertools
import math

import numpy as np
import pytest

from batcap import attribution as attr
from batcap.rng import Rng


def brute_force_phi(predict, x, background):
    """Average marginal contribution over every feature ordering."""
    m = len(x)
    phi = np.zeros(m)
    for perm in itertools.permutations(range(m)):
        z = background.copy()
        prev = float(predict(z[None, :])[0])
        for j in perm:
            z[j] = x[j]
            cur = float(predict(z[None, :])[0])
            phi[j] += cur - prev
            prev = cur
    return phi / math.factorial(m)


def random_model(rng, m):
    w1 = rng.normals(m * 3).reshape(m, 3)
    w2 = rng.normals(3)

    def predict(Z):
        Z = np.atleast_2d(Z)
        return np.tanh(Z @ w1) @ w2 + 0.3 * (Z[:, 0] * Z[:, -1])

    return predict


def test_additive_model_attributes_inputs_exactly():
    predict = lambda Z: np.atleast_2d(Z).sum(axis=1)
    x = np.array([1.5, -2.0, 0.25])
    report = attr.shapley_exact(predict, x, np.zeros(3))
    assert np.allclose(report.phi, x, atol=1e-12)
    assert report.base_value == pytest.approx(0.0)


def test_constant_model_gets_zero_phi():
    predict = lambda Z: np.full(len(np.atleast_2d(Z)), 7.25)
    report = attr.shapley_exact(predict, np.ones(4), np.zeros(4))
    assert np.allclose(report.phi, 0.0)
    assert report.base_value == pytest.approx(7.25)


def test_matches_permutation_brute_force_three_features():
    rng = Rng(21)
    predict = random_model(rng, 3)
    x = rng.normals(3)
    bg = rng.normals(3)
    report = attr.shapley_exact(predict, x, bg)
    assert np.allclose(report.phi, brute_force_phi(predict, x, bg), atol=1e-12)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_matches_permutation_brute_force_sizes(m):
    rng = Rng(100 + m)
    for _ in range(3):
        predict = random_model(rng, m)
        x = rng.normals(m)
        bg = rng.normals(m)
        report = attr.shapley_exact(predict, x, bg)
        assert np.allclose(report.phi, brute_force_phi(predict, x, bg), atol=1e-12)


def test_local_accuracy():
    rng = Rng(33)
    predict = random_model(rng, 7)
    for _ in range(5):
        x = rng.normals(7)
        bg = rng.normals(7)
        report = attr.shapley_exact(predict, x, bg)
        assert report.base_value + report.phi.sum() == pytest.approx(
            report.prediction, abs=1e-9
        )


def test_symmetry_of_duplicate_columns():
    # model depends symmetrically on features 0 and 1
    predict = lambda Z: np.atleast_2d(Z)[:, 0] * np.atleast_2d(Z)[:, 1] + np.atleast_2d(Z)[:, 2]
    x = np.array([2.0, 2.0, 5.0])
    report = attr.shapley_exact(predict, x, np.zeros(3))
    assert report.phi[0] == pytest.approx(report.phi[1], abs=1e-12)


def test_dummy_feature_gets_exact_zero():
    predict = lambda Z: np.atleast_2d(Z)[:, 0] ** 2
    report = attr.shapley_exact(predict, np.array([3.0, 9.0]), np.array([1.0, -4.0]))
    assert report.phi[1] == 0.0


def test_rejects_too_many_features():
    predict = lambda Z: np.atleast_2d(Z).sum(axis=1)
    with pytest.raises(ValueError, match="fuse"):
        attr.shapley_exact(predict, np.zeros(21), np.zeros(21))


def test_rejects_non_finite_predictions():
    predict = lambda Z: np.full(len(np.atleast_2d(Z)), np.nan)
    with pytest.raises(ValueError, match="non-finite"):
        attr.shapley_exact(predict, np.ones(3), np.zeros(3))


def test_summary_single_feature_dependence_ranks_it_first():
    predict = lambda Z: 3.0 * np.atleast_2d(Z)[:, 2]
    rng = Rng(55)
    X = rng.uniforms(60).reshape(20, 3)
    summary = attr.shapley_summary(predict, X, ("a", "b", "c"))
    assert summary.ranking[0] == "c"
    assert summary.mean_abs_phi[0] == pytest.approx(0.0, abs=1e-12)


def test_summary_duplicate_columns_share_credit():
    rng = Rng(56)
    base = rng.uniforms(20)
    X = np.column_stack([base, base, rng.uniforms(20)])
    predict = lambda Z: np.atleast_2d(Z)[:, 0] + np.atleast_2d(Z)[:, 1]
    summary = attr.shapley_summary(predict, X)
    assert summary.mean_abs_phi[0] == pytest.approx(summary.mean_abs_phi[1], abs=1e-9)


def test_summary_background_modes_agree_on_dominant_feature():
    rng = Rng(57)
    X = rng.uniforms(80).reshape(20, 4)
    target_col = 1
    predict = lambda Z: 10.0 * np.atleast_2d(Z)[:, target_col] ** 2
    top_mean = attr.shapley_summary(predict, X, background_mode="mean").ranking[0]
    top_median = attr.shapley_summary(predict, X, background_mode="median").ranking[0]
    assert top_mean == top_median == "F2"


def test_interactions_zero_for_additive_model():
    predict = lambda Z: np.atleast_2d(Z) @ np.array([1.0, -2.0, 0.5])
    inter = attr.interaction_matrix(predict, np.ones(3), np.zeros(3))
    off_diag = inter.values[~np.eye(3, dtype=bool)]
    assert np.allclose(off_diag, 0.0, atol=1e-12)


def test_interactions_product_model_split_evenly():
    predict = lambda Z: np.atleast_2d(Z)[:, 0] * np.atleast_2d(Z)[:, 1]
    inter = attr.interaction_matrix(predict, np.array([1.0, 1.0]), np.zeros(2))
    assert inter.values[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert inter.values[1, 0] == pytest.approx(0.5, abs=1e-12)


def test_interactions_symmetric_and_rows_reconstruct_phi():
    rng = Rng(58)
    predict = random_model(rng, 5)
    x = rng.normals(5)
    bg = rng.normals(5)
    inter = attr.interaction_matrix(predict, x, bg)
    assert np.allclose(inter.values, inter.values.T, atol=1e-12)
    phi = attr.shapley_exact(predict, x, bg).phi
    assert np.allclose(inter.values.sum(axis=1), phi, atol=1e-9)


def test_interactions_reject_too_many_features():
    predict = lambda Z: np.atleast_2d(Z).sum(axis=1)
    with pytest.raises(ValueError, match="interaction cap"):
        attr.interaction_matrix(predict, np.zeros(13), np.zeros(13))
