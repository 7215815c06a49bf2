import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsett.dictionary import TimeGrid
from sparsett.postprocess import (
    Component,
    MixtureModel,
    build_model,
    clean_solution,
    debias,
    merge_nearby,
    model_pmf,
    repair_column,
    repair_scale,
    repair_unity,
    threshold_support,
)


def test_threshold_support():
    theta = np.array([0.0, 1.0, 1e-4, 2e-3, 0.5])
    np.testing.assert_array_equal(threshold_support(theta, 1e-3), [1, 3, 4])
    assert threshold_support(np.zeros(4)).size == 0


def test_merge_nearby_same_scale_only():
    locs = np.array([10.0, 11.0, 12.0, 11.0, 30.0])
    scales = np.array([1.0, 1.0, 1.0, 2.0, 1.0])
    theta = np.array([0.1, 0.3, 0.2, 0.05, 0.35])
    support, merged = merge_nearby([0, 1, 2, 3, 4], theta, locs, scales, dist=1.0)
    np.testing.assert_array_equal(support, [1, 3, 4])
    assert merged[1] == pytest.approx(0.6)
    assert merged.sum() == pytest.approx(theta.sum())


def test_merge_disabled():
    support, merged = merge_nearby([0, 1], np.array([0.3, 0.2]), [1.0, 2.0], [1.0, 1.0], 0.0)
    np.testing.assert_array_equal(support, [0, 1])


def test_debias_recovers_exact_weights(small_ml):
    cols = np.array([30, 95, 150])
    w = np.array([0.2, 0.5, 0.3])
    p = small_ml.phi[:, cols] @ w
    np.testing.assert_allclose(debias(p, small_ml, cols), w, atol=1e-10)
    np.testing.assert_allclose(debias(p, small_ml.phi, cols[:1]),
                               [small_ml.phi[:, 30] @ p / (small_ml.phi[:, 30] @ small_ml.phi[:, 30])])
    with pytest.raises(ValueError):
        debias(p, small_ml, [])


def test_clean_solution_pipeline(small_ml):
    cols = np.array([30, 95])
    p = small_ml.phi[:, cols] @ np.array([0.4, 0.6])
    theta = np.zeros(small_ml.n_columns)
    theta[cols] = [0.35, 0.55]
    theta[7] = 1e-6
    support, weights = clean_solution(theta, small_ml, p)
    np.testing.assert_array_equal(support, cols)
    np.testing.assert_allclose(weights, [0.4, 0.6], atol=1e-10)
    s, w = clean_solution(np.zeros(small_ml.n_columns), small_ml, p)
    assert s.size == 0 and w.size == 0


# sigma' is the first power-of-two multiple of delta=1 passing the Gamma(x) >= 0.88 bound;
# the last value is the direct maximum of the flat column over 600 rows
@pytest.mark.parametrize("eps,sigma,max_psi", [(1e-3, 512.0, 9.7e-4), (1e-4, 8192.0, 5.6e-5), (1e-6, 524288.0, 8.4e-7)])
def test_repair_scale(eps, sigma, max_psi):
    assert repair_scale(1.0, eps) == sigma
    psi = repair_column(600, 1.0, sigma)
    assert psi.max() <= eps
    assert psi.max() == pytest.approx(max_psi, rel=0.02)
    # half the scale would not have been enough
    assert repair_column(600, 1.0, sigma / 2).max() > eps * 0.88 or sigma == 1.0


def test_repair_scale_validation():
    with pytest.raises(ValueError):
        repair_scale(1.0, 0.0)


def _model(weights, locs=None):
    locs = locs or list(range(10, 10 + 10 * len(weights), 10))
    return MixtureModel([Component(float(t), 1.0, float(w), -1) for t, w in zip(locs, weights)])


@pytest.mark.parametrize("eps", [1e-4, 1e-6])
def test_repair_unity_exact_sum(eps):
    grid = TimeGrid(1.0, 600, 300, 1)
    m = repair_unity(_model([0.3, 0.2, 0.4999]), grid, eps)
    assert math.fsum([*m.weights, m.repair.weight]) == pytest.approx(1.0, abs=1e-12)
    assert m.total_weight == pytest.approx(1.0, abs=1e-12)
    assert m.repair.max_contribution <= eps
    np.testing.assert_allclose(m.weights, [0.3, 0.2, 0.4999])


def test_repair_unity_rescales_excess():
    grid = TimeGrid(1.0, 600, 300, 1)
    m = repair_unity(_model([0.6, 0.6]), grid)
    assert m.repair is None
    np.testing.assert_allclose(m.weights, [0.5, 0.5])
    assert m.provenance["rescaled"] == pytest.approx(1.2)


def test_repair_unity_does_not_mutate():
    grid = TimeGrid(1.0, 600, 300, 1)
    m = _model([0.5])
    repair_unity(m, grid)
    assert m.repair is None


@given(arrays(float, st.integers(1, 8), elements=st.floats(0.0, 0.2)))
def test_repair_property(weights):
    grid = TimeGrid(1.0, 600, 300, 1)
    m = repair_unity(_model(list(weights)), grid, 1e-6)
    assert m.total_weight == pytest.approx(1.0, abs=1e-12)
    # an excess is rescaled away instead of repaired
    assert (m.repair is None) == (math.fsum(weights) > 1.0)
    assert m.repair is None or m.repair.weight >= 0


def test_model_sorting_and_validation():
    m = MixtureModel([Component(20.0, 2.0, 0.1), Component(10.0, 1.0, 0.2), Component(20.0, 1.0, 0.3)])
    assert [(c.location, c.scale) for c in m.components] == [(10.0, 1.0), (20.0, 1.0), (20.0, 2.0)]
    with pytest.raises(ValueError):
        MixtureModel([Component(1.0, 1.0, -0.1)])


def test_model_dict_roundtrip():
    grid = TimeGrid(1.0, 600, 300, 1)
    m = repair_unity(_model([0.3, 0.6]), grid)
    back = MixtureModel.from_dict(m.to_dict())
    assert back == m


def test_model_pmf(small_ml):
    m = build_model(small_ml, [3, 40], [0.25, 0.5])
    p = model_pmf(m, small_ml)
    np.testing.assert_allclose(p, 0.25 * small_ml.phi[:, 3] + 0.5 * small_ml.phi[:, 40])
    # column lookup by (location, scale) when the index is unknown
    m2 = MixtureModel([Component(c.location, c.scale, c.weight) for c in m.components])
    np.testing.assert_allclose(model_pmf(m2, small_ml), p)
    with pytest.raises(KeyError):
        model_pmf(MixtureModel([Component(1.5, 1.0, 1.0)]), small_ml)
