import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsett import parzen
from sparsett.dictionary import TimeGrid
from sparsett.errors import OutOfRangeError
from sparsett.parzen import (
    KernelSpec,
    build_kernel_matrix,
    discretize,
    parzen_batch,
    rolling_state,
    rolling_update,
    sequential_state,
    sequential_update,
    silverman_bandwidth,
)

samples_st = st.lists(st.floats(0.0, 159.0), min_size=1, max_size=80)


def test_silverman_formula():
    x = np.array([10.0, 12.0, 15.0, 20.0, 31.0])
    expected = 1.06 * np.std(x, ddof=1) * 5 ** (-0.2)
    assert silverman_bandwidth(x) == pytest.approx(expected)


def test_silverman_floor_and_errors():
    assert silverman_bandwidth([5.0, 5.0, 5.0], delta=2.0) == 1.0
    with pytest.raises(ValueError):
        silverman_bandwidth([1.0])


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(0.0)
    with pytest.raises(ValueError):
        KernelSpec(1.0, kernel="epanechnikov")


def test_kernel_columns_are_pmfs(small_km):
    np.testing.assert_allclose(small_km.psi.sum(axis=0), 1.0, atol=1e-13)
    assert np.all(small_km.psi >= 0)
    # interior columns are symmetric Gaussians centred on their row
    col = small_km.column(80)
    np.testing.assert_allclose(col[70:80], col[81:91][::-1], rtol=1e-12)
    assert np.argmax(col) == 80


def test_discretize(small_grid):
    np.testing.assert_array_equal(discretize([0.0, 0.49, 0.5, 0.51, 158.9, 159.5], small_grid),
                                  [0, 0, 0, 1, 159, 159])
    with pytest.raises(OutOfRangeError) as exc:
        discretize([3.0, -1.0, 170.0], small_grid)
    assert exc.value.samples == [-1.0, 170.0]
    with pytest.raises(OutOfRangeError):
        discretize([np.nan], small_grid)


def test_batch_is_kernel_average(small_km):
    x = [10.2, 10.4, 50.0]
    p = parzen_batch(x, small_km).p_hat
    expected = (2 * small_km.column(10) + small_km.column(50)) / 3
    np.testing.assert_allclose(p, expected, atol=1e-15)
    assert p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        parzen_batch([], small_km)


@given(samples_st)
def test_sequential_matches_batch(small_km, xs):
    state = sequential_state(small_km)
    for x in xs:
        sequential_update(state, x)
    np.testing.assert_allclose(state.p_hat, parzen_batch(xs, small_km).p_hat, atol=1e-12)
    assert state.count == len(xs)


@given(samples_st, st.integers(1, 30))
def test_rolling_matches_window_batch(small_km, xs, window):
    state = rolling_state(small_km, window)
    for x in xs:
        rolling_update(state, x)
    np.testing.assert_allclose(state.p_hat, parzen_batch(xs[-window:], small_km).p_hat, atol=1e-12)
    assert len(state.represented) == min(window, len(xs))


def test_out_of_range_leaves_state_untouched(small_km):
    state = rolling_state(small_km, 3)
    rolling_update(state, 5.0)
    before = state.snapshot()
    with pytest.raises(OutOfRangeError):
        rolling_update(state, 1e6)
    np.testing.assert_array_equal(state.p_hat, before)
    assert state.represented == [5]


def test_snapshot_is_a_copy(small_km):
    state = parzen_batch([3.0], small_km)
    snap = state.snapshot()
    snap[:] = 0
    assert state.p_hat.sum() == pytest.approx(1.0)


def test_rolling_update_needs_rolling_state(small_km):
    with pytest.raises(ValueError):
        rolling_update(sequential_state(small_km), 1.0)
    with pytest.raises(ValueError):
        rolling_state(small_km, 0)


def test_periodic_renormalization(small_km, monkeypatch):
    monkeypatch.setattr(parzen, "RENORMALIZE_EVERY", 7)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, 159, 50)
    state = rolling_state(small_km, 5)
    for x in xs:
        rolling_update(state, x)
    np.testing.assert_allclose(state.p_hat, parzen_batch(xs[-5:], small_km).p_hat, atol=1e-13)


def test_long_stream_drift():
    grid = TimeGrid(1.0, 400, 200)
    km = build_kernel_matrix(grid, KernelSpec(2.0))
    xs = np.random.default_rng(4).gamma(9.0, 8.0, 10_000).clip(0, 399)
    seq, roll = sequential_state(km), rolling_state(km, 100)
    for x in xs:
        sequential_update(seq, x)
        rolling_update(roll, x)
    assert np.max(np.abs(seq.p_hat - parzen_batch(xs, km).p_hat)) <= 1e-10
    assert np.max(np.abs(roll.p_hat - parzen_batch(xs[-100:], km).p_hat)) <= 1e-10
