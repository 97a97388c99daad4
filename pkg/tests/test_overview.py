import numpy as np
import pytest

from attnground.attnio import AttentionTrace, ScoreMap
from attnground.errors import EmptyTrace, UsageError
from attnground.overview import aggregate_cross_attention, bilinear_resize, resize_map


def _trace(weights, span, grid):
    return AttentionTrace(weights=np.asarray(weights, dtype=np.float64), visual_span=span, visual_grid=grid)


def test_single_step_single_head():
    trace = _trace([[[0.1, 0.3, 0.2, 0.4]]], (0, 4), (2, 2))
    out = aggregate_cross_attention(trace)
    expected = np.array([[0.0, 2.0 / 3.0], [1.0 / 3.0, 1.0]])
    assert np.allclose(out.grid, expected)


def test_identical_rows_mean_is_identity():
    row = [0.1, 0.3, 0.2, 0.4]
    single = aggregate_cross_attention(_trace([[row]], (0, 4), (2, 2)))
    multi = aggregate_cross_attention(_trace([[row, row], [row, row]], (0, 4), (2, 2)))
    assert np.array_equal(single.grid, multi.grid)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    t_steps, heads, grid = 20, 32, (16, 16)
    n_vis = grid[0] * grid[1]
    weights = rng.random((t_steps, heads, n_vis + 10)) / (n_vis + 10)
    trace = _trace(weights, (5, 5 + n_vis), grid)
    out = aggregate_cross_attention(trace)

    # independent oracle: naive triple loop plus affine normalization
    acc = np.zeros(grid)
    for t in range(t_steps):
        for h in range(heads):
            for v in range(n_vis):
                acc[v // grid[1], v % grid[1]] += weights[t, h, 5 + v]
    acc /= t_steps * heads
    expected = (acc - acc.min()) / (acc.max() - acc.min())
    assert np.allclose(out.grid, expected, atol=1e-6)


def test_head_permutation_invariance():
    rng = np.random.default_rng(4)
    weights = rng.random((3, 5, 20)) / 20
    trace = _trace(weights, (0, 16), (4, 4))
    permuted = _trace(weights[:, [4, 2, 0, 1, 3], :], (0, 16), (4, 4))
    assert np.allclose(
        aggregate_cross_attention(trace).grid, aggregate_cross_attention(permuted).grid
    )


def test_positive_scaling_invariance():
    rng = np.random.default_rng(5)
    weights = rng.random((2, 2, 16)) / 16
    out1 = aggregate_cross_attention(_trace(weights, (0, 16), (4, 4)))
    out2 = aggregate_cross_attention(_trace(weights * 0.25, (0, 16), (4, 4)))
    assert np.allclose(out1.grid, out2.grid)


def test_output_range_and_unique_max():
    rng = np.random.default_rng(6)
    weights = rng.random((4, 4, 64)) / 64
    out = aggregate_cross_attention(_trace(weights, (0, 64), (8, 8)))
    assert out.grid.min() >= 0 and out.grid.max() <= 1
    assert (out.grid == 1.0).sum() == 1  # random reals: no ties


def test_constant_trace_normalizes_to_zero():
    weights = np.full((2, 2, 16), 1 / 16)
    out = aggregate_cross_attention(_trace(weights, (0, 16), (4, 4)))
    assert np.array_equal(out.grid, np.zeros((4, 4)))


def test_empty_trace_raises():
    with pytest.raises(EmptyTrace):
        aggregate_cross_attention(_trace(np.zeros((0, 2, 16)), (0, 16), (4, 4)))


def test_resize_constant_stays_constant():
    for target in (16, 32, 64):
        out = resize_map(ScoreMap(np.full((4, 4), 0.7)), target)
        assert np.array_equal(out.grid, np.zeros((target, target)))


def test_resize_column_ramp_hand_values():
    m = ScoreMap(np.array([[0.0, 1.0], [0.0, 1.0]]))
    out = resize_map(m, 4)
    # corner-aligned: source coords 0, 1/3, 2/3, 1 along each axis
    expected_row = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
    assert np.allclose(out.grid, np.tile(expected_row, (4, 1)))


def test_resize_round_trip_preserves_argmax():
    yy, xx = np.mgrid[0:16, 0:16]
    blob = np.exp(-(((yy - 9) ** 2 + (xx - 5) ** 2) / 8.0))
    up = resize_map(ScoreMap(blob), 64)
    down = resize_map(up, 16)
    assert np.unravel_index(np.argmax(down.grid), down.grid.shape) == (9, 5)


def test_resize_matches_scalar_bilinear():
    rng = np.random.default_rng(9)
    src = rng.random((5, 5))
    out = bilinear_resize(src, 11, 11)
    for i in range(11):
        for j in range(11):
            y = i * 4.0 / 10.0
            x = j * 4.0 / 10.0
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, 4), min(x0 + 1, 4)
            fy, fx = y - y0, x - x0
            val = (
                src[y0, x0] * (1 - fy) * (1 - fx)
                + src[y1, x0] * fy * (1 - fx)
                + src[y0, x1] * (1 - fy) * fx
                + src[y1, x1] * fy * fx
            )
            assert out[i, j] == pytest.approx(val, abs=1e-12)


def test_resize_rejects_bad_target():
    with pytest.raises(UsageError):
        resize_map(ScoreMap(np.ones((2, 2))), 0)
