import numpy as np
import pytest

from attnground.attnio import ScoreMap, SelfAttentionStack
from attnground.errors import AllZeroAttention, ResolutionMismatch, UsageError
from attnground.focus import (
    FusedSelfAttention,
    InteractionConfig,
    SimilarityAxis,
    Strategy,
    fuse_self_attention,
    interact,
)


def _stochastic(rng, r):
    s = rng.random((r * r, r * r))
    return s / s.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# fusion


def test_single_layer_at_target_is_identity():
    rng = np.random.default_rng(0)
    s = _stochastic(rng, 4)
    fused = fuse_self_attention(SelfAttentionStack(layers=((4, s),)))
    assert fused.target_resolution == 4
    assert np.allclose(fused.tensor, s)


def test_two_identical_layers_average_to_one():
    rng = np.random.default_rng(1)
    s = _stochastic(rng, 4)
    fused = fuse_self_attention(SelfAttentionStack(layers=((4, s), (4, s.copy()))))
    assert np.allclose(fused.tensor, s)


def _oracle_interp_weights(src, dst, coord):
    """Corner-aligned linear weights for one output coordinate."""
    w = np.zeros(src)
    if src == 1:
        w[0] = 1.0
        return w
    pos = coord * (src - 1) / (dst - 1)
    i0 = int(np.floor(pos))
    i1 = min(i0 + 1, src - 1)
    f = pos - i0
    w[i0] += 1 - f
    w[i1] += f
    return w


def _oracle_fuse(layers, target):
    """Naive scalar re-implementation: per-axis bilinear, renormalize, average."""
    acc = np.zeros((target * target, target * target))
    for res, tensor in layers:
        t4 = tensor.reshape(res, res, res, res)
        up = np.zeros((target, target, target, target))
        for i in range(target):
            wi = _oracle_interp_weights(res, target, i)
            for j in range(target):
                wj = _oracle_interp_weights(res, target, j)
                for k in range(target):
                    wk = _oracle_interp_weights(res, target, k)
                    for l in range(target):
                        wl = _oracle_interp_weights(res, target, l)
                        up[i, j, k, l] = np.einsum("a,b,c,d,abcd->", wi, wj, wk, wl, t4)
        up2 = up.reshape(target * target, target * target)
        up2 /= up2.sum(axis=1, keepdims=True)
        acc += up2
    return acc / len(layers)


def test_fusion_matches_scalar_oracle_and_is_stochastic():
    rng = np.random.default_rng(2)
    layers = ((4, _stochastic(rng, 4)), (8, _stochastic(rng, 8)))
    fused = fuse_self_attention(SelfAttentionStack(layers=layers), 8)
    row_err = np.abs(fused.tensor.sum(axis=1) - 1.0).max()
    assert row_err <= 1e-6
    expected = _oracle_fuse(layers, 8)
    assert np.abs(fused.tensor - expected).max() <= 1e-5


def test_fusion_default_target_is_max_resolution():
    rng = np.random.default_rng(3)
    fused = fuse_self_attention(SelfAttentionStack(layers=((4, _stochastic(rng, 4)), (8, _stochastic(rng, 8)))))
    assert fused.target_resolution == 8


def test_fusion_rejects_empty_stack():
    with pytest.raises(UsageError):
        fuse_self_attention(SelfAttentionStack(layers=()))


# ---------------------------------------------------------------------------
# interaction


def _fused_identity(r):
    return FusedSelfAttention(tensor=np.eye(r * r), target_resolution=r)


def test_similarity_identity_prior_preserves_argmax():
    rng = np.random.default_rng(4)
    for _ in range(20):
        grid = rng.random((4, 4))
        out = interact(ScoreMap(grid), _fused_identity(4), InteractionConfig())
        assert np.argmax(out.grid) == np.argmax(grid)


def test_similarity_uniform_prior_gives_zeros():
    rng = np.random.default_rng(5)
    r = 4
    uniform = FusedSelfAttention(tensor=np.full((r * r, r * r), 1.0 / (r * r)), target_resolution=r)
    out = interact(ScoreMap(rng.random((r, r))), uniform, InteractionConfig())
    assert np.array_equal(out.grid, np.zeros((r, r)))


def test_multiplication_hand_matvec():
    a = np.array([[1.0, 0.0], [0.0, 0.0]])
    s = np.array(
        [
            [0.7, 0.1, 0.1, 0.1],
            [0.25, 0.25, 0.25, 0.25],
            [0.25, 0.25, 0.25, 0.25],
            [0.25, 0.25, 0.25, 0.25],
        ]
    )
    fused = FusedSelfAttention(tensor=s, target_resolution=2)
    out = interact(ScoreMap(a), fused, InteractionConfig(strategy=Strategy.MULTIPLICATION))
    # pre-normalization out = S[0, :] = [.7,.1,.1,.1]; min-max maps to [1,0,0,0]
    assert np.allclose(out.grid.ravel(), [1.0, 0.0, 0.0, 0.0])


def test_exponentiation_gamma_one_equals_multiplication():
    rng = np.random.default_rng(6)
    grid = rng.random((4, 4))
    fused = FusedSelfAttention(tensor=_stochastic(rng, 4), target_resolution=4)
    mult = interact(ScoreMap(grid), fused, InteractionConfig(strategy=Strategy.MULTIPLICATION))
    expo = interact(
        ScoreMap(grid), fused, InteractionConfig(strategy=Strategy.EXPONENTIATION, gamma=1.0)
    )
    assert np.array_equal(mult.grid, expo.grid)


def test_anchor_averages_top_rows():
    grid = np.array([[0.9, 0.8], [0.1, 0.2]])
    rng = np.random.default_rng(7)
    s = _stochastic(rng, 2)
    fused = FusedSelfAttention(tensor=s, target_resolution=2)
    out = interact(ScoreMap(grid), fused, InteractionConfig(strategy=Strategy.ANCHOR, anchor_count=2))
    raw = (s[0] + s[1]) / 2.0  # anchors: flat indices 0 (0.9) and 1 (0.8)
    expected = (raw - raw.min()) / (raw.max() - raw.min())
    assert np.allclose(out.grid.ravel(), expected)


def test_similarity_cosine_matches_scalar_oracle():
    rng = np.random.default_rng(8)
    grid = rng.random((3, 3))
    s = _stochastic(rng, 3)
    fused = FusedSelfAttention(tensor=s, target_resolution=3)
    out = interact(ScoreMap(grid), fused, InteractionConfig())
    a = grid.ravel()
    raw = np.zeros(9)
    for v in range(9):
        col = s[:, v]
        raw[v] = float(a @ col) / (np.linalg.norm(a) * np.linalg.norm(col))
        assert 0.0 <= raw[v] <= 1.0  # nonnegative inputs keep cosine in [0,1]
    expected = (raw - raw.min()) / (raw.max() - raw.min())
    assert np.allclose(out.grid.ravel(), expected)


def test_similarity_row_axis_uses_transpose():
    rng = np.random.default_rng(9)
    grid = rng.random((3, 3))
    s = _stochastic(rng, 3)
    col = interact(ScoreMap(grid), FusedSelfAttention(s, 3), InteractionConfig())
    row = interact(
        ScoreMap(grid),
        FusedSelfAttention(s.T, 3),
        InteractionConfig(similarity_axis=SimilarityAxis.ROW),
    )
    assert np.allclose(col.grid, row.grid)


def test_resolution_mismatch_raises():
    rng = np.random.default_rng(10)
    with pytest.raises(ResolutionMismatch):
        interact(ScoreMap(rng.random((3, 3))), _fused_identity(4), InteractionConfig())


def test_all_zero_cross_map_raises():
    with pytest.raises(AllZeroAttention):
        interact(ScoreMap(np.zeros((4, 4))), _fused_identity(4), InteractionConfig())


def test_config_validation():
    with pytest.raises(UsageError):
        InteractionConfig(gamma=0.0)
    with pytest.raises(UsageError):
        InteractionConfig(anchor_count=0)
