import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msmr.numeric import (
    AttentionConfig,
    ConfigurationError,
    DimensionError,
    MissingGradientError,
    Parameter,
    Tensor,
    adam_step,
    attention_block,
    init_attention,
    ops,
    step_decay_lr,
)
from msmr.numeric import checkpoint
from msmr.numeric.gradcheck import check_gradients, random_projection_loss


def leaf(arr):
    return Tensor(np.asarray(arr, dtype=float), requires_grad=True)


class TestMatmul:
    def test_identity(self):
        a = Tensor([[1, 2], [3, 4]])
        out = ops.matmul(Tensor(np.eye(2)), a)
        assert np.array_equal(out.data, a.data)

    def test_projector(self):
        out = ops.matmul(Tensor([[1, 0], [0, 0]]), Tensor([[5, 6], [7, 8]]))
        assert np.array_equal(out.data, [[5, 6], [0, 0]])

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(3, 4\).*\(3, 2\)"):
            ops.matmul(Tensor(np.zeros((3, 4))), Tensor(np.zeros((3, 2))))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        a, b = leaf(rng.normal(size=(3, 4))), leaf(rng.normal(size=(4, 2)))
        fn = random_projection_loss(lambda: ops.matmul(a, b), rng.normal(size=(3, 2)))
        assert max(check_gradients(fn, [a, b])) < 1e-6

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_identity_both_sides_exact(self, m, n, seed):
        a = Tensor(np.random.default_rng(seed).normal(size=(m, n)))
        assert np.array_equal(ops.matmul(Tensor(np.eye(m)), a).data, a.data)
        assert np.array_equal(ops.matmul(a, Tensor(np.eye(n))).data, a.data)


class TestElu:
    def test_values(self):
        out = ops.elu(Tensor([0.0, 2.0, -1.0])).data
        assert out[0] == 0.0
        assert out[1] == 2.0
        assert out[2] == pytest.approx(math.exp(-1) - 1)
        assert out[2] == pytest.approx(-0.6321, abs=1e-4)

    def test_gradient(self):
        rng = np.random.default_rng(1)
        x = leaf(rng.normal(size=(5, 3)))
        fn = random_projection_loss(lambda: ops.elu(x), rng.normal(size=(5, 3)))
        assert check_gradients(fn, [x])[0] < 1e-4


class TestLayerNorm:
    def test_constant_row(self):
        out = ops.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)), 1e-5)
        assert np.array_equal(out.data, np.zeros((1, 3)))

    def test_two_values(self):
        out = ops.layer_norm(Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), 1e-12)
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-9)

    def test_unit_stats(self):
        x = Tensor(np.random.default_rng(2).normal(3.0, 4.0, size=(6, 8)))
        out = ops.layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)), 1e-9).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-6)

    def test_empty_axis(self):
        with pytest.raises(DimensionError):
            ops.layer_norm(Tensor(np.zeros((2, 0))), Tensor(np.zeros(0)), Tensor(np.zeros(0)))

    def test_gradient(self):
        rng = np.random.default_rng(3)
        x, g, b = leaf(rng.normal(size=(4, 6))), leaf(rng.normal(size=6)), leaf(rng.normal(size=6))
        fn = random_projection_loss(lambda: ops.layer_norm(x, g, b, 1e-5), rng.normal(size=(4, 6)))
        assert max(check_gradients(fn, [x, g, b])) < 1e-5


class TestAttention:
    def setup_method(self):
        self.rng = np.random.default_rng(4)
        self.cfg = AttentionConfig(channels=8, heads=4)
        self.params = init_attention(self.cfg, self.rng)

    def test_bad_head_count(self):
        with pytest.raises(ConfigurationError):
            AttentionConfig(channels=6, heads=4)
        with pytest.raises(ConfigurationError):
            attention_block(Tensor(np.zeros((2, 6))), self.params, heads=4)

    def test_single_token(self):
        p = self.params
        x = Tensor(self.rng.normal(size=(1, 8)))
        scores = ops.softmax_rows(Tensor([[0.37]]))
        assert scores.data[0, 0] == 1.0
        # with one token attention returns the value projection unchanged
        v = ops.linear(x, p["wv"], p["bv"])
        attn = ops.linear(v, p["wo"], p["bo"])
        h = ops.layer_norm(ops.add(x, attn), p["ln1_g"], p["ln1_b"], 1e-5)
        ff = ops.linear(ops.elu(ops.linear(h, p["w1"], p["b1"])), p["w2"], p["b2"])
        expected = ops.layer_norm(ops.add(h, ff), p["ln2_g"], p["ln2_b"], 1e-5)
        np.testing.assert_allclose(attention_block(x, p).data, expected.data, rtol=0, atol=1e-12)

    @given(st.integers(0, 10_000), st.integers(2, 9))
    @settings(max_examples=25, deadline=None)
    def test_permutation_equivariant_exact(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 8))
        perm = rng.permutation(n)
        out = attention_block(Tensor(x), self.params).data
        out_perm = attention_block(Tensor(x[perm]), self.params).data
        assert np.array_equal(out[perm], out_perm)

    def test_gradient(self):
        x = leaf(self.rng.normal(size=(4, 8)))
        inputs = [x] + list(self.params.values())
        fn = random_projection_loss(lambda: attention_block(x, self.params), self.rng.normal(size=(4, 8)))
        assert max(check_gradients(fn, inputs)) < 1e-4


class TestAdam:
    def test_zero_gradient_leaves_parameter(self):
        p = Parameter(Tensor([1.5, -2.0]), "w")
        p.tensor.grad = np.zeros(2)
        adam_step([p], lr=0.1)
        assert np.array_equal(p.tensor.data, [1.5, -2.0])

    def test_first_step(self):
        p = Parameter(Tensor([3.0]), "w")
        p.tensor.grad = np.array([1.0])
        adam_step([p], lr=0.1)
        # bias-corrected moments are exactly g and g^2 on the first step
        assert p.tensor.data[0] == pytest.approx(3.0 - 0.1 / (1.0 + 1e-8), abs=1e-15)
        assert 3.0 - p.tensor.data[0] == pytest.approx(0.1, rel=1e-7)

    def test_missing_gradient_names_parameter(self):
        with pytest.raises(MissingGradientError, match="decoder.w0"):
            adam_step([Parameter(Tensor([1.0]), "decoder.w0")], lr=0.1)

    def test_schedule(self):
        assert step_decay_lr(0) == 1e-4
        assert step_decay_lr(49) == 1e-4
        assert step_decay_lr(50) == 5e-5
        assert step_decay_lr(100) == 2.5e-5
        assert step_decay_lr(199) == 1e-4 / 8


class TestOps:
    def test_gather_pad_is_zero(self):
        x = leaf([[1.0, 2.0], [3.0, 4.0]])
        out = ops.gather_rows(x, np.array([[1, -1], [0, 1]]))
        assert np.array_equal(out.data, [[3, 4, 0, 0], [1, 2, 3, 4]])
        with pytest.raises(IndexError):
            ops.gather_rows(x, np.array([[2]]))

    def test_conv_and_pool_gradients(self):
        rng = np.random.default_rng(5)
        x = leaf(rng.normal(size=(7, 6, 2)))
        w = leaf(rng.normal(size=(3 * 3 * 2, 3)))
        b = leaf(rng.normal(size=3))
        out_fn = lambda: ops.global_avg_pool(ops.elu(ops.conv2d(x, w, b, stride=2, pad=1)))
        fn = random_projection_loss(out_fn, rng.normal(size=(1, 3)))
        assert max(check_gradients(fn, [x, w, b])) < 1e-5

    def test_conv_matches_direct_sum(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(5, 5, 2))
        w = rng.normal(size=(3, 3, 2, 4))
        out = ops.conv2d(Tensor(x), Tensor(w.reshape(18, 4)), Tensor(np.zeros(4)), stride=1, pad=0).data
        direct = np.zeros((3, 3, 4))
        for i in range(3):
            for j in range(3):
                direct[i, j] = np.einsum("abc,abcd->d", x[i : i + 3, j : j + 3], w)
        np.testing.assert_allclose(out, direct, atol=1e-12)

    def test_loss_values(self):
        gt = np.random.default_rng(7).normal(size=(5, 3))
        assert ops.l1_vertex_loss(Tensor(gt), gt).item() == 0.0
        assert ops.l1_vertex_loss(Tensor(np.ones((4, 3))), np.zeros((4, 3))).item() == 3.0
        with pytest.raises(DimensionError):
            ops.l1_vertex_loss(Tensor(np.ones((4, 3))), np.zeros((3, 3)))

    def test_loss_subgradient_away_from_kinks(self):
        rng = np.random.default_rng(8)
        gt = rng.normal(size=(6, 3))
        pred = leaf(gt + rng.choice([-1, 1], size=gt.shape) * rng.uniform(0.1, 1.0, size=gt.shape))
        assert check_gradients(lambda: ops.l1_vertex_loss(pred, gt), [pred])[0] < 1e-4


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    arrays = {"enc.w": rng.normal(size=(3, 4)), "bias": rng.normal(size=5), "s": np.array([2.5])}
    checkpoint.save(tmp_path / "m.ckpt", arrays, {"stages": 5})
    back, meta = checkpoint.load(tmp_path / "m.ckpt")
    assert meta == {"stages": 5}
    assert set(back) == set(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    blob = (tmp_path / "m.ckpt").read_bytes()
    assert blob[:8] == b"MSMRCKPT"
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob[:-3])
