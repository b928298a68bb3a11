import numpy as np
import pytest
import scipy.sparse as sp

from _meshes import random_sphere_mesh
from msmr.hierarchy import SpiralTable, build_hierarchy, enumerate_spirals
from msmr.mesh.assets import load_hand
from msmr.model import (
    FeatureMap,
    FusionError,
    MeshNet,
    ModelConfig,
    ResBlockParams,
    Sample,
    SpiralConvParams,
    SpiralMismatchError,
    TrainConfig,
    fuse,
    graph_res_block,
    rotate_vertices,
    spiral_conv,
    train,
    warp_image,
)
from msmr.model.train import EmptyDatasetError, evaluate
from msmr.numeric import ConfigurationError, DimensionError, Tensor, ops
from msmr.numeric.checkpoint import dumps, loads
from msmr.numeric.gradcheck import check_gradients, random_projection_loss


def leaf(a):
    return Tensor(np.asarray(a, float), requires_grad=True)


def dense_oracle(x, indices, kernel, bias):
    """Materialise the (N, S*C) gathered matrix, then multiply."""
    n, c = x.shape
    s = indices.shape[1]
    G = np.zeros((n, s * c))
    for v in range(n):
        for k in range(s):
            if indices[v, k] >= 0:
                G[v, k * c : (k + 1) * c] = x[indices[v, k]]
    return G @ kernel + bias


def random_block(rng, c, s):
    return ResBlockParams(
        SpiralConvParams(leaf(rng.normal(size=(s * c, c)) * 0.3), leaf(rng.normal(size=c) * 0.1)),
        (leaf(1 + 0.1 * rng.normal(size=c)), leaf(0.1 * rng.normal(size=c))),
        SpiralConvParams(leaf(rng.normal(size=(s * c, c)) * 0.3), leaf(rng.normal(size=c) * 0.1)),
        (leaf(1 + 0.1 * rng.normal(size=c)), leaf(0.1 * rng.normal(size=c))),
    )


def block_tensors(p):
    return [p.conv1.kernel, p.conv1.bias, *p.norm1, p.conv2.kernel, p.conv2.bias, *p.norm2]


@pytest.fixture(scope="module")
def toy_hierarchy():
    hand = load_hand()
    return build_hierarchy(hand.mesh, levels=4, finest_count=20, regressor=hand.regressor, spiral_lengths=(9, 9, 9, 9))


def toy_config(**kw):
    base = dict(channels=(8, 8, 8, 8), image_size=8, encoder_channels=(4, 4), pool_grid=2, latent=8)
    base.update(kw)
    return ModelConfig(**base)


class TestSpiralConv:
    def test_length_one_identity_kernel(self):
        x = np.random.default_rng(0).normal(size=(5, 4))
        out = spiral_conv(Tensor(x), SpiralTable(np.arange(5)[:, None]), SpiralConvParams(Tensor(np.eye(4)), Tensor(np.zeros(4))))
        assert np.array_equal(out.data, x)

    def test_padding_contributes_nothing(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 3))
        k, b = rng.normal(size=(12, 2)), rng.normal(size=2)
        out = spiral_conv(Tensor(x), SpiralTable(np.array([[0, -1, -1, -1]])), SpiralConvParams(Tensor(k), Tensor(b)))
        assert np.allclose(out.data, x @ k[:3] + b, atol=1e-15)

    def test_matches_dense_oracle_on_random_meshes(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(50):
            mesh = random_sphere_mesh(int(rng.integers(4, 61)), rng)
            s = int(rng.integers(1, 13))
            c_in, c_out = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            table = enumerate_spirals(mesh, s)
            x = rng.normal(size=(mesh.n_vertices, c_in))
            k, b = rng.normal(size=(s * c_in, c_out)), rng.normal(size=c_out)
            got = spiral_conv(Tensor(x), table, SpiralConvParams(Tensor(k), Tensor(b))).data
            worst = max(worst, np.abs(got - dense_oracle(x, table.indices, k, b)).max())
        assert worst <= 1e-12

    def test_table_mismatch(self):
        table = SpiralTable(np.array([[0, 1], [1, 2], [2, 0]]))
        with pytest.raises(SpiralMismatchError):
            spiral_conv(Tensor(np.zeros((4, 2))), table, SpiralConvParams(Tensor(np.zeros((4, 1))), Tensor(np.zeros(1))))

    def test_kernel_row_count_checked(self):
        table = SpiralTable(np.array([[0, 1], [1, 0]]))
        with pytest.raises(DimensionError, match="rows"):
            spiral_conv(Tensor(np.zeros((2, 3))), table, SpiralConvParams(Tensor(np.zeros((5, 1))), Tensor(np.zeros(1))))

    def test_gradient(self):
        rng = np.random.default_rng(3)
        mesh = random_sphere_mesh(12, rng)
        table = enumerate_spirals(mesh, 7)
        x, k, b = leaf(rng.normal(size=(12, 3))), leaf(rng.normal(size=(21, 2))), leaf(rng.normal(size=2))
        fn = random_projection_loss(lambda: spiral_conv(x, table, SpiralConvParams(k, b)), rng.normal(size=(12, 2)))
        assert max(check_gradients(fn, [x, k, b])) < 1e-4


class TestResBlock:
    def test_zero_weights_is_pure_skip(self):
        c, s = 4, 5
        z = lambda *shape: Tensor(np.zeros(shape))
        p = ResBlockParams(
            SpiralConvParams(z(s * c, c), z(c)), (Tensor(np.ones(c)), z(c)),
            SpiralConvParams(z(s * c, c), z(c)), (Tensor(np.ones(c)), z(c)),
        )
        mesh = random_sphere_mesh(10, np.random.default_rng(0))
        x = np.random.default_rng(1).normal(size=(10, c))
        out = graph_res_block(Tensor(x), enumerate_spirals(mesh, s), p)
        assert np.array_equal(out.data, x)

    @pytest.mark.parametrize("seed", range(5))
    def test_shape_preserved(self, seed):
        rng = np.random.default_rng(seed)
        n, c, s = int(rng.integers(4, 30)), int(rng.integers(1, 6)), int(rng.integers(1, 10))
        table = enumerate_spirals(random_sphere_mesh(n, rng), s)
        out = graph_res_block(Tensor(rng.normal(size=(n, c))), table, random_block(rng, c, s))
        assert out.shape == (n, c)

    def test_channel_mismatch(self):
        rng = np.random.default_rng(0)
        table = enumerate_spirals(random_sphere_mesh(8, rng), 3)
        with pytest.raises(DimensionError):
            graph_res_block(Tensor(rng.normal(size=(8, 5))), table, random_block(rng, 4, 3))

    def test_gradient(self):
        rng = np.random.default_rng(4)
        table = enumerate_spirals(random_sphere_mesh(10, rng), 6)
        p = random_block(rng, 3, 6)
        x = leaf(rng.normal(size=(10, 3)))
        fn = random_projection_loss(lambda: graph_res_block(x, table, p), rng.normal(size=(10, 3)))
        assert max(check_gradients(fn, [x, *block_tensors(p)])) < 1e-4


class TestFuse:
    def test_single_level_is_linear_map(self, toy_hierarchy):
        rng = np.random.default_rng(0)
        x, w = rng.normal(size=(10, 3)), rng.normal(size=(3, 2))
        out = fuse([FeatureMap(1, Tensor(x))], toy_hierarchy.resample, {(1, 1): Tensor(w)})
        assert len(out) == 1 and out[0].level == 1
        assert np.allclose(out[0].features.data, x @ w, atol=1e-15)

    def test_coarse_to_fine_branch_is_upsampling(self, toy_hierarchy):
        h = toy_hierarchy
        fine = FeatureMap(0, Tensor(np.zeros((20, 3))))
        coarse = FeatureMap(1, Tensor(h.levels[1].vertices))
        w = {(0, 0): Tensor(np.zeros((3, 3))), (1, 0): Tensor(np.eye(3)), (0, 1): Tensor(np.eye(3)), (1, 1): Tensor(np.eye(3))}
        out = fuse([fine, coarse], h.resample, w)
        assert np.allclose(out[0].features.data, h.up[0] @ h.levels[1].vertices, atol=1e-15)

    def test_missing_level(self, toy_hierarchy):
        with pytest.raises(FusionError):
            fuse([FeatureMap(0, Tensor(np.zeros((20, 2)))), FeatureMap(1, Tensor(np.zeros((10, 2))))],
                 toy_hierarchy.resample, {(0, 0): Tensor(np.eye(2))})

    def test_gradient_two_levels(self, toy_hierarchy):
        rng = np.random.default_rng(5)
        a, b = leaf(rng.normal(size=(20, 3))), leaf(rng.normal(size=(10, 2)))
        w = {(s, d): leaf(rng.normal(size=(cs, cd))) for s, cs in ((0, 3), (1, 2)) for d, cd in ((0, 3), (1, 2))}

        def out():
            fa, fb = fuse([FeatureMap(0, a), FeatureMap(1, b)], toy_hierarchy.resample, w)
            return ops.concat_columns([ops.reshape(fa.features, (1, 60)), ops.reshape(fb.features, (1, 20))])

        fn = random_projection_loss(out, rng.normal(size=(1, 80)))
        assert max(check_gradients(fn, [a, b, *w.values()])) < 1e-4


class TestNetwork:
    def test_output_shape(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        assert net.forward(Tensor(np.zeros((8, 8, 3)))).shape == (20, 3)

    def test_wrong_image_shape(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        with pytest.raises(DimensionError, match="image"):
            net.forward(Tensor(np.zeros((8, 9, 3))))

    def test_stage_count_must_match_levels(self, toy_hierarchy):
        with pytest.raises(ConfigurationError):
            MeshNet.create(toy_config(channels=(8, 8, 8)), toy_hierarchy, np.random.default_rng(0))

    def test_single_path_smaller_same_shape(self, toy_hierarchy):
        img = np.random.default_rng(1).normal(size=(8, 8, 3))
        multi = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        single = MeshNet.create(toy_config(single_path=True), toy_hierarchy, np.random.default_rng(0))
        assert single.n_parameters() < multi.n_parameters()
        assert single.forward(Tensor(img)).shape == multi.forward(Tensor(img)).shape

    def test_forward_deterministic(self, toy_hierarchy):
        img = np.random.default_rng(1).normal(size=(8, 8, 3))
        a = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(7))
        b = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(7))
        assert np.array_equal(a.predict(img), a.predict(img))
        assert np.array_equal(a.predict(img), b.predict(img))

    @pytest.mark.parametrize("single", [False, True], ids=["multi", "single"])
    def test_end_to_end_gradient(self, toy_hierarchy, single):
        rng = np.random.default_rng(6)
        net = MeshNet.create(toy_config(single_path=single), toy_hierarchy, rng)
        img = leaf(rng.normal(size=(8, 8, 3)))
        fn = random_projection_loss(lambda: net.forward(img), rng.normal(size=(20, 3)))
        tensors = [img] + [p.tensor for p in net.parameters()]
        errs = check_gradients(fn, tensors, max_entries=6, rng=np.random.default_rng(0))
        assert max(errs) < 1e-3

    def test_state_roundtrip_through_checkpoint(self, toy_hierarchy):
        img = np.random.default_rng(1).normal(size=(8, 8, 3))
        a = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(1))
        b = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(2))
        arrays, meta = loads(dumps(a.state(), a.meta()))
        b.load_state(arrays)
        assert meta["counts"] == [20, 10, 5, 4]
        assert np.array_equal(a.predict(img), b.predict(img))

    def test_config_rejects_bad_image_size(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(image_size=30, encoder_channels=(4, 4), pool_grid=4)


class TestLoss:
    def test_equal_is_zero(self):
        v = np.random.default_rng(0).normal(size=(7, 3))
        assert ops.l1_vertex_loss(Tensor(v), v).item() == 0.0

    def test_ones_vs_zeros(self):
        assert ops.l1_vertex_loss(Tensor(np.ones((9, 3))), np.zeros((9, 3))).item() == 3.0


def tiny_dataset(n=6, size=8, verts=20, seed=0):
    rng = np.random.default_rng(seed)
    return [Sample(rng.normal(size=(size, size, 3)) * 0.3, rng.normal(size=(verts, 3)) * 0.05) for _ in range(n)]


class TestTraining:
    def test_schedule(self):
        cfg = TrainConfig()
        assert [cfg.lr(e) for e in (0, 49, 50, 100)] == [1e-4, 1e-4, 5e-5, 2.5e-5]

    def test_zero_lr_changes_nothing(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        before = net.state()
        cfg = TrainConfig(epochs=3, batch_size=4, base_lr=0.0, augment=False)
        log = train(net, tiny_dataset(), cfg)
        after = net.state()
        assert all(np.array_equal(before[k], after[k]) for k in before)
        assert len({e.loss for e in log.history}) == 1

    def test_zero_lr_with_augmentation_keeps_eval_loss(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        cfg = TrainConfig(epochs=2, batch_size=4, base_lr=0.0)
        log = train(net, tiny_dataset(), cfg, evaluate_each_epoch=True)
        assert log.history[0].eval_loss == log.history[1].eval_loss

    def test_seeded_runs_identical(self, toy_hierarchy):
        runs = []
        for _ in range(2):
            net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(3))
            runs.append(train(net, tiny_dataset(), TrainConfig(epochs=2, batch_size=3, base_lr=1e-3, seed=9)).to_csv())
        assert runs[0] == runs[1]

    def test_learns_tiny_set(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        data = tiny_dataset(n=4)
        start = evaluate(net, data)
        train(net, data, TrainConfig(epochs=40, batch_size=4, base_lr=3e-3, augment=False))
        assert evaluate(net, data) < 0.5 * start

    def test_empty_dataset(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        with pytest.raises(EmptyDatasetError):
            train(net, [], TrainConfig(epochs=1))

    def test_csv_header(self, toy_hierarchy):
        net = MeshNet.create(toy_config(), toy_hierarchy, np.random.default_rng(0))
        text = train(net, tiny_dataset(n=2), TrainConfig(epochs=1, batch_size=2)).to_csv()
        assert text.splitlines()[0] == "epoch,lr,loss,eval_loss"


class TestAugmentation:
    def test_rotation_moves_pixels_like_projected_points(self):
        f, size = 20.0, 33
        c = (size - 1) / 2
        p = np.array([[0.3, -0.2, 1.0]])
        img = np.full((size, size, 3), -0.5)
        u, v = f * p[0, 0] / p[0, 2] + c, f * p[0, 1] / p[0, 2] + c
        img[int(round(v)), int(round(u))] = 0.5
        theta = np.radians(25)
        out = warp_image(img, 1.0, 0.0, 0.0, theta)
        q = rotate_vertices(p, theta)[0]
        u2, v2 = f * q[0] / q[2] + c, f * q[1] / q[2] + c
        r, col = np.unravel_index(np.argmax(out[..., 0]), out.shape[:2])
        assert abs(r - v2) <= 1.0 and abs(col - u2) <= 1.0

    def test_identity_warp(self):
        img = np.random.default_rng(0).normal(size=(16, 16, 3))
        assert np.allclose(warp_image(img, 1.0, 0.0, 0.0, 0.0), img, atol=1e-12)

    def test_rotation_keeps_depth(self):
        v = np.random.default_rng(0).normal(size=(5, 3))
        r = rotate_vertices(v, 0.7)
        assert np.array_equal(r[:, 2], v[:, 2])
        assert np.allclose(np.linalg.norm(r, axis=1), np.linalg.norm(v, axis=1))
