import numpy as np
import pytest

from graphgames import autodiff as ad
from graphgames import networks as nets
from graphgames.graphs import laplacian, make_graph

from conftest import generator_graphs, param_gradcheck


class TestCounts:
    def test_experiment_fnn_385(self):
        net = nets.FNN([10, 32, 1], rng=np.random.default_rng(0))
        assert nets.count_params(net) == {"trainable": 385, "frozen": 0}

    def test_width_n_formula_all_generators(self):
        for name, g in generator_graphs(20):
            for depth in (2, 3, 4):
                sizes = [g.n] + [g.n] * (depth - 1) + [1]
                net = nets.FNN(sizes, rng=np.random.default_rng(0))
                assert nets.count_params(net)["trainable"] == \
                    nets.fnn_width_n_count(g.n, depth), (name, depth)

    def test_ntm_bound_all_generators(self):
        for name, g in generator_graphs(20):
            for depth, channels in ((2, 3), (3, 3), (3, 1), (4, 2)):
                net = nets.NTM(g, 0, depth, channels, rng=np.random.default_rng(0))
                count = nets.count_params(net)["trainable"]
                bound = nets.ntm_param_bound(g.n, g.edge_count, depth, channels)
                assert count <= bound, (name, depth, channels)

    def test_tree_bound_example(self):
        g = make_graph("random_spanning_tree", 10, seed=7)
        assert g.edge_count == 9
        net = nets.NTM(g, 0, depth=3, channels=3, rng=np.random.default_rng(0))
        assert nets.count_params(net)["trainable"] <= 359

    def test_game_config_under_190(self):
        # depth 2, 3 channels on the sparse 10-vertex graphs
        for kind, seed in (("cycle", 0), ("star", 0), ("random_spanning_tree", 3)):
            g = make_graph(kind, 10, seed=seed)
            net = nets.NTM(g, 0, depth=2, channels=3, rng=np.random.default_rng(0))
            assert nets.count_params(net)["trainable"] < 190

    def test_coupling_ratio_matches_edge_density_on_trees(self):
        for n in (10, 20):
            g = make_graph("random_spanning_tree", n, seed=1)
            net = nets.NTM(g, 0, depth=3, channels=3, rng=np.random.default_rng(0))
            ratio = nets.ntm_coupling_ratio(net)
            target = 3 * g.edge_count / (n * (n - 1) / 2)
            assert abs(ratio - target) <= 0.1 * target

    def test_trainable_equals_mask_true_entries(self):
        g = make_graph("cycle", 8)
        net = nets.NTM(g, 2, depth=3, channels=2, rng=np.random.default_rng(1))
        manual = sum(int(p.mask.sum()) if p.mask is not None else p.value.size
                     for p in net.parameters())
        assert nets.count_params(net)["trainable"] == manual


class TestFNN:
    def test_zero_weights_give_bias(self):
        net = nets.FNN([3, 4, 2], rng=np.random.default_rng(0))
        for p in net.parameters():
            p.value[:] = 0.0
        net.biases[-1].value[:] = [0.7, -0.2]
        out = net.forward(np.ones((5, 3)))
        assert np.allclose(out, [0.7, -0.2])

    def test_identity_hidden_sums_input(self):
        net = nets.FNN([2, 2, 1], activation="relu", rng=np.random.default_rng(0))
        net.weights[0].value[:] = np.eye(2)
        net.biases[0].value[:] = 0.0
        net.weights[1].value[:] = [[1.0], [1.0]]
        net.biases[1].value[:] = 0.0
        x = np.array([[0.25, 0.5], [1.0, 2.0]])
        assert np.allclose(net.forward(x)[:, 0], x.sum(axis=1))

    def test_gradcheck(self, rng):
        net = nets.FNN([4, 6, 6, 1], activation="tanh", skip=True,
                       rng=np.random.default_rng(5))
        x = rng.uniform(-1, 1, (3, 4))
        assert param_gradcheck(net, x) < 1e-5

    def test_requires_three_layers(self):
        with pytest.raises(ValueError):
            nets.FNN([3, 1])


class TestNTM:
    def test_zero_weights_give_bias(self):
        g = make_graph("cycle", 5)
        net = nets.NTM(g, 1, depth=3, channels=2, rng=np.random.default_rng(0))
        for p in net.parameters():
            p.value[:] = 0.0
        net.b_out.value[:] = 0.31
        assert np.allclose(net.forward(np.ones((4, 5))), 0.31)

    def test_weight_pattern_matches_laplacian_support(self):
        for name, g in generator_graphs(12):
            net = nets.NTM(g, 1, depth=3, channels=2, rng=np.random.default_rng(0))
            support = laplacian(g) != 0.0
            for k in range(net.depth - 1):
                for r in range(net.channels):
                    assert np.array_equal(net.w[k][r].mask, support), name

    def test_output_mask_follows_player_row(self):
        g = make_graph("star", 6)
        center = nets.NTM(g, 0, depth=2, channels=1, rng=np.random.default_rng(0))
        leaf = nets.NTM(g, 3, depth=2, channels=1, rng=np.random.default_rng(0))
        assert center.w_out.mask[:, 0].sum() == 6  # center sees everyone
        assert leaf.w_out.mask[:, 0].sum() == 2    # leaf sees itself + center
        assert not np.array_equal(center.w_out.mask, leaf.w_out.mask)

    @pytest.mark.parametrize("depth", [2, 3, 4])
    def test_receptive_field_is_depth_hops(self, depth, rng):
        g = make_graph("cycle", 10)
        net = nets.NTM(g, 0, depth=depth, channels=2, rng=np.random.default_rng(7))
        dist = g.bfs_distances(0)
        x = rng.uniform(0, 1, (6, 10))
        with ad.Tape() as tape:
            xt = tape.leaf(x)
            out = net.forward(xt, tape)
            ad.backward(ad.tsum(out))
        sens = np.abs(xt.grad).max(axis=0)
        for j in range(10):
            if dist[j] > depth:
                assert sens[j] == 0.0
            else:
                assert sens[j] > 0.0

    def test_far_perturbation_leaves_output_unchanged(self, rng):
        g = make_graph("cycle", 10)
        net = nets.NTM(g, 0, depth=3, channels=3, rng=np.random.default_rng(3))
        x = rng.uniform(0, 1, (4, 10))
        base = net.forward(x)
        far = [j for j in range(10) if g.bfs_distances(0)[j] > 3]
        x2 = x.copy()
        x2[:, far] += rng.uniform(1.0, 2.0, (4, len(far)))
        assert np.array_equal(net.forward(x2), base)

    def test_gradcheck_scalar_and_vector(self, rng):
        g = make_graph("star", 5)
        x = rng.uniform(0, 1, (3, 5))
        scalar = nets.NTM(g, 1, depth=3, channels=2, skip=True, rng=np.random.default_rng(2))
        assert param_gradcheck(scalar, x) < 1e-5
        vector = nets.NTM(g, 1, depth=2, channels=2, vector_output=True,
                          rng=np.random.default_rng(2))
        assert param_gradcheck(vector, x) < 1e-5

    def test_multidimensional_blocks(self, rng):
        g = make_graph("cycle", 4)
        net = nets.NTM(g, 0, depth=2, channels=2, hidden_dim=3, d_in=2, d_out=1,
                       rng=np.random.default_rng(1))
        x = rng.uniform(0, 1, (5, 8))
        out = net.forward(x)
        assert out.shape == (5, 1)
        assert np.all(np.isfinite(out))
        assert param_gradcheck(net, x, params=[net.w_in, net.w[0][0], net.w_out]) < 1e-5

    def test_vector_output_mask(self):
        g = make_graph("cycle", 6)
        net = nets.NTM(g, 0, depth=2, channels=1, vector_output=True,
                       rng=np.random.default_rng(0))
        assert np.array_equal(net.w_out.mask, laplacian(g) != 0.0)

    def test_invalid_args(self):
        g = make_graph("cycle", 5)
        with pytest.raises(ValueError):
            nets.NTM(g, 0, depth=1, channels=2)
        with pytest.raises(ValueError):
            nets.NTM(g, 9, depth=2, channels=2)
        with pytest.raises(ValueError):
            nets.NTM(g, 0, depth=2, channels=2, hidden_dim=2, vector_output=True)


class TestChebGCN:
    def test_scaled_laplacian_on_k2(self):
        g = make_graph("complete", 2)
        net = nets.ChebGCN(g, feature_dims=(1, 4, 1), rng=np.random.default_rng(0))
        assert net.lambda_max == pytest.approx(2.0, abs=1e-9)
        assert np.allclose(net.scaled_laplacian, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-9)

    def test_zero_weights_give_bias(self):
        g = make_graph("cycle", 5)
        net = nets.ChebGCN(g, feature_dims=(1, 3, 1), rng=np.random.default_rng(0))
        for p in net.parameters():
            p.value[:] = 0.0
        net.b_out.value[:] = -1.25
        assert np.allclose(net.forward(np.ones((3, 5))), -1.25)

    def test_gradcheck(self, rng):
        g = make_graph("star", 5)
        net = nets.ChebGCN(g, feature_dims=(1, 4, 1), rng=np.random.default_rng(4))
        x = rng.uniform(0, 1, (3, 5))
        assert param_gradcheck(net, x) < 1e-5

    def test_power_iteration_matches_dense_eig(self):
        for name, g in generator_graphs(12):
            lam = nets.top_eigenvalue(laplacian(g))
            dense = float(np.linalg.eigvalsh(laplacian(g))[-1])
            assert lam == pytest.approx(dense, abs=1e-8), name

    def test_feature_dims_validated(self):
        g = make_graph("cycle", 5)
        with pytest.raises(ValueError):
            nets.ChebGCN(g, feature_dims=(1, 4, 2))


def test_all_forwards_finite(rng):
    g = make_graph("random_spanning_tree", 8, seed=2)
    x = rng.uniform(0, 1, (7, 8))
    for net in (nets.FNN([8, 16, 1], rng=np.random.default_rng(0)),
                nets.NTM(g, 0, 3, 3, rng=np.random.default_rng(0)),
                nets.ChebGCN(g, (1, 8, 1), rng=np.random.default_rng(0))):
        assert np.all(np.isfinite(net.forward(x)))
