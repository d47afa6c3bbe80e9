import numpy as np
import pytest

from graphgames import games as gm
from graphgames.graphs import laplacian, make_graph
from graphgames.rng import RandomSource

from conftest import generator_graphs


@pytest.fixture
def cycle6():
    return make_graph("cycle", 6)


class TestDeviation:
    def test_matches_per_player_neighbor_sums(self):
        rng = np.random.default_rng(0)
        for name, g in generator_graphs(12):
            L = laplacian(g)
            x = rng.normal(0, 2, (5, g.n))
            fast = gm.neighborhood_deviation(L, x)
            d = g.degrees.astype(float)
            for i in range(g.n):
                nbrs = g.neighbors(i)
                bar = (x[:, nbrs] / np.sqrt(d[nbrs])).sum(axis=1) / np.sqrt(d[i])
                assert np.allclose(fast[:, i], bar - x[:, i], atol=1e-14), name

    def test_zero_on_laplacian_kernel(self, cycle6):
        L = laplacian(cycle6)
        v = np.sqrt(cycle6.degrees.astype(float))[None, :]
        assert np.allclose(gm.neighborhood_deviation(L, 3.7 * v), 0.0, atol=1e-12)

    def test_complete_graph_reduces_to_mean_of_others(self):
        g = make_graph("complete", 7)
        L = laplacian(g)
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, (4, 7))
        dev = gm.neighborhood_deviation(L, x)
        for i in range(7):
            others = np.delete(x, i, axis=1).mean(axis=1)
            assert np.allclose(dev[:, i], others - x[:, i], atol=1e-12)


class TestLQParams:
    def test_convexity_guard(self):
        with pytest.raises(ValueError):
            gm.LQParams(q=2.0, epsilon=1.0)
        gm.LQParams(q=1.0, epsilon=1.0)  # boundary accepted

    def test_positivity_guards(self):
        with pytest.raises(ValueError):
            gm.LQParams(sigma=0.0)
        with pytest.raises(ValueError):
            gm.LQParams(c=-0.1)


class TestLQModel:
    def test_minimizer_zero_when_no_incentive(self, cycle6):
        model = gm.lq_model(cycle6, gm.LQParams(q=0.0))
        x = np.random.default_rng(2).normal(0, 1, (3, 6))
        assert np.allclose(model.minimizer(0.0, x, np.zeros((3, 6))), 0.0)

    def test_kernel_states_cost_only_quadratic_control(self, cycle6):
        p = gm.LQParams(q=0.3, epsilon=1.0)
        model = gm.lq_model(cycle6, p)
        v = np.sqrt(cycle6.degrees.astype(float))[None, :]
        alpha = np.random.default_rng(3).normal(0, 1, (1, 6))
        f = model.running_cost(0.0, 2.0 * v, alpha)
        assert np.allclose(f, 0.5 * alpha ** 2, atol=1e-12)
        assert np.allclose(model.terminal_cost(2.0 * v), 0.0, atol=1e-12)

    def test_minimizer_attains_grid_minimum(self, cycle6):
        # alpha -> alpha * dv + f(alpha) minimized over a fine grid
        p = gm.LQParams(q=0.4, epsilon=1.0, sigma=0.5)
        model = gm.lq_model(cycle6, p)
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, (1, 6))
        z = rng.normal(0, 1, (1, 6))
        ahat = model.minimizer(0.0, x, z)
        grid = np.arange(-4.0, 4.0, 1e-4)
        L = laplacian(cycle6)
        for i in range(6):
            dv = z[0, i] / p.sigma  # z_i = sigma * dv_i
            dev = -(L @ x[0])[i]
            ham = grid * dv + 0.5 * grid ** 2 - p.q * grid * dev + 0.5 * p.epsilon * dev ** 2
            best = grid[np.argmin(ham)]
            assert abs(ahat[0, i] - best) < 1e-3
            # first-order stationarity at the returned point
            resid = dv + ahat[0, i] - p.q * dev
            assert abs(resid) < 1e-12

    def test_drift_is_reversion_plus_control(self, cycle6):
        model = gm.lq_model(cycle6, gm.LQParams(a=0.7))
        L = laplacian(cycle6)
        x = np.random.default_rng(5).normal(0, 1, (2, 6))
        alpha = np.ones((2, 6))
        assert np.allclose(model.drift(0.0, x, alpha), -0.7 * x @ L + 1.0, atol=1e-14)


class TestNonLQModel:
    def test_zero_deviation_drift_is_control(self, cycle6):
        model = gm.nonlq_model(cycle6, gm.LQParams(a=0.1))
        v = np.sqrt(cycle6.degrees.astype(float))[None, :]
        alpha = np.full((1, 6), 0.9)
        assert np.allclose(model.drift(0.0, v, alpha), 0.9, atol=1e-12)

    def test_cubic_drift_value(self):
        # deviation 2 with a=0.1 gives 0.1 * 8
        g = make_graph("complete", 2)
        model = gm.nonlq_model(g, gm.LQParams(a=0.1))
        x = np.array([[1.0, 3.0]])  # (Lx)_1 = 1 - 3 = -2 -> deviation +2
        drift = model.drift(0.0, x, np.zeros((1, 2)))
        assert drift[0, 0] == pytest.approx(0.8, abs=1e-12)

    def test_cubic_dominates_linear_beyond_unit_deviation(self, cycle6):
        lin = gm.lq_model(cycle6, gm.LQParams(a=0.1))
        cub = gm.nonlq_model(cycle6, gm.LQParams(a=0.1))
        rng = np.random.default_rng(6)
        x = rng.normal(0, 3, (50, 6))
        L = laplacian(cycle6)
        dev = np.abs(-(x @ L))
        zl = np.abs(lin.drift(0.0, x, np.zeros_like(x)))
        zc = np.abs(cub.drift(0.0, x, np.zeros_like(x)))
        far = dev > 1.0
        assert np.all(zc[far] > zl[far])

    def test_same_costs_and_minimizer_as_linear(self, cycle6):
        p = gm.LQParams(q=0.2, epsilon=0.5)
        lin, cub = gm.lq_model(cycle6, p), gm.nonlq_model(cycle6, p)
        rng = np.random.default_rng(7)
        x, alpha, z = (rng.normal(0, 1, (3, 6)) for _ in range(3))
        assert np.array_equal(lin.running_cost(0, x, alpha), cub.running_cost(0, x, alpha))
        assert np.array_equal(lin.terminal_cost(x), cub.terminal_cost(x))
        assert np.array_equal(lin.minimizer(0, x, z), cub.minimizer(0, x, z))


class TestPortfolioModel:
    @pytest.fixture
    def sampled(self):
        g = make_graph("cycle", 10)
        p = gm.PortfolioParams.sample(10, RandomSource(5).stream("params"))
        return g, p, gm.portfolio_model(g, p)

    def test_sampled_ranges(self, sampled):
        _, p, _ = sampled
        assert np.all((p.mu >= 0.05) & (p.mu <= 0.1))
        assert np.all((p.nu >= 0.2) & (p.nu <= 0.25))
        assert np.all((p.sigma >= 0.15) & (p.sigma <= 0.2))
        assert np.all((p.delta >= 0.8) & (p.delta <= 1.2))
        assert np.all((p.theta >= 0.4) & (p.theta <= 0.6))

    def test_coefficients_linear_in_control(self, sampled):
        _, p, model = sampled
        rng = np.random.default_rng(8)
        x = rng.normal(0, 1, (4, 10))
        alpha = rng.normal(0, 1, (4, 10))
        assert np.allclose(model.drift(0, x, alpha), p.mu * alpha)
        assert np.allclose(model.diffusion_own(0, x, alpha), p.nu * alpha)
        assert np.allclose(model.diffusion_common(0, x, alpha), p.sigma * alpha)
        assert np.all(model.running_cost(0, x, alpha) == 0.0)

    def test_terminal_cost_at_zero_is_one(self, sampled):
        _, _, model = sampled
        assert np.allclose(model.terminal_cost(np.zeros((2, 10))), 1.0)

    def test_terminal_equals_negated_utility(self, sampled):
        g, p, model = sampled
        L = laplacian(g)
        rng = np.random.default_rng(9)
        x = rng.normal(0, 1, (6, 10))
        xbar = x - x @ L  # degree-weighted neighbor average
        direct = np.exp(-(x - p.theta * xbar) / p.delta)
        assert np.allclose(model.terminal_cost(x), direct, atol=1e-12)

    def test_theta_zero_decouples(self):
        g = make_graph("cycle", 4)
        p = gm.PortfolioParams(mu=np.full(4, 0.08), nu=np.full(4, 0.22),
                               sigma=np.full(4, 0.17), delta=np.full(4, 1.0),
                               theta=np.full(4, 1e-12))
        model = gm.portfolio_model(g, p)
        x = np.random.default_rng(10).normal(0, 1, (3, 4))
        assert np.allclose(model.terminal_cost(x), np.exp(-x), atol=1e-9)

    def test_controlled_diffusion_flag(self, sampled):
        _, _, model = sampled
        assert model.controlled_diffusion
        assert not gm.lq_model(make_graph("cycle", 4), gm.LQParams()).controlled_diffusion

    def test_positivity_guard(self):
        with pytest.raises(ValueError):
            gm.PortfolioParams(mu=np.ones(2), nu=np.zeros(2), sigma=np.ones(2),
                               delta=np.ones(2), theta=np.ones(2))

    def test_params_echo_deterministic(self, sampled):
        g, p, model = sampled
        again = gm.portfolio_model(g, p)
        assert list(model.params.keys()) == list(again.params.keys())
        assert all(isinstance(v, float) for k, v in model.params.items() if "." in k)
