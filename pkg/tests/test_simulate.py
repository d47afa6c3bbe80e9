import numpy as np
import pytest

from graphgames import games as gm
from graphgames import simulate as sim
from graphgames.graphs import make_graph
from graphgames.rng import RandomSource


def constant_game(drift=0.0, vol=0.0, n=4, horizon=1.0):
    g = make_graph("complete", n)
    model = gm.lq_model(g, gm.LQParams(a=0.0, q=0.0, sigma=max(vol, 1e-12), horizon=horizon))

    def drift_fn(t, x, alpha):
        return np.full(np.shape(x), drift)

    def vol_fn(t, x, alpha):
        return np.full(np.shape(x), vol)

    model.drift = drift_fn
    model.diffusion_own = vol_fn
    return model


def zero_strategy(t, x):
    return np.zeros_like(x)


class TestTimeGrid:
    def test_left_endpoints(self):
        grid = sim.TimeGrid(1.0, 4)
        assert grid.h == 0.25
        assert np.allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75])
        assert len(grid.nodes) == 4

    def test_validation(self):
        with pytest.raises(ValueError):
            sim.TimeGrid(1.0, 0)


class TestSimulate:
    def test_no_dynamics_constant_paths(self):
        model = constant_game(0.0, 0.0)
        bundle = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 10), 8, RandomSource(1))
        assert np.allclose(bundle.states, bundle.states[:, :1, :])

    def test_unit_drift_linear_growth(self):
        model = constant_game(1.0, 0.0)
        grid = sim.TimeGrid(1.0, 10)
        x0 = np.zeros((5, 4))
        noise = np.zeros((5, 10, 5))
        bundle = sim.euler_path(model, zero_strategy, grid, x0, noise)
        expect = np.arange(11) * 0.1
        assert np.allclose(bundle.states[:, :, 0], expect, atol=1e-14)

    def test_brownian_terminal_variance(self):
        model = constant_game(0.0, 1.0)
        model.x0_halfwidth = 0.0
        n_paths = 100_000
        bundle = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 20), n_paths,
                              RandomSource(5))
        xt = bundle.states[:, -1, :]
        var = xt.var(axis=0)
        se = np.sqrt(2.0 / n_paths)  # sd of a chi2-based variance estimate
        assert np.all(np.abs(var - 1.0) <= 3.0 * se)

    def test_initial_states_uniform_and_independent(self):
        model = constant_game(0.0, 0.0)
        model.x0_halfwidth = 0.5
        bundle = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 2), 50_000,
                              RandomSource(9))
        x0 = bundle.states[:, 0, :]
        assert np.all(np.abs(x0) <= 0.5)
        assert abs(x0.var() - 0.25 / 3) < 2e-3
        corr = np.corrcoef(x0.T)
        assert np.abs(corr - np.eye(4)).max() < 0.02

    def test_overflow_reported_with_location(self):
        model = constant_game(0.0, 0.0)
        model.drift = lambda t, x, alpha: np.square(x) * 1e4 + 10.0
        with pytest.raises(sim.SimulationError, match="step"):
            sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 50), 4, RandomSource(2))

    def test_determinism(self):
        model = constant_game(0.3, 0.7)
        a = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 7), 6, RandomSource(11))
        b = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 7), 6, RandomSource(11))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.noise, b.noise)


class TestCoupled:
    def test_identical_strategies_and_grids_identical_bundles(self):
        g = make_graph("cycle", 5)
        model = gm.lq_model(g, gm.LQParams())
        base, cand = sim.simulate_coupled(model, zero_strategy, zero_strategy,
                                          40, 40, 16, RandomSource(3))
        assert np.array_equal(base.states, cand.states)
        assert np.array_equal(base.actions, cand.actions)

    def test_noise_arrays_shared_bitwise(self):
        g = make_graph("cycle", 5)
        model = gm.lq_model(g, gm.LQParams())

        def other_strategy(t, x):
            return 0.3 * x

        base, cand = sim.simulate_coupled(model, zero_strategy, other_strategy,
                                          100, 20, 8, RandomSource(4))
        assert base.noise is cand.noise

    def test_deterministic_case_coarse_matches_fine_at_nodes(self):
        model = constant_game(0.0, 0.0, horizon=1.0)
        model.drift = lambda t, x, alpha: -x  # linear ODE
        model.x0_halfwidth = 0.5
        base, cand = sim.simulate_coupled(model, zero_strategy, zero_strategy,
                                          1000, 50, 4, RandomSource(6))
        # both solve dx = -x dt; the coarse path differs only by Euler step error
        gap = np.abs(base.states[:, ::20, :] - cand.states[:, ::20, :]).max()
        assert gap < 0.02  # O(h) with h = 1/50 on a unit-scale state

    def test_aggregated_increment_variance(self):
        model = constant_game(0.0, 0.0)
        n_paths = 20_000
        base, cand = sim.simulate_coupled(model, zero_strategy, zero_strategy,
                                          1000, 50, n_paths, RandomSource(8))
        agg = base.noise.reshape(n_paths, 50, 20, 5).sum(axis=2)
        var = agg.var()
        assert abs(var - 20.0) < 20.0 * 3.0 * np.sqrt(2.0 / (n_paths * 50 * 5))

    def test_divisibility_enforced(self):
        model = constant_game()
        with pytest.raises(ValueError):
            sim.simulate_coupled(model, zero_strategy, zero_strategy, 100, 33, 4,
                                 RandomSource(0))

    def test_hold_expansion_left_continuous(self):
        g = make_graph("cycle", 4)
        model = gm.lq_model(g, gm.LQParams(sigma=0.4))
        base, cand = sim.simulate_coupled(model, zero_strategy, zero_strategy,
                                          12, 3, 5, RandomSource(10))
        # candidate states repeat in blocks of 4 fine nodes
        for b in range(3):
            block = cand.states[:, 4 * b:4 * (b + 1), :]
            assert np.array_equal(block, np.repeat(block[:, :1, :], 4, axis=1))


def test_mean_reversion_shrinks_deviation():
    g = make_graph("cycle", 6)
    model = gm.lq_model(g, gm.LQParams(a=2.0, sigma=0.05))
    from graphgames.graphs import laplacian
    L = laplacian(g)
    bundle = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 100), 10_000,
                          RandomSource(12))
    dev0 = np.abs(bundle.states[:, 0, :] @ L).mean()
    devT = np.abs(bundle.states[:, -1, :] @ L).mean()
    assert devT < dev0


def test_paths_csv_header_and_rows():
    model = constant_game(0.0, 0.0, n=2)
    bundle = sim.simulate(model, zero_strategy, sim.TimeGrid(1.0, 2), 2, RandomSource(1))
    text = sim.paths_to_csv(bundle)
    lines = text.strip().splitlines()
    assert lines[0] == "path,t,player,state,strategy"
    assert len(lines) == 1 + 2 * 2 * 2
