"""Configuration-driven command line.

Usage: ``graphgames <mode> <config-file> [--output DIR]`` with mode one of
graph-info, param-count, uat-check, supervised, solve, evaluate.  The
config is a flat ``key=value`` file ('#' comments); unknown keys are
rejected.  Every run echoes the fully resolved configuration (defaults
filled, sampled model parameters included) into ``<output>/manifest``
together with a git-style content hash, so identical config + seed
reproduces identical output bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import baselines, benchmark, bestresponse, games, graphs, metrics, networks, solvers
from .checkpoint import dump_params, load_params
from .rng import RandomSource
from .simulate import TimeGrid, paths_to_csv, simulate

MODES = ("graph-info", "param-count", "uat-check", "supervised", "solve", "evaluate")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); None default means "required when used"
SCHEMA = {
    "mode": (str, None),
    "seed": (int, 0),
    "output.dir": (str, "out"),
    "graph.kind": (str, "cycle"),
    "graph.n": (int, 10),
    "graph.seed": (int, 0),
    "model": (str, "lq"),
    "model.a": (float, 0.1),
    "model.sigma": (float, 0.5),
    "model.q": (float, 0.0),
    "model.epsilon": (float, 1.0),
    "model.c": (float, 1.0),
    "model.delta0": (float, None),
    "model.horizon": (float, 1.0),
    "model.param_seed": (int, 0),
    "arch.kind": (str, "ntm"),
    "arch.ntm_m": (int, 3),
    "arch.ntm_k": (int, 2),
    "arch.fnn_hidden": (int, 32),
    "arch.skip": (_bool, True),
    "train.solver": (str, "dp"),
    "train.n_t": (int, 50),
    "train.rounds": (int, 40),
    "train.epochs": (int, 150),
    "train.batch": (int, 256),
    "train.lr": (float, 0.001),
    "train.gamma": (float, 0.5),
    "train.tau": (int, 30),
    "metrics.n_paths": (int, 2000),
    "metrics.fine_steps": (int, 1000),
    "metrics.dump_paths": (_bool, False),
    "bench.arch": (str, "ntm"),
    "bench.target": (str, "LQ"),
    "bench.runs": (int, 20),
    "bench.n_test": (int, 25000),
    "bench.player": (int, 1),
    "uat.family": (str, "linear"),
    "uat.rho": (float, 0.5),
    "uat.k_min": (int, 2),
    "uat.k_max": (int, 8),
    "uat.samples": (int, 1000),
    "uat.player": (int, 1),
    "evaluate.checkpoint": (str, ""),
}


def parse_config(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            cfg[key] = parser(value)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from None
    return cfg


def resolve(cfg: dict, mode: str) -> dict:
    out = {}
    for key, (_, default) in SCHEMA.items():
        out[key] = cfg.get(key, default)
    if out["mode"] is None:
        out["mode"] = mode
    elif out["mode"] != mode:
        raise ConfigError(f"config mode={out['mode']!r} disagrees with subcommand {mode!r}")
    if out["model.delta0"] is None:
        out["model.delta0"] = 0.3 if out["model"] == "portfolio" else 0.5
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_manifest(resolved: dict, extras: dict) -> str:
    rows = {**{k: _fmt(v) for k, v in resolved.items()},
            **{k: _fmt(v) for k, v in extras.items()}}
    body = "".join(f"{k}={rows[k]}\n" for k in sorted(rows))
    payload = f"blob {len(body.encode())}\0".encode() + body.encode()
    return body + f"content_hash={hashlib.sha1(payload).hexdigest()}\n"


def _graph(resolved: dict) -> graphs.Graph:
    return graphs.make_graph(resolved["graph.kind"], resolved["graph.n"], resolved["graph.seed"])


def _model(resolved: dict, g: graphs.Graph):
    name = resolved["model"]
    if name in ("lq", "nonlq"):
        p = games.LQParams(a=resolved["model.a"], sigma=resolved["model.sigma"],
                           q=resolved["model.q"], epsilon=resolved["model.epsilon"],
                           c=resolved["model.c"], delta0=resolved["model.delta0"],
                           horizon=resolved["model.horizon"])
        return (games.lq_model if name == "lq" else games.nonlq_model)(g, p), p
    if name == "portfolio":
        rs = RandomSource(resolved["model.param_seed"])
        p = games.PortfolioParams.sample(g.n, rs.stream("portfolio-params"),
                                         delta0=resolved["model.delta0"],
                                         horizon=resolved["model.horizon"])
        return games.portfolio_model(g, p), p
    raise ConfigError(f"unknown model {name!r}")


def _train_config(resolved: dict) -> solvers.TrainConfig:
    return solvers.TrainConfig(
        n_t=resolved["train.n_t"], rounds=resolved["train.rounds"],
        epochs=resolved["train.epochs"], batch=resolved["train.batch"],
        lr=resolved["train.lr"], gamma=resolved["train.gamma"], tau=resolved["train.tau"],
        arch=resolved["arch.kind"], solver=resolved["train.solver"],
        ntm_m=resolved["arch.ntm_m"], ntm_k=resolved["arch.ntm_k"],
        fnn_hidden=resolved["arch.fnn_hidden"], skip=resolved["arch.skip"],
        seed=resolved["seed"])


def _baseline_strategy(resolved, g, model):
    if model.name == "lq":
        sol = baselines.solve_lq_riccati(g, games.LQParams(
            a=resolved["model.a"], sigma=resolved["model.sigma"], q=resolved["model.q"],
            epsilon=resolved["model.epsilon"], c=resolved["model.c"],
            delta0=resolved["model.delta0"], horizon=resolved["model.horizon"]),
            grid_steps=resolved["metrics.fine_steps"])
        return sol.feedback
    if model.name == "portfolio":
        rs = RandomSource(resolved["model.param_seed"])
        p = games.PortfolioParams.sample(g.n, rs.stream("portfolio-params"),
                                         delta0=resolved["model.delta0"],
                                         horizon=resolved["model.horizon"])
        base = baselines.portfolio_constant_ne(g, p)
        return base.strategy
    return None


def _write(outdir: Path, name: str, text: str):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(text)


def run(mode: str, config_path: str, output_override: str = None) -> int:
    try:
        cfg = parse_config(Path(config_path).read_text())
        resolved = resolve(cfg, mode)
    except (OSError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if output_override:
        resolved["output.dir"] = output_override
    outdir = Path(resolved["output.dir"])
    try:
        extras = _MODE_HANDLERS[mode](resolved, outdir)
    except Exception as err:  # structured single-line failure
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    _write(outdir, "manifest", render_manifest(resolved, extras))
    return 0


def _mode_graph_info(resolved, outdir):
    g = _graph(resolved)
    dens_den = g.n * (g.n - 1) // 2
    print(f"graph {resolved['graph.kind']} n={g.n}")
    print(f"diameter {graphs.diameter(g)}")
    print(f"edges {g.edge_count}")
    print(f"edge_density {g.edge_count}/{dens_den} = {g.edge_count / dens_den!r}")
    return {"result.diameter": graphs.diameter(g), "result.edges": g.edge_count}


def _mode_param_count(resolved, outdir):
    g = _graph(resolved)
    if resolved["arch.kind"] == "fnn":
        net = networks.FNN([g.n, resolved["arch.fnn_hidden"], 1], rng=np.random.default_rng(0))
    else:
        net = networks.NTM(g, player=0, depth=resolved["arch.ntm_k"],
                           channels=resolved["arch.ntm_m"], rng=np.random.default_rng(0))
    counts = networks.count_params(net)
    print(f"{resolved['arch.kind']} trainable {counts['trainable']}")
    print(f"{resolved['arch.kind']} frozen {counts['frozen']}")
    extras = {f"result.{k}": v for k, v in counts.items()}
    if resolved["arch.kind"] == "ntm":
        bound = networks.ntm_param_bound(g.n, g.edge_count,
                                         resolved["arch.ntm_k"], resolved["arch.ntm_m"])
        ratio = networks.ntm_coupling_ratio(net)
        print(f"ntm bound {bound}")
        print(f"coupling_ratio {ratio!r}")
        extras["result.bound"] = bound
        extras["result.coupling_ratio"] = ratio
    return extras


def _mode_uat_check(resolved, outdir):
    g = _graph(resolved)
    rs = RandomSource(resolved["seed"])
    if resolved["uat.family"] == "linear":
        game, br = bestresponse.linear_contraction_game(g, resolved["uat.rho"], rs.stream("family"))
        delta = 0.0
    elif resolved["uat.family"] == "tanh":
        game = bestresponse.tanh_contraction_game(g, resolved["uat.rho"], rs.stream("family"))
        br, delta = bestresponse.fit_best_response(game, channels=8, rng=rs.stream("fit"))
    else:
        raise ConfigError(f"unknown uat.family {resolved['uat.family']!r}")
    depths = range(resolved["uat.k_min"], resolved["uat.k_max"] + 1)
    rows, gap = bestresponse.uat_bound_table(
        game, br, delta, resolved["uat.player"] - 1, depths,
        resolved["uat.samples"], rs.stream("samples"))
    print(f"family={resolved['uat.family']} rho={game.rho!r} delta={delta!r}")
    print(f"{'K':>3} {'sup_error':>12} {'bound':>12} pass")
    lines = ["k,sup_error,bound,passed"]
    for row in rows:
        print(f"{row.depth:>3} {row.sup_error:>12.3e} {row.bound:>12.3e} "
              f"{'yes' if row.passed else 'NO'}")
        lines.append(f"{row.depth},{row.sup_error!r},{row.bound!r},{row.passed}")
    print(f"fixed-point iterate gap {gap!r}")
    _write(outdir, "results.csv", "\n".join(lines) + "\n")
    return {"result.iterate_gap": gap, "result.all_passed": all(r.passed for r in rows)}


def _mode_supervised(resolved, outdir):
    g = _graph(resolved)
    rs = RandomSource(resolved["seed"])
    cell = (resolved["bench.arch"], f"{resolved['graph.kind']}{g.n}", g, resolved["bench.target"])
    report = benchmark.run_benchmark([cell], resolved["bench.runs"], rs,
                                     n_test=resolved["bench.n_test"],
                                     player=resolved["bench.player"] - 1)
    _write(outdir, "results.csv", report.csv())
    print(report.summary(), end="")
    vals = [r["final_rmse"] for r in report.rows]
    return {"result.median_rmse": float(np.median(vals)),
            "result.min_rmse": float(np.min(vals))}


def _mode_solve(resolved, outdir):
    g = _graph(resolved)
    model, params = _model(resolved, g)
    cfg = _train_config(resolved)
    result = solvers.dfp_train(model, cfg)
    _write(outdir, "loss_history.csv", result.history_csv())
    (outdir / "checkpoint.bin").write_bytes(dump_params(result.named_parameters()))
    print(f"trained in {result.wall_seconds:.1f}s")  # timing stays out of the manifest
    extras = {}
    if isinstance(params, games.PortfolioParams):
        extras.update({f"sampled.{k}": v for k, v in params.as_dict().items()})
    base = _baseline_strategy(resolved, g, model)
    if base is not None:
        rs = RandomSource(resolved["seed"])
        res = metrics.evaluate_strategies(
            model, base, result.strategy(), resolved["metrics.n_paths"], rs,
            fine_steps=resolved["metrics.fine_steps"], coarse_steps=cfg.n_t)
        _write(outdir, "results.csv",
               "model,graph,arch,solver,rmse_x,rmse_alpha,mre\n"
               f"{model.name},{resolved['graph.kind']}{g.n},{cfg.arch},{cfg.solver},"
               f"{res.rmse_x!r},{res.rmse_alpha!r},{res.mre!r}\n")
        print(f"rmse_x {res.rmse_x!r}")
        print(f"rmse_alpha {res.rmse_alpha!r}")
        print(f"mre {res.mre!r}")
        extras.update({"result.rmse_x": res.rmse_x, "result.rmse_alpha": res.rmse_alpha,
                       "result.mre": res.mre})
    else:
        print("no semi-explicit baseline for this model; metrics skipped")
    if resolved["metrics.dump_paths"]:
        grid = TimeGrid(model.horizon, cfg.n_t)
        bundle = simulate(model, result.strategy(), grid, 64,
                          RandomSource(resolved["seed"]), ("paths",))
        _write(outdir, "paths.csv", paths_to_csv(bundle))
    return extras


def _mode_evaluate(resolved, outdir):
    g = _graph(resolved)
    model, _ = _model(resolved, g)
    cfg = _train_config(resolved)
    if not resolved["evaluate.checkpoint"]:
        raise ConfigError("evaluate mode needs evaluate.checkpoint=<path>")
    blob = Path(resolved["evaluate.checkpoint"]).read_bytes()
    rs = RandomSource(resolved["seed"])
    if cfg.solver == "dp":
        holder = solvers.build_profile(model, cfg, RandomSource(cfg.seed))
        strategy = holder
    else:
        holder = solvers.build_fbsde(model, cfg, RandomSource(cfg.seed))
        strategy = holder.recovered_strategy()
    load_params(blob, holder.named_parameters())
    holder.invalidate()
    base = _baseline_strategy(resolved, g, model)
    if base is None:
        raise ConfigError(f"model {model.name!r} has no semi-explicit baseline to evaluate against")
    res = metrics.evaluate_strategies(model, base, strategy, resolved["metrics.n_paths"], rs,
                                      fine_steps=resolved["metrics.fine_steps"],
                                      coarse_steps=cfg.n_t)
    _write(outdir, "results.csv",
           "model,graph,arch,solver,rmse_x,rmse_alpha,mre\n"
           f"{model.name},{resolved['graph.kind']}{g.n},{cfg.arch},{cfg.solver},"
           f"{res.rmse_x!r},{res.rmse_alpha!r},{res.mre!r}\n")
    print(f"rmse_x {res.rmse_x!r}")
    print(f"rmse_alpha {res.rmse_alpha!r}")
    print(f"mre {res.mre!r}")
    return {"result.rmse_x": res.rmse_x, "result.rmse_alpha": res.rmse_alpha,
            "result.mre": res.mre}


_MODE_HANDLERS = {
    "graph-info": _mode_graph_info,
    "param-count": _mode_param_count,
    "uat-check": _mode_uat_check,
    "supervised": _mode_supervised,
    "solve": _mode_solve,
    "evaluate": _mode_evaluate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="graphgames",
                                     description="graph games: solvers and benchmarks")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("config", help="path to a key=value config file")
        p.add_argument("--output", default=None, help="override output.dir")
    args = parser.parse_args(argv)
    return run(args.mode, args.config, args.output)


if __name__ == "__main__":
    sys.exit(main())
