"""Configuration-driven command line front end.

    track <command> --config cfg.json [--seed N] [--out DIR] [--lambda X]
          [--eta X] [--loss quadratic|l1|l2] [--epsilon X]

Commands: divergence, solve, simulate, backtest.  Every run writes a
manifest.json with the resolved configuration, seeds and package version so
outputs can be reproduced byte for byte.  Exit codes: 0 success, 2 config
error, 3 solver non-convergence, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .divergence import (DivergenceBall, divergence_gaussian,
                         divergence_gaussian_equal_cov, eta_from_ratio_mc,
                         k_from_eta)
from .evaluate import (BacktestConfig, RowConfig, backtest_sliding,
                       run_table, write_backtest_json, write_plot_csv,
                       write_table_csv, write_table_json)
from .loss import LossSpec
from .model import (DataError, IndexComposition, NominalModel, load_prices_csv,
                    sample_model, scenarios_from, synthesize_index)
from .solver import (SolverConfig, SolverError, hessian_diagnostic,
                     solve_nonrobust, solve_robust)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DATA = 4

_LOSS_NAMES = {"quadratic": "quadratic", "l1": "smoothed_pos_sq", "l2": "smoothed_plus"}


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"config error at {path}: {message}")


def _need(cfg: dict, path: str, key: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return cfg[key]


def _as_positive(value, path, strict=True):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if strict and v <= 0 or v < 0:
        raise ConfigError(path, "must be positive")
    return v


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}")


def build_model(cfg: dict, path: str = "model") -> NominalModel:
    kind = _need(cfg, path, "kind")
    try:
        if kind == "gaussian":
            return NominalModel.gaussian(_need(cfg, path, "mean"), _need(cfg, path, "cov"))
        if kind == "student_t":
            return NominalModel.student_t(_need(cfg, path, "mean"),
                                          _need(cfg, path, "scale"),
                                          _need(cfg, path, "dof"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc))
    raise ConfigError(f"{path}.kind", f"unknown model kind {kind!r}")


def build_loss(cfg: dict) -> LossSpec:
    block = cfg.get("loss", {})
    name = block.get("kind", "quadratic")
    if name not in _LOSS_NAMES:
        raise ConfigError("loss.kind", f"expected one of {sorted(_LOSS_NAMES)}, got {name!r}")
    eps = block.get("epsilon", 0.01)
    if name != "quadratic":
        _as_positive(eps, "loss.epsilon")
    try:
        return LossSpec(kind=_LOSS_NAMES[name], epsilon=float(eps))
    except ValueError as exc:
        raise ConfigError("loss", str(exc))


def build_solver_config(cfg: dict) -> SolverConfig:
    block = cfg.get("solver", {})
    try:
        return SolverConfig(
            max_iterations=int(block.get("max_iterations", 200)),
            residual_tol=float(block.get("residual_tol", 1e-8)),
        )
    except ValueError as exc:
        raise ConfigError("solver", str(exc))


def _ball_block(cfg: dict) -> dict:
    block = cfg.get("ball")
    if block is None:
        raise ConfigError("ball", "missing required block")
    if "lambda" not in block:
        raise ConfigError("ball.lambda", "missing required field")
    lam = float(block["lambda"])
    if lam < 0:
        raise ConfigError("ball.lambda", "must be >= 0")
    return block


def build_grid(cfg: dict) -> list:
    block = _ball_block(cfg)
    lam = float(block["lambda"])
    sign = block.get("sign", "-")
    if sign not in ("+", "-"):
        raise ConfigError("ball.sign", "must be '+' or '-'")
    if "eta_grid" in block:
        return [RowConfig(lam=lam, eta=_as_positive(e, "ball.eta_grid"), sign=sign)
                for e in block["eta_grid"]]
    if "k_grid" in block:
        return [RowConfig(lam=lam, k=float(k), sign=sign) for k in block["k_grid"]]
    if "eta" in block:
        return [RowConfig(lam=lam, eta=_as_positive(block["eta"], "ball.eta"), sign=sign)]
    raise ConfigError("ball", "one of eta, eta_grid or k_grid is required")


def build_ball(cfg: dict) -> DivergenceBall:
    block = _ball_block(cfg)
    if "eta" not in block:
        raise ConfigError("ball.eta", "missing required field")
    eta = float(block["eta"])
    if eta < 0:
        raise ConfigError("ball.eta", "must be >= 0")
    return DivergenceBall(lam=float(block["lambda"]), eta=eta)


def apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg.setdefault("experiment", {})["seed"] = args.seed
    if args.lam is not None:
        cfg.setdefault("ball", {})["lambda"] = args.lam
    if args.eta is not None:
        cfg.setdefault("ball", {})["eta"] = args.eta
        cfg["ball"].pop("eta_grid", None)
        cfg["ball"].pop("k_grid", None)
    if args.loss is not None:
        cfg.setdefault("loss", {})["kind"] = args.loss
    if args.epsilon is not None:
        cfg.setdefault("loss", {})["epsilon"] = args.epsilon
    if args.out is not None:
        cfg.setdefault("io", {})["out_dir"] = args.out
    return cfg


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("io", {}).get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(cfg: dict, command: str, outputs: list, out_dir: Path) -> None:
    manifest = {
        "command": command,
        "config": cfg,
        "version": __version__,
        "outputs": sorted(str(o) for o in outputs),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _experiment(cfg: dict) -> dict:
    block = cfg.get("experiment", {})
    return {
        "n": int(block.get("n", 200_000)),
        "n_eval": int(block["n_eval"]) if "n_eval" in block else None,
        "n_ratio": int(block["n_ratio"]) if "n_ratio" in block else None,
        "seed": int(block.get("seed", 0)),
        "tie_tol": float(block.get("tie_tol", 1e-12)),
        "tie_policy": block.get("tie_policy", "include"),
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_divergence(cfg: dict) -> int:
    model = build_model(_need(cfg, "config", "model"))
    exp = _experiment(cfg)
    out = _out_dir(cfg)
    block = _ball_block(cfg)
    lam = float(block["lambda"])
    records = []

    if "actual" in cfg:
        actual = build_model(cfg["actual"], path="actual")
        closed = None
        if model.kind == "gaussian" and actual.kind == "gaussian" and lam > 0:
            if np.allclose(model.scale, actual.scale):
                closed = divergence_gaussian_equal_cov(model.mean, actual.mean,
                                                       model.scale, lam)
            else:
                try:
                    closed = divergence_gaussian(model.mean, model.scale,
                                                 actual.mean, actual.scale, lam)
                except ValueError:
                    closed = None
        mc = eta_from_ratio_mc(model, actual, lam, exp["n"], exp["seed"])
        records.append({"lam": lam, "closed_form": closed,
                        "mc_estimate": mc.estimate, "mc_std_error": mc.std_error})
        line = f"lam={lam}: MC divergence = {mc.estimate:.6g} +/- {mc.std_error:.2g}"
        if closed is not None:
            line += f" | closed form = {closed:.6g}"
        print(line)

    if "eta_grid" in block or "eta" in block:
        etas = block.get("eta_grid", [block.get("eta")])
        sign = block.get("sign", "-")
        if model.kind != "gaussian":
            raise ConfigError("ball.eta_grid", "k inversion requires a gaussian model")
        print(f"{'eta':>8} {'k':>12} {'round_trip':>14}")
        for eta in etas:
            k = k_from_eta(float(eta), lam, model.mean, model.scale, sign)
            rt = divergence_gaussian_equal_cov(model.mean, k * model.mean,
                                               model.scale, lam)
            records.append({"lam": lam, "eta": float(eta), "sign": sign, "k": k,
                            "round_trip": rt})
            print(f"{eta:>8} {k:>12.4f} {rt:>14.10f}")

    path = out / "divergence_report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(cfg, "divergence", [path], out)
    return EXIT_OK


def _scenarios_from_config(cfg: dict, exp: dict):
    """Scenario construction from either a parametric model or a CSV."""
    if "data" in cfg:
        data = cfg["data"]
        loaded = load_prices_csv(_need(data, "data", "csv"))
        returns = loaded.returns
        mode = data.get("index", "column")
        if mode == "column":
            idx_col = int(data.get("index_col", 0))
            index_returns = returns[:, idx_col]
            tracked = data.get("tracked",
                               [j for j in range(returns.shape[1]) if j != idx_col])
        elif mode == "synthesize":
            weights = IndexComposition(np.asarray(_need(data, "data", "weights"), float))
            index_returns = synthesize_index(returns, weights)
            tracked = data.get("tracked", list(range(returns.shape[1])))
        else:
            raise ConfigError("data.index", "must be 'column' or 'synthesize'")
        return scenarios_from(returns[:, tracked], index_returns,
                              source="historical-window")
    model = build_model(_need(cfg, "config", "model"))
    comp = IndexComposition(np.asarray(_need(cfg, "config", "composition"), float))
    tracked = cfg.get("tracked_assets", list(range(model.dim)))
    draws = sample_model(model, exp["n"], exp["seed"])
    return scenarios_from(draws[:, tracked], synthesize_index(draws, comp),
                          seed=exp["seed"])


def cmd_solve(cfg: dict) -> int:
    exp = _experiment(cfg)
    out = _out_dir(cfg)
    spec = build_loss(cfg)
    ball = build_ball(cfg)
    solver_cfg = build_solver_config(cfg)
    scen = _scenarios_from_config(cfg, exp)

    u_non = solve_nonrobust(scen, spec)
    sol = solve_robust(scen, ball, spec, solver_cfg)
    max_eig = hessian_diagnostic(sol, scen, ball, spec)

    print(f"{'asset':>6} {'robust':>12} {'nonrobust':>12}")
    for i, (ur, un) in enumerate(zip(sol.u, u_non)):
        print(f"{i:>6} {ur:>12.6f} {un:>12.6f}")
    print(f"alpha={sol.alpha:.6g} beta={sol.beta:.6g} theta={sol.theta:.6g}")
    print(f"residual={sol.residual_norm:.3g} iterations={sol.iterations} "
          f"hessian_max_eig={max_eig:.3g}")

    payload = {
        "weights_robust": sol.u.tolist(),
        "weights_nonrobust": u_non.tolist(),
        "alpha": sol.alpha, "beta": sol.beta, "theta": sol.theta,
        "residual_norm": sol.residual_norm, "iterations": sol.iterations,
        "hessian_max_eig": max_eig,
        "feasibility_margin": sol.feasibility_margin(ball.lam),
        "estar_mean": float(sol.estar.mean()),
        "estar_min": float(sol.estar.min()),
        "lam": ball.lam, "eta": ball.eta,
    }
    path = out / "solution.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(cfg, "solve", [path], out)
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    exp = _experiment(cfg)
    out = _out_dir(cfg)
    spec = build_loss(cfg)
    model = build_model(_need(cfg, "config", "model"))
    comp = IndexComposition(np.asarray(_need(cfg, "config", "composition"), float))
    tracked = cfg.get("tracked_assets")
    if tracked is None:
        raise ConfigError("tracked_assets", "missing required field")
    grid = build_grid(cfg)
    rows = run_table(model, comp, tracked, grid, spec,
                     n=exp["n"], seed=exp["seed"], n_eval=exp["n_eval"],
                     n_ratio=exp["n_ratio"], tie_tol=exp["tie_tol"],
                     solver_config=build_solver_config(cfg))
    csv_path = out / "table.csv"
    json_path = out / "table.json"
    write_table_csv(rows, csv_path)
    write_table_json(rows, json_path)
    for row in rows:
        if row.report is None:
            print(f"eta={row.eta:.4g} k={row.k:.4f}: solver failed: {row.solver_message}")
        else:
            print(f"eta={row.eta:.4g} k={row.k:.4f}: "
                  f"BT={row.report.bt_percent:.2f}% "
                  f"BT_excl={row.report.bt_percent_excl_ties:.2f}% "
                  f"ete_diff={row.report.ete_diff * 1e4:+.4f}e-4")
    write_manifest(cfg, "simulate", [csv_path, json_path], out)
    return EXIT_SOLVER if any(not r.converged for r in rows) else EXIT_OK


def cmd_backtest(cfg: dict) -> int:
    out = _out_dir(cfg)
    spec = build_loss(cfg)
    ball = build_ball(cfg)
    data = _need(cfg, "config", "data")
    loaded = load_prices_csv(_need(data, "data", "csv"))
    returns = loaded.returns
    mode = data.get("index", "column")
    if mode == "column":
        idx_col = int(data.get("index_col", 0))
        index_returns = returns[:, idx_col]
        tracked = data.get("tracked",
                           [j for j in range(returns.shape[1]) if j != idx_col])
    elif mode == "synthesize":
        comp = IndexComposition(np.asarray(_need(data, "data", "weights"), float))
        index_returns = synthesize_index(returns, comp)
        tracked = data.get("tracked", list(range(returns.shape[1])))
    else:
        raise ConfigError("data.index", "must be 'column' or 'synthesize'")

    bt_block = cfg.get("backtest", {})
    bcfg = BacktestConfig(
        ball=ball, loss=spec,
        window=int(bt_block.get("window", 104)),
        out_of_sample=int(bt_block.get("out_of_sample", 52)),
        solver=build_solver_config(cfg),
    )
    result = backtest_sliding(returns[:, tracked], index_returns, bcfg)

    print(f"out-of-sample BT: {result.bt_wins}/{result.bt_steps} "
          f"({result.bt_percent:.2f}%)")
    print(f"ETE in-sample  robust={result.ete_in_robust:.6g} "
          f"nonrobust={result.ete_in_nonrobust:.6g}")
    print(f"ETE out-sample robust={result.ete_out_robust:.6g} "
          f"nonrobust={result.ete_out_nonrobust:.6g}")
    if result.flagged_steps:
        print(f"flagged steps: {len(result.flagged_steps)}")

    json_path = out / "backtest.json"
    plot_path = out / "plot_data.csv"
    write_backtest_json(result, json_path)
    write_plot_csv(result, plot_path)
    write_manifest(cfg, "backtest", [json_path, plot_path], out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="track",
        description="Robust index tracking under divergence-ball ambiguity",
    )
    parser.add_argument("command",
                        choices=["divergence", "solve", "simulate", "backtest"])
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--lambda", dest="lam", type=float, default=None)
    parser.add_argument("--eta", type=float, default=None)
    parser.add_argument("--loss", choices=sorted(_LOSS_NAMES), default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
        declared = cfg.get("command")
        if declared is not None and declared != args.command:
            raise ConfigError("command",
                              f"config declares {declared!r} but {args.command!r} was invoked")
        handler = {"divergence": cmd_divergence, "solve": cmd_solve,
                   "simulate": cmd_simulate, "backtest": cmd_backtest}[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # validation failures raised by the domain types
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
