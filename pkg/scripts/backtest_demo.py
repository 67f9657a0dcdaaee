"""Sliding-window backtest demo.

Without --csv, generates a synthetic weekly price panel (index column plus
component stocks), so the full pipeline can be exercised offline.  With
--csv, expects one price column per instrument with the index in --index-col
(the 31-stock weekly dataset layout: 291 rows, index first, stocks 1..31).

    python scripts/backtest_demo.py --window 104 --oos 52
    python scripts/backtest_demo.py --csv data/hang_seng_weekly.csv \\
        --tracked 4 11 12 13 15 18 21 22 23 25 26 27 --lambda 0.2 --eta 0.005
"""

import argparse
from pathlib import Path

import numpy as np

import robusttrack as rt
from robusttrack.evaluate import write_backtest_json, write_plot_csv


def synthetic_prices(periods=200, stocks=8, seed=5):
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0005, 0.003, stocks)
    vols = rng.uniform(0.02, 0.05, stocks)
    z = rng.standard_normal((periods, stocks))
    common = rng.standard_normal((periods, 1))
    r = means + vols * (0.6 * common + 0.8 * z)
    w = rng.dirichlet(np.ones(stocks))
    b = r @ w + 0.002 * rng.standard_normal(periods)
    full = np.column_stack([b, r])
    return 100.0 * np.cumprod(1.0 + full, axis=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csv", default=None, help="price CSV (index + stock columns)")
    ap.add_argument("--index-col", type=int, default=0)
    ap.add_argument("--tracked", type=int, nargs="+", default=None,
                    help="stock column indices to hold in the tracker")
    ap.add_argument("--window", type=int, default=104)
    ap.add_argument("--oos", type=int, default=52)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.2)
    ap.add_argument("--eta", type=float, default=0.005)
    ap.add_argument("--loss", choices=["quadratic", "l1", "l2"], default="quadratic")
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    if args.csv:
        loaded = rt.load_prices_csv(args.csv)
        returns = loaded.returns
    else:
        prices = synthetic_prices(periods=args.window + args.oos + 10)
        returns = prices[1:] / prices[:-1] - 1.0
        print("using a synthetic price panel (pass --csv for real data)")

    index_returns = returns[:, args.index_col]
    tracked = args.tracked or [j for j in range(returns.shape[1]) if j != args.index_col]
    kind = {"quadratic": rt.LossSpec.quadratic(),
            "l1": rt.LossSpec.smoothed_pos_sq(args.epsilon),
            "l2": rt.LossSpec.smoothed_plus(args.epsilon)}[args.loss]
    cfg = rt.BacktestConfig(ball=rt.DivergenceBall(args.lam, args.eta), loss=kind,
                            window=args.window, out_of_sample=args.oos)
    result = rt.backtest_sliding(returns[:, tracked], index_returns, cfg)

    print(f"window={args.window} out-of-sample={args.oos} "
          f"lam={args.lam} eta={args.eta} loss={args.loss}")
    print(f"out-of-sample BT: {result.bt_wins}/{result.bt_steps} "
          f"({result.bt_percent:.2f}%)")
    print(f"ETE in-sample   robust={result.ete_in_robust:.6g}  "
          f"nonrobust={result.ete_in_nonrobust:.6g}")
    print(f"ETE out-sample  robust={result.ete_out_robust:.6g}  "
          f"nonrobust={result.ete_out_nonrobust:.6g}")
    if result.flagged_steps:
        print(f"flagged steps: {result.flagged_steps}")
    print("first-window robust weights:",
          np.round(result.weights_robust[0], 4).tolist())

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_backtest_json(result, out / "backtest.json")
    write_plot_csv(result, out / "plot_data.csv")
    print(f"written to {out}/backtest.json and {out}/plot_data.csv")


if __name__ == "__main__":
    main()
