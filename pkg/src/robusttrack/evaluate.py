"""Performance metrics, the simulation-table driver and the sliding backtest.

Comparison conventions
----------------------
Per-scenario outperformance ("beating time", BT) is judged on the raw loss:
x^2 for the quadratic spec and the unsmoothed one-sided losses max(x,0)^2 /
max(x,0) for the smoothed specs.  The smoothed losses exist for the solvers'
derivatives; the raw one-sided losses are exactly zero whenever the
portfolio matches or beats the index, which makes the "both losses zero"
ties of the exclude variant well defined.  Expected tracking error (ETE)
columns are means of the spec loss itself (no separate code path from
``tracking_error``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .divergence import (DivergenceBall, divergence_gaussian_equal_cov,
                         eta_from_ratio_mc, k_from_eta)
from .loss import LossSpec, loss_value, raw_loss_value
from .model import (IndexComposition, NominalModel, ScenarioSet, sample_model,
                    scenarios_from, synthesize_index)
from .solver import SolverConfig, SolverError, solve_nonrobust, solve_robust

# eta at or below this is treated as a collapsed ball: the robust problem is
# solved at the floor radius, so the weights coincide with the non-robust
# ones up to solver noise.
ETA_FLOOR = 1e-8


@dataclass(frozen=True)
class ComparisonReport:
    """Robust vs non-robust comparison on one evaluation scenario set."""

    bt_percent: float
    bt_percent_excl_ties: float
    ete_robust: float
    ete_nonrobust: float
    ete_diff: float
    eei_robust: float
    eei_nonrobust: float
    eei_diff: float
    n: int
    tie_count: int

    def bt(self, tie_policy: str = "include") -> float:
        return self.bt_percent if tie_policy == "include" else self.bt_percent_excl_ties


def tracking_error(u, scenarios: ScenarioSet, spec: LossSpec = LossSpec.quadratic()) -> np.ndarray:
    """Per-scenario tracking loss; (u'R - B)^2 for the quadratic spec."""
    u = np.asarray(u, dtype=float)
    if u.shape != (scenarios.d,):
        raise ValueError("weight dimension does not match the scenario set")
    return loss_value(spec, scenarios.B - scenarios.R @ u)


def excess_index(u, scenarios: ScenarioSet) -> np.ndarray:
    """Per-scenario excess over the index, u'R - B (negative = beaten)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (scenarios.d,):
        raise ValueError("weight dimension does not match the scenario set")
    return scenarios.R @ u - scenarios.B


def compare(u_robust, u_nonrobust, actual_scenarios: ScenarioSet, spec: LossSpec,
            tie_policy: str = "include", tie_tol: float = 1e-12) -> ComparisonReport:
    """Head-to-head comparison of two portfolios on common scenarios.

    BT counts scenarios where the robust raw loss is not worse; the exclude
    variant drops scenarios where both raw losses are <= tie_tol from
    numerator and denominator.  Requesting tie_policy="exclude" with no
    surviving scenarios is an error; under "include" the exclude percentage
    degrades to NaN.
    """
    if tie_policy not in ("include", "exclude"):
        raise ValueError(f"unknown tie_policy {tie_policy!r}")
    x_r = actual_scenarios.B - actual_scenarios.R @ np.asarray(u_robust, dtype=float)
    x_n = actual_scenarios.B - actual_scenarios.R @ np.asarray(u_nonrobust, dtype=float)
    raw_r = raw_loss_value(spec, x_r)
    raw_n = raw_loss_value(spec, x_n)
    wins = raw_r <= raw_n
    ties = (raw_r <= tie_tol) & (raw_n <= tie_tol)
    n = actual_scenarios.n
    tie_count = int(ties.sum())
    n_excl = n - tie_count
    if n_excl == 0:
        if tie_policy == "exclude":
            raise ValueError("no scenarios survive tie exclusion")
        bt_excl = float("nan")
    else:
        bt_excl = 100.0 * float((wins & ~ties).sum()) / n_excl

    te_r = tracking_error(u_robust, actual_scenarios, spec)
    te_n = tracking_error(u_nonrobust, actual_scenarios, spec)
    ei_r = excess_index(u_robust, actual_scenarios)
    ei_n = excess_index(u_nonrobust, actual_scenarios)
    return ComparisonReport(
        bt_percent=100.0 * float(wins.mean()),
        bt_percent_excl_ties=bt_excl,
        ete_robust=float(te_r.mean()),
        ete_nonrobust=float(te_n.mean()),
        ete_diff=float(te_r.mean() - te_n.mean()),
        eei_robust=float(ei_r.mean()),
        eei_nonrobust=float(ei_n.mean()),
        eei_diff=float(ei_r.mean() - ei_n.mean()),
        n=n,
        tie_count=tie_count,
    )


@dataclass(frozen=True)
class RowConfig:
    """One table row: a ball exponent plus either a radius or a mean factor.

    Exactly one of eta / k is given.  With eta, the mean factor follows from
    the closed-form inversion (Gaussian nominal only); with k, the radius is
    the equal-covariance closed form for Gaussian nominals and a Monte-Carlo
    estimate otherwise.
    """

    lam: float
    eta: Optional[float] = None
    k: Optional[float] = None
    sign: str = "-"

    def __post_init__(self):
        if (self.eta is None) == (self.k is None):
            raise ValueError("exactly one of eta / k must be given")
        if self.sign not in ("+", "-"):
            raise ValueError("sign must be '+' or '-'")


@dataclass
class TableRow:
    """Resolved row: configuration, comparison report and solver diagnostics."""

    lam: float
    eta: float
    k: float
    report: Optional[ComparisonReport]
    converged: bool
    solver_message: str = ""
    residual_norm: Optional[float] = None
    iterations: Optional[int] = None
    eta_std_error: float = 0.0
    seed_fit: int = 0
    seed_eval: int = 0


def _row_seeds(seed: int, n_rows: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(3 * n_rows, np.uint64)


def run_table(nominal: NominalModel, composition: IndexComposition,
              tracked_assets: Sequence[int], grid: Sequence[RowConfig],
              spec: LossSpec, n: int, seed: int,
              n_eval: Optional[int] = None, n_ratio: Optional[int] = None,
              tie_tol: float = 1e-12,
              solver_config: Optional[SolverConfig] = None) -> list:
    """Fit robust and non-robust portfolios per row and compare on actual draws.

    Per row: resolve (eta, k); draw n fit scenarios from the nominal model;
    solve both portfolios; draw n_eval scenarios from the mean-scaled actual
    model; emit a ComparisonReport.  Both portfolios are always evaluated on
    the identical draw set (common random numbers).  Solver failures are
    annotated on the row instead of aborting the table.
    """
    tracked = list(tracked_assets)
    n_eval = n_eval or n
    n_ratio = n_ratio or n
    states = _row_seeds(seed, len(grid))
    rows = []
    for i, rc in enumerate(grid):
        seed_fit = int(states[3 * i])
        seed_eval = int(states[3 * i + 1])
        seed_ratio = int(states[3 * i + 2])
        eta_se = 0.0
        if rc.eta is not None:
            eta = rc.eta
            if nominal.kind != "gaussian":
                raise ValueError("eta-only rows require a gaussian nominal model")
            k = k_from_eta(eta, rc.lam, nominal.mean, nominal.scale, rc.sign)
        else:
            k = rc.k
            if k == 1.0:
                eta = 0.0
            elif nominal.kind == "gaussian":
                eta = divergence_gaussian_equal_cov(
                    nominal.mean, k * nominal.mean, nominal.scale, rc.lam)
            else:
                est = eta_from_ratio_mc(nominal, nominal.with_mean_scaled(k),
                                        rc.lam, n_ratio, seed_ratio)
                eta, eta_se = est.estimate, est.std_error

        fit_draws = sample_model(nominal, n, seed_fit)
        fit = scenarios_from(fit_draws[:, tracked],
                             synthesize_index(fit_draws, composition),
                             seed=seed_fit)
        ball = DivergenceBall(lam=rc.lam, eta=max(eta, ETA_FLOOR))
        u_non = solve_nonrobust(fit, spec)
        try:
            sol = solve_robust(fit, ball, spec, solver_config)
            u_rob, converged, msg = sol.u, True, ""
            res_norm, iters = sol.residual_norm, sol.iterations
        except SolverError as exc:
            rows.append(TableRow(lam=rc.lam, eta=eta, k=k, report=None,
                                 converged=False, solver_message=str(exc),
                                 eta_std_error=eta_se,
                                 seed_fit=seed_fit, seed_eval=seed_eval))
            continue

        actual = nominal.with_mean_scaled(k)
        eval_draws = sample_model(actual, n_eval, seed_eval)
        eval_set = scenarios_from(eval_draws[:, tracked],
                                  synthesize_index(eval_draws, composition),
                                  seed=seed_eval)
        report = compare(u_rob, u_non, eval_set, spec, tie_tol=tie_tol)
        rows.append(TableRow(lam=rc.lam, eta=eta, k=k, report=report,
                             converged=converged, solver_message=msg,
                             residual_norm=res_norm, iterations=iters,
                             eta_std_error=eta_se,
                             seed_fit=seed_fit, seed_eval=seed_eval))
    return rows


# ---------------------------------------------------------------------------
# sliding-window backtest
# ---------------------------------------------------------------------------

@dataclass
class BacktestConfig:
    """In-sample window length, out-of-sample step count, ball and loss."""

    ball: DivergenceBall
    loss: LossSpec
    window: int = 104
    out_of_sample: int = 52
    tie_tol: float = 1e-12
    solver: Optional[SolverConfig] = None

    def __post_init__(self):
        if self.window < 1 or self.out_of_sample < 1:
            raise ValueError("window and out_of_sample must be >= 1")


@dataclass
class BacktestResult:
    weights_robust: np.ndarray        # (steps, d)
    weights_nonrobust: np.ndarray
    loss_robust: np.ndarray           # per-step spec loss, one-step-ahead
    loss_nonrobust: np.ndarray
    ei_robust: np.ndarray
    ei_nonrobust: np.ndarray
    bt_wins: int
    bt_steps: int
    ete_in_robust: float
    ete_in_nonrobust: float
    ete_out_robust: float
    ete_out_nonrobust: float
    flagged_steps: list = field(default_factory=list)
    window_bounds: list = field(default_factory=list)
    plot_periods: np.ndarray = None
    plot_observed: np.ndarray = None
    plot_fitted: np.ndarray = None

    @property
    def bt_percent(self) -> float:
        return 100.0 * self.bt_wins / self.bt_steps


def backtest_sliding(asset_returns: np.ndarray, index_returns: np.ndarray,
                     cfg: BacktestConfig) -> BacktestResult:
    """Walk a trailing window over historical returns and track one step ahead.

    At each out-of-sample step the robust and non-robust portfolios are
    refit on the trailing ``window`` return rows and applied to the next
    realized period.  A solver failure at a step carries the previous
    weights forward and flags the step.  The plot series covers all
    window + out_of_sample periods: the in-sample stretch is fitted with the
    first window's weights, the rest with each step's weights.
    """
    r = np.asarray(asset_returns, dtype=float)
    b = np.asarray(index_returns, dtype=float)
    total = cfg.window + cfg.out_of_sample
    if r.shape[0] != b.shape[0]:
        raise ValueError("asset and index return lengths differ")
    if r.shape[0] < total:
        raise ValueError(f"need window+out_of_sample={total} periods, got {r.shape[0]}")
    d = r.shape[1]
    if cfg.window < d + 3:
        raise ValueError(f"window must be at least d+3={d + 3} for the robust solve")

    u_rob_prev = np.full(d, 1.0 / d)
    u_non_prev = np.full(d, 1.0 / d)
    W_rob = np.empty((cfg.out_of_sample, d))
    W_non = np.empty((cfg.out_of_sample, d))
    loss_r = np.empty(cfg.out_of_sample)
    loss_n = np.empty(cfg.out_of_sample)
    raw_r = np.empty(cfg.out_of_sample)
    raw_n = np.empty(cfg.out_of_sample)
    ei_r = np.empty(cfg.out_of_sample)
    ei_n = np.empty(cfg.out_of_sample)
    flagged = []
    bounds = []
    first_rob = None
    first_non = None

    for step, t in enumerate(range(cfg.window, total)):
        lo, hi = t - cfg.window, t
        bounds.append((lo, hi))
        window_set = scenarios_from(r[lo:hi], b[lo:hi], source="historical-window")
        try:
            u_non = solve_nonrobust(window_set, cfg.loss)
        except SolverError as exc:
            u_non = u_non_prev
            flagged.append((step, f"nonrobust: {exc}"))
        try:
            u_rob = solve_robust(window_set, cfg.ball, cfg.loss, cfg.solver).u
        except SolverError as exc:
            u_rob = u_rob_prev
            flagged.append((step, f"robust: {exc}"))
        if first_rob is None:
            first_rob, first_non = u_rob, u_non

        R_t = 1.0 + r[t]
        B_t = 1.0 + b[t]
        x_r = B_t - R_t @ u_rob
        x_n = B_t - R_t @ u_non
        loss_r[step] = loss_value(cfg.loss, x_r)
        loss_n[step] = loss_value(cfg.loss, x_n)
        raw_r[step] = raw_loss_value(cfg.loss, x_r)
        raw_n[step] = raw_loss_value(cfg.loss, x_n)
        ei_r[step] = R_t @ u_rob - B_t
        ei_n[step] = R_t @ u_non - B_t
        W_rob[step] = u_rob
        W_non[step] = u_non
        u_rob_prev, u_non_prev = u_rob, u_non

    in_set = scenarios_from(r[:cfg.window], b[:cfg.window], source="historical-window")
    ete_in_r = float(tracking_error(first_rob, in_set, cfg.loss).mean())
    ete_in_n = float(tracking_error(first_non, in_set, cfg.loss).mean())

    periods = np.arange(total)
    observed = 1.0 + b[:total]
    fitted = np.empty(total)
    fitted[:cfg.window] = (1.0 + r[:cfg.window]) @ first_rob
    for step, t in enumerate(range(cfg.window, total)):
        fitted[t] = (1.0 + r[t]) @ W_rob[step]

    return BacktestResult(
        weights_robust=W_rob, weights_nonrobust=W_non,
        loss_robust=loss_r, loss_nonrobust=loss_n,
        ei_robust=ei_r, ei_nonrobust=ei_n,
        bt_wins=int((raw_r <= raw_n).sum()), bt_steps=cfg.out_of_sample,
        ete_in_robust=ete_in_r, ete_in_nonrobust=ete_in_n,
        ete_out_robust=float(loss_r.mean()), ete_out_nonrobust=float(loss_n.mean()),
        flagged_steps=flagged, window_bounds=bounds,
        plot_periods=periods, plot_observed=observed, plot_fitted=fitted,
    )


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

_CSV_COLS = ["lam", "eta", "k", "bt_include_pct", "bt_exclude_pct",
             "ete_robust_1e4", "ete_nonrobust_1e4", "ete_diff_1e4",
             "eei_robust_1e4", "eei_nonrobust_1e4", "eei_diff_1e4",
             "tie_count", "n", "converged"]


def write_table_csv(rows: Sequence[TableRow], path) -> None:
    """CSV mirror of the comparison table; ETE/EEI columns are scaled by 1e4."""
    lines = ["# ETE and EEI columns are reported in units of 1e-4",
             ",".join(_CSV_COLS)]
    for row in rows:
        rep = row.report
        if rep is None:
            cells = [row.lam, row.eta, row.k] + [""] * 10 + [False]
        else:
            cells = [row.lam, row.eta, row.k,
                     f"{rep.bt_percent:.4f}", f"{rep.bt_percent_excl_ties:.4f}",
                     f"{rep.ete_robust * 1e4:.6f}", f"{rep.ete_nonrobust * 1e4:.6f}",
                     f"{rep.ete_diff * 1e4:.6f}",
                     f"{rep.eei_robust * 1e4:.6f}", f"{rep.eei_nonrobust * 1e4:.6f}",
                     f"{rep.eei_diff * 1e4:.6f}",
                     rep.tie_count, rep.n, row.converged]
        lines.append(",".join(str(c) for c in cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def table_rows_as_dicts(rows: Sequence[TableRow]) -> list:
    out = []
    for row in rows:
        rec = {"lam": row.lam, "eta": row.eta, "k": row.k,
               "converged": row.converged, "solver_message": row.solver_message,
               "residual_norm": row.residual_norm, "iterations": row.iterations,
               "eta_std_error": row.eta_std_error,
               "seed_fit": row.seed_fit, "seed_eval": row.seed_eval}
        if row.report is not None:
            rec.update(vars(row.report))
        out.append(rec)
    return out


def write_table_json(rows: Sequence[TableRow], path) -> None:
    """Full-precision JSON mirror including seeds and solver diagnostics."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_rows_as_dicts(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plot_csv(result: BacktestResult, path) -> None:
    """Figure series: period index, observed gross index, fitted robust value."""
    lines = ["period,observed,fitted"]
    for p, o, f in zip(result.plot_periods, result.plot_observed, result.plot_fitted):
        lines.append(f"{int(p)},{float(o)!r},{float(f)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_backtest_json(result: BacktestResult, path) -> None:
    payload = {
        "bt_wins": result.bt_wins,
        "bt_steps": result.bt_steps,
        "bt_percent": result.bt_percent,
        "ete_in_robust": result.ete_in_robust,
        "ete_in_nonrobust": result.ete_in_nonrobust,
        "ete_out_robust": result.ete_out_robust,
        "ete_out_nonrobust": result.ete_out_nonrobust,
        "flagged_steps": [[int(s), msg] for s, msg in result.flagged_steps],
        "window_bounds": [[int(a), int(b)] for a, b in result.window_bounds],
        "weights_robust": result.weights_robust.tolist(),
        "weights_nonrobust": result.weights_nonrobust.tolist(),
        "loss_robust": result.loss_robust.tolist(),
        "loss_nonrobust": result.loss_nonrobust.tolist(),
        "ei_robust": result.ei_robust.tolist(),
        "ei_nonrobust": result.ei_nonrobust.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
