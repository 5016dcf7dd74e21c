"""Multi-step forecasting error and dictionary comparison experiments."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from koopman_lift.lifting import lift, make_dictionary
from koopman_lift.simulate import build_snapshots, make_dataset
from koopman_lift.systems import get_system


@dataclass(eq=False)
class EvalReport:
    """Per-step mean squared forecast error over sliding windows.

    ``per_step[s-1]`` is the error after s lifted steps; ``mean_5step`` is the
    final-step value, ``mean_all_steps`` the average over the horizon.
    Windows whose forecast leaves finite range are dropped and counted; if
    every window diverges the errors are reported as ``inf``.
    """

    per_step: np.ndarray
    mean_5step: float
    mean_all_steps: float
    n_windows: int
    n_diverged: int


def predict(model, y0, steps: int, *, relift: bool = False) -> np.ndarray:
    """Roll the model forward; returns states of shape (steps + 1, m).

    The default propagates purely in lifted space (lift once, then repeated
    multiplication by K, reading the state block back out).  ``relift``
    re-lifts the readout each step instead.
    """
    d = model.dictionary
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (d.m,):
        raise ValueError(f"y0 must have shape ({d.m},)")
    out = np.empty((steps + 1, d.m))
    out[0] = y0
    z = lift(d, y0)
    for s in range(1, steps + 1):
        z = model.K @ z
        out[s] = z[1:1 + d.m]
        if relift:
            z = lift(d, out[s])
    return out


def five_step_error(model, trajectories, horizon: int = 5) -> EvalReport:
    """Sliding-window forecast error against held-out trajectories.

    Every window of ``horizon + 1`` consecutive samples (stride 1) is
    forecast from its first state by pure lifted rollout, and squared errors
    are averaged over state coordinates, then over windows, per step.
    ``trajectories`` may hold (T+1, n) state arrays or objects with a
    ``states`` attribute.
    """
    d = model.dictionary
    m = d.m
    step_sums = np.zeros(horizon)
    n_windows = 0
    n_diverged = 0
    for traj in trajectories:
        S = np.asarray(getattr(traj, "states", traj), dtype=float)
        n_start = S.shape[0] - horizon
        if n_start < 1:
            continue
        Z = lift(d, S[:n_start])
        err = np.zeros((n_start, horizon))
        alive = np.ones(n_start, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(1, horizon + 1):
                Z = Z @ model.K.T
                pred = Z[:, 1:1 + m]
                alive &= np.isfinite(pred).all(axis=1)
                diff = np.where(alive[:, None], pred - S[s:s + n_start], 0.0)
                err[:, s - 1] = np.mean(diff * diff, axis=1)
        n_windows += n_start
        n_diverged += int(np.count_nonzero(~alive))
        step_sums += err[alive].sum(axis=0)
    n_ok = n_windows - n_diverged
    if n_windows == 0:
        raise ValueError("no trajectory long enough for the horizon")
    if n_ok == 0:
        per_step = np.full(horizon, np.inf)
    else:
        per_step = step_sums / n_ok
    return EvalReport(
        per_step=per_step,
        mean_5step=float(per_step[-1]),
        mean_all_steps=float(np.mean(per_step)),
        n_windows=n_windows,
        n_diverged=n_diverged,
    )


@dataclass
class CompareConfig:
    """Protocol for the dictionary-family comparison experiment.

    One dataset per system (shared across dictionary kinds), one gradient
    descent run per (system, kind, N) cell, with the five-step test error
    logged along the way.
    """

    systems: tuple = ("vanderpol", "duffing", "predprey", "toggle")
    kinds: tuple = ("augsill", "sill", "summedrbf", "legendre", "hermite")
    n_outs: tuple = (5, 10, 20)
    n_trajectories: int = 20
    steps: int = 50
    dt: float = 0.05
    substeps: int = 2
    train_fraction: float = 0.8
    seed: int = 0
    alpha_init: float = 1.0
    poly_domain: str = "fit"  # "fit": map data range to [-1, 1]; "raw": unscaled
    train: "TrainConfig | None" = None


@dataclass(eq=False)
class CompareResult:
    rows: list = field(default_factory=list)      # dicts: system,kind,N,epoch,train_loss,test_5step
    final: dict = field(default_factory=dict)     # (system, kind, N) -> final test_5step
    failures: list = field(default_factory=list)  # (system, kind, N, message)


def compare_dictionaries(cfg: CompareConfig, out_dir=None) -> CompareResult:
    """Run the comparison grid; optionally write report.csv and per-system SVG.

    A failing cell (integration blow-up, solver error) is recorded in
    ``failures`` and the grid continues.
    """
    from koopman_lift.learn import TrainConfig, sgd_train

    train_cfg = cfg.train or TrainConfig()
    result = CompareResult()
    per_system_series: dict[str, list] = {}
    for i_sys, system in enumerate(cfg.systems):
        data = make_dataset(get_system(system), n_trajectories=cfg.n_trajectories,
                            steps=cfg.steps, dt=cfg.dt, substeps=cfg.substeps,
                            seed=cfg.seed + i_sys)
        snaps = build_snapshots(data, cfg.train_fraction, seed=cfg.seed + i_sys)
        m = snaps.X.shape[1]
        series = []
        for i_kind, kind in enumerate(cfg.kinds):
            for i_n, n_out in enumerate(cfg.n_outs):
                rng = np.random.default_rng(
                    cfg.seed + 1000 * i_sys + 100 * i_kind + 10 * i_n)
                try:
                    d = make_dictionary(kind, m, n_out, rng=rng, data=snaps.X_train,
                                        alpha_init=cfg.alpha_init,
                                        poly_domain=cfg.poly_domain)
                    model = sgd_train(d, snaps, train_cfg)
                except (ValueError, np.linalg.LinAlgError) as exc:
                    result.failures.append((system, kind, n_out, str(exc)))
                    continue
                meta = model.training_meta
                loss_trace = meta["loss_trace"]
                for epoch_f, test_err in meta["test_trace"]:
                    epoch = int(epoch_f)
                    result.rows.append({
                        "system": system, "kind": kind, "N": n_out,
                        "epoch": epoch, "train_loss": loss_trace[epoch - 1],
                        "test_5step": test_err,
                    })
                if meta["test_trace"]:
                    result.final[(system, kind, n_out)] = meta["test_trace"][-1][1]
                    xs = [e for e, _ in meta["test_trace"]]
                    ys = [v for _, v in meta["test_trace"]]
                    label = kind if len(cfg.n_outs) == 1 else f"{kind} N={n_out}"
                    series.append((label, xs, ys))
        per_system_series[system] = series
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_report_csv(result.rows, os.path.join(out_dir, "report.csv"))
        from koopman_lift.svg import line_plot_svg, save_svg
        for system, series in per_system_series.items():
            svg = line_plot_svg(series, title=f"{system}: five-step test error",
                                xlabel="epoch", ylabel="five-step MSE", log_y=True)
            save_svg(svg, os.path.join(out_dir, f"compare_{system}.svg"))
    return result


_REPORT_COLUMNS = ("system", "kind", "N", "epoch", "train_loss", "test_5step")


def write_report_csv(rows, path) -> None:
    """Fixed column order, floats at full round-trip precision."""
    def cell(v):
        if isinstance(v, float):
            return format(v, ".17g")
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(_REPORT_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(cell(row[c]) for c in _REPORT_COLUMNS) + "\n")


def read_report_csv(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = line.strip().split(",")
            row = dict(zip(header, vals))
            row["N"] = int(row["N"])
            row["epoch"] = int(row["epoch"])
            row["train_loss"] = float(row["train_loss"])
            row["test_5step"] = float(row["test_5step"])
            rows.append(row)
    return rows
