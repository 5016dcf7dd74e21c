"""Command-line entry point tying simulation, training, evaluation, and
closure verification into reproducible runs.

Every run resolves its settings from three layers (command defaults, then an
optional JSON config file, then explicit flags), writes the result to
``config.resolved.json`` in the output directory, and seeds all randomness
from a single integer.  Outputs carry no timestamps; wall-clock readings go
to the console only, so a re-run with the same resolved config and
``--threads 1`` reproduces every artifact byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 2."""


def apply_thread_limit(threads: int) -> None:
    """Pin BLAS/OpenMP pools; effective for linear algebra when set before
    the numerical libraries spin up their pools (the module entry point does
    this before importing them)."""
    if threads < 1:
        raise ConfigError("--threads must be a positive integer")
    for var in THREAD_ENV_VARS:
        os.environ[var] = str(threads)


def _seed_from_env() -> int | None:
    raw = os.environ.get("KOOPMAN_LIFT_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"KOOPMAN_LIFT_SEED must be an integer, got {raw!r}")


def resolve_config(command: str, defaults: dict, args: argparse.Namespace) -> dict:
    """Layer defaults, config file, then explicit flags; resolve the seed.

    Flags left at None never override; unknown keys in the config file are a
    configuration error so typos cannot silently fall back to defaults.  A
    ``config.resolved.json`` written by an earlier run is itself a valid
    config file, so every run is repeatable from its own record.
    """
    resolved = dict(defaults)
    resolved["seed"] = None
    resolved["out"] = None
    file_cfg = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(resolved) - {"command", "threads"})
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        if file_cfg.get("command", command) != command:
            raise ConfigError(
                f"config file was written for {file_cfg['command']!r}, not {command!r}")
        resolved.update({k: v for k, v in file_cfg.items()
                         if k not in ("command", "threads")})
    for key in defaults:
        flag_val = getattr(args, key.replace("-", "_"), None)
        if flag_val is not None:
            resolved[key] = flag_val
    if args.seed is not None:
        resolved["seed"] = args.seed
    if resolved["seed"] is None:
        resolved["seed"] = _seed_from_env()
    if resolved["seed"] is None:
        resolved["seed"] = 0
    if args.out is not None:
        resolved["out"] = args.out
    if resolved["out"] is None:
        resolved["out"] = "out_" + command.replace("-", "_")
    if args.threads is not None:
        resolved["threads"] = args.threads
    else:
        try:
            resolved["threads"] = int(file_cfg.get("threads", 1))
        except (TypeError, ValueError):
            raise ConfigError(f"threads must be an integer, got {file_cfg['threads']!r}")
    resolved["command"] = command
    return resolved


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(resolved: dict) -> str:
    out = resolved["out"]
    os.makedirs(out, exist_ok=True)
    _write_json(resolved, os.path.join(out, "config.resolved.json"))
    return out


def _fmt17(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------- simulate

SIMULATE_DEFAULTS = {
    "system": "vanderpol",
    "trajectories": 120,
    "steps": 50,
    "dt": 0.1,
    "substeps": 1,
    "train_fraction": 0.8,
    "blowup": 1e6,
}


def cmd_simulate(resolved: dict) -> int:
    from koopman_lift.simulate import make_dataset, save_dataset, split_tags
    from koopman_lift.systems import get_system

    try:
        system = get_system(resolved["system"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    if resolved["trajectories"] < 1 or resolved["steps"] < 1:
        raise ConfigError("trajectories and steps must be positive")
    out = _prepare_out(resolved)
    t0 = time.perf_counter()
    trajectories = make_dataset(
        system,
        n_trajectories=resolved["trajectories"],
        steps=resolved["steps"],
        dt=resolved["dt"],
        substeps=resolved["substeps"],
        seed=resolved["seed"],
        blowup=resolved["blowup"],
    )
    tags = split_tags(len(trajectories), resolved["train_fraction"], resolved["seed"])
    manifest = save_dataset(
        trajectories, out, split=tags,
        meta={"dt": resolved["dt"], "substeps": resolved["substeps"],
              "seed": resolved["seed"], "train_fraction": resolved["train_fraction"]},
    )
    n_trunc = sum(1 for t in trajectories if t.truncated)
    print(f"simulate: {len(trajectories)} trajectories ({n_trunc} truncated) "
          f"in {time.perf_counter() - t0:.2f}s -> {manifest}")
    return EXIT_OK


# ------------------------------------------------------------------- train

TRAIN_DEFAULTS = {
    "data": None,
    "method": "sgd",
    "dict": "augsill",
    "N": 20,
    "epochs": 1000,
    "batch_size": 32,
    "lr": 1e-2,
    "ridge": 1e-8,
    "alpha_floor": 0.05,
    "grad_clip": 10.0,
    "log_every": 25,
    "alpha_init": 1.0,
    "pool_size": 200,
    "alpha_lo": 0.5,
    "alpha_hi": 5.0,
}

TRAIN_METHODS = ("dmd", "edmd", "sgd", "mp")


def _write_trace(path, rows) -> None:
    # rows: (epoch, train_loss, test_5step)
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,test_5step\n")
        for epoch, loss, test in rows:
            fh.write(f"{int(epoch)},{_fmt17(loss)},{_fmt17(test)}\n")


def cmd_train(resolved: dict) -> int:
    import numpy as np

    from koopman_lift.evaluate import five_step_error
    from koopman_lift.learn import (
        TrainConfig, dmd_fit, edmd_fit, matching_pursuit_fit, save_model, sgd_train)
    from koopman_lift.lifting import make_dictionary
    from koopman_lift.simulate import snapshots_from_saved

    if resolved["data"] is None:
        raise ConfigError("train needs --data pointing at a dataset manifest or directory")
    if resolved["method"] not in TRAIN_METHODS:
        raise ConfigError(f"unknown method {resolved['method']!r}; valid: {TRAIN_METHODS}")
    manifest = resolved["data"]
    if os.path.isdir(manifest):
        manifest = os.path.join(manifest, "manifest.json")
    if not os.path.exists(manifest):
        raise ConfigError(f"dataset manifest not found: {manifest}")
    out = _prepare_out(resolved)
    snaps = snapshots_from_saved(manifest)
    m = snaps.X.shape[1]
    method = resolved["method"]
    rng = np.random.default_rng(resolved["seed"])
    grad_clip = resolved["grad_clip"]
    if grad_clip is not None and grad_clip <= 0:
        grad_clip = None  # zero disables clipping

    t0 = time.perf_counter()
    try:
        if method == "dmd":
            model = dmd_fit(snaps, ridge=resolved["ridge"])
        elif method == "mp":
            model = matching_pursuit_fit(
                resolved["dict"], snaps, resolved["N"],
                pool_size=resolved["pool_size"],
                alpha_range=(resolved["alpha_lo"], resolved["alpha_hi"]),
                ridge=resolved["ridge"], seed=resolved["seed"])
        else:
            d = make_dictionary(resolved["dict"], m, resolved["N"], rng=rng,
                                data=snaps.X_train, alpha_init=resolved["alpha_init"])
            if method == "edmd":
                model = edmd_fit(d, snaps, ridge=resolved["ridge"])
            else:
                cfg = TrainConfig(
                    epochs=resolved["epochs"], batch_size=resolved["batch_size"],
                    learning_rate=resolved["lr"], seed=resolved["seed"],
                    alpha_floor=resolved["alpha_floor"], grad_clip=grad_clip,
                    log_every=resolved["log_every"])
                model = sgd_train(d, snaps, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc))
    fit_seconds = time.perf_counter() - t0

    meta = model.training_meta
    has_test = len(snaps.test_trajectories) > 0
    final_test = float("nan")
    if has_test:
        final_test = five_step_error(model, snaps.test_trajectories).mean_5step
    if method == "sgd":
        loss_trace = meta["loss_trace"]
        test_by_epoch = {int(e): v for e, v in meta.get("test_trace", [])}
        epochs_logged = sorted(test_by_epoch) or [len(loss_trace)]
        rows = [(e, loss_trace[e - 1], test_by_epoch.get(e, float("nan")))
                for e in epochs_logged]
    else:
        rows = [(0, meta["train_loss"], final_test)]
    _write_trace(os.path.join(out, "trace.csv"), rows)
    save_model(model, os.path.join(out, "model.json"))
    train_loss = meta["train_loss"] if method != "sgd" else meta["loss_trace"][-1]
    print(f"train[{method}]: N={model.n_out} train_loss={train_loss:.6g} "
          f"test_5step={final_test:.6g} fit={fit_seconds:.2f}s -> {out}/model.json")
    if meta.get("diverged"):
        print("train: run diverged and was restored from the last checkpoint")
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

EVALUATE_DEFAULTS = {
    "model": None,
    "data": None,
    "horizon": 5,
}


def cmd_evaluate(resolved: dict) -> int:
    from koopman_lift.evaluate import five_step_error
    from koopman_lift.learn import load_model
    from koopman_lift.simulate import snapshots_from_saved

    if resolved["model"] is None or resolved["data"] is None:
        raise ConfigError("evaluate needs --model and --data")
    if not os.path.exists(resolved["model"]):
        raise ConfigError(f"model file not found: {resolved['model']}")
    manifest = resolved["data"]
    if os.path.isdir(manifest):
        manifest = os.path.join(manifest, "manifest.json")
    if not os.path.exists(manifest):
        raise ConfigError(f"dataset manifest not found: {manifest}")
    out = _prepare_out(resolved)
    model = load_model(resolved["model"])
    snaps = snapshots_from_saved(manifest)
    trajectories = snaps.test_trajectories
    split = "test"
    if not trajectories:
        trajectories = snaps.train_trajectories
        split = "train"
    t0 = time.perf_counter()
    try:
        rep = five_step_error(model, trajectories, horizon=resolved["horizon"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    report = {
        "split": split,
        "horizon": resolved["horizon"],
        "per_step": [float(v) for v in rep.per_step],
        "mean_5step": float(rep.mean_5step),
        "mean_all_steps": float(rep.mean_all_steps),
        "n_windows": int(rep.n_windows),
        "n_diverged": int(rep.n_diverged),
    }
    _write_json(report, os.path.join(out, "eval.json"))
    print(f"evaluate[{split}]: mean_{resolved['horizon']}step={rep.mean_5step:.6g} "
          f"windows={rep.n_windows} diverged={rep.n_diverged} "
          f"in {time.perf_counter() - t0:.2f}s -> {out}/eval.json")
    return EXIT_OK


# ----------------------------------------------------------------- compare

COMPARE_DEFAULTS = {
    "systems": "vanderpol,duffing,predprey,toggle",
    "kinds": "augsill,sill,summedrbf,legendre,hermite",
    "Ns": "5,10,20",
    "trajectories": 20,
    "steps": 50,
    "dt": 0.05,
    "substeps": 2,
    "train_fraction": 0.8,
    "epochs": 200,
    "batch_size": 32,
    "lr": 1e-2,
    "log_every": 25,
    "alpha_init": 1.0,
    "quick": False,
}


def _csv_list(raw, cast=str) -> tuple:
    if isinstance(raw, (list, tuple)):
        return tuple(cast(v) for v in raw)
    try:
        return tuple(cast(v.strip()) for v in str(raw).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse list value {raw!r}")


def cmd_compare(resolved: dict) -> int:
    from koopman_lift.evaluate import CompareConfig, compare_dictionaries
    from koopman_lift.learn import TrainConfig

    systems = _csv_list(resolved["systems"])
    kinds = _csv_list(resolved["kinds"])
    n_outs = _csv_list(resolved["Ns"], int)
    epochs = resolved["epochs"]
    log_every = resolved["log_every"]
    if resolved["quick"]:
        # desk-scale sanity pass: one lifted dimension, short training
        n_outs = (10,)
        epochs = min(epochs, 50)
        log_every = min(log_every, 10)
    if not systems or not kinds or not n_outs:
        raise ConfigError("systems, kinds, and Ns must be non-empty")
    out = _prepare_out(resolved)
    cfg = CompareConfig(
        systems=systems, kinds=kinds, n_outs=n_outs,
        n_trajectories=resolved["trajectories"], steps=resolved["steps"],
        dt=resolved["dt"], substeps=resolved["substeps"],
        train_fraction=resolved["train_fraction"], seed=resolved["seed"],
        alpha_init=resolved["alpha_init"],
        train=TrainConfig(epochs=epochs, batch_size=resolved["batch_size"],
                          learning_rate=resolved["lr"], seed=resolved["seed"],
                          log_every=log_every),
    )
    t0 = time.perf_counter()
    result = compare_dictionaries(cfg, out_dir=out)
    print(f"compare: {len(result.final)} cells, {len(result.failures)} failures "
          f"in {time.perf_counter() - t0:.2f}s -> {out}/report.csv")
    for system, kind, n_out, message in result.failures:
        print(f"compare: failed cell {system}/{kind}/N={n_out}: {message}")
    if not result.final:
        print("compare: every cell failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------- verify-closure

VERIFY_DEFAULTS = {
    "case": "all",
    "m": 2,
    "n_logistic": 2,
    "n_rbf": 2,
    "n_configs": 50,
    "sample_count": 20,
    "margin": 0.1,
    "box_radius": 1.0,
    "alpha_grid": "2,4,8,16,32,64",
    "slope_threshold": 0.05,
    "monotone_rel_tol": 0.10,
    "mc_samples": 100000,
    "bound_samples": 10000,
}


def _sweep_aggregates(sweep_obj: dict):
    import statistics

    alphas = sweep_obj["alpha_grid"]
    columns = list(zip(*sweep_obj["max_errors"]))
    worst = [max(float(v) for v in col) for col in columns]
    median = [statistics.median(float(v) for v in col) for col in columns]
    return alphas, worst, median


def cmd_verify_closure(resolved: dict) -> int:
    from koopman_lift.closure import CASE_KINDS, ClosureConfig, closure_report_obj
    from koopman_lift.svg import line_plot_svg, save_svg

    case = resolved["case"]
    if case != "all" and case not in CASE_KINDS:
        raise ConfigError(f"unknown case {case!r}; valid: all, {', '.join(CASE_KINDS)}")
    try:
        cfg = ClosureConfig(
            m=resolved["m"], n_logistic=resolved["n_logistic"],
            n_rbf=resolved["n_rbf"],
            alpha_grid=_csv_list(resolved["alpha_grid"], float),
            sample_count=resolved["sample_count"], n_configs=resolved["n_configs"],
            margin=resolved["margin"], box_radius=resolved["box_radius"],
            seed=resolved["seed"], slope_threshold=resolved["slope_threshold"],
            monotone_rel_tol=resolved["monotone_rel_tol"],
            mc_samples=resolved["mc_samples"], bound_samples=resolved["bound_samples"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    out = _prepare_out(resolved)
    cases = CASE_KINDS if case == "all" else (case,)
    t0 = time.perf_counter()
    report = closure_report_obj(cfg, cases=cases)
    _write_json(report, os.path.join(out, "closure_report.json"))
    sweep_objs = list(report["product_sweeps"].values()) + list(report["lie_sweeps"].values())
    for obj in sweep_objs:
        name = obj["case"]
        alphas, worst, median = _sweep_aggregates(obj)
        with open(os.path.join(out, f"sweep_{name}.csv"), "w") as fh:
            fh.write("alpha,max_error\n")
            for a, e in zip(alphas, worst):
                fh.write(f"{_fmt17(a)},{_fmt17(e)}\n")
        svg = line_plot_svg(
            [("worst config", alphas, worst), ("median config", alphas, median)],
            title=f"{name}: error vs steepness", xlabel="steepness",
            ylabel="max abs error", log_y=True)
        save_svg(svg, os.path.join(out, f"sweep_{name}.svg"))
    passed = report["all_passed"]
    print(f"verify-closure: all_passed={passed} "
          f"in {time.perf_counter() - t0:.2f}s -> {out}/closure_report.json")
    if not passed:
        print("verify-closure: one or more certification checks failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopman-lift",
        description="Koopman operator learning with heterogeneous dictionaries "
                    "and numerical closure certification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--out", help="output directory (default out_<command>)")
        p.add_argument("--seed", type=int,
                       help="global seed; falls back to KOOPMAN_LIFT_SEED, then 0")
        p.add_argument("--threads", type=int,
                       help="linear-algebra thread cap; 1 (default) is bit-reproducible")

    p = sub.add_parser("simulate", help="integrate benchmark trajectories to CSV")
    p.add_argument("--system", help="benchmark system name")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--substeps", type=int)
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--blowup", type=float)
    add_common(p)

    p = sub.add_parser("train", help="fit a lifted one-step model on a dataset")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.add_argument("--method", choices=TRAIN_METHODS)
    p.add_argument("--dict", help="dictionary kind (augsill, sill, summedrbf, "
                                  "legendre, hermite)")
    p.add_argument("--N", type=int, help="lifted output dimension")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--ridge", type=float)
    p.add_argument("--alpha-floor", type=float, dest="alpha_floor")
    p.add_argument("--grad-clip", type=float, dest="grad_clip",
                   help="gradient norm ceiling; 0 disables clipping")
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--alpha-init", type=float, dest="alpha_init")
    p.add_argument("--pool-size", type=int, dest="pool_size")
    p.add_argument("--alpha-lo", type=float, dest="alpha_lo")
    p.add_argument("--alpha-hi", type=float, dest="alpha_hi")
    add_common(p)

    p = sub.add_parser("evaluate", help="multi-step forecast error of a saved model")
    p.add_argument("--model", help="model.json from train")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.add_argument("--horizon", type=int)
    add_common(p)

    p = sub.add_parser("compare", help="dictionary-family comparison grid")
    p.add_argument("--systems", help="comma-separated system names")
    p.add_argument("--kinds", help="comma-separated dictionary kinds")
    p.add_argument("--Ns", help="comma-separated lifted dimensions")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--substeps", type=int)
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--alpha-init", type=float, dest="alpha_init")
    p.add_argument("--quick", action="store_const", const=True, default=None,
                   help="reduced grid for a fast end-to-end pass")
    add_common(p)

    p = sub.add_parser("verify-closure",
                       help="numerical certification of approximate closure")
    p.add_argument("--case", help="product case to sweep, or 'all'")
    p.add_argument("--m", type=int, help="state dimension")
    p.add_argument("--n-logistic", type=int, dest="n_logistic")
    p.add_argument("--n-rbf", type=int, dest="n_rbf")
    p.add_argument("--n-configs", type=int, dest="n_configs")
    p.add_argument("--sample-count", type=int, dest="sample_count")
    p.add_argument("--margin", type=float)
    p.add_argument("--box-radius", type=float, dest="box_radius")
    p.add_argument("--alpha-grid", dest="alpha_grid",
                   help="comma-separated steepness grid")
    p.add_argument("--slope-threshold", type=float, dest="slope_threshold")
    p.add_argument("--monotone-rel-tol", type=float, dest="monotone_rel_tol")
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--bound-samples", type=int, dest="bound_samples")
    add_common(p)

    return parser


COMMANDS = {
    "simulate": (SIMULATE_DEFAULTS, cmd_simulate),
    "train": (TRAIN_DEFAULTS, cmd_train),
    "evaluate": (EVALUATE_DEFAULTS, cmd_evaluate),
    "compare": (COMPARE_DEFAULTS, cmd_compare),
    "verify-closure": (VERIFY_DEFAULTS, cmd_verify_closure),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults, runner = COMMANDS[args.command]
    try:
        resolved = resolve_config(args.command, defaults, args)
        apply_thread_limit(resolved["threads"])
        return runner(resolved)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # numerical failures: solver, integration, overflow
        import numpy as np

        numeric = (np.linalg.LinAlgError, FloatingPointError, ArithmeticError,
                   RuntimeError)
        if isinstance(exc, numeric):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        raise


if __name__ == "__main__":
    sys.exit(main())
