#!/usr/bin/env python3
"""Head-to-head: full matching pursuit against gradient descent.

Both methods build an augmented-logistic dictionary of the same size on the
same data; the five-step test error and the wall-clock of each phase are
reported per system.  Timing is hardware-dependent and reported, not judged.
"""
import argparse
import csv
import os
import sys
import time

import numpy as np

from koopman_lift.evaluate import five_step_error
from koopman_lift.learn import TrainConfig, matching_pursuit_fit, sgd_train
from koopman_lift.lifting import make_dictionary
from koopman_lift.simulate import build_snapshots, make_dataset
from koopman_lift.systems import get_system


def run_cell(system_name, seed, n_out, epochs, pool_size):
    data = make_dataset(get_system(system_name), n_trajectories=20, steps=50,
                        dt=0.05, substeps=2, seed=seed)
    snaps = build_snapshots(data, 0.8, seed=seed)
    m = snaps.X.shape[1]

    t0 = time.perf_counter()
    mp_model = matching_pursuit_fit("augsill", snaps, n_out,
                                    pool_size=pool_size, seed=0)
    mp_seconds = time.perf_counter() - t0
    mp_err = five_step_error(mp_model, snaps.test_trajectories).mean_5step

    d = make_dictionary("augsill", m, n_out,
                        rng=np.random.default_rng(1000 * seed),
                        data=snaps.X_train)
    t0 = time.perf_counter()
    sgd_model = sgd_train(d, snaps, TrainConfig(epochs=epochs))
    sgd_seconds = time.perf_counter() - t0
    sgd_err = five_step_error(sgd_model, snaps.test_trajectories).mean_5step
    return mp_err, mp_seconds, sgd_err, sgd_seconds


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out_pursuit_vs_sgd")
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--pool-size", type=int, default=200)
    ap.add_argument("--systems", default="vanderpol,duffing,predprey,toggle")
    args = ap.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for i, system in enumerate(args.systems.split(",")):
        mp_err, mp_s, sgd_err, sgd_s = run_cell(
            system, i, args.N, args.epochs, args.pool_size)
        ratio = max(mp_err, sgd_err) / min(mp_err, sgd_err)
        rows.append({"system": system, "mp_5step": mp_err,
                     "mp_seconds": mp_s, "sgd_5step": sgd_err,
                     "sgd_seconds": sgd_s, "error_ratio": ratio})
        print(f"{system:10s} pursuit {mp_err:.4e} in {mp_s:6.1f}s | "
              f"sgd {sgd_err:.4e} in {sgd_s:6.1f}s | ratio {ratio:.2f}")

    path = os.path.join(args.out, "pursuit_vs_sgd.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format(v, ".17g") if isinstance(v, float) else v
                             for k, v in row.items()})
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
