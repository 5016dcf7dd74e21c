#!/usr/bin/env python3
"""Dictionary-family comparison at the standard protocol.

Trains every (system, dictionary kind, N) cell with minibatch gradient
descent on a shared dataset per system and writes report.csv plus one
training-curve SVG per system.  The full grid takes a while; --quick cuts
it down to a desk-check.
"""
import argparse
import sys
import time

from koopman_lift.evaluate import CompareConfig, compare_dictionaries
from koopman_lift.learn import TrainConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out_dictionary_comparison")
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--n-outs", default="5,10,20",
                    help="comma-separated dictionary sizes")
    ap.add_argument("--systems", default="vanderpol,duffing,predprey,toggle")
    ap.add_argument("--kinds", default="augsill,sill,summedrbf,legendre,hermite")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true",
                    help="single size N=10, 50 epochs")
    args = ap.parse_args(argv)

    n_outs = tuple(int(v) for v in args.n_outs.split(","))
    epochs = args.epochs
    if args.quick:
        n_outs, epochs = (10,), min(epochs, 50)
    cfg = CompareConfig(
        systems=tuple(args.systems.split(",")),
        kinds=tuple(args.kinds.split(",")),
        n_outs=n_outs,
        seed=args.seed,
        train=TrainConfig(epochs=epochs),
    )
    t0 = time.perf_counter()
    result = compare_dictionaries(cfg, out_dir=args.out)
    print(f"{len(result.final)} cells in {time.perf_counter() - t0:.1f}s "
          f"-> {args.out}/report.csv")
    for key in sorted(result.final):
        print(f"  {key[0]:10s} {key[1]:10s} N={key[2]:<3d} "
              f"final test_5step = {result.final[key]:.4e}")
    for failure in result.failures:
        print(f"  FAILED {failure}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
