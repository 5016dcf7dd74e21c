#!/usr/bin/env python3
"""Full numerical certification of the closure results.

Thin wrapper over the verify-closure subcommand at the standard protocol;
any flags given are passed straight through.  Exits 0 only when every
convergence sweep and every expectation bound passes its gate.
"""
import sys

from koopman_lift.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify-closure", *sys.argv[1:]]))
