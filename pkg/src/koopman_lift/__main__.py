"""Module entry point: ``python -m koopman_lift <command> ...``.

The thread cap must reach the linear-algebra libraries before they start
their worker pools, which happens when numpy is first imported; peek at the
flag and set the environment before importing anything numerical.
"""

import os
import sys


def _peek_threads(argv):
    for i, token in enumerate(argv):
        if token == "--threads" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--threads="):
            return token.split("=", 1)[1]
    return None


_raw = _peek_threads(sys.argv[1:])
if _raw is not None and _raw.isdigit() and int(_raw) >= 1:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[_var] = _raw

from koopman_lift.cli import main  # noqa: E402  (env vars must come first)

if __name__ == "__main__":
    sys.exit(main())
