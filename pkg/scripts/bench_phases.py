"""Per-phase timing over worker counts and precisions on a synthetic radial feeder.

Builds a random tree feeder of the requested size, then runs the ``bench``
subcommand on it. With one CPU the worker sweep shows overhead rather than speedup.
"""
import argparse
import os
import sys
import tempfile

import numpy as np

from lindistadmm.cli import main as cli_main
from lindistadmm.synthetic import random_parents, tree_feeder_text


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--buses", type=int, default=120)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--workers-list", default="1,2,4")
    ap.add_argument("--output", default="bench.csv")
    args = ap.parse_args()

    text = tree_feeder_text(random_parents(args.buses, np.random.default_rng(args.seed)), seed=args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "synthetic.feeder")
        with open(path, "w") as fh:
            fh.write(text)
        code = cli_main(["bench", "--input", path, "--workers-list", args.workers_list,
                         "--precision-list", "double,single", "--iters", str(args.iters),
                         "--deterministic", "--output", args.output])
    print(open(args.output).read())
    sys.exit(code)


if __name__ == "__main__":
    main()
