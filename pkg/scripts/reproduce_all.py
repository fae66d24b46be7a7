"""Run every pre-baked sweep and write one CSV per figure.

    python3 scripts/reproduce_all.py --out out/figures [--paths N --frames N]
"""
import argparse
import sys
import time

from ehstore import cli
from ehstore.recipes import RECIPES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/figures")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--frames", type=int)
    args = ap.parse_args()
    extra = ["--out", args.out, "--seed", str(args.seed)]
    if args.paths:
        extra += ["--paths", str(args.paths)]
    if args.frames:
        extra += ["--frames", str(args.frames)]
    for fig in sorted(RECIPES):
        t0 = time.time()
        code = cli.main(["reproduce", fig] + extra)
        print(f"{fig}: exit {code}, {time.time() - t0:.0f} s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
