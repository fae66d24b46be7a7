"""Analytic vs simulation checks for each YAML config given (default: configs/*.yaml)."""
import glob
import sys

from ehstore import cli


def main(paths):
    paths = paths or sorted(glob.glob("configs/*.yaml"))
    worst = 0
    for p in paths:
        print(f"== {p}")
        worst = max(worst, cli.main(["validate", "--config", p]))
    return worst


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
