#!/usr/bin/env python3
"""Run the bundled experiments and write their artifacts.

By default every experiment runs at its bundled seed and writes logs,
summaries, heatmaps, curves, and a verdict JSON under --out-dir. Exits
nonzero if any verdict check fails.
"""

import argparse
import json
import sys
import time

from arena import experiments


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--experiments", nargs="+",
                        default=list(experiments.EXPERIMENTS),
                        choices=experiments.EXPERIMENTS, metavar="NAME")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the bundled seed for every "
                             "experiment")
    parser.add_argument("--out-dir", default="arena-out")
    parser.add_argument("--json", action="store_true",
                        help="print full verdicts instead of one-liners")
    args = parser.parse_args(argv)

    failed = []
    for name in args.experiments:
        start = time.time()
        verdict = experiments.simulate(name, args.seed, args.out_dir)
        elapsed = time.time() - start
        checks = verdict["checks"]
        ok = all(checks.values())
        if not ok:
            failed.append(name)
        if args.json:
            print(json.dumps(verdict, indent=2, sort_keys=True))
        else:
            status = "ok" if ok else "FAIL " + ", ".join(
                key for key, value in checks.items() if not value)
            print(f"{name:10s} seed={verdict['seed']:<3d} "
                  f"{elapsed:5.1f}s  {status}")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
