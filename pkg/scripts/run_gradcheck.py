#!/usr/bin/env python3
"""Check analytic gradients against central finite differences.

Runs the screened seed set on small random snippets and prints the worst
relative error per parameter group. Exits nonzero if any group exceeds the
tolerance.
"""

import argparse
import sys
import time

from viewsynth import gradcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=len(gradcheck.DEFAULT_SEEDS))
    ap.add_argument("--tolerance", type=float, default=1e-4)
    args = ap.parse_args()

    seeds = gradcheck.DEFAULT_SEEDS[: args.instances]
    t0 = time.perf_counter()
    worst = gradcheck.run(seeds)
    elapsed = time.perf_counter() - t0

    ok = True
    for name in sorted(worst):
        status = "ok" if worst[name] <= args.tolerance else "FAIL"
        ok = ok and worst[name] <= args.tolerance
        print(f"{name:>16s} {worst[name]:.3e} {status}")
    print(f"{len(seeds)} instances in {elapsed:.1f}s")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
