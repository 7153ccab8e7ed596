#!/usr/bin/env python3
"""Reproduce the per-rule density thresholds by bisection.

Default settings match the headline configuration (h=31, probes at
delta=1e-5, endpoint confirmation at delta=1e-6, tol=0.005); expect roughly
3.54 / 3.52 / 3.44 / 3.43 for maxdiff-maxsum / maxdiff-minsum / maxratio /
maxmax, in that order.  Runtime a few minutes.

Usage: python scripts/reproduce_thresholds.py [--fast] [--out results.json]
"""

import argparse
import json
import sys
import time

from satlab.ode import OdeConfig
from satlab.threshold import compare_rules, format_rule_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fast", action="store_true",
                    help="coarse probes only (delta=1e-4, tol=0.02)")
    ap.add_argument("--out", default=None, help="write JSON results here")
    args = ap.parse_args()

    if args.fast:
        cfg = OdeConfig(delta=1e-4)
        kw = dict(tol=0.02, probe_delta=1e-4)
    else:
        cfg = OdeConfig(delta=1e-6)
        kw = dict(tol=0.005, probe_delta=1e-5)

    t0 = time.time()
    results = compare_rules(cfg, lo=3.0, hi=4.0, **kw)
    print(format_rule_table(results))
    print(f"({time.time() - t0:.0f}s)", file=sys.stderr)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([r.to_json_dict() for r in results], fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
