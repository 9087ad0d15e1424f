"""Run the acceptance criteria and print one pass/fail line each.

    python3 scripts/run_acceptance.py [--seed N] [--only 1 4 9] [--json report.json]
"""
import argparse
import sys

from hypstab.acceptance import DEFAULT_SEED, run_all
from hypstab.io import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--only", type=int, nargs="*")
    ap.add_argument("--json")
    args = ap.parse_args()
    results = run_all(seed=args.seed, only=args.only)
    if args.json:
        write_json(args.json, {"seed": args.seed, "criteria": [r.to_json() for r in results]})
    failed = [r.cid for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
