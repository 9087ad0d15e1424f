"""Fit and freeze the acceptance constants.

Run once; the output is committed as package data and read by the
acceptance checks.  Uses a seed disjoint from the acceptance seed.

    python3 scripts/fit_constants.py [--seed 7] [--out src/hypstab/fitted_constants.json]
"""
import argparse
from pathlib import Path

from hypstab.fitting import FIT_SEED, fit_all, write

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=FIT_SEED)
    ap.add_argument("--out", default=str(ROOT / "src" / "hypstab" / "fitted_constants.json"))
    ap.add_argument("--quick", action="store_true", help="smaller samples (smoke test only)")
    args = ap.parse_args()
    data = fit_all(args.seed, quick=args.quick, echo=print)
    write(args.out, data)
    print("wrote", args.out)


if __name__ == "__main__":
    main()
