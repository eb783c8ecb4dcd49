"""Run acceptance criteria and print one PASS/FAIL line each.

    python scripts/run_acceptance.py            # all
    python scripts/run_acceptance.py 1 2 8      # a subset
"""
import argparse
import json
import sys

from asympheat import checks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default all)")
    ap.add_argument("--json", help="write the full results here")
    args = ap.parse_args()
    results = checks.run_all(args.criteria or None, echo=print)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.to_dict() for r in results], fh, indent=2, default=float)
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()
