#!/usr/bin/env python3
"""Write the bundled demo scenario(s) to JSON files."""

import argparse
import json
import os

from omaslab.demo import demo_scenario_dict


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="scenarios", help="output directory")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--variant", choices=("practical", "asymptotic", "both"),
                    default="both")
    args = ap.parse_args()

    variants = ["practical", "asymptotic"] if args.variant == "both" else [args.variant]
    os.makedirs(args.out, exist_ok=True)
    for v in variants:
        path = os.path.join(args.out, f"demo_{v}.json")
        with open(path, "w") as fh:
            json.dump(demo_scenario_dict(v, seed=args.seed), fh, indent=1)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
