"""Nine-class motif classification with masked, variable-length sequences.

    python scripts/run_classification.py --seed 0
"""

import argparse
import json

from tcattn.experiments import run_classification


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    r = run_classification(args.seed)
    print(json.dumps({k: v for k, v in r.items() if k != "confusion"}, indent=1))
    print("confusion (rows true, columns predicted):")
    for row in r["confusion"]:
        print(" ".join(f"{v:3d}" for v in row))


if __name__ == "__main__":
    main()
