"""Fill a 60-frame hole in multi-channel sine signals; compare with hold-last-frame.

    python scripts/run_interpolation.py --seed 0
"""

import argparse
import json

from tcattn.experiments import run_interpolation


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    r = run_interpolation(args.seed)
    print(f"{'frame':>6} {'trained':>10} {'hold_last':>10} {'untrained':>10}")
    for k, row in r["horizons"].items():
        print(f"{k:>6} {row['trained']:10.5f} {row['hold_last']:10.5f} {row['untrained']:10.5f}")
    print(json.dumps({k: v for k, v in r.items() if k != "horizons"}, indent=1))


if __name__ == "__main__":
    main()
