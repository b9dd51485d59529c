"""Median attention entropy, contextual layer vs feed-forward baseline, on the key-frame task.

    python scripts/run_focus.py --seeds 5
"""

import argparse

from tcattn.experiments import run_focus


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    rows = run_focus(range(args.seeds))
    print(f"{'seed':>4} {'H_tcl':>8} {'H_ffatt':>8} {'det_tcl':>8} {'det_ffatt':>9}")
    for r in rows:
        print(f"{r['seed']:>4} {r['tcl']:8.4f} {r['ffatt']:8.4f} {r['tcl_detection']:8.3f} {r['ffatt_detection']:9.3f}")
    wins = sum(r["tcl"] < r["ffatt"] for r in rows)
    print(f"contextual layer sharper in {wins}/{len(rows)} seeds")


if __name__ == "__main__":
    main()
