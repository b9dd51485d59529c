"""Key-frame detection on the synthetic prototype task.

    python scripts/run_keyframe.py --seed 0 --attention tcl
"""

import argparse
import json

from tcattn.experiments import run_keyframe


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attention", choices=["tcl", "ffatt"], default="tcl")
    args = p.parse_args()
    print(json.dumps(run_keyframe(args.seed, args.attention), indent=1))


if __name__ == "__main__":
    main()
