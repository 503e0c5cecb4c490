"""Measurement error across claimed rates and response overhead handling.

Usage: python3 scripts/accuracy_grid.py [--seeds N]
"""

import argparse
import statistics

from backhaul.cli import load_bundled
from backhaul.netsim import run_scenario

GRID = ["honest_250", "honest_500", "overhead_500", "overhead_750", "overhead_1000"]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print(f"{'scenario':<16} {'claim':>8} {'measured':>10} {'error %':>8}")
    for name in GRID:
        cfg = load_bundled(name)
        claim = cfg.protocol.theta_claimed_bps
        errs = []
        for seed in range(args.seeds):
            res = run_scenario(cfg, seed=seed, collect_trace=False)
            if res.terminated:
                errs.append((claim - res.measured_bps) / claim * 100)
        err = statistics.fmean(errs)
        measured = claim * (1 - err / 100)
        print(
            f"{name:<16} {claim / 1e6:>8.0f} {measured / 1e6:>10.2f} {err:>8.2f}"
        )


if __name__ == "__main__":
    main()
