"""Climb the rate ladder against paths with competing traffic.

Usage: python3 scripts/ladder_demo.py [--seed N]
"""

import argparse

from backhaul.cli import load_bundled
from backhaul.ladder import run_ladder
from backhaul.report import render_ladder

CASES = ["cross_traffic_220", "cross_traffic_140", "cross_traffic_90"]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    for name in CASES:
        cfg = load_bundled(name)
        flow = cfg.topology.cross_flows[0]
        avail = cfg.topology.backhaul_rate_bps - flow.rate_bps * (
            1 - flow.yield_fraction
        )
        print(f"== {name}: {avail / 1e6:.0f} Mbit/s actually available ==")
        print(render_ladder(run_ladder(cfg, seed=args.seed)))
        print()


if __name__ == "__main__":
    main()
