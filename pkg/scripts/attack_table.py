"""Tabulate verdicts under each bundled attack scenario.

Usage: python3 scripts/attack_table.py [--seeds N]
"""

import argparse
import statistics

from backhaul.cli import load_bundled
from backhaul.netsim import run_scenario

SCENARIOS = [
    "honest_250",
    "rushing_250",
    "withholding_250",
    "withholding_noisy_250",
]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print(f"{'scenario':<24} {'ok':>5} {'measured Mbit/s':>16} {'guaranteed':>12}")
    for name in SCENARIOS:
        cfg = load_bundled(name)
        measured, guaranteed, ok = [], [], 0
        for seed in range(args.seeds):
            res = run_scenario(cfg, seed=seed, collect_trace=False)
            if res.terminated:
                ok += 1
                measured.append(res.measured_bps)
                guaranteed.append(res.guaranteed_bps)
        m = statistics.fmean(measured) / 1e6 if measured else float("nan")
        g = statistics.fmean(guaranteed) / 1e6 if guaranteed else float("nan")
        print(f"{name:<24} {ok:>2}/{args.seeds:>2} {m:>16.2f} {g:>12.2f}")
    claim = load_bundled("honest_250").protocol.theta_claimed_bps / 1e6
    print(f"\nclaim is {claim:.0f} Mbit/s; guaranteed must never exceed it")


if __name__ == "__main__":
    main()
