"""Available-bandwidth search by stepping the claimed rate.

A single challenge verifies one claim; it does not say what the path
could actually carry. This module walks a ladder of claims from a floor
upward in fixed steps, running one full challenge per rung with fresh
randomness, and reports the measurement of the last rung that completed
cleanly. A rung fails when the verifier produces no value or when more
than half of the challengers gave up waiting; the climb stops at the
first failure, since every higher rung needs strictly more capacity.

The estimate inherits the single-run error bars, so callers wanting a
tight figure should size the step accordingly instead of rerunning.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from typing import Mapping

from .config import ConfigError, ScenarioConfig
from .netsim import SimResult, run_scenario


@dataclass(frozen=True)
class RungResult:
    theta_bps: float
    seed: int
    completed: bool
    measured_bps: float | None
    guaranteed_bps: float | None
    delta_ns: int | None
    cnt: int | None
    timed_out: int
    drops: Mapping[str, int]


@dataclass(frozen=True)
class LadderResult:
    rungs: tuple[RungResult, ...]
    estimate_bps: float | None
    below_floor: bool
    saturated: bool

    @property
    def last_good(self) -> RungResult | None:
        good = [r for r in self.rungs if r.completed]
        return good[-1] if good else None


def rung_thetas(start_bps: float, step_bps: float, max_bps: float) -> list[float]:
    """The claim grid: start, start+step, ... up to and including max."""
    out = []
    i = 0
    while True:
        theta = start_bps + i * step_bps
        if theta > max_bps * (1 + 1e-9):
            return out
        out.append(theta)
        i += 1


def rung_failed(n: int, timed_out: int, produced_output: bool) -> bool:
    """No verifier value, or a majority of challengers gave up."""
    return not produced_output or timed_out * 2 > n


def run_ladder(cfg: ScenarioConfig, seed: int) -> LadderResult:
    """Climb the configured ladder; stop at the first rung that fails."""
    if cfg.ladder is None:
        raise ConfigError("scenario has no ladder section")
    lad = cfg.ladder
    thetas = rung_thetas(lad.theta_start_bps, lad.step_bps, lad.max_bps)

    rungs: list[RungResult] = []
    hit_failure = False
    for idx, theta in enumerate(thetas):
        rung_seed = random.Random(f"{seed}:rung:{idx}").getrandbits(63)
        proto = dataclasses.replace(
            cfg.protocol,
            theta_claimed_bps=theta,
            challenger_timeout_factor=lad.timeout_factor,
        )
        rung_cfg = dataclasses.replace(cfg, protocol=proto, ladder=None)
        res = run_scenario(rung_cfg, seed=rung_seed, collect_trace=False)
        rungs.append(_summarize(theta, rung_seed, res))
        if rung_failed(cfg.protocol.n, len(res.timed_out), res.terminated):
            hit_failure = True
            break

    good = [r for r in rungs if r.completed]
    return LadderResult(
        rungs=tuple(rungs),
        estimate_bps=good[-1].measured_bps if good else None,
        below_floor=not good,
        saturated=not hit_failure and bool(good),
    )


def _summarize(theta: float, rung_seed: int, res: SimResult) -> RungResult:
    completed = not rung_failed(res.params.n, len(res.timed_out), res.terminated)
    out = res.output
    return RungResult(
        theta_bps=theta,
        seed=rung_seed,
        completed=completed,
        measured_bps=out.measured_bps if out else None,
        guaranteed_bps=out.guaranteed_bps if out else None,
        delta_ns=out.delta_ns if out else None,
        cnt=out.cnt if out else None,
        timed_out=len(res.timed_out),
        drops=dict(res.drops),
    )
