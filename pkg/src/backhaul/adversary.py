"""Adversarial behaviors for challengers and the prover.

Strategies are applied at three seams the simulator exposes: what a
challenger puts on the wire, what it tells the verifier afterwards, and
how the prover times and defends its response. Everything else runs the
honest code, so an attack can only do what a real attacker could.

Challenger strategies:
  honest              follow the schedule
  withhold_all        send nothing (verification still answered honestly)
  withhold_fraction   drop each probe independently with probability p
  delay               shift every send by a fixed amount
  rush                dump the whole train at t0 through a side channel
  share_keys          send nothing; a colluding prover holds our keys and
                      fabricates the train itself (inert if the prover is
                      honest, which degenerates to withhold_all)
  misreport_rtt       report a chosen timing instead of the measured one
  misreport_count     report a chosen acknowledgement count
  withhold_report     measure honestly, never report
  bad_merkle_claim    reject a valid receipt and stay silent

Prover strategies:
  honest              respond at the capped threshold, defend with real
                      signatures when disputed
  colluding_early     respond as soon as the honest challengers alone
                      have delivered (n - 2f) * k countable probes
  dispute_forger      answer disputes with fabricated signatures
"""

from __future__ import annotations

import dataclasses
import random

from .config import AttackSpec
from .roles import Prover
from .schedule import ChallengeParams
from .wire import ChallengePacket, ChallengerReport, DisputeSubmission

VIA_UPLINK = "uplink"
VIA_SIDE = "side"


class AttackError(RuntimeError):
    """A strategy cannot run under the given topology."""


class AttackPlan:
    """Resolved attack: answers the simulator's questions at each seam."""

    def __init__(self, spec: AttackSpec, params: ChallengeParams, rng: random.Random):
        self.spec = spec
        self.params = params
        self.rng = rng
        self.corrupt = set(spec.corrupt_ids)
        self.prover_name = spec.prover.name

    @property
    def colluding(self) -> bool:
        return self.prover_name == "colluding_early"

    def early_trigger_threshold(self) -> int | None:
        """Countable honest probes at which a colluding prover responds.

        (n - 2f) * k is the least honest volume consistent with any set
        of f corrupt counts reaching the full threshold, so responding
        here is the most aggressive timing that still yields a sound
        verdict once counts are capped.
        """
        if not self.colluding:
            return None
        p = self.params
        return (p.n - 2 * p.f) * p.k

    def sends_for(
        self,
        challenger_id: int,
        train: list[tuple[int, ChallengePacket]],
        side_channel: bool,
    ) -> list[tuple[int, ChallengePacket, str]]:
        """Transform the honest (true_time, packet) train for one challenger."""
        strat = self.spec.strategy_for(challenger_id)
        name = strat.name
        if name in (
            "honest",
            "misreport_rtt",
            "misreport_count",
            "withhold_report",
            "bad_merkle_claim",
        ):
            return [(t, p, VIA_UPLINK) for t, p in train]
        if name in ("withhold_all", "share_keys"):
            return []
        if name == "withhold_fraction":
            return [
                (t, p, VIA_UPLINK)
                for t, p in train
                if self.rng.random() >= strat.fraction
            ]
        if name == "delay":
            return [(t + strat.delay_ns, p, VIA_UPLINK) for t, p in train]
        if name == "rush":
            if not side_channel:
                raise AttackError("rush strategy requires a side channel")
            return [(self.params.t0_ns, p, VIA_SIDE) for _, p in train]
        raise AttackError(f"unhandled challenger strategy {name!r}")

    def report_action(
        self, challenger_id: int, report: ChallengerReport | None
    ) -> ChallengerReport | None:
        if report is None:
            return None
        strat = self.spec.strategy_for(challenger_id)
        if strat.name == "misreport_rtt":
            return dataclasses.replace(report, rtt_ns=strat.rtt_ns)
        if strat.name == "misreport_count":
            return dataclasses.replace(report, packets_acknowledged=strat.count)
        if strat.name in ("withhold_report", "bad_merkle_claim"):
            return None
        return report

    def prover_initial_probes(
        self, trains: dict[int, list[tuple[int, ChallengePacket]]]
    ) -> list[ChallengePacket]:
        """Trains a colluding prover fabricates at t0 from shared keys."""
        if not self.colluding:
            return []
        out: list[ChallengePacket] = []
        for cid in sorted(self.corrupt):
            if self.spec.strategy_for(cid).name == "share_keys":
                out.extend(pkt for _, pkt in trains[cid])
        return out

    def dispute_for(self, challenger_id: int, prover: Prover) -> DisputeSubmission | None:
        if self.prover_name == "dispute_forger":
            count = min(self.params.k, 8)
            packets = tuple(
                (q, self.rng.randbytes(64)) for q in range(1, count + 1)
            )
            depth = max(1, (self.params.n - 1).bit_length())
            siblings = tuple(self.rng.randbytes(32) for _ in range(depth))
            return DisputeSubmission(
                challenger_id=challenger_id,
                packets=packets,
                leaf_index=challenger_id - 1,
                siblings=siblings,
            )
        return prover.build_dispute(challenger_id)


def fuzz_strategies(seed: int, n: int, f: int) -> AttackSpec:
    """Random attack with at most f corrupt challengers; f = 0 is exactly honest."""
    from .config import ChallengerStrategy, ProverStrategy

    if f == 0:
        return AttackSpec()
    rng = random.Random(f"{seed}:fuzz:{n}:{f}")
    ids = sorted(rng.sample(range(1, n + 1), f))
    names = [
        "withhold_all",
        "withhold_fraction",
        "delay",
        "rush",
        "share_keys",
        "misreport_rtt",
        "misreport_count",
        "withhold_report",
        "bad_merkle_claim",
    ]
    chosen = []
    for cid in ids:
        name = rng.choice(names)
        strat = ChallengerStrategy(
            name=name,
            fraction=round(rng.uniform(0.1, 0.9), 3),
            delay_ns=rng.randint(1_000_000, 80_000_000),
            rtt_ns=rng.choice([1, rng.randint(1, 10_000_000), rng.randint(1, 10**12)]),
            count=rng.choice([1, rng.randint(1, 10**6), 4_000_000_000]),
        )
        chosen.append((cid, strat))
    prover = ProverStrategy(rng.choice(["honest", "colluding_early", "dispute_forger"]))
    return AttackSpec(challengers=tuple(chosen), prover=prover)
