"""UDP endpoints that run a measurement over a real network path.

The three roles from `roles` are wrapped in blocking socket loops so a
challenge can be run between actual hosts (or across loopback for an
end-to-end check). All packets use the binary wire formats, one
datagram per message, so these endpoints interoperate with anything
else speaking the same formats.

Time is wall clock (`time.time_ns`): the start instant t0 in the
parameters is an epoch timestamp the participants must share, which on
real deployments means NTP-grade agreement. Each challenger aligns its
train using its own measured latency as the reference, so first
arrivals line up only as well as challenger latencies agree; a
coordinator that knows all latencies can pass them in explicitly for
tighter alignment.

Disputes need a control channel to request evidence from the prover;
these endpoints cover the cooperative path (probes, response, reports)
and leave the report-withholding recovery to the simulator.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass

from . import wire
from .crypto import KeyPair
from .roles import Challenger, PoBOutput, Prover, Verifier
from .schedule import ChallengeParams, estimate_latency, send_schedule

PING_SAMPLES = 20
PING_TIMEOUT_S = 0.5
RECV_BUF = 2048


class LiveError(RuntimeError):
    """A peer did not answer or sent something unusable."""


Addr = tuple[str, int]


def _sleep_until(epoch_ns: int) -> None:
    while True:
        rest = epoch_ns - time.time_ns()
        if rest <= 0:
            return
        time.sleep(min(rest / 1e9, 0.05))


def ping_latency(
    sock: socket.socket,
    challenger_id: int,
    prover_addr: Addr,
    samples: int = PING_SAMPLES,
) -> int:
    """One-way latency estimate from echo round trips; raises if none answer."""
    rtts = []
    for nonce in range(1, samples + 1):
        sock.settimeout(PING_TIMEOUT_S)
        t0 = time.monotonic_ns()
        sock.sendto(
            wire.encode(wire.PingRequest(challenger_id=challenger_id, nonce=nonce)),
            prover_addr,
        )
        try:
            while True:
                data, _ = sock.recvfrom(RECV_BUF)
                msg = wire.decode(data)
                if isinstance(msg, wire.PingReply) and msg.nonce == nonce:
                    rtts.append(time.monotonic_ns() - t0)
                    break
        except (socket.timeout, wire.WireError):
            continue
    if not rtts:
        raise LiveError(f"prover at {prover_addr} answered none of {samples} pings")
    return estimate_latency(rtts)


@dataclass
class ProverStats:
    responded: bool
    probes_seen: int
    challengers_seen: int
    pings_answered: int


def serve_prover(
    sock: socket.socket,
    prover_id: int,
    keypair: KeyPair,
    params: ChallengeParams,
    verifier_addr: Addr,
    stop_ns: int,
    linger_ns: int = 200_000_000,
) -> ProverStats:
    """Answer pings, collect probes, respond once the threshold trips.

    Runs until `stop_ns` (epoch) or until the response has been out for
    `linger_ns` (so late pings from slow challengers still get echoed).
    """
    prover = Prover(prover_id, keypair, params)
    addrs: dict[int, Addr] = {}
    pings = 0
    probes = 0
    responded_at: int | None = None

    while True:
        now = time.time_ns()
        if now >= stop_ns:
            break
        if responded_at is not None and now - responded_at >= linger_ns:
            break
        sock.settimeout(min(0.05, (stop_ns - now) / 1e9))
        try:
            data, src = sock.recvfrom(RECV_BUF)
        except socket.timeout:
            continue
        try:
            msg = wire.decode(data)
        except wire.WireError:
            continue
        if isinstance(msg, wire.PingRequest):
            pings += 1
            sock.sendto(
                wire.encode(
                    wire.PingReply(challenger_id=msg.challenger_id, nonce=msg.nonce)
                ),
                src,
            )
        elif isinstance(msg, wire.ChallengePacket):
            probes += 1
            addrs[msg.challenger_id] = src
            if prover.on_probe(time.time_ns(), msg):
                responded_at = time.time_ns()
                bundle = prover.build_responses()
                for cid, addr in addrs.items():
                    sock.sendto(wire.encode(bundle.responses[cid]), addr)
                    sock.sendto(wire.encode(bundle.verifications[cid]), addr)
                sock.sendto(wire.encode(bundle.announcement), verifier_addr)
    return ProverStats(
        responded=prover.responded,
        probes_seen=probes,
        challengers_seen=len(addrs),
        pings_answered=pings,
    )


def run_challenger(
    sock: socket.socket,
    challenger_id: int,
    keypair: KeyPair,
    prover_id: int,
    prover_public_key: bytes,
    prover_addr: Addr,
    verifier_addr: Addr,
    params: ChallengeParams,
    latency_ns: int | None = None,
) -> Challenger:
    """Ping, send the paced train, await the receipt, report to the verifier."""
    if latency_ns is None:
        latency_ns = ping_latency(sock, challenger_id, prover_addr)
    # every slot uses our own latency: we are our own alignment reference
    schedule = send_schedule(params, [latency_ns] * params.n, sigs_per_packet=1)
    me = Challenger(
        challenger_id, keypair, prover_id, prover_public_key, params, schedule
    )

    for t_ns, pkt in me.build_sends():
        _sleep_until(t_ns)
        sock.sendto(wire.encode(pkt), prover_addr)

    deadline = me.t_first_ns + round(5 * params.duration_ns)
    while me.pending_report is None and me.failure is None:
        now = time.time_ns()
        if now >= deadline:
            break
        sock.settimeout(min(0.05, (deadline - now) / 1e9))
        try:
            data, _ = sock.recvfrom(RECV_BUF)
            msg = wire.decode(data)
        except (socket.timeout, wire.WireError):
            continue
        if isinstance(msg, wire.ResponsePacket):
            me.on_response(time.time_ns(), msg)
        elif isinstance(msg, wire.VerificationMessage):
            rpt = me.on_verification(time.time_ns(), msg)
            if rpt is not None:
                me.pending_report = rpt

    if me.pending_report is not None:
        sock.sendto(wire.encode(me.pending_report), verifier_addr)
        me.report_sent = True
    return me


def run_verifier(
    sock: socket.socket,
    params: ChallengeParams,
    challenger_public_keys: dict[int, bytes],
    prover_id: int,
    prover_public_key: bytes,
    deadline_ns: int,
) -> PoBOutput | None:
    """Collect the announcement and reports; verdict or None by the deadline."""
    verifier = Verifier(params, challenger_public_keys, prover_id, prover_public_key)
    while verifier.output is None:
        now = time.time_ns()
        if now >= deadline_ns:
            verifier.evaluate(now)
            break
        sock.settimeout(min(0.05, (deadline_ns - now) / 1e9))
        try:
            data, _ = sock.recvfrom(RECV_BUF)
            msg = wire.decode(data)
        except (socket.timeout, wire.WireError):
            continue
        now = time.time_ns()
        if isinstance(msg, wire.ResponsePacket):
            verifier.on_root(now, msg)
        elif isinstance(msg, wire.ChallengerReport):
            verifier.on_report(now, msg)
        elif isinstance(msg, wire.DisputeSubmission):
            verifier.on_dispute(now, msg)
    return verifier.output
