"""Reference simulators that talk to the scheduling verifier only by prefix queries."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .adversary import AdversarialVerifier, BlackBox, ReplyKind, ScheduleConfig, TraceRecord
from .gi import GIProtocol, GraphPair, Witness, guess_commit, prover_commit, prover_respond
from .hashing import sample_member
from .protocol import CapExhausted, Instance
from .stats import Estimate, derive_seed, wilson


@dataclass
class SimRun:
    trace: list[TraceRecord]
    completed: bool
    steps: int
    commits: list[int] = field(default_factory=list)  # r-block sends per level (index 0 = level 1)


class Simulator:
    name = "simulator"

    def run(self, x: Instance, box: BlackBox, seed) -> SimRun:
        rng = random.Random(seed)
        commits = [0] * box.k
        try:
            completed = self._run(x, box, rng, commits)
        except CapExhausted:
            completed = False
        return SimRun(box.records, completed, box.steps, commits)

    def _run(self, x: Instance, box: BlackBox, rng: random.Random, commits: list[int]) -> bool:
        raise NotImplementedError


class WitnessOracle(Simulator):
    """One straight pass as the honest prover.

    Without a witness each copy commits to a relabelling of a guessed graph;
    the run gives up (sends nothing further) when a challenge misses.
    """

    name = "witness"

    def __init__(self, witness: Witness | None = None):
        self.witness = witness

    def _run(self, x, box, rng, commits):
        pair = GraphPair.from_instance(x)
        k, m = box.k, box.m
        proto = GIProtocol()
        wit = self.witness if self.witness is not None and self.witness.valid_for(pair) else None
        prefix: list = []
        states = []
        for level in range(1, k + 1):
            qs = box.query(prefix).message
            if wit is not None:
                made = [prover_commit(pair, q, wit, rng) for q in qs]
                bits = None
            else:
                bits = [rng.getrandbits(1) for _ in range(m)]
                made = [guess_commit(pair, q, b, rng) for q, b in zip(qs, bits)]
            prefix.append(tuple(r for r, _ in made))
            states.append((qs, [st for _, st in made], bits))
            commits[level - 1] += 1
        for level in range(k, 0, -1):
            reply = box.query(prefix)
            if reply.kind is not ReplyKind.NEXT_CHALLENGE:
                return False
            qs, sts, bits = states[level - 1]
            rs = prefix[level - 1]
            ts = []
            for c, s in enumerate(reply.message):
                if wit is not None:
                    t = prover_respond(pair, sts[c], wit, s)
                else:
                    t = bytes(sts[c].sigma) if s == bytes([bits[c]]) else None
                if t is None or not proto.accept(x, qs[c], rs[c], s, t):
                    return False
                ts.append(t)
            prefix.append(tuple(ts))
        return box.query(prefix).kind is ReplyKind.ACCEPT


class Rewinding(Simulator):
    """Guess each block's challenges; on a miss, re-commit that block and re-descend."""

    name = "rewinding"

    def _run(self, x, box, rng, commits):
        pair = GraphPair.from_instance(x)
        k, m = box.k, box.m
        proto = GIProtocol()
        rblocks: list = []
        qcache: list = []  # q-block per level along the current path
        info: list = []  # (states, bits) per level
        tblocks: list = []

        def commit(level: int) -> None:
            qs = qcache[level - 1]
            bits = [rng.getrandbits(1) for _ in range(m)]
            made = [guess_commit(pair, q, b, rng) for q, b in zip(qs, bits)]
            del rblocks[level - 1 :]
            del info[level - 1 :]
            rblocks.append(tuple(r for r, _ in made))
            info.append(([st for _, st in made], bits))
            commits[level - 1] += 1

        def descend(start: int) -> None:
            for level in range(start, k + 1):
                if level > start or len(qcache) < level:
                    del qcache[level - 1 :]
                    qcache.append(box.query(rblocks[: level - 1]).message)
                commit(level)

        descend(1)
        level = k
        while level >= 1:
            reply = box.query(tuple(rblocks) + tuple(tblocks))
            if reply.kind is not ReplyKind.NEXT_CHALLENGE:
                return False
            sts, bits = info[level - 1]
            ss = reply.message
            if all(s == bytes([b]) for s, b in zip(ss, bits)):
                ts = tuple(bytes(st.sigma) for st in sts)
                qs, rs = qcache[level - 1], rblocks[level - 1]
                if not all(proto.accept(x, qs[c], rs[c], ss[c], ts[c]) for c in range(m)):
                    return False  # pragma: no cover - guessed commits always open
                tblocks.append(ts)
                level -= 1
                continue
            # miss: same history, fresh commitment; inner levels hang off the new r-block
            del qcache[level:]
            commit(level)
            tblocks.clear()
            if level < k:
                descend(level + 1)
                level = k
        return box.query(tuple(rblocks) + tuple(tblocks)).kind is ReplyKind.ACCEPT


class Capped(Simulator):
    def __init__(self, inner: Simulator, N: int):
        self.inner = inner
        self.N = N
        self.name = f"capped-{inner.name}"

    def run(self, x, box, seed):
        box.cap = self.N if box.cap is None else min(box.cap, self.N)
        return self.inner.run(x, box, seed)


def make_simulator(kind: str, witness: Witness | None = None, cap: int | None = None) -> Simulator:
    if kind in ("witness", "witness-oracle", "WitnessOracle"):
        sim: Simulator = WitnessOracle(witness)
    elif kind in ("rewinding", "Rewinding"):
        sim = Rewinding()
    else:
        raise ValueError(f"unknown simulator kind {kind!r}")
    return Capped(sim, cap) if cap is not None else sim


def fresh_verifier(x: Instance, k: int, m: int, hash_seed, cap: int | None = None) -> AdversarialVerifier:
    proto = GIProtocol()
    tape = proto.tape_length(x)
    t = max(1, (cap or 1) * tape)
    H = sample_member(hash_seed, t, m * tape, mode="prg")
    return AdversarialVerifier(ScheduleConfig(k, m, proto, H), x)


def run_simulator(
    sim: Simulator, x: Instance, verifier: AdversarialVerifier, seed, cap: int | None = None
) -> SimRun:
    return sim.run(x, BlackBox(verifier, cap), seed)


def success_probability_under_cap(
    sim: Simulator, x: Instance, k: int, m: int, N: int, trials: int, seed: int
) -> Estimate:
    ok = 0
    for n in range(trials):
        v = fresh_verifier(x, k, m, derive_seed(seed, "cap-hash", n), N)
        run = run_simulator(sim, x, v, derive_seed(seed, "cap-sim", n), cap=N)
        ok += run.completed
    return wilson(ok, trials)


def step_counts(sim: Simulator, x: Instance, k: int, m: int, trials: int, seed: int) -> list[int]:
    out = []
    for n in range(trials):
        v = fresh_verifier(x, k, m, derive_seed(seed, "steps-hash", n))
        out.append(run_simulator(sim, x, v, derive_seed(seed, "steps-sim", n)).steps)
    return out


def quantile(values: list[int], q: float) -> int:
    """Nearest-rank quantile."""
    s = sorted(values)
    return s[max(0, math.ceil(q * len(s)) - 1)]


def measure_step_cap(
    sim: Simulator, x: Instance, k: int, m: int, trials: int, seed: int, factor: int = 100
) -> int:
    """Measured 99th-percentile step count times ``factor``."""
    return quantile(step_counts(sim, x, k, m, trials, seed), 0.99) * factor
