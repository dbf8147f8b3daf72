"""The splicing prover: run a simulator with one live session hidden inside.

An attempt draws a hash member, a coordinate j and an address (i, a).  The
scheduling verifier then runs as usual except at one level-i history h*:
copy j of that history's coins belongs to the live honest verifier, so
q^j is the live q and s^j of the chosen vertex v comes from the live
verifier.  h* is the first level-i history whose coins are computed while
exactly a-1 level-i vertices exist; v is the a-th level-i vertex and must
hang under h*, otherwise the attempt aborts.

Operational outcomes:

* a sibling of v issues its s-block before v sends r: aborted, channel untouched;
* a sibling issues its s-block after r was sent and before v resolves: failed;
* v resolves: t^j is forwarded, succeeded iff the live verifier accepts;
* the simulation ends with r sent and v unresolved: failed (stuck);
* v never issues its s-block: aborted.

In analysis mode the run continues to the end so the full tree can be
classified; slot-j challenges after the outcome is fixed come from the live
verifier's pure oracle and never touch the channel.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .adversary import AdversarialVerifier, BlackBox, Prefix, ScheduleConfig, TraceRecord
from .channel import HonestVerifier
from .gi import GIProtocol, GraphPair, Witness
from .hashing import sample_member, splice_override
from .kernels import sample_levels
from .params import WeightParams, weight_params
from .protocol import ConfigurationError, Instance
from .simulators import Simulator, make_simulator
from .stats import derive_seed
from .tree import AddressClass, ProofTree, build_tree, classify

__all__ = [
    "Outcome",
    "AttemptOutcome",
    "sample_address",
    "sample_addresses",
    "run_attempt",
    "run_ps",
    "decide",
    "experiment_splice_first",
    "experiment_splice_after",
    "weight_params",
    "WeightParams",
]


class Outcome(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    ABORTED = "aborted"


class StopAttempt(Exception):
    """Raised inside the simulation once the operational outcome is fixed."""


def sample_address(wp: WeightParams, rng: random.Random) -> tuple[int, int]:
    """Level with probability c*f(h), then a uniform index in 1..N."""
    u = rng.randrange(wp.total)
    acc = 0
    for level in range(1, wp.k + 1):
        acc += wp.f(wp.height(level))
        if u < acc:
            return level, rng.randrange(wp.N) + 1
    raise AssertionError("unreachable")


def sample_addresses(wp: WeightParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` addresses as an array of (level, index) rows."""
    cum = np.cumsum([wp.f(wp.height(level)) for level in range(1, wp.k + 1)], dtype=np.int64)
    levels = sample_levels(cum, size, rng) + 1
    idx = rng.integers(1, wp.N + 1, size=size)
    return np.stack([levels, idx], axis=1)


def _tape_bytes(seed: int, n: int) -> bytes:
    return random.Random(seed).randbytes(n)


class _OnlineSplice(AdversarialVerifier):
    """Shared splice-point bookkeeping: h* and v per the online rule."""

    def __init__(self, cfg: ScheduleConfig, x: Instance, level: int, index: int, j: int):
        super().__init__(cfg, x)
        if not 1 <= j <= cfg.m:
            raise ConfigurationError("coordinate j outside 1..m")
        self.i, self.a, self.j = level, index, j
        self.h_star: Prefix | None = None
        self.v: Prefix | None = None
        self.misplaced = False

    def _spliced_here(self, level: int, rprefix: Prefix) -> bool:
        if (
            self.h_star is None
            and level == self.i
            and self.level_count[level] == self.a - 1
        ):
            self.h_star = rprefix
            return True
        return False

    def _on_vertex(self, level: int, rprefix: Prefix) -> None:
        if level == self.i and self.level_count[level] == self.a:
            if self.h_star is not None and rprefix[:-1] == self.h_star:
                self.v = rprefix
            else:
                self.misplaced = True
                self._misplaced()

    def _misplaced(self) -> None:
        pass


class SplicingVerifier(_OnlineSplice):
    def __init__(
        self,
        cfg: ScheduleConfig,
        x: Instance,
        level: int,
        index: int,
        j: int,
        channel,
        analyze: bool = False,
        oracle: Callable[[bytes], bytes] | None = None,
    ):
        super().__init__(cfg, x, level, index, j)
        if analyze and oracle is None:
            raise ConfigurationError("analysis mode needs the live verifier's oracle")
        self.channel = channel
        self.analyze = analyze
        self.oracle = oracle
        self.outcome: Outcome | None = None
        self.reason = ""
        self.r_sent = False
        self.v_resolved = False

    def _decide(self, outcome: Outcome, reason: str) -> None:
        if self.outcome is None:
            self.outcome = outcome
            self.reason = reason
        if not self.analyze:
            raise StopAttempt(reason)

    def _misplaced(self) -> None:
        self._decide(Outcome.ABORTED, "misplaced")

    def _tapes(self, level, rprefix, history):
        tapes = super()._tapes(level, rprefix, history)
        if self._spliced_here(level, rprefix):
            tapes = tapes[: self.j - 1] + (None,) + tapes[self.j :]
        return tapes

    def _first_copy(self, level, rprefix, c, tape):
        if tape is None:
            return self.channel.q
        return super()._first_copy(level, rprefix, c, tape)

    def _second_copy(self, level, rprefix, c, tape, r):
        if tape is not None:
            return super()._second_copy(level, rprefix, c, tape, r)
        if rprefix == self.v and self.outcome is None and not self.r_sent:
            self.r_sent = True
            return self.channel.send_r(r)
        if self.outcome is None:
            if not self.r_sent:
                self._decide(Outcome.ABORTED, "sibling activated before v")
            elif not self.v_resolved:
                self._decide(Outcome.FAILED, "sibling activated before v resolved")
        if self.oracle is None:
            raise StopAttempt("no oracle")
        return self.oracle(r)

    def _on_resolve(self, level, rprefix, ts):
        if rprefix == self.v and not self.v_resolved:
            self.v_resolved = True
            if self.outcome is None:
                ok = self.channel.send_t(ts[self.j - 1])
                self._decide(Outcome.SUCCEEDED if ok else Outcome.FAILED, "v resolved")

    def finish(self) -> Outcome:
        if self.outcome is None:
            if self.r_sent and not self.v_resolved:
                self.outcome, self.reason = Outcome.FAILED, "stuck"
            else:
                self.outcome, self.reason = Outcome.ABORTED, "v never activated"
        return self.outcome


@dataclass
class AttemptOutcome:
    operational: Outcome
    analysis: AddressClass | None
    v_sent_r: bool
    address: tuple[int, int]
    j: int
    tree_size: int
    steps: int
    reason: str = ""
    records: list[TraceRecord] = field(default_factory=list, repr=False)
    tree: ProofTree | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "outcome": self.operational.value,
            "analysis": self.analysis.value if self.analysis else None,
            "v_sent_r": self.v_sent_r,
            "address": list(self.address),
            "j": self.j,
            "tree_size": self.tree_size,
            "steps": self.steps,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class AttemptCoins:
    hash_seed: int
    j: int
    address: tuple[int, int]
    sim_seed: int


def attempt_coins(wp: WeightParams, m: int, seed: int) -> AttemptCoins:
    rng = random.Random(derive_seed(seed, "attempt-coins"))
    j = rng.randrange(m) + 1
    address = sample_address(wp, rng)
    return AttemptCoins(derive_seed(seed, "attempt-hash"), j, address, derive_seed(seed, "attempt-sim"))


def run_attempt(
    x: Instance,
    wp: WeightParams,
    sim: Simulator,
    channel,
    seed: int,
    m: int,
    k: int | None = None,
    analyze: bool = False,
    cap: int | None = None,
) -> AttemptOutcome:
    """One splicing attempt with fresh hash, coordinate, address and simulator coins."""
    k = k or wp.k
    coins = attempt_coins(wp, m, seed)
    proto = GIProtocol()
    tape_len = proto.tape_length(x)
    H = sample_member(coins.hash_seed, max(1, wp.N * tape_len), m * tape_len)
    oracle = getattr(channel, "analysis_oracle", None) if analyze else None
    ver = SplicingVerifier(
        ScheduleConfig(k, m, proto, H), x, *coins.address, coins.j, channel, analyze, oracle
    )
    box = BlackBox(ver, cap if cap is not None else wp.N)
    try:
        sim.run(x, box, coins.sim_seed)
    except StopAttempt:
        pass
    outcome = ver.finish()
    tree = None
    analysis = None
    if analyze:
        tree = build_tree(box.records, k, box.cap)
        analysis = classify(tree, coins.address)
    return AttemptOutcome(
        outcome,
        analysis,
        ver.r_sent,
        coins.address,
        coins.j,
        len(tree) if tree is not None else len(ver.vertex_address),
        box.steps,
        ver.reason,
        box.records,
        tree,
    )


@dataclass
class PSResult:
    convinced: bool
    attempts: int
    outcomes: list[AttemptOutcome]


def run_ps(
    x: Instance,
    wp: WeightParams,
    sim: Simulator,
    channel,
    seed: int,
    m: int,
    max_attempts: int = 100_000,
) -> PSResult:
    """Retry aborted attempts; stop on the first success or failure."""
    outcomes = []
    for n in range(max_attempts):
        out = run_attempt(x, wp, sim, channel, derive_seed(seed, "ps-attempt", n), m)
        outcomes.append(out)
        if out.operational is not Outcome.ABORTED:
            break
    return PSResult(bool(channel.accepted), len(outcomes), outcomes)


class Verdict(str, Enum):
    IN_L = "InL"
    NOT_IN_L = "NotInL"


def decide(
    pair: GraphPair,
    k: int,
    m: int,
    N: int,
    seed: int,
    simulator: str = "witness",
    witness: Witness | None = None,
    max_attempts: int = 100_000,
) -> tuple[Verdict, PSResult]:
    """Run the splicing prover against a fresh honest verifier; InL iff it accepts."""
    x = pair.to_instance()
    proto = GIProtocol()
    channel = HonestVerifier(proto, x, _tape_bytes(derive_seed(seed, "decide-tape"), proto.tape_length(x)))
    sim = make_simulator(simulator, witness)
    wp = weight_params(k, N, m)
    res = run_ps(x, wp, sim, channel, derive_seed(seed, "decide-ps"), m, max_attempts)
    return (Verdict.IN_L if channel.accepted else Verdict.NOT_IN_L), res


# experiments -------------------------------------------------------------


class _SpliceFirstVerifier(_OnlineSplice):
    """Coins of copy j at h* replaced by a known tape through a spliced hash."""

    def __init__(self, cfg, x, level, index, j, R: bytes):
        super().__init__(cfg, x, level, index, j)
        self.R = R

    def _tapes(self, level, rprefix, history):
        if self._spliced_here(level, rprefix):
            self.hash = splice_override(self.hash, history, self.j, self.R, self.m)
        return super()._tapes(level, rprefix, history)


@dataclass
class ExperimentResult:
    tree: ProofTree
    order: list[str]
    address: tuple[int, int]
    j: int
    misplaced: bool = False

    def label(self) -> tuple[str, str]:
        return self.tree.fingerprint(), classify(self.tree, self.address).value


def experiment_splice_first(
    x: Instance, wp: WeightParams, sim: Simulator, m: int, seed: int, cap: int | None = None
) -> ExperimentResult:
    """Choose the splice up front with a uniformly random tape, then simulate."""
    coins = attempt_coins(wp, m, seed)
    proto = GIProtocol()
    tape_len = proto.tape_length(x)
    R = _tape_bytes(derive_seed(seed, "live-tape"), tape_len)
    H = sample_member(coins.hash_seed, max(1, wp.N * tape_len), m * tape_len)
    ver = _SpliceFirstVerifier(ScheduleConfig(wp.k, m, proto, H), x, *coins.address, coins.j, R)
    box = BlackBox(ver, cap if cap is not None else wp.N)
    sim.run(x, box, coins.sim_seed)
    tree = build_tree(box.records, wp.k, box.cap)
    order = [v.vid for v in sorted(tree.vertices.values(), key=lambda u: u.gen_order)]
    return ExperimentResult(tree, order, coins.address, coins.j, ver.misplaced)


def experiment_splice_after(
    x: Instance, wp: WeightParams, sim: Simulator, m: int, seed: int, cap: int | None = None
) -> ExperimentResult:
    """Simulate against an unspliced verifier, then draw the address."""
    coins = attempt_coins(wp, m, seed)
    proto = GIProtocol()
    tape_len = proto.tape_length(x)
    H = sample_member(coins.hash_seed, max(1, wp.N * tape_len), m * tape_len)
    ver = AdversarialVerifier(ScheduleConfig(wp.k, m, proto, H), x)
    box = BlackBox(ver, cap if cap is not None else wp.N)
    sim.run(x, box, coins.sim_seed)
    tree = build_tree(box.records, wp.k, box.cap)
    order = [v.vid for v in sorted(tree.vertices.values(), key=lambda u: u.gen_order)]
    return ExperimentResult(tree, order, coins.address, coins.j)


def live_channel(x: Instance, seed: int) -> HonestVerifier:
    """Honest verifier whose tape matches ``experiment_splice_first`` under the same seed."""
    proto = GIProtocol()
    return HonestVerifier(proto, x, _tape_bytes(derive_seed(seed, "live-tape"), proto.tape_length(x)))
