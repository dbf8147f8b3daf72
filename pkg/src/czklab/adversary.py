"""The scheduling verifier: k nested m-block sessions with hashed coins.

A query is the tuple of prover blocks sent so far, in schedule order:
r-blocks for levels 1..k, then t-blocks for levels k..1.  Its length fixes
the position in the schedule

    q1 r1 q2 r2 ... qk rk sk tk s(k-1) t(k-1) ... s1 t1

so the verifier is a pure function from prefixes to replies.  The coins of
level i are the hash of the canonical history x, q1, r1, ..., q(i-1), r(i-1);
s- and t-blocks never enter the hash.  A t-block that fails the block check
ends the conversation with an abort.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .hashing import AnyHash
from .protocol import (
    CapExhausted,
    ConfigurationError,
    ConversationProtocol,
    Instance,
    QueryError,
    encode_block,
    encode_message,
)

log = logging.getLogger(__name__)

Block = tuple[bytes, ...]
Prefix = tuple[Block, ...]


@dataclass(frozen=True)
class ScheduleConfig:
    k: int
    m: int
    protocol: ConversationProtocol
    hash: AnyHash

    def __post_init__(self) -> None:
        if self.k < 1 or self.m < 1:
            raise ConfigurationError("k and m must be positive")


class ReplyKind(str, Enum):
    NEXT_CHALLENGE = "next"
    ACCEPT = "accept"
    ABORT = "abort"


@dataclass(frozen=True)
class VerifierReply:
    kind: ReplyKind
    message: Block | None = None
    session: int | None = None
    phase: str | None = None  # "q" or "s" for challenges
    failed_level: int | None = None

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(self.kind.value.encode())
        if self.message is not None:
            h.update(encode_block(self.message))
        h.update(repr((self.session, self.phase, self.failed_level)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class LevelParams:
    history: bytes
    tapes: tuple[bytes | None, ...]
    qs: Block


def normalize_prefix(prefix: Sequence, k: int, m: int) -> Prefix:
    if type(prefix) is tuple and len(prefix) <= 2 * k and all(
        type(b) is tuple and len(b) == m and all(type(x) is bytes for x in b) for b in prefix
    ):
        return prefix
    if len(prefix) > 2 * k:
        raise QueryError(f"prefix has {len(prefix)} blocks; schedule allows {2 * k}")
    out = []
    for pos, block in enumerate(prefix):
        if isinstance(block, (bytes, bytearray)) or len(block) != m:
            raise QueryError(f"block {pos} must hold exactly {m} messages")
        if not all(isinstance(b, (bytes, bytearray)) for b in block):
            raise QueryError(f"block {pos} contains a non-bytes message")
        out.append(tuple(bytes(b) for b in block))
    return tuple(out)


class AdversarialVerifier:
    """Deterministic reply function.  Memo tables only cache answers."""

    def __init__(self, cfg: ScheduleConfig, x: Instance):
        self.cfg = cfg
        self.x = x
        self.k, self.m = cfg.k, cfg.m
        self.hash = cfg.hash
        self.tape_len = cfg.protocol.tape_length(x)
        self._params: dict[Prefix, LevelParams] = {}
        self._second_memo: dict[Prefix, Block] = {}
        self._ok_memo: dict[tuple[Prefix, Block], bool] = {}
        self._replies: dict[Prefix, VerifierReply] = {}
        # vertices seen so far, keyed by r-prefix: (level, index within level)
        self.vertex_address: dict[Prefix, tuple[int, int]] = {}
        self.level_count = [0] * (self.k + 1)

    # hooks for subclasses ------------------------------------------------

    def _tapes(self, level: int, rprefix: Prefix, history: bytes) -> tuple[bytes | None, ...]:
        raw = self.hash.evaluate(history, self.m * self.tape_len)
        T = self.tape_len
        return tuple(raw[c * T : (c + 1) * T] for c in range(self.m))

    def _first_copy(self, level: int, rprefix: Prefix, c: int, tape: bytes | None) -> bytes:
        return self.cfg.protocol.first_challenge(self.x, tape)

    def _second_copy(self, level: int, rprefix: Prefix, c: int, tape: bytes | None, r: bytes) -> bytes:
        return self.cfg.protocol.second_challenge(self.x, tape, r)

    def _on_vertex(self, level: int, rprefix: Prefix) -> None:
        pass

    def _on_activate(self, level: int, rprefix: Prefix) -> None:
        pass

    def _on_resolve(self, level: int, rprefix: Prefix, ts: Block) -> None:
        pass

    # core ----------------------------------------------------------------

    def level_params(self, level: int, rprefix: Prefix) -> LevelParams:
        """Coins and first challenges of ``level`` under r-blocks ``rprefix`` (length level-1)."""
        rprefix = tuple(rprefix[: level - 1])
        hit = self._params.get(rprefix)
        if hit is not None:
            return hit
        if level == 1:
            history = self.x.encode()
        else:
            parent = self.level_params(level - 1, rprefix)
            history = parent.history + encode_block(parent.qs) + encode_block(rprefix[-1])
        tapes = self._tapes(level, rprefix, history)
        qs = tuple(self._first_copy(level, rprefix, c, tapes[c]) for c in range(self.m))
        params = LevelParams(history, tapes, qs)
        self._params[rprefix] = params
        return params

    def second_block(self, level: int, rprefix: Prefix) -> Block:
        """s-block of the vertex with r-prefix ``rprefix`` (length ``level``)."""
        hit = self._second_memo.get(rprefix)
        if hit is not None:
            return hit
        params = self.level_params(level, rprefix)
        rs = rprefix[level - 1]
        ss = tuple(
            self._second_copy(level, rprefix, c, params.tapes[c], rs[c]) for c in range(self.m)
        )
        self._second_memo[rprefix] = ss
        return ss

    def block_ok(self, level: int, rprefix: Prefix, ts: Block) -> bool:
        key = (rprefix, ts)
        hit = self._ok_memo.get(key)
        if hit is not None:
            return hit
        params = self.level_params(level, rprefix)
        ss = self.second_block(level, rprefix)
        rs = rprefix[level - 1]
        proto = self.cfg.protocol
        ok = all(
            proto.accept(self.x, params.qs[c], rs[c], ss[c], ts[c]) for c in range(self.m)
        )
        self._ok_memo[key] = ok
        return ok

    def respond(self, prefix: Sequence) -> VerifierReply:
        return self.respond_normalized(normalize_prefix(prefix, self.k, self.m))

    def respond_normalized(self, prefix: Prefix) -> VerifierReply:
        hit = self._replies.get(prefix)
        if hit is not None:
            return hit
        reply = self._respond(prefix)
        self._replies[prefix] = reply
        return reply

    def _respond(self, prefix: Prefix) -> VerifierReply:
        k = self.k
        L = len(prefix)
        rdepth = min(L, k)
        # coins of a level come before any vertex under them is registered
        for level in range(1, min(L + 1, k) + 1):
            self.level_params(level, prefix)
            if level <= rdepth:
                self._register(level, prefix[:level])
        if L < k:
            return VerifierReply(ReplyKind.NEXT_CHALLENGE, self.level_params(L + 1, prefix).qs, L + 1, "q")
        if L == k:
            ss = self.second_block(k, prefix[:k])
            self._on_activate(k, prefix[:k])
            return VerifierReply(ReplyKind.NEXT_CHALLENGE, ss, k, "s")
        d = L - k
        for level in range(k, k - d, -1):
            ts = prefix[k + (k - level)]
            if not self.block_ok(level, prefix[:level], ts):
                return VerifierReply(ReplyKind.ABORT, None, level, None, failed_level=level)
            self._on_resolve(level, prefix[:level], ts)
        if d == k:
            return VerifierReply(ReplyKind.ACCEPT, None, 1, None)
        level = k - d
        ss = self.second_block(level, prefix[:level])
        self._on_activate(level, prefix[:level])
        return VerifierReply(ReplyKind.NEXT_CHALLENGE, ss, level, "s")

    def _register(self, level: int, rprefix: Prefix) -> None:
        if rprefix in self.vertex_address:
            return
        self.level_count[level] += 1
        self.vertex_address[rprefix] = (level, self.level_count[level])
        self._on_vertex(level, rprefix)


# black-box access --------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    index: int
    length: int
    path: tuple[str, ...]  # vertex ids for levels 1..min(length, k)
    kind: str
    session: int | None
    phase: str | None
    failed_level: int | None
    reply_digest: str = ""
    reply: VerifierReply | None = field(default=None, compare=False, repr=False)

    def digest(self) -> str:
        if self.reply_digest or self.reply is None:
            return self.reply_digest
        return self.reply.digest()

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "length": self.length,
            "path": list(self.path),
            "kind": self.kind,
            "session": self.session,
            "phase": self.phase,
            "failed_level": self.failed_level,
            "reply": self.digest(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        return cls(
            int(d["index"]),
            int(d["length"]),
            tuple(d["path"]),
            d["kind"],
            d.get("session"),
            d.get("phase"),
            d.get("failed_level"),
            d.get("reply", ""),
        )


ROOT_ID = "root"


class BlackBox:
    """Prefix-query access with a step budget and a trace.

    Invalid queries raise ``QueryError`` and are neither counted nor logged.
    """

    def __init__(self, verifier: AdversarialVerifier, cap: int | None = None):
        self.verifier = verifier
        self.cap = cap
        self.steps = 0
        self.records: list[TraceRecord] = []
        self._ids: dict[Prefix, str] = {(): ROOT_ID}

    @property
    def k(self) -> int:
        return self.verifier.k

    @property
    def m(self) -> int:
        return self.verifier.m

    def _vertex_id(self, rprefix: Prefix) -> str:
        hit = self._ids.get(rprefix)
        if hit is not None:
            return hit
        parent = self._vertex_id(rprefix[:-1])
        vid = hashlib.blake2b(
            parent.encode() + encode_block(rprefix[-1]), digest_size=12
        ).hexdigest()
        self._ids[rprefix] = vid
        return vid

    def query(self, prefix: Sequence) -> VerifierReply:
        prefix = normalize_prefix(prefix, self.verifier.k, self.verifier.m)
        if self.cap is not None and self.steps >= self.cap:
            raise CapExhausted(f"step cap {self.cap} reached")
        self.steps += 1
        reply = self.verifier.respond_normalized(prefix)
        depth = min(len(prefix), self.verifier.k)
        path = tuple(self._vertex_id(prefix[:i]) for i in range(1, depth + 1))
        self.records.append(
            TraceRecord(
                len(self.records),
                len(prefix),
                path,
                reply.kind.value,
                reply.session,
                reply.phase,
                reply.failed_level,
                reply=reply,
            )
        )
        return reply


def write_trace(path: str | Path, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[TraceRecord]:
    with open(path, encoding="utf-8") as fh:
        return [TraceRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def history_digest(history: bytes) -> str:
    return hashlib.blake2b(encode_message(history), digest_size=12).hexdigest()
