"""Four-message conversation-based proofs and their m-fold parallel form.

A protocol runs verifier-first as (q, r, s, t): the verifier derives q from
its tape, the prover answers r, the verifier derives s from its tape and r,
and the prover answers t.  Acceptance is decided from (x, q, r, s, t) alone.

Every message is a byte string.  Encodings used for hashing prefix each
field with its length as a 4-byte big-endian integer, so distinct field
sequences never collide.
"""

from __future__ import annotations

import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

# Second challenge returned for a malformed r; no accept call passes it.
REJECT = b"\xff"


class ConfigurationError(ValueError):
    """Bad parameters: wrong tape length, tuple-length mismatch, etc."""


class QueryError(ValueError):
    """A prefix query that does not fit the schedule grammar."""


class CapExhausted(RuntimeError):
    """The black-box step budget ran out."""


class ProtocolViolation(RuntimeError):
    """An invariant of the live channel was broken (e.g. a second r)."""


class TreeCorruption(ValueError):
    """A trace that cannot come from the configured adversary."""


class StructuralViolation(ValueError):
    """A proof tree that breaks a structural invariant."""


@dataclass(frozen=True)
class Instance:
    input_x: bytes
    size_n: int

    def __post_init__(self) -> None:
        if not isinstance(self.input_x, (bytes, bytearray)):
            raise ConfigurationError("input_x must be bytes")
        if self.size_n < 1:
            raise ConfigurationError("size_n must be at least 1")

    def encode(self) -> bytes:
        return encode_message(bytes(self.input_x)) + struct.pack(">I", self.size_n)


def encode_message(msg: bytes) -> bytes:
    return struct.pack(">I", len(msg)) + bytes(msg)


def encode_block(block: Sequence[bytes]) -> bytes:
    """Length-prefixed tuple: count, then each message length-prefixed."""
    return struct.pack(">I", len(block)) + b"".join(encode_message(b) for b in block)


def encode_transcript(x: Instance, blocks: Sequence[Sequence[bytes]]) -> bytes:
    """Canonical bytes of x followed by the given blocks in schedule order."""
    return x.encode() + b"".join(encode_block(b) for b in blocks)


@dataclass
class Conversation:
    q: bytes | None = None
    r: bytes | None = None
    s: bytes | None = None
    t: bytes | None = None

    def complete(self) -> bool:
        return None not in (self.q, self.r, self.s, self.t)


@dataclass
class BlockConversation:
    m: int
    q: tuple[bytes, ...] | None = None
    r: tuple[bytes, ...] | None = None
    s: tuple[bytes, ...] | None = None
    t: tuple[bytes, ...] | None = None
    copies: list[Conversation] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        for name in ("q", "r", "s", "t"):
            val = getattr(self, name)
            if val is not None and len(val) != self.m:
                raise ConfigurationError(f"{name} has {len(val)} entries, expected {self.m}")


class ConversationProtocol(ABC):
    """Scalar (one-copy) protocol interface.

    ``accept`` takes no tape argument, which is what makes the protocol
    conversation-based.
    """

    @abstractmethod
    def tape_length(self, x: Instance) -> int:
        """Verifier coin budget per copy, in bytes."""

    @abstractmethod
    def _first(self, x: Instance, tape: bytes) -> bytes: ...

    @abstractmethod
    def _second(self, x: Instance, tape: bytes, r: bytes) -> bytes: ...

    @abstractmethod
    def accept(self, x: Instance, q: bytes, r: bytes, s: bytes, t: bytes) -> bool: ...

    def _check_tape(self, x: Instance, tape: bytes) -> None:
        want = self.tape_length(x)
        if len(tape) != want:
            raise ConfigurationError(f"tape has {len(tape)} bytes, protocol needs {want}")

    def first_challenge(self, x: Instance, tape: bytes) -> bytes:
        self._check_tape(x, tape)
        return self._first(x, tape)

    def second_challenge(self, x: Instance, tape: bytes, r: bytes) -> bytes:
        self._check_tape(x, tape)
        return self._second(x, tape, r)


def _check_m(*blocks: Sequence) -> int:
    m = len(blocks[0])
    if m < 1:
        raise ConfigurationError("blocks need at least one copy")
    for b in blocks[1:]:
        if len(b) != m:
            raise ConfigurationError(f"block length mismatch: {len(b)} != {m}")
    return m


def block_first_challenge(
    proto: ConversationProtocol, x: Instance, tapes: Sequence[bytes]
) -> tuple[bytes, ...]:
    _check_m(tapes)
    return tuple(proto.first_challenge(x, R) for R in tapes)


def block_second_challenge(
    proto: ConversationProtocol, x: Instance, tapes: Sequence[bytes], rs: Sequence[bytes]
) -> tuple[bytes, ...]:
    _check_m(tapes, rs)
    return tuple(proto.second_challenge(x, R, r) for R, r in zip(tapes, rs))


def block_accept(
    proto: ConversationProtocol,
    x: Instance,
    qs: Sequence[bytes],
    rs: Sequence[bytes],
    ss: Sequence[bytes],
    ts: Sequence[bytes],
) -> bool:
    _check_m(qs, rs, ss, ts)
    return all(proto.accept(x, q, r, s, t) for q, r, s, t in zip(qs, rs, ss, ts))
