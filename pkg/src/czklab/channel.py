"""The live honest verifier the splicing prover talks to.

In process it is a small state machine: q is available at once, one r may
be sent (answered with s), then one t (answered with accept/reject).  The
same machine can be served over a socket with 4-byte big-endian length
frames.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

from .protocol import ConversationProtocol, Instance, ProtocolViolation


@dataclass(frozen=True)
class ChannelState:
    r: bytes | None
    s: bytes | None
    t: bytes | None
    accepted: bool | None


class HonestVerifier:
    def __init__(self, protocol: ConversationProtocol, x: Instance, tape: bytes):
        self.protocol = protocol
        self.x = x
        self._tape = bytes(tape)
        self.q = protocol.first_challenge(x, self._tape)
        self._r: bytes | None = None
        self._s: bytes | None = None
        self._t: bytes | None = None
        self._accepted: bool | None = None

    def send_r(self, r: bytes) -> bytes:
        if self._r is not None:
            raise ProtocolViolation("second r sent on a one-shot channel")
        self._r = bytes(r)
        self._s = self.protocol.second_challenge(self.x, self._tape, self._r)
        return self._s

    def send_t(self, t: bytes) -> bool:
        if self._r is None:
            raise ProtocolViolation("t sent before r")
        if self._t is not None:
            raise ProtocolViolation("second t sent on a one-shot channel")
        self._t = bytes(t)
        self._accepted = self.protocol.accept(self.x, self.q, self._r, self._s, self._t)
        return self._accepted

    @property
    def r_sent(self) -> bool:
        return self._r is not None

    @property
    def accepted(self) -> bool | None:
        return self._accepted

    def state(self) -> ChannelState:
        return ChannelState(self._r, self._s, self._t, self._accepted)

    def analysis_oracle(self, r: bytes) -> bytes:
        """s this verifier would answer to ``r``.  Pure; never touches the channel.

        Only the analysis bookkeeping uses it, to keep a simulation going
        after the operational outcome is already fixed.
        """
        return self.protocol.second_challenge(self.x, self._tape, bytes(r))


# framed socket transport --------------------------------------------------

_LEN = struct.Struct(">I")
MAX_FRAME = 1 << 20


def send_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(_LEN.pack(len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return bytes(buf)


def recv_frame(sock: socket.socket) -> bytes:
    (n,) = _LEN.unpack(_recv_exact(sock, 4))
    if n > MAX_FRAME:
        raise ProtocolViolation(f"frame of {n} bytes exceeds limit")
    return _recv_exact(sock, n)


def serve_verifier(sock: socket.socket, verifier: HonestVerifier) -> bool | None:
    """Run one conversation: send q, read r, send s, read t, send verdict byte."""
    try:
        send_frame(sock, verifier.q)
        s = verifier.send_r(recv_frame(sock))
        send_frame(sock, s)
        ok = verifier.send_t(recv_frame(sock))
        send_frame(sock, b"\x01" if ok else b"\x00")
        return ok
    except ConnectionError:
        return None


class SocketChannel:
    """Client side with the same surface as ``HonestVerifier``."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.q = recv_frame(sock)
        self._r_sent = False
        self._t_sent = False
        self._accepted: bool | None = None

    @property
    def r_sent(self) -> bool:
        return self._r_sent

    @property
    def accepted(self) -> bool | None:
        return self._accepted

    def send_r(self, r: bytes) -> bytes:
        if self._r_sent:
            raise ProtocolViolation("second r sent on a one-shot channel")
        self._r_sent = True
        send_frame(self.sock, r)
        return recv_frame(self.sock)

    def send_t(self, t: bytes) -> bool:
        if not self._r_sent or self._t_sent:
            raise ProtocolViolation("t out of order on a one-shot channel")
        self._t_sent = True
        send_frame(self.sock, t)
        self._accepted = recv_frame(self.sock) == b"\x01"
        return self._accepted
