"""Hash members that turn an interaction history into verifier coins.

Two modes:

* ``prg``: keyed blake2b over the encoded input plus a 4-byte chunk index,
  concatenated until the requested length.  Fast; used by every experiment.
* ``exact``: a t-wise independent family.  Each output chunk of w bits is a
  separate degree-(t-1) polynomial over GF(2^w), evaluated at a point derived
  from the input.  Distinct points give exactly independent uniform chunks.

``SplicedHash`` wraps a member and replaces one tape slot of the output for
one chosen input.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .kernels import poly_eval_gf256
from .protocol import ConfigurationError, encode_message

PRG_DIGEST = 64
GF64_REDUCTION = 0x1B  # x^64 = x^4 + x^3 + x + 1


def gf64_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> 64:
            a = (a & 0xFFFFFFFFFFFFFFFF) ^ GF64_REDUCTION
    return out


def gf64_horner(coeffs: tuple[int, ...], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = gf64_mul(acc, x) ^ c
    return acc


@dataclass(frozen=True)
class HashMember:
    mode: str
    t: int
    seed: bytes
    coefficients: tuple[tuple[int, ...], ...] = ()
    field_bits: int = 64

    def __post_init__(self) -> None:
        if self.mode not in ("prg", "exact"):
            raise ConfigurationError(f"unknown hash mode {self.mode!r}")
        if self.t < 1:
            raise ConfigurationError("t must be at least 1")
        if self.field_bits not in (8, 64):
            raise ConfigurationError("field_bits must be 8 or 64")
        if self.mode == "exact":
            for poly in self.coefficients:
                if len(poly) != self.t:
                    raise ConfigurationError("each chunk polynomial needs exactly t coefficients")

    @property
    def chunk_bytes(self) -> int:
        return self.field_bits // 8

    @property
    def max_out_len(self) -> int | None:
        if self.mode == "prg":
            return None
        return len(self.coefficients) * self.chunk_bytes

    def point(self, data: bytes) -> int:
        """Field element an input is evaluated at (exact mode)."""
        d = hashlib.blake2b(encode_message(data), digest_size=self.chunk_bytes).digest()
        return int.from_bytes(d, "big")

    def evaluate_points(self, x: int, out_len: int) -> bytes:
        """Exact-mode output at an explicit field point."""
        nchunks = -(-out_len // self.chunk_bytes)
        if nchunks > len(self.coefficients):
            raise ConfigurationError("output longer than the member's declared maximum")
        if self.field_bits == 8:
            arr = np.array(self.coefficients[:nchunks], dtype=np.uint8)
            vals = poly_eval_gf256(arr, np.array([x], dtype=np.uint8))[:, 0]
            return bytes(vals.tolist())[:out_len]
        out = b"".join(
            gf64_horner(poly, x).to_bytes(8, "big") for poly in self.coefficients[:nchunks]
        )
        return out[:out_len]

    def evaluate(self, data: bytes, out_len: int) -> bytes:
        if self.mode == "exact":
            return self.evaluate_points(self.point(data), out_len)
        enc = encode_message(data)
        out = bytearray()
        chunk = 0
        while len(out) < out_len:
            h = hashlib.blake2b(enc + struct.pack(">I", chunk), key=self.seed, digest_size=PRG_DIGEST)
            out += h.digest()
            chunk += 1
        return bytes(out[:out_len])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "t": self.t,
            "seed": self.seed.hex(),
            "field_bits": self.field_bits,
            "coefficients": [list(p) for p in self.coefficients],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HashMember":
        return cls(
            d["mode"],
            int(d["t"]),
            bytes.fromhex(d["seed"]),
            tuple(tuple(int(c) for c in p) for p in d.get("coefficients", [])),
            int(d.get("field_bits", 64)),
        )


def _seed_bytes(seed) -> bytes:
    if isinstance(seed, (bytes, bytearray)):
        raw = bytes(seed)
    else:
        raw = str(seed).encode()
    return hashlib.blake2b(raw, digest_size=32, person=b"czklab-member").digest()


def sample_member(
    seed, t: int, out_len: int, mode: str = "prg", field_bits: int = 64
) -> HashMember:
    """Member determined by ``seed``; ``out_len`` bytes is the largest output served."""
    if t < 1:
        raise ConfigurationError("t must be at least 1")
    key = _seed_bytes(seed)
    if mode == "prg":
        return HashMember("prg", t, key, (), field_bits)
    rng = random.Random(key)
    nchunks = -(-out_len // (field_bits // 8))
    coeffs = tuple(
        tuple(rng.getrandbits(field_bits) for _ in range(t)) for _ in range(nchunks)
    )
    return HashMember("exact", t, key, coeffs, field_bits)


@dataclass(frozen=True)
class SplicedHash:
    base: HashMember
    overrides: dict = field(default_factory=dict)
    m: int = 1

    def evaluate(self, data: bytes, out_len: int) -> bytes:
        out = self.base.evaluate(data, out_len)
        hit = self.overrides.get(bytes(data))
        if hit is None:
            return out
        j, R = hit
        if out_len != self.m * len(R):
            raise ConfigurationError("spliced output length must equal m * tape length")
        lo = (j - 1) * len(R)
        return out[:lo] + R + out[lo + len(R) :]

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "m": self.m,
            "overrides": [[k.hex(), j, R.hex()] for k, (j, R) in sorted(self.overrides.items())],
        }


AnyHash = Union[HashMember, SplicedHash]


def splice_override(H: AnyHash, data: bytes, j: int, R: bytes, m: int) -> SplicedHash:
    """New wrapper whose output on ``data`` carries ``R`` in tape slot ``j`` (1-based)."""
    if not 1 <= j <= m:
        raise ConfigurationError(f"coordinate j={j} outside 1..{m}")
    if isinstance(H, SplicedHash):
        if H.m != m:
            raise ConfigurationError("block size differs from the existing splice")
        if bytes(data) in H.overrides:
            raise ConfigurationError("input already carries an override")
        base, overrides = H.base, dict(H.overrides)
    else:
        base, overrides = H, {}
    overrides[bytes(data)] = (j, bytes(R))
    return SplicedHash(base, overrides, m)


def evaluate(H: AnyHash, data: bytes, out_len: int) -> bytes:
    return H.evaluate(data, out_len)
