"""Graph isomorphism as a verifier-first four-message proof.

Graphs on v vertices are Python ints whose bit e is the e-th edge of the
upper triangle in row-major order: (0,1), (0,2), ..., (0,v-1), (1,2), ...
On the wire a graph is that int in big-endian bytes, ceil(E/8) long.

Messages per copy:

* q: the first 16 tape bytes, a nonce the prover must bind into r.
* r: commitment graph H followed by sha256(q || H-bytes).
* s: one byte, the challenge bit taken from the low bit of tape byte 16.
* t: a permutation (v bytes) mapping g_s onto H.
"""

from __future__ import annotations

import functools
import hashlib
import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .protocol import REJECT, ConfigurationError, ConversationProtocol, Instance

NONCE_LEN = 16
TAPE_LEN = NONCE_LEN + 1
DIGEST_LEN = 32
MAX_VERTICES = 12
MAX_EXHAUSTIVE = 8

Perm = tuple[int, ...]


def n_edges(v: int) -> int:
    return v * (v - 1) // 2


def graph_nbytes(v: int) -> int:
    return (n_edges(v) + 7) // 8


def edge_index(i: int, j: int, v: int) -> int:
    if i > j:
        i, j = j, i
    if i == j:
        raise ValueError("no self-loops")
    return i * v - i * (i + 1) // 2 + (j - i - 1)


@functools.lru_cache(maxsize=None)
def _edge_list(v: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(v) for j in range(i + 1, v))


@functools.lru_cache(maxsize=None)
def _index_table(v: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(edge_index(i, j, v) if i != j else -1 for j in range(v)) for i in range(v))


def from_edges(edges: Iterable[tuple[int, int]], v: int) -> int:
    mask = 0
    for i, j in edges:
        mask |= 1 << edge_index(i, j, v)
    return mask


def to_matrix(mask: int, v: int) -> np.ndarray:
    a = np.zeros((v, v), dtype=np.uint8)
    for e, (i, j) in enumerate(_edge_list(v)):
        if mask >> e & 1:
            a[i, j] = a[j, i] = 1
    return a


def from_matrix(a: np.ndarray) -> int:
    v = a.shape[0]
    if not np.array_equal(a, a.T) or np.any(np.diag(a)):
        raise ConfigurationError("adjacency must be symmetric with zero diagonal")
    return from_edges(((i, j) for i, j in _edge_list(v) if a[i, j]), v)


def permute(mask: int, perm: Sequence[int], v: int) -> int:
    """Relabel: the result has edge (perm[i], perm[j]) iff mask has (i, j)."""
    edges = _edge_list(v)
    idx = _index_table(v)
    out = 0
    while mask:
        low = mask & -mask
        i, j = edges[low.bit_length() - 1]
        out |= 1 << idx[perm[i]][perm[j]]
        mask ^= low
    return out


def compose(a: Sequence[int], b: Sequence[int]) -> Perm:
    """(a o b)[i] = a[b[i]]."""
    return tuple(a[x] for x in b)


def is_permutation(p: Sequence[int], v: int) -> bool:
    return len(p) == v and sorted(p) == list(range(v))


def random_perm(v: int, rng: random.Random) -> Perm:
    p = list(range(v))
    rng.shuffle(p)
    return tuple(p)


def graph_bytes(mask: int, v: int) -> bytes:
    return mask.to_bytes(graph_nbytes(v), "big")


def _all_perms(v: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(v))), dtype=np.intp)


def isomorphic_exhaustive(g0: int, g1: int, v: int) -> bool:
    if v > MAX_EXHAUSTIVE:
        raise ConfigurationError(f"exhaustive isomorphism check limited to v <= {MAX_EXHAUSTIVE}")
    a0, a1 = to_matrix(g0, v), to_matrix(g1, v)
    if a0.sum() != a1.sum():
        return False
    perms = _all_perms(v)
    relabelled = a0[perms[:, :, None], perms[:, None, :]]
    return bool(np.any(np.all(relabelled == a1[None], axis=(1, 2))))


def orbit(g: int, v: int) -> set[int]:
    """All relabellings of g."""
    if v > MAX_EXHAUSTIVE:
        raise ConfigurationError(f"orbit enumeration limited to v <= {MAX_EXHAUSTIVE}")
    return {permute(g, p, v) for p in itertools.permutations(range(v))}


@dataclass(frozen=True)
class GraphPair:
    v: int
    g0: int
    g1: int

    def __post_init__(self) -> None:
        if not 3 <= self.v <= MAX_VERTICES:
            raise ConfigurationError(f"v must lie in [3, {MAX_VERTICES}]")
        limit = 1 << n_edges(self.v)
        if not (0 <= self.g0 < limit and 0 <= self.g1 < limit):
            raise ConfigurationError("graph mask has bits beyond the edge count")

    def graph(self, b: int) -> int:
        return self.g1 if b else self.g0

    def to_instance(self) -> Instance:
        body = bytes([self.v]) + graph_bytes(self.g0, self.v) + graph_bytes(self.g1, self.v)
        return Instance(body, self.v)

    @classmethod
    def from_instance(cls, x: Instance) -> "GraphPair":
        return _pair_from_bytes(bytes(x.input_x))

    @classmethod
    def _decode(cls, raw: bytes) -> "GraphPair":
        if not raw:
            raise ConfigurationError("empty instance")
        v = raw[0]
        nb = graph_nbytes(v) if v >= 3 else 0
        if len(raw) != 1 + 2 * nb:
            raise ConfigurationError("instance bytes do not match vertex count")
        g0 = int.from_bytes(raw[1 : 1 + nb], "big")
        g1 = int.from_bytes(raw[1 + nb :], "big")
        return cls(v, g0, g1)


@functools.lru_cache(maxsize=256)
def _pair_from_bytes(raw: bytes) -> GraphPair:
    return GraphPair._decode(raw)


@dataclass(frozen=True)
class Witness:
    pi: Perm

    def valid_for(self, pair: GraphPair) -> bool:
        return is_permutation(self.pi, pair.v) and permute(pair.g0, self.pi, pair.v) == pair.g1


def _cycle(nodes: Sequence[int]) -> list[tuple[int, int]]:
    return [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]


def gen_instance(v: int, isomorphic: bool, seed: int) -> tuple[GraphPair, Witness | None]:
    """Seeded fixture pair.  Non-isomorphic pairs are checked exhaustively."""
    if v < 3:
        raise ConfigurationError("v must be at least 3")
    if v > MAX_VERTICES:
        raise ConfigurationError(f"v must be at most {MAX_VERTICES}")
    if not isomorphic and v > MAX_EXHAUSTIVE:
        raise ConfigurationError(
            f"non-isomorphic pairs need v <= {MAX_EXHAUSTIVE} for the exhaustive check"
        )
    rng = random.Random(f"gi-instance:{v}:{int(isomorphic)}:{seed}")
    if isomorphic:
        g0 = rng.getrandbits(n_edges(v))
        pi = random_perm(v, rng)
        pair = GraphPair(v, g0, permute(g0, pi, v))
        return pair, Witness(pi)
    if v >= 6:
        a = from_edges(_cycle(range(v)), v)
        b = from_edges(_cycle([0, 1, 2]) + _cycle(list(range(3, v))), v)
    else:
        a = from_edges(_cycle(range(v)), v)
        b = from_edges([(i, i + 1) for i in range(v - 1)], v)
    pair = GraphPair(v, permute(a, random_perm(v, rng), v), permute(b, random_perm(v, rng), v))
    if isomorphic_exhaustive(pair.g0, pair.g1, v):  # pragma: no cover - construction guarantees
        raise AssertionError("generated pair is unexpectedly isomorphic")
    return pair, None


def binding_digest(q: bytes, commit: bytes) -> bytes:
    return hashlib.sha256(q + commit).digest()


class GIProtocol(ConversationProtocol):
    def tape_length(self, x: Instance) -> int:
        return TAPE_LEN

    def _first(self, x: Instance, tape: bytes) -> bytes:
        return bytes(tape[:NONCE_LEN])

    def _second(self, x: Instance, tape: bytes, r: bytes) -> bytes:
        pair = GraphPair.from_instance(x)
        if _parse_commit(pair, bytes(tape[:NONCE_LEN]), r) is None:
            return REJECT
        return bytes([tape[NONCE_LEN] & 1])

    def accept(self, x: Instance, q: bytes, r: bytes, s: bytes, t: bytes) -> bool:
        try:
            pair = GraphPair.from_instance(x)
        except ConfigurationError:
            return False
        commit = _parse_commit(pair, q, r)
        if commit is None or len(q) != NONCE_LEN:
            return False
        if s not in (b"\x00", b"\x01"):
            return False
        perm = tuple(t)
        if not is_permutation(perm, pair.v):
            return False
        return permute(pair.graph(s[0]), perm, pair.v) == commit


def _parse_commit(pair: GraphPair, q: bytes, r: bytes) -> int | None:
    nb = graph_nbytes(pair.v)
    if len(r) != nb + DIGEST_LEN:
        return None
    body, digest = r[:nb], r[nb:]
    if binding_digest(q, body) != digest:
        return None
    mask = int.from_bytes(body, "big")
    if mask >> n_edges(pair.v):
        return None
    return mask


def encode_commit(pair: GraphPair, q: bytes, mask: int) -> bytes:
    body = graph_bytes(mask, pair.v)
    return body + binding_digest(q, body)


@dataclass(frozen=True)
class ProverCopyState:
    sigma: Perm
    commit: int
    q: bytes


def _coins_rng(coins) -> random.Random:
    if isinstance(coins, random.Random):
        return coins
    return random.Random(coins)


def prover_commit(
    pair: GraphPair, q: bytes, witness: Witness, coins=None, sigma: Sequence[int] | None = None
) -> tuple[bytes, ProverCopyState]:
    """Honest first answer: commit to sigma(g1)."""
    if not witness.valid_for(pair):
        raise ConfigurationError("witness does not map g0 onto g1")
    if sigma is None:
        sigma = random_perm(pair.v, _coins_rng(coins))
    sigma = tuple(sigma)
    if not is_permutation(sigma, pair.v):
        raise ConfigurationError("sigma is not a permutation")
    commit = permute(pair.g1, sigma, pair.v)
    return encode_commit(pair, q, commit), ProverCopyState(sigma, commit, bytes(q))


def prover_respond(pair: GraphPair, state: ProverCopyState, witness: Witness, s: bytes) -> bytes:
    if s == b"\x01":
        return bytes(state.sigma)
    if s == b"\x00":
        return bytes(compose(state.sigma, witness.pi))
    return REJECT


def guess_commit(
    pair: GraphPair, q: bytes, bit: int, rng: random.Random
) -> tuple[bytes, ProverCopyState]:
    """Witness-free commit that can answer only the guessed challenge ``bit``."""
    sigma = random_perm(pair.v, rng)
    commit = permute(pair.graph(bit), sigma, pair.v)
    return encode_commit(pair, q, commit), ProverCopyState(sigma, commit, bytes(q))


def guess_respond(state: ProverCopyState, bit: int, s: bytes) -> bytes | None:
    """Answer for a guessed commit, or None when the challenge missed."""
    if s != bytes([bit]):
        return None
    return bytes(state.sigma)


@dataclass(frozen=True)
class CheatingStrategy:
    commit: int
    answers: dict[int, Perm | None]
    acceptance: Fraction

    def message(self, pair: GraphPair, q: bytes) -> bytes:
        return encode_commit(pair, q, self.commit)

    def respond(self, s: bytes) -> bytes:
        ans = self.answers.get(s[0]) if len(s) == 1 else None
        return bytes(ans) if ans is not None else REJECT


def best_cheating_prover(pair: GraphPair, q: bytes = bytes(NONCE_LEN)) -> CheatingStrategy:
    """Exhaustive optimum over every commitment graph and both challenges."""
    v = pair.v
    if n_edges(v) > 21:
        raise ConfigurationError("exhaustive commitment search limited to v <= 7")
    maps: list[dict[int, Perm]] = [{}, {}]
    for p in itertools.permutations(range(v)):
        for b in (0, 1):
            maps[b].setdefault(permute(pair.graph(b), p, v), p)
    if set(maps[0]) & set(maps[1]):
        raise ConfigurationError("best_cheating_prover needs a non-isomorphic pair")
    best: CheatingStrategy | None = None
    for commit in range(1 << n_edges(v)):
        answers = {b: maps[b].get(commit) for b in (0, 1)}
        acc = Fraction(sum(a is not None for a in answers.values()), 2)
        if best is None or acc > best.acceptance:
            best = CheatingStrategy(commit, answers, acc)
    assert best is not None
    return best


def write_instances(path: str | Path, records: Iterable[tuple[GraphPair, Witness | None, bool]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair, wit, iso in records:
            rec = {
                "v": pair.v,
                "g0": graph_bytes(pair.g0, pair.v).hex(),
                "g1": graph_bytes(pair.g1, pair.v).hex(),
                "iso": iso,
                "witness": list(wit.pi) if wit else None,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_instances(path: str | Path) -> list[tuple[GraphPair, Witness | None, bool]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pair = GraphPair(rec["v"], int(rec["g0"], 16), int(rec["g1"], 16))
            wit = Witness(tuple(rec["witness"])) if rec.get("witness") else None
            out.append((pair, wit, bool(rec["iso"])))
    return out
