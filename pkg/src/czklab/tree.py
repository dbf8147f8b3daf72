"""Proof trees rebuilt from a trace, address classes, snakes and weights.

A vertex is one distinct r-prefix: the a-th vertex created at level i has
address (i, a).  A vertex is activated once its s-block is issued and
resolved once its t-block is accepted.  Resolution counts as activation,
and a resolved child means its parent's s-block was computed, so the
parent counts as activated too.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .adversary import ROOT_ID, AdversarialVerifier, TraceRecord, history_digest
from .params import WeightParams
from .protocol import StructuralViolation, TreeCorruption, encode_block

log = logging.getLogger(__name__)


class AddressClass(str, Enum):
    GOOD = "good"
    BAD = "bad"
    NEITHER = "neither"


@dataclass
class Vertex:
    vid: str
    level: int
    index: int
    parent: str
    gen_order: int
    activated: bool = False
    resolved: bool = False
    children: list[str] = field(default_factory=list)

    @property
    def address(self) -> tuple[int, int]:
        return (self.level, self.index)


@dataclass
class ProofTree:
    k: int
    N: int | None = None
    vertices: dict[str, Vertex] = field(default_factory=dict)
    by_address: dict[tuple[int, int], str] = field(default_factory=dict)
    root_children: list[str] = field(default_factory=list)
    level_count: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.level_count:
            self.level_count = [0] * (self.k + 1)

    def height(self, v: Vertex) -> int:
        return self.k - v.level + 1

    def children(self, vid: str) -> list[str]:
        if vid == ROOT_ID:
            return self.root_children
        return self.vertices[vid].children

    def siblings(self, v: Vertex) -> list[Vertex]:
        return [self.vertices[u] for u in self.children(v.parent) if u != v.vid]

    def add_vertex(self, vid: str, level: int, parent: str) -> Vertex:
        if vid in self.vertices:
            v = self.vertices[vid]
            if v.parent != parent or v.level != level:
                raise TreeCorruption(f"vertex {vid} reappears with a different parent")
            return v
        if level < 1 or level > self.k:
            raise TreeCorruption(f"level {level} outside 1..{self.k}")
        if parent != ROOT_ID and parent not in self.vertices:
            raise TreeCorruption(f"parent {parent} of {vid} unknown")
        self.level_count[level] += 1
        a = self.level_count[level]
        if self.N is not None and a > self.N:
            raise TreeCorruption(f"level {level} holds more than N={self.N} vertices")
        v = Vertex(vid, level, a, parent, len(self.vertices))
        self.vertices[vid] = v
        self.by_address[(level, a)] = vid
        self.children(parent).append(vid)
        return v

    def activate(self, vid: str) -> None:
        self.vertices[vid].activated = True

    def resolve(self, vid: str) -> None:
        v = self.vertices[vid]
        v.resolved = True
        v.activated = True
        if v.parent != ROOT_ID:
            self.vertices[v.parent].activated = True

    def vertex_at(self, address: tuple[int, int]) -> Vertex | None:
        vid = self.by_address.get(address)
        return self.vertices[vid] if vid else None

    def __len__(self) -> int:
        return len(self.vertices)

    def fingerprint(self) -> str:
        """Shape plus flags, canonical under gen order."""
        parts = []
        for v in sorted(self.vertices.values(), key=lambda u: u.gen_order):
            p = "r" if v.parent == ROOT_ID else str(self.vertices[v.parent].gen_order)
            parts.append(f"{p}:{int(v.activated)}{int(v.resolved)}")
        return ";".join(parts)


def build_tree(
    records: Iterable[TraceRecord],
    k: int,
    N: int | None = None,
    verifier: AdversarialVerifier | None = None,
) -> ProofTree:
    """Replay a trace into a tree.  Vertices register in query order, levels ascending."""
    tree = ProofTree(k, N)
    for rec in records:
        L = rec.length
        if L > 2 * k or len(rec.path) != min(L, k):
            raise TreeCorruption(f"record {rec.index} does not fit the schedule")
        parent = ROOT_ID
        for level, vid in enumerate(rec.path, start=1):
            tree.add_vertex(vid, level, parent)
            parent = vid
        _apply_events(tree, rec, k)
    if verifier is not None:
        _log_collisions(tree, verifier)
    return tree


def _apply_events(tree: ProofTree, rec: TraceRecord, k: int) -> None:
    L, path = rec.length, rec.path
    if L < k:
        if rec.kind != "next" or rec.phase != "q" or rec.session != L + 1:
            raise TreeCorruption(f"record {rec.index}: expected q-block of level {L + 1}")
        return
    if L == k:
        if rec.kind == "next" and rec.phase == "s" and rec.session == k:
            tree.activate(path[k - 1])
            return
        raise TreeCorruption(f"record {rec.index}: expected s-block of level {k}")
    d = L - k
    lowest_checked = k - d + 1
    if rec.kind == "abort":
        f = rec.failed_level
        if f is None or not lowest_checked <= f <= k:
            raise TreeCorruption(f"record {rec.index}: abort level out of range")
        for level in range(k, f, -1):
            tree.resolve(path[level - 1])
        return
    for level in range(k, lowest_checked - 1, -1):
        tree.resolve(path[level - 1])
    if rec.kind == "accept":
        if d != k:
            raise TreeCorruption(f"record {rec.index}: accept before the schedule ends")
        return
    if rec.kind != "next" or rec.phase != "s" or rec.session != k - d:
        raise TreeCorruption(f"record {rec.index}: expected s-block of level {k - d}")
    tree.activate(path[k - d - 1])


def _log_collisions(tree: ProofTree, verifier: AdversarialVerifier) -> int:
    """Count distinct histories that received identical coins; harmless but logged."""
    seen: dict[tuple, bytes] = {}
    collisions = 0
    for params in verifier._params.values():
        key = tuple(params.tapes)
        prev = seen.setdefault(key, params.history)
        if prev != params.history:
            collisions += 1
    if collisions:
        log.info("hash collisions between distinct histories: %d", collisions)
    return collisions


def hand_tree(k: int, rows: Sequence[tuple[str, str | None, bool, bool]], N: int | None = None) -> ProofTree:
    """Tree from (name, parent-name or None, activated, resolved) rows, in creation order."""
    tree = ProofTree(k, N)
    level_of = {ROOT_ID: 0}
    for name, parent, activated, resolved in rows:
        p = parent or ROOT_ID
        v = tree.add_vertex(name, level_of[p] + 1, p)
        level_of[name] = v.level
        v.activated = activated or resolved
        v.resolved = resolved
    return tree


def short_snake_tree(k: int, N: int) -> ProofTree:
    """Adversarial shape: a resolved spine with as many bad side chains as N allows.

    A side chain hangs off the spine; its head was activated but never
    answered, everything below it resolved, as a real run would leave it.
    Each chain is its own short snake headed by a bad vertex.
    """
    rows: list[tuple[str, str | None, bool, bool]] = []
    spine: list[str] = []
    for level in range(1, k + 1):
        name = f"s{level}"
        rows.append((name, spine[-1] if spine else None, True, True))
        spine.append(name)
    width = (N - 1) // max(1, k - 1)
    for start in range(2, k + 1):
        for w in range(width):
            parent = spine[start - 2]
            for level in range(start, k + 1):
                name = f"b{start}.{w}.{level}"
                rows.append((name, parent, True, level > start))
                parent = name
    return hand_tree(k, rows, N)


# classification ----------------------------------------------------------


def classify_vertex(tree: ProofTree, v: Vertex) -> AddressClass:
    sibling_active = any(s.activated for s in tree.siblings(v))
    if v.resolved and not sibling_active:
        return AddressClass.GOOD
    if v.activated and (not v.resolved or sibling_active):
        return AddressClass.BAD
    return AddressClass.NEITHER


def classify(tree: ProofTree, address: tuple[int, int]) -> AddressClass:
    v = tree.vertex_at(address)
    if v is None:
        return AddressClass.NEITHER
    return classify_vertex(tree, v)


def classes(tree: ProofTree) -> dict[str, AddressClass]:
    return {vid: classify_vertex(tree, v) for vid, v in tree.vertices.items()}


# snakes ------------------------------------------------------------------


@dataclass(frozen=True)
class Snake:
    body: tuple[str, ...]  # head first, ends at level k
    head_level: int
    k: int

    @property
    def head(self) -> str:
        return self.body[0]

    @property
    def height(self) -> int:
        return self.k - self.head_level + 1


def decompose_snakes(tree: ProofTree, cls: dict[str, AddressClass] | None = None) -> list[Snake]:
    cls = cls if cls is not None else classes(tree)
    interesting = {vid for vid, c in cls.items() if c is not AddressClass.NEITHER}

    def canonical_child(vid: str) -> str | None:
        kids = [u for u in tree.children(vid) if u in interesting]
        if not kids:
            return None
        return min(kids, key=lambda u: tree.vertices[u].gen_order)

    continuing = set()
    for vid in interesting:
        c = canonical_child(vid)
        if c is not None:
            continuing.add(c)
    snakes = []
    for vid in sorted(interesting, key=lambda u: tree.vertices[u].gen_order):
        if vid in continuing:
            continue
        body = [vid]
        cur = vid
        while tree.vertices[cur].level < tree.k:
            nxt = canonical_child(cur)
            if nxt is None:
                v = tree.vertices[cur]
                raise StructuralViolation(
                    f"interesting vertex {v.address} at level {v.level} < {tree.k} has no interesting child"
                )
            body.append(nxt)
            cur = nxt
        snakes.append(Snake(tuple(body), tree.vertices[vid].level, tree.k))
    return snakes


# weights and checks ------------------------------------------------------


@dataclass
class WeightReport:
    succeed: Fraction
    fail: Fraction
    interesting: Fraction
    contributions: dict[tuple[int, int], tuple[AddressClass, Fraction]]


def weights(tree: ProofTree, wp: WeightParams, cls: dict[str, AddressClass] | None = None) -> WeightReport:
    cls = cls if cls is not None else classes(tree)
    succeed = Fraction(0)
    fail = Fraction(0)
    contrib = {}
    for vid, v in tree.vertices.items():
        if v.index > wp.N:
            continue
        c = cls[vid]
        if c is AddressClass.NEITHER:
            continue
        w = wp.address_weight(v.level)
        contrib[v.address] = (c, w)
        if c is AddressClass.GOOD:
            succeed += w
        else:
            fail += w
    return WeightReport(succeed, fail, succeed + fail, contrib)


@dataclass
class CheckResult:
    ok: bool
    violations: list[str] = field(default_factory=list)
    margins: dict[str, Fraction] = field(default_factory=dict)


def check_snake_decomposition(
    tree: ProofTree, snakes: Sequence[Snake], cls: dict[str, AddressClass] | None = None
) -> CheckResult:
    cls = cls if cls is not None else classes(tree)
    out: list[str] = []
    interesting = {vid for vid, c in cls.items() if c is not AddressClass.NEITHER}
    owner: dict[str, int] = {}
    for n, s in enumerate(snakes):
        for vid in s.body:
            if vid in owner:
                out.append(f"vertex {tree.vertices[vid].address} in snakes {owner[vid]} and {n}")
            owner[vid] = n
            if vid not in interesting:
                out.append(f"snake {n} contains uninteresting vertex {tree.vertices[vid].address}")
        for a, b in zip(s.body, s.body[1:]):
            if tree.vertices[b].parent != a:
                out.append(f"snake {n} breaks parent/child at {tree.vertices[b].address}")
        if tree.vertices[s.body[-1]].level != tree.k:
            out.append(f"snake {n} ends above level {tree.k}")
    for vid in interesting - owner.keys():
        out.append(f"interesting vertex {tree.vertices[vid].address} in no snake")
    heads = {s.head for s in snakes}
    for vid, c in cls.items():
        if c is not AddressClass.BAD:
            continue
        v = tree.vertices[vid]
        if any(cls[s.vid] is AddressClass.BAD for s in tree.siblings(v)):
            continue
        if vid in owner and vid not in heads:
            out.append(f"bad vertex {v.address} without bad siblings is not a head")
    groups: dict[str, int] = defaultdict(int)
    for vid in owner:
        if vid not in heads:
            groups[tree.vertices[vid].parent] += 1
    for parent, count in groups.items():
        if count > 1:
            out.append(f"{count} siblings under {parent} lie in snake bodies")
    return CheckResult(not out, out)


def check_weight_bounds(
    tree: ProofTree, snakes: Sequence[Snake], wp: WeightParams, report: WeightReport | None = None
) -> CheckResult:
    """FAIL <= 2 sum c f(h)/N and INTERESTING >= sum c F(h)/N over snakes."""
    report = report or weights(tree, wp)
    fail_cap = sum((2 * wp.c * wp.f(s.height) / wp.N for s in snakes), Fraction(0))
    int_floor = sum((wp.c * wp.F(s.height) / wp.N for s in snakes), Fraction(0))
    margins = {"fail": fail_cap - report.fail, "interesting": report.interesting - int_floor}
    out = []
    if margins["fail"] < 0:
        out.append(f"FAIL {report.fail} exceeds snake allowance {fail_cap}")
    if margins["interesting"] < 0:
        out.append(f"INTERESTING {report.interesting} below snake floor {int_floor}")
    return CheckResult(not out, out, margins)


def check_fail_bound(
    tree: ProofTree,
    snakes: Sequence[Snake],
    wp: WeightParams,
    report: WeightReport | None = None,
    completed: bool = False,
) -> CheckResult:
    """FAIL <= INTERESTING/5 + 2c(10(beta+1))^beta, plus the full-height floor for completed runs."""
    report = report or weights(tree, wp)
    rhs = report.interesting / 5 + wp.short_snake_allowance()
    margins = {"fail_bound": rhs - report.fail}
    out = []
    if len(snakes) > wp.N:
        out.append(f"{len(snakes)} snakes exceed N={wp.N}")
    if report.fail > rhs:
        out.append(f"FAIL {report.fail} exceeds {rhs}")
    if completed:
        floor = wp.c * wp.F(wp.k) / wp.N
        margins["completed_floor"] = report.interesting - floor
        if report.interesting < floor:
            out.append(f"completed run has INTERESTING {report.interesting} < {floor}")
    return CheckResult(not out, out, margins)


# dumps -------------------------------------------------------------------


def dump_tree(tree: ProofTree, path: str | Path, verifier: AdversarialVerifier | None = None) -> None:
    cls = classes(tree)
    rows = []
    for v in sorted(tree.vertices.values(), key=lambda u: u.gen_order):
        row = {
            "address": list(v.address),
            "parent": None if v.parent == ROOT_ID else list(tree.vertices[v.parent].address),
            "activated": v.activated,
            "resolved": v.resolved,
            "gen_order": v.gen_order,
            "class": cls[v.vid].value,
            "r_digest": v.vid,
        }
        rows.append(row)
    if verifier is not None:
        by_vid = _params_by_vid(verifier)
        for row, v in zip(rows, sorted(tree.vertices.values(), key=lambda u: u.gen_order)):
            row.update(by_vid.get(v.vid, {}))
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _params_by_vid(verifier: AdversarialVerifier) -> dict[str, dict]:
    import hashlib

    out = {}
    for rprefix in verifier.vertex_address:
        vid = ROOT_ID
        for block in rprefix:
            vid = hashlib.blake2b(vid.encode() + encode_block(block), digest_size=12).hexdigest()
        params = verifier.level_params(len(rprefix), rprefix)
        tapes = b"".join(t or b"" for t in params.tapes)
        out[vid] = {
            "history_digest": history_digest(params.history),
            "tape_digest": history_digest(tapes),
            "q_digest": history_digest(encode_block(params.qs)),
        }
    return out
