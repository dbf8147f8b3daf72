from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czklab.adversary import ROOT_ID, BlackBox, ReplyKind, TraceRecord
from czklab.gi import prover_commit, prover_respond
from czklab.params import weight_params
from czklab.protocol import StructuralViolation, TreeCorruption
from czklab.simulators import Rewinding, fresh_verifier, run_simulator
from czklab.tree import (
    AddressClass,
    ProofTree,
    Snake,
    build_tree,
    check_fail_bound,
    check_snake_decomposition,
    check_weight_bounds,
    classes,
    classify,
    decompose_snakes,
    dump_tree,
    hand_tree,
    weights,
)

G, B, N_ = AddressClass.GOOD, AddressClass.BAD, AddressClass.NEITHER


def test_single_resolved_path_is_good():
    t = hand_tree(2, [("a", None, True, True), ("b", "a", True, True)])
    assert classes(t) == {"a": G, "b": G}
    snakes = decompose_snakes(t)
    assert snakes == [Snake(("a", "b"), 1, 2)] and snakes[0].height == 2


def test_sibling_activation_makes_both_bad():
    t = hand_tree(1, [("a", None, True, True), ("b", None, True, False), ("c", None, False, False)])
    assert classes(t) == {"a": B, "b": B, "c": N_}
    assert classify(t, (1, 3)) is N_ and classify(t, (1, 9)) is N_


def test_resolved_alone_good_unresolved_alone_bad():
    t = hand_tree(1, [("a", None, True, False)])
    assert classes(t) == {"a": B}
    t = hand_tree(1, [("a", None, True, True), ("b", None, False, False)])
    assert classes(t) == {"a": G, "b": N_}


def test_resolution_marks_parent_activated():
    t = ProofTree(2)
    t.add_vertex("a", 1, ROOT_ID)
    t.add_vertex("b", 2, "a")
    t.resolve("b")
    assert t.vertices["a"].activated and not t.vertices["a"].resolved
    assert classes(t) == {"a": B, "b": G}


def test_canonical_child_is_earliest_interesting():
    t = hand_tree(
        2,
        [
            ("a", None, True, True),
            ("b0", "a", False, False),
            ("b1", "a", True, True),
            ("b2", "a", True, False),
        ],
    )
    snakes = decompose_snakes(t)
    assert [s.body for s in snakes] == [("a", "b1"), ("b2",)]
    assert check_snake_decomposition(t, snakes).ok


def test_interesting_vertex_without_interesting_child_is_structural():
    t = hand_tree(2, [("a", None, True, False), ("b", "a", False, False)])
    with pytest.raises(StructuralViolation):
        decompose_snakes(t)


def test_decomposition_checker_negative_controls():
    t = hand_tree(2, [("a", None, True, True), ("b", "a", True, True), ("c", "a", True, False)])
    good = decompose_snakes(t)
    assert check_snake_decomposition(t, good).ok
    missing = check_snake_decomposition(t, good[:1])
    assert not missing.ok and any("in no snake" in v for v in missing.violations)
    dup = check_snake_decomposition(t, good + good[:1])
    assert any("in snakes" in v for v in dup.violations)
    # any valid partition passes, not only the canonical one
    assert check_snake_decomposition(t, [Snake(("b",), 2, 2), Snake(("a", "c"), 1, 2)]).ok
    broken = check_snake_decomposition(t, [Snake(("a",), 1, 2), Snake(("b", "c"), 2, 2)])
    assert any("parent/child" in v for v in broken.violations)
    short = check_snake_decomposition(t, [Snake(("a",), 1, 2), Snake(("b",), 2, 2), Snake(("c",), 2, 2)])
    assert any("ends above" in v for v in short.violations)


def test_lone_bad_vertex_mid_body_is_flagged():
    # a is bad with no bad sibling, so it must head its snake
    t = hand_tree(3, [("r", None, True, True), ("a", "r", True, False), ("b", "a", True, True)])
    cls = classes(t)
    assert cls["a"] is B
    res = check_snake_decomposition(t, [Snake(("r", "a", "b"), 1, 3)], cls)
    assert any("not a head" in v for v in res.violations)


def test_weight_examples_exact():
    wp = weight_params(2, 1)
    assert (wp.beta, wp.c) == (1, Fraction(1, 3))
    wp2 = weight_params(2, 2)
    assert (wp2.beta, wp2.c) == (2, Fraction(1, 5))
    wp8 = weight_params(8, 1000)
    assert (wp8.beta, wp8.c) == (5, Fraction(1, 61776))
    t = hand_tree(2, [("a", None, True, True), ("b", "a", True, True)])
    rep = weights(t, wp)
    assert (rep.succeed, rep.fail, rep.interesting) == (Fraction(1), Fraction(0), Fraction(1))
    snakes = decompose_snakes(t)
    res = check_weight_bounds(t, snakes, wp, rep)
    assert res.ok and res.margins["interesting"] == 0 and res.margins["fail"] == Fraction(4, 3)
    assert check_fail_bound(t, snakes, wp, rep, completed=True).margins["completed_floor"] == 0


@pytest.mark.parametrize("k,N", [(2, 1), (2, 7), (3, 10), (5, 100), (8, 1000)])
def test_address_probabilities_sum_to_one(k, N):
    wp = weight_params(k, N)
    assert sum(N * wp.address_weight(i) for i in range(1, k + 1)) == 1


def test_weights_ignore_addresses_beyond_N():
    t = hand_tree(1, [("a", None, True, True), ("b", None, False, False), ("c", None, True, False)])
    rep = weights(t, weight_params(2, 2).__class__(1, 2, 1))
    assert (2, 1) not in rep.contributions and rep.contributions[(1, 1)][0] is B


def test_corruption_errors():
    t = ProofTree(2, N=1)
    t.add_vertex("a", 1, ROOT_ID)
    with pytest.raises(TreeCorruption):
        t.add_vertex("z", 2, "missing")
    with pytest.raises(TreeCorruption):
        t.add_vertex("z", 3, "a")
    with pytest.raises(TreeCorruption):
        t.add_vertex("a", 2, ROOT_ID)
    with pytest.raises(TreeCorruption):
        t.add_vertex("b", 1, ROOT_ID)
    rec = TraceRecord(0, 1, (), "next", 2, "q", None)
    with pytest.raises(TreeCorruption):
        build_tree([rec], 2)
    accept_early = TraceRecord(0, 3, ("a", "b"), "accept", 1, None, None)
    with pytest.raises(TreeCorruption):
        build_tree([accept_early], 2)


def test_dump_rows(tmp_path, iso6):
    pair, wit = iso6
    x = pair.to_instance()
    v = fresh_verifier(x, 2, 1, 0)
    run = run_simulator(Rewinding(), x, v, 1)
    tree = build_tree(run.trace, 2, verifier=v)
    out = tmp_path / "tree.jsonl"
    dump_tree(tree, out, v)
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == len(tree)
    assert {"address", "parent", "class", "history_digest"} <= rows[0].keys()
    assert rows[0]["parent"] is None and rows[0]["address"] == [1, 1]


def random_policy(box: BlackBox, pair, wit, rng: random.Random, steps: int) -> None:
    """Grow prefixes at random: fresh commits, honest openings, or garbage openings."""
    frontier = [((), [])]  # (prefix, prover states per level)
    for _ in range(steps):
        prefix, states = rng.choice(frontier)
        reply = box.query(prefix)
        if reply.kind is not ReplyKind.NEXT_CHALLENGE:
            continue
        if reply.phase == "q":
            made = [prover_commit(pair, q, wit, rng) for q in reply.message]
            nxt = prefix + (tuple(r for r, _ in made),)
            frontier.append((nxt, states + [[s for _, s in made]]))
        else:
            level = reply.session
            if rng.random() < 0.15:
                ts = tuple(b"\xff" * pair.v for _ in reply.message)
            else:
                ts = tuple(prover_respond(pair, s_, wit, s) for s_, s in zip(states[level - 1], reply.message))
            frontier.append((prefix + (ts,), states))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(2, 4), m=st.integers(1, 2), steps=st.integers(1, 60))
def test_random_policy_trees_satisfy_checks(iso6, seed, k, m, steps):
    pair, wit = iso6
    x = pair.to_instance()
    box = BlackBox(fresh_verifier(x, k, m, seed))
    random_policy(box, pair, wit, random.Random(seed), steps)
    tree = build_tree(box.records, k)
    N = max(1, max(tree.level_count))
    wp = weight_params(k, N, m)
    cls = classes(tree)
    snakes = decompose_snakes(tree, cls)
    rep = weights(tree, wp, cls)
    assert check_snake_decomposition(tree, snakes, cls).ok
    assert check_weight_bounds(tree, snakes, wp, rep).ok
    assert check_fail_bound(tree, snakes, wp, rep).ok
