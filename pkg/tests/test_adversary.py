from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czklab.adversary import (
    AdversarialVerifier,
    BlackBox,
    ReplyKind,
    ScheduleConfig,
    normalize_prefix,
    read_trace,
    write_trace,
)
from czklab.gi import GIProtocol, TAPE_LEN, prover_commit, prover_respond
from czklab.hashing import sample_member, splice_override
from czklab.protocol import CapExhausted, ConfigurationError, QueryError
from czklab.simulators import WitnessOracle, fresh_verifier, run_simulator


@pytest.fixture()
def x(iso6):
    return iso6[0].to_instance()


def honest_prefixes(pair, wit, verifier, seed=0):
    """Every prefix of one honest run, in schedule order."""
    rng = random.Random(seed)
    k = verifier.k
    prefix, states, out = [], [], []
    for _ in range(k):
        out.append(tuple(prefix))
        qs = verifier.respond(prefix).message
        made = [prover_commit(pair, q, wit, rng) for q in qs]
        prefix.append(tuple(r for r, _ in made))
        states.append([s for _, s in made])
    for level in range(k, 0, -1):
        out.append(tuple(prefix))
        ss = verifier.respond(prefix).message
        prefix.append(tuple(prover_respond(pair, st_, wit, s) for st_, s in zip(states[level - 1], ss)))
    out.append(tuple(prefix))
    return out


def test_empty_prefix_coins_are_hash_of_instance(x):
    v = fresh_verifier(x, 2, 2, 0)
    reply = v.respond(())
    assert reply.kind is ReplyKind.NEXT_CHALLENGE and reply.session == 1 and reply.phase == "q"
    assert [q.hex() for q in reply.message] == [
        "7938e45ac8864912779006e5b62f4790",
        "a02c7c8190ef1cfaecc4a5d003bd4fbc",
    ]
    raw = v.hash.evaluate(x.encode(), 2 * TAPE_LEN)
    proto = GIProtocol()
    assert reply.message == tuple(proto.first_challenge(x, raw[c * TAPE_LEN : (c + 1) * TAPE_LEN]) for c in range(2))


def test_honest_run_accepts_with_schedule_order(iso6, x):
    pair, wit = iso6
    v = fresh_verifier(x, 3, 2, 1)
    prefixes = honest_prefixes(pair, wit, v)
    replies = [v.respond(p) for p in prefixes]
    assert [(r.session, r.phase) for r in replies[:-1]] == [
        (1, "q"), (2, "q"), (3, "q"), (3, "s"), (2, "s"), (1, "s")
    ]
    assert replies[-1].kind is ReplyKind.ACCEPT


def test_answers_do_not_depend_on_query_order(iso6, x):
    pair, wit = iso6
    prefixes = honest_prefixes(pair, wit, fresh_verifier(x, 3, 2, 4), seed=3)
    prefixes += honest_prefixes(pair, wit, fresh_verifier(x, 3, 2, 4), seed=9)
    want = {p: fresh_verifier(x, 3, 2, 4).respond(p) for p in prefixes}
    for seed in range(5):
        order = prefixes[:]
        random.Random(seed).shuffle(order)
        v = fresh_verifier(x, 3, 2, 4)
        assert all(v.respond(p) == want[p] for p in order)


def test_s_and_t_never_feed_the_hash(iso6, x):
    pair, wit = iso6
    v = fresh_verifier(x, 2, 1, 2)
    full = honest_prefixes(pair, wit, v)[-1]
    # level-2 q depends only on r1; level-1 s depends only on r1 and r2
    assert v.respond(full[:1]).message == fresh_verifier(x, 2, 1, 2).respond(full[:1]).message
    bogus_t = ((b"\x00" * 6,),)
    assert v.respond(full[:3]).kind is ReplyKind.NEXT_CHALLENGE
    assert v.respond(full[:2] + bogus_t).kind is ReplyKind.ABORT


def test_bad_t_aborts_with_failed_level(iso6, x):
    pair, wit = iso6
    v = fresh_verifier(x, 2, 2, 5)
    full = honest_prefixes(pair, wit, v)[-1]
    broken = full[:2] + (tuple(b"\xff" * 6 for _ in range(2)),)
    reply = v.respond(broken)
    assert reply.kind is ReplyKind.ABORT and reply.failed_level == 2
    last_bad = full[:3] + (tuple(b"\xff" * 6 for _ in range(2)),)
    assert v.respond(last_bad).failed_level == 1


def test_vertex_registration(iso6, x):
    pair, wit = iso6
    v = fresh_verifier(x, 2, 1, 0)
    full = honest_prefixes(pair, wit, v)[-1]
    assert v.vertex_address == {full[:1]: (1, 1), full[:2]: (2, 1)}
    other = ((b"nope",),)
    v.respond(other)
    assert v.vertex_address[other] == (1, 2) and v.level_count == [0, 2, 1]


def test_query_errors_are_not_counted(x):
    box = BlackBox(fresh_verifier(x, 2, 2, 0), cap=5)
    for bad in ([b"ab"], [(b"a",)], [(b"a", 3)], [(b"a", b"b")] * 5):
        with pytest.raises(QueryError):
            box.query(bad)
    assert box.steps == 0 and box.records == []
    box.query(())
    assert box.steps == 1


def test_cap_is_enforced(x):
    box = BlackBox(fresh_verifier(x, 2, 1, 0), cap=3)
    for _ in range(3):
        box.query(())
    with pytest.raises(CapExhausted):
        box.query(())
    assert box.steps == 3 and len(box.records) == 3


def test_normalize_prefix_accepts_lists_and_bytearrays():
    assert normalize_prefix([[bytearray(b"a"), b"b"]], 2, 2) == ((b"a", b"b"),)


def test_schedule_config_rejects_nonpositive(proto):
    with pytest.raises(ConfigurationError):
        ScheduleConfig(0, 1, proto, sample_member(0, 1, 17))


def test_spliced_slot_uses_override_tape(x, proto):
    H = sample_member(b"base", 4, 2 * TAPE_LEN)
    R = bytes(range(TAPE_LEN))
    S = splice_override(H, x.encode(), 2, R, m=2)
    qs = AdversarialVerifier(ScheduleConfig(1, 2, proto, S), x).respond(()).message
    base = AdversarialVerifier(ScheduleConfig(1, 2, proto, H), x).respond(()).message
    assert qs[0] == base[0] and qs[1] == proto.first_challenge(x, R) != base[1]


def test_trace_roundtrip(tmp_path, iso6, x):
    box = BlackBox(fresh_verifier(x, 2, 2, 3))
    run = WitnessOracle(iso6[1]).run(x, box, 0)
    assert run.completed and run.steps == 5
    path = tmp_path / "trace.jsonl"
    write_trace(path, run.trace)
    back = read_trace(path)
    # in-memory records compute their reply digest lazily; compare serialised form
    assert [r.to_dict() for r in back] == [r.to_dict() for r in run.trace]
    assert all(len(r.digest()) == 32 for r in back)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 4), m=st.integers(1, 3))
def test_witness_run_always_accepts(iso6, seed, k, m):
    pair, wit = iso6
    x = pair.to_instance()
    run = run_simulator(WitnessOracle(wit), x, fresh_verifier(x, k, m, seed), seed)
    assert run.completed and run.steps == 2 * k + 1
