from __future__ import annotations

import json
import math
import random
from collections import Counter
from pathlib import Path

import pytest

from pipedec.core import DomainError
from pipedec.mockmodel import (
    EOS_TOKEN,
    HiddenState,
    MockModel,
    decode_ppd,
    decode_sequential,
    early_topk,
    emit_trace,
    exactness_counterexample,
    extend_digest,
    final_token,
    forward_layer,
    prefix_digest,
    random_instance,
)
from pipedec.rng import mix64
from pipedec.trace import match_rate

GOLDEN_PATH = Path(__file__).parent / "data" / "golden_rollout.json"


def test_forward_layer_deterministic_and_layer_sensitive() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=1)
    h0 = HiddenState(0)
    assert forward_layer(model, h0, 1, 0) == forward_layer(model, h0, 1, 0)
    assert forward_layer(model, h0, 1, 0) != forward_layer(model, h0, 2, 0)
    assert forward_layer(model, h0, 1, 0) != forward_layer(model, h0, 1, 1)


def test_forward_layer_collision_probe() -> None:
    model = MockModel(vocab_size=16, depth=64, seed=5)
    rr = random.Random(0)
    seen = set()
    for _ in range(10_000):
        h = HiddenState(rr.getrandbits(64))
        layer = rr.randint(1, 64)
        digest = rr.getrandbits(64)
        seen.add((h.value, layer, digest, forward_layer(model, h, layer, digest).value))
    outputs = {item[3] for item in seen}
    assert len(outputs) == len(seen)  # 64-bit mixer: collisions would be astronomical


def test_layer_chain_reproduces_decoder_hidden() -> None:
    # chaining layers 1..d via the public op must give the state the
    # classifiers see inside decode_sequential
    model = MockModel(vocab_size=16, depth=10, seed=77)
    prompt = (4, 2)
    digest = prefix_digest(model, prompt)
    h = HiddenState(digest)
    for layer in range(1, model.depth + 1):
        h = forward_layer(model, h, layer, digest)
    assert decode_sequential(model, prompt, 1).tokens[0] == final_token(model, h)


def test_early_topk_basics() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=3)
    h = HiddenState(123456)
    full = early_topk(model, h, 16)
    assert sorted(full) == list(range(16))
    assert early_topk(model, h, 1) == full[:1]
    assert early_topk(model, h, 2) == full[:2]
    with pytest.raises(DomainError):
        early_topk(model, h, 17)
    with pytest.raises(DomainError):
        early_topk(model, h, 0)


def test_top1_frequency_is_uniform() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=31337)
    n = 16000
    counts = Counter(final_token(model, HiddenState(mix64(i))) for i in range(n))
    sigma = math.sqrt(n * (1 / 16) * (15 / 16))
    for v in range(16):
        assert abs(counts[v] - n / 16) <= 3 * sigma


def test_final_token_matches_top1() -> None:
    model = MockModel(vocab_size=64, depth=8, seed=9)
    for i in range(200):
        h = HiddenState(mix64(i))
        assert final_token(model, h) == early_topk(model, h, 1)[0]


def test_decode_sequential_single_token() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=11)
    res = decode_sequential(model, (1,), 1)
    assert len(res.tokens) == 1
    assert res.main_layer_count == 8
    assert res.spec_layer_count == 0
    assert res.match_trace.bits == ()


def test_decode_sequential_stops_at_eos() -> None:
    # scan for a seed whose very first greedy token is EOS
    found = None
    for seed in range(1000):
        model = MockModel(vocab_size=16, depth=8, seed=seed, eos_enabled=True)
        if decode_sequential(model, (1,), 4).tokens[0] == EOS_TOKEN:
            found = seed
            break
    assert found is not None
    model = MockModel(vocab_size=16, depth=8, seed=found, eos_enabled=True)
    res = decode_sequential(model, (1,), 8)
    assert res.tokens == (EOS_TOKEN,)
    assert res.main_layer_count == 8
    # without EOS handling the rollout keeps going
    plain = decode_sequential(
        MockModel(vocab_size=16, depth=8, seed=found, eos_enabled=False), (1,), 8
    )
    assert len(plain.tokens) == 8


def test_rollouts_depend_on_prompt() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=13)
    rr = random.Random(1)
    for _ in range(100):
        a = tuple(rr.randrange(16) for _ in range(3))
        b = tuple(rr.randrange(16) for _ in range(3))
        if a == b:
            continue
        assert decode_sequential(model, a, 8).tokens != decode_sequential(model, b, 8).tokens


def test_pipelined_equals_sequential_on_random_instances() -> None:
    for index in range(150):
        inst = random_instance(index, seed=424242)
        assert exactness_counterexample(inst) is None


def test_speculating_whole_vocab_always_matches() -> None:
    model = MockModel(vocab_size=8, depth=10, seed=21)
    res = decode_ppd(model, (2,), 6, d_bar=6, k=8)
    assert all(res.match_trace.bits)
    # one run: main work is d_bar*ell + (d - d_bar)
    assert res.main_layer_count == 6 * 6 + (10 - 6)
    assert res.spec_layer_count == 8 * (10 - 6) * 6


def test_full_depth_early_layer_saves_nothing() -> None:
    model = MockModel(vocab_size=16, depth=10, seed=23)
    res = decode_ppd(model, (1,), 5, d_bar=10, k=3)
    assert res.tokens == decode_sequential(model, (1,), 5).tokens
    assert res.main_layer_count == 10 * 5
    assert res.spec_layer_count == 0


def test_decode_ppd_rejects_bad_arguments() -> None:
    model = MockModel(vocab_size=16, depth=10, seed=1)
    with pytest.raises(DomainError):
        decode_ppd(model, (1,), 5, d_bar=4, k=3)  # below half depth
    with pytest.raises(DomainError):
        decode_ppd(model, (1,), 5, d_bar=8, k=17)
    with pytest.raises(DomainError):
        decode_ppd(model, (1,), 0, d_bar=8, k=3)


def test_handoff_state_equals_fresh_forward() -> None:
    model = MockModel(vocab_size=16, depth=12, seed=99)
    context = (5, 1, 7)
    digest = prefix_digest(model, context)
    assert extend_digest(model, prefix_digest(model, context[:-1]), 7) == digest
    window = 4
    h = HiddenState(digest)
    for layer in range(1, window + 1):
        h = forward_layer(model, h, layer, digest)  # sub-process part
    for layer in range(window + 1, model.depth + 1):
        h = forward_layer(model, h, layer, digest)  # main continues after handoff
    full = HiddenState(digest)
    for layer in range(1, model.depth + 1):
        full = forward_layer(model, full, layer, digest)
    assert h == full


def test_parallel_execution_mode_is_identical() -> None:
    model = MockModel(vocab_size=16, depth=12, seed=55, bias=0.8)
    serial = decode_ppd(model, (1, 2), 10, d_bar=7, k=3, parallel=False)
    threaded = decode_ppd(model, (1, 2), 10, d_bar=7, k=3, parallel=True)
    assert serial == threaded


def test_bias_dials_match_rate_up() -> None:
    base = MockModel(vocab_size=64, depth=12, seed=7, bias=0.0)
    biased = MockModel(vocab_size=64, depth=12, seed=7, bias=1.0)
    res_base = decode_ppd(base, (1,), 32, d_bar=6, k=1)
    res_biased = decode_ppd(biased, (1,), 32, d_bar=6, k=1)
    assert all(res_biased.match_trace.bits)
    assert sum(res_base.match_trace.bits) < len(res_base.match_trace.bits)
    # bias must not change the decoded tokens
    assert res_biased.tokens == decode_sequential(biased, (1,), 32).tokens


def test_emit_trace_mirrors_match_trace() -> None:
    model = MockModel(vocab_size=16, depth=12, seed=202, bias=0.5)
    res = decode_ppd(model, (4,), 20, d_bar=8, k=3)
    records = emit_trace(res, example_id="case", layer=8)
    assert len(records) == len(res.tokens) - 1
    member_bits = tuple(r.final in r.early_topk for r in records)
    assert member_bits == res.match_trace.bits
    assert [r.position for r in records] == list(range(1, len(res.tokens)))
    assert all(r.layer == 8 for r in records)


def test_emit_trace_requires_pipelined_result() -> None:
    model = MockModel(vocab_size=16, depth=8, seed=1)
    with pytest.raises(DomainError):
        emit_trace(decode_sequential(model, (1,), 4))


def test_emit_trace_full_vocab_rate_is_one() -> None:
    model = MockModel(vocab_size=8, depth=10, seed=3)
    res = decode_ppd(model, (2,), 10, d_bar=6, k=8)
    records = emit_trace(res)
    assert match_rate(records, 8).p_hat == 1.0


def test_independent_scorers_match_near_k_over_vocab() -> None:
    total = hits = 0
    for s in range(40):
        model = MockModel(vocab_size=16, depth=12, seed=1000 + s)
        res = decode_ppd(model, (s % 16,), 300, d_bar=6, k=1)
        total += len(res.match_trace.bits)
        hits += sum(res.match_trace.bits)
    sigma = math.sqrt((1 / 16) * (15 / 16) / total)
    assert abs(hits / total - 1 / 16) <= 3 * sigma


def test_golden_rollout_is_reproduced() -> None:
    golden = json.loads(GOLDEN_PATH.read_text())
    model = MockModel(
        vocab_size=golden["V"], depth=golden["d"], seed=golden["seed"], bias=golden["bias"]
    )
    prompt = tuple(golden["prompt"])
    seq = decode_sequential(model, prompt, len(golden["tokens"]))
    ppd = decode_ppd(model, prompt, len(golden["tokens"]), golden["d_bar"], golden["k"])
    assert list(seq.tokens) == golden["tokens"]
    assert list(ppd.tokens) == golden["tokens"]
    assert list(ppd.match_trace.bits) == golden["match_trace"]
    assert ppd.main_layer_count == golden["main_layer_count"]
    assert ppd.spec_layer_count == golden["spec_layer_count"]


def test_random_instance_is_deterministic() -> None:
    assert random_instance(5, 1) == random_instance(5, 1)
    assert random_instance(5, 1) != random_instance(6, 1)
