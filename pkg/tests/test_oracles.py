import json
import math
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from helpers import small_back_pair, tiny_pos_lexicon, tiny_synonym_lexicon
from utterflip.errors import (
    MalformedResponseError,
    MissingAttributesError,
    NoProposalsError,
    OracleUnavailableError,
    ZeroVectorError,
)
from utterflip.oracles import (
    JUDGE_SYSTEM_PROMPT,
    HttpTransport,
    JudgeResponse,
    ListenerOutput,
    ObjectRef,
    ReferenceEmbedder,
    ReferenceJudge,
    ReferenceListener,
    ReferenceProposer,
    RemoteEmbedder,
    RemoteJudge,
    RemoteListener,
    RemoteProposer,
    SamplePair,
    SubprocessTransport,
    TextCompletionJudge,
    TextCompletionProposer,
    _TransportFailure,
    build_judge_messages,
    cosine,
    parse_judge_text,
    parse_proposer_text,
    reference_listener_score,
    remote_oracle_call,
    render_proposer_prompt,
)
from utterflip.text import tokenize

WORKER = str(Path(__file__).parent / "stdio_oracle.py")
LEX = tiny_pos_lexicon()


def utt(text):
    return tokenize(text, LEX)


class TestListenerOutput:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ListenerOutput(p_target=0.6, p_distractor=0.6)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ListenerOutput(p_target=1.2, p_distractor=-0.2)

    def test_prefers_target_strict(self):
        assert not ListenerOutput.from_p_target(0.5).prefers_target
        assert ListenerOutput.from_p_target(0.5 + 1e-9).prefers_target


class TestReferenceListener:
    def test_equal_scores_give_half(self):
        pair = small_back_pair()
        out = reference_listener_score(pair, utt("it has a chair"))
        assert out.p_target == 0.5

    def test_logistic_of_unit_margin(self):
        pair = SamplePair(
            "s", ObjectRef("t", {"tall": 1.0}), ObjectRef("d", {}), utt("a tall chair")
        )
        out = reference_listener_score(pair, pair.original, temperature=1.0)
        assert out.p_target == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-12)
        assert out.p_target == pytest.approx(0.7311, abs=1e-4)

    def test_swapping_objects_swaps_probabilities(self):
        pair = small_back_pair()
        swapped = SamplePair("s2", pair.distractor, pair.target, pair.original)
        a = reference_listener_score(pair, pair.original)
        b = reference_listener_score(swapped, pair.original)
        assert a.p_target == b.p_distractor
        assert a.p_distractor == b.p_target

    def test_token_order_irrelevant(self):
        pair = small_back_pair()
        a = reference_listener_score(pair, utt("small back it has a"))
        b = reference_listener_score(pair, utt("it has a small back"))
        assert a == b

    def test_duplicate_tokens_count_twice(self):
        pair = SamplePair(
            "s", ObjectRef("t", {"tall": 1.0}), ObjectRef("d", {}), utt("tall")
        )
        once = reference_listener_score(pair, utt("tall chair"))
        twice = reference_listener_score(pair, utt("tall tall"))
        assert twice.p_target > once.p_target

    def test_missing_attributes(self):
        pair = SamplePair("s", ObjectRef("t"), ObjectRef("d", {}), utt("small"))
        with pytest.raises(MissingAttributesError):
            reference_listener_score(pair, pair.original)

    def test_temperature_scales_margin(self):
        pair = small_back_pair()
        sharp = ReferenceListener(temperature=0.5).score(pair, pair.original)
        soft = ReferenceListener(temperature=4.0).score(pair, pair.original)
        assert sharp.p_target < soft.p_target < 0.5


class TestReferenceEmbedder:
    def test_unit_norm(self):
        emb = ReferenceEmbedder(dim=64)
        for text in ("small", "it has a small back", "word word word"):
            vec = emb.embed(utt(text))
            assert math.sqrt(sum(v * v for v in vec)) == pytest.approx(1.0, abs=1e-9)

    def test_identical_utterances_cosine_one(self):
        emb = ReferenceEmbedder(dim=64)
        a = emb.embed(utt("it has a small back"))
        b = emb.embed(utt("it has a small back"))
        assert cosine(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_tokens_cosine_zero(self):
        emb = ReferenceEmbedder(dim=4096)
        left, right = ("small", "back"), ("tiny", "chair")
        buckets = {emb._bucket(w)[0] for w in left + right}
        assert len(buckets) == 4  # no collisions, so orthogonality is exact
        assert cosine(emb.embed(utt("small back")), emb.embed(utt("tiny chair"))) == 0.0

    def test_deterministic_across_instances(self):
        a = ReferenceEmbedder(dim=32, seed=5).embed(utt("small back"))
        b = ReferenceEmbedder(dim=32, seed=5).embed(utt("small back"))
        assert a == b

    def test_seed_changes_embedding(self):
        a = ReferenceEmbedder(dim=32, seed=0).embed(utt("small back"))
        b = ReferenceEmbedder(dim=32, seed=1).embed(utt("small back"))
        assert a != b


class TestCosine:
    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVectorError):
            cosine((0.0, 0.0), (1.0, 0.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine((1.0,), (1.0, 0.0))

    def test_opposed_vectors(self):
        assert cosine((1.0, 0.0), (-1.0, 0.0)) == -1.0


class TestParseProposerText:
    def test_numbered_list(self):
        words = parse_proposer_text(
            "1. tiny 2. little 3. compact 4. petite 5. slight", "small", 5
        )
        assert words == ["tiny", "little", "compact", "petite", "slight"]

    def test_all_filtered_raises(self):
        with pytest.raises(NoProposalsError):
            parse_proposer_text("small, small, small", "small", 5)

    def test_quoted_word(self):
        assert parse_proposer_text('Here are words: "narrow"', "small", 5) == ["narrow"]

    def test_comma_list_after_colon(self):
        words = parse_proposer_text("Sure! Here you go: tiny, little, petite", "small", 5)
        assert words == ["tiny", "little", "petite"]

    def test_truncates_to_k(self):
        words = parse_proposer_text("1. a 2. b 3. c 4. d 5. e 6. f", "x", 3)
        assert words == ["a", "b", "c"]

    def test_duplicates_dropped(self):
        assert parse_proposer_text("1. tiny 2. tiny 3. little", "small", 5) == ["tiny", "little"]

    def test_numbered_items_with_descriptions(self):
        words = parse_proposer_text(
            "1) tiny - very small 2) slight, meaning delicate", "small", 5
        )
        assert words == ["tiny", "slight"]

    def test_uppercase_lowered(self):
        assert parse_proposer_text("1. Tiny 2. LITTLE", "small", 5) == ["tiny", "little"]


class TestBuiltinProposerAndJudge:
    def test_reference_proposer_sorted_synonyms(self):
        proposer = ReferenceProposer(tiny_synonym_lexicon(), LEX)
        assert proposer.propose("it has a WORD back", "small", 5) == ["little", "tiny"]

    def test_reference_proposer_respects_k(self):
        proposer = ReferenceProposer(tiny_synonym_lexicon(), LEX)
        assert proposer.propose("a WORD chair", "big", 1) == ["huge"]

    def test_reference_proposer_unknown_word(self):
        proposer = ReferenceProposer(tiny_synonym_lexicon(), LEX)
        assert proposer.propose("a WORD chair", "qwzx", 5) == []

    def test_text_completion_proposer_parses(self):
        proposer = TextCompletionProposer(lambda prompt: "1. tiny 2. little")
        assert proposer.propose("a WORD back", "small", 5) == ["tiny", "little"]

    def test_text_completion_proposer_renders_prompt(self):
        prompts = []

        def complete(prompt):
            prompts.append(prompt)
            return "1. tiny"

        TextCompletionProposer(complete).propose("a WORD back", "small", 5)
        assert prompts == [render_proposer_prompt("small", "a WORD back")]
        assert "a WORD back" in prompts[0]
        assert "the word small" in prompts[0]

    def test_reference_judge_identical_is_equivalent(self):
        verdict = ReferenceJudge().judge("it has a small back", "it has a small back")
        assert verdict.similarity == "equivalent"
        assert verdict.grammatical

    def test_reference_judge_flags_repeated_word(self):
        verdict = ReferenceJudge().judge("a small back", "a small small back")
        assert not verdict.grammatical
        assert "small" in verdict.grammar_reason

    def test_reference_judge_deterministic(self):
        judge = ReferenceJudge()
        a = judge.judge("a small back", "a tiny chair")
        b = judge.judge("a small back", "a tiny chair")
        assert a == b

    def test_judge_response_rejects_unknown_label(self):
        with pytest.raises(ValueError):
            JudgeResponse(True, "", "sorta similar", "")


class TestParseJudgeText:
    def test_headered_reply(self):
        raw = (
            "[Grammar]: The verb does not agree with the subject.\n"
            "[Contextual]: very similar\n"
            "[Reason]: Same shape words throughout."
        )
        response = parse_judge_text(raw)
        assert not response.grammatical
        assert "agree" in response.grammar_reason
        assert response.similarity == "very similar"
        assert response.similarity_reason == "Same shape words throughout."

    def test_headered_reply_empty_grammar_section(self):
        raw = "[Grammar]:\n[Contextual]: equivalent\n[Reason]: identical."
        response = parse_judge_text(raw)
        assert response.grammatical
        assert response.similarity == "equivalent"

    def test_bare_label_reply(self):
        response = parse_judge_text("similar")
        assert response.grammatical
        assert response.similarity == "similar"

    def test_objection_before_label(self):
        response = parse_judge_text("Missing article before noun. dissimilar")
        assert not response.grammatical
        assert response.similarity == "dissimilar"

    def test_longer_label_wins_at_same_position(self):
        assert parse_judge_text("very dissimilar").similarity == "very dissimilar"
        assert parse_judge_text("dissimilar").similarity == "dissimilar"

    def test_case_insensitive(self):
        assert parse_judge_text("Very Similar").similarity == "very similar"

    def test_no_label_is_malformed(self):
        with pytest.raises(MalformedResponseError):
            parse_judge_text("the sentences look alike to me")

    def test_text_completion_judge_round_trip(self):
        replies = iter(
            ["[Grammar]:\n[Contextual]: similar\n[Reason]: shared words."]
        )
        seen = []

        def complete(system, user):
            seen.append((system, user))
            return next(replies)

        judge = TextCompletionJudge(complete)
        response = judge.judge("a small back", "a tiny back")
        assert response.similarity == "similar"
        assert response.grammatical
        assert judge.raw_replies and "similar" in judge.raw_replies[0]
        system, user = seen[0]
        assert system == JUDGE_SYSTEM_PROMPT
        assert user.startswith("a small back;a tiny back")


class TestJudgePrompts:
    def test_pair_uses_semicolon_delimiter(self):
        system, user = build_judge_messages("a small back", "a tiny back")
        assert user.startswith("a small back;a tiny back")
        assert "delimiter" in system

    def test_instructions_present_in_order(self):
        _, user = build_judge_messages("r", "c")
        grammar = user.find("grammatically incorrect")
        contextual = user.find("semantic similarity")
        reason = user.find("key elements")
        assert 0 < grammar < contextual < reason

    def test_seven_labels_listed(self):
        _, user = build_judge_messages("r", "c")
        for label in ("equivalent", "very similar", "neutral", "unrelated"):
            assert label in user


class FakeTransport:
    """Plays back a list of responses; items may be exceptions."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []

    def call(self, request):
        self.requests.append(request)
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class TestRemoteCallValidation:
    def test_retries_then_succeeds(self):
        transport = FakeTransport(
            [
                _TransportFailure("down"),
                _TransportFailure("down"),
                {"p_target": 0.3, "p_distractor": 0.7},
            ]
        )
        out = remote_oracle_call(transport, {"kind": "listener"}, retries=3)
        assert out == ListenerOutput(0.3, 0.7)
        assert len(transport.requests) == 3

    def test_unavailable_after_r_failures(self):
        transport = FakeTransport([_TransportFailure("down", payload="boom")] * 3)
        with pytest.raises(OracleUnavailableError) as err:
            remote_oracle_call(transport, {"kind": "listener"}, retries=3)
        assert err.value.payload == "boom"

    def test_small_probability_skew_renormalized(self):
        transport = FakeTransport([{"p_target": 0.30000005, "p_distractor": 0.7}])
        out = remote_oracle_call(transport, {"kind": "listener"})
        assert out.p_target + out.p_distractor == pytest.approx(1.0, abs=1e-12)
        assert out.p_target == pytest.approx(0.3, abs=1e-6)

    def test_large_probability_skew_rejected(self):
        transport = FakeTransport([{"p_target": 0.3, "p_distractor": 0.8}])
        with pytest.raises(MalformedResponseError) as err:
            remote_oracle_call(transport, {"kind": "listener"})
        assert err.value.payload == {"p_target": 0.3, "p_distractor": 0.8}

    def test_out_of_range_probability_rejected(self):
        transport = FakeTransport([{"p_target": 1.4, "p_distractor": -0.4}])
        with pytest.raises(MalformedResponseError):
            remote_oracle_call(transport, {"kind": "listener"})

    def test_non_numeric_probability_rejected(self):
        transport = FakeTransport([{"p_target": "high", "p_distractor": 0.2}])
        with pytest.raises(MalformedResponseError):
            remote_oracle_call(transport, {"kind": "listener"})

    def test_embed_vector_validated(self):
        transport = FakeTransport([{"vector": [1.0, float("nan")]}])
        with pytest.raises(MalformedResponseError):
            remote_oracle_call(transport, {"kind": "embed"})

    def test_embed_ok(self):
        transport = FakeTransport([{"vector": [1, 2.5]}])
        assert remote_oracle_call(transport, {"kind": "embed"}) == (1.0, 2.5)

    def test_propose_filters_original_and_k(self):
        transport = FakeTransport([{"words": ["Tiny", "small", "tiny", "two words", "little", "slight"]}])
        words = remote_oracle_call(
            transport, {"kind": "propose", "original_word": "small", "k": 2}
        )
        assert words == ["tiny", "little"]

    def test_judge_label_normalized(self):
        transport = FakeTransport(
            [{"grammatical": True, "similarity": "  Very Similar "}]
        )
        response = remote_oracle_call(transport, {"kind": "judge"})
        assert response.similarity == "very similar"

    def test_judge_unknown_label_rejected(self):
        transport = FakeTransport([{"grammatical": True, "similarity": "meh"}])
        with pytest.raises(MalformedResponseError):
            remote_oracle_call(transport, {"kind": "judge"})


@pytest.fixture(scope="module")
def worker_pair():
    lexicon = tiny_pos_lexicon()
    return SamplePair(
        "w1", ObjectRef("t"), ObjectRef("d"), tokenize("it has a small back", lexicon)
    )


class TestSubprocessTransport:
    def test_listener_round_trip(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER])
        try:
            listener = RemoteListener(transport)
            low = listener.score(worker_pair, utt("it has a small back"))
            high = listener.score(worker_pair, utt("it has a tiny back"))
            assert low.p_target == pytest.approx(0.2)
            assert high.p_target == pytest.approx(0.8)
        finally:
            transport.close()

    def test_all_kinds_round_trip(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER])
        try:
            vec = RemoteEmbedder(transport).embed(utt("it has a tiny back"))
            assert vec == (5.0, 1.0, 0.0)
            words = RemoteProposer(transport).propose("a WORD back", "tiny", 5)
            assert words == ["little", "compact", "petite", "slight"]
            verdict = RemoteJudge(transport).judge("a small back", "a bad back")
            assert not verdict.grammatical
            assert verdict.similarity == "similar"
        finally:
            transport.close()

    def test_skewed_probabilities_renormalized(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER, "skewed"])
        try:
            out = RemoteListener(transport).score(worker_pair, utt("a small back"))
            assert out.p_target + out.p_distractor == pytest.approx(1.0, abs=1e-12)
        finally:
            transport.close()

    def test_crash_recovery_respawns(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER, "crash2"])
        try:
            listener = RemoteListener(transport, retries=3)
            for _ in range(5):  # child dies every 2 replies; retries respawn it
                out = listener.score(worker_pair, utt("a small back"))
                assert out.p_target == pytest.approx(0.2)
        finally:
            transport.close()

    def test_garbage_output_is_malformed(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER, "garbage"])
        try:
            with pytest.raises(MalformedResponseError) as err:
                RemoteListener(transport).score(worker_pair, utt("a small back"))
            assert "not json" in err.value.payload
        finally:
            transport.close()

    def test_dead_command_unavailable(self, worker_pair):
        transport = SubprocessTransport([sys.executable, "-c", "import sys; sys.exit(1)"])
        try:
            with pytest.raises(OracleUnavailableError):
                RemoteListener(transport, retries=3).score(worker_pair, utt("a back"))
        finally:
            transport.close()

    def test_embedder_dimension_pinned(self, worker_pair):
        class ShrinkingTransport:
            def __init__(self):
                self.dim = 4

            def call(self, request):
                self.dim -= 1
                return {"vector": [1.0] * self.dim}

        embedder = RemoteEmbedder(ShrinkingTransport())
        embedder.embed(utt("a back"))
        with pytest.raises(MalformedResponseError):
            embedder.embed(utt("a seat"))


class _Handler(BaseHTTPRequestHandler):
    fail_times = 0

    def do_POST(self):
        cls = type(self)
        if cls.fail_times > 0:
            cls.fail_times -= 1
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        words = body["utterance"].split()
        reply = {"p_target": 0.8 if "tiny" in words else 0.2}
        reply["p_distractor"] = 1.0 - reply["p_target"]
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/oracle"
    server.shutdown()
    thread.join(timeout=5)


class TestHttpTransport:
    def test_round_trip(self, http_server, worker_pair):
        _Handler.fail_times = 0
        listener = RemoteListener(HttpTransport(http_server))
        out = listener.score(worker_pair, utt("it has a tiny back"))
        assert out.p_target == pytest.approx(0.8)

    def test_transient_500_retried(self, http_server, worker_pair):
        _Handler.fail_times = 2
        listener = RemoteListener(HttpTransport(http_server), retries=3)
        out = listener.score(worker_pair, utt("a small back"))
        assert out.p_target == pytest.approx(0.2)

    def test_three_500s_with_three_retries_unavailable(self, http_server, worker_pair):
        _Handler.fail_times = 3
        listener = RemoteListener(HttpTransport(http_server), retries=3)
        with pytest.raises(OracleUnavailableError):
            listener.score(worker_pair, utt("a small back"))

    def test_unreachable_endpoint(self, worker_pair):
        listener = RemoteListener(HttpTransport("http://127.0.0.1:9/oracle", timeout=0.2), retries=2)
        with pytest.raises(OracleUnavailableError):
            listener.score(worker_pair, utt("a small back"))


class TestConcurrency:
    def test_subprocess_serializes_parallel_callers(self, worker_pair):
        transport = SubprocessTransport([sys.executable, WORKER])
        listener = RemoteListener(transport)
        errors = []

        def hammer():
            try:
                for _ in range(20):
                    out = listener.score(worker_pair, utt("it has a tiny back"))
                    assert out.p_target == pytest.approx(0.8)
            except Exception as exc:  # noqa: BLE001 - collect for the main thread
                errors.append(exc)

        threads = [threading.Thread(target=hammer) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        transport.close()
        assert errors == []
