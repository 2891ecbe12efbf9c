import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from contrarank.augment import (
    CACHE_HEADER,
    CacheFormatError,
    GenCorpusRecord,
    GenerationError,
    GenRequest,
    OracleGenerator,
    RemoteGenerator,
    StubGenerator,
    augment_groups,
    build_ag_corpus,
    build_qg_corpus,
    cache_read,
    cache_write,
    synthesize,
    write_corpus,
)
from contrarank.types import QuestionGroup, tokenize


def make_group(qid="g1", question="how many awards has she won",
               positives=("she has won eleven awards for her music",),
               negatives=("she is a singer from california",
                          "her debut single topped the charts")):
    return QuestionGroup(
        question_id=qid,
        question=tokenize(question),
        positives=tuple(tokenize(p) for p in positives),
        negatives=tuple(tokenize(n) for n in negatives),
    )


class TestCorpusBuilders:
    def test_qg_pairing_direction(self):
        records = build_qg_corpus([make_group()])
        assert len(records) == 1
        assert records[0].source == "she has won eleven awards for her music [SEP]"
        assert records[0].target == "how many awards has she won"

    def test_ag_pairing_direction(self):
        records = build_ag_corpus([make_group()])
        assert records[0].source == "how many awards has she won [SEP]"
        assert records[0].target == "she has won eleven awards for her music"

    def test_group_without_positives_contributes_nothing(self):
        group = make_group(positives=())
        assert build_qg_corpus([group]) == []
        assert build_ag_corpus([group]) == []

    def test_one_record_per_positive(self):
        group = make_group(positives=("first good answer", "second good answer"))
        assert len(build_qg_corpus([group])) == 2
        assert len(build_ag_corpus([group])) == 2

    def test_counts_match_total_positives(self):
        groups = [
            make_group(qid="a", positives=("one answer",)),
            make_group(qid="b", positives=()),
            make_group(qid="c", positives=("x answer", "y answer", "z answer")),
        ]
        total = sum(len(g.positives) for g in groups)
        assert len(build_qg_corpus(groups)) == total
        assert len(build_ag_corpus(groups)) == total

    def test_record_requires_separator(self):
        with pytest.raises(ValueError):
            GenCorpusRecord(source="no separator here", target="t")

    def test_export_format(self, tmp_path):
        path = str(tmp_path / "corpus.tsv")
        write_corpus(build_qg_corpus([make_group()]), path)
        line = open(path, encoding="utf-8").read().rstrip("\n")
        source, target = line.split("\t")
        assert source.endswith(" [SEP]")
        assert target == "how many awards has she won"


class TestStubGenerator:
    def test_question_template(self):
        gen = StubGenerator()
        out = gen.generate(GenRequest.for_mode("question", tokenize("the cat sat on the mat")))
        assert out.raw == "what about cat sat mat?"
        assert out.tokens == ("what", "about", "cat", "sat", "mat")

    def test_answer_template(self):
        gen = StubGenerator()
        out = gen.generate(GenRequest.for_mode("answer", tokenize("short source text")))
        assert out.raw == "short source text ."
        assert out.tokens == ("short", "source", "text")

    def test_purity_across_instances(self):
        req = GenRequest.for_mode("question", tokenize("some words to work with"))
        assert StubGenerator().generate(req) == StubGenerator().generate(req)

    def test_question_cap_respected(self):
        long_source = tokenize(" ".join(f"thing{i}" for i in range(60)))
        out = StubGenerator().generate(GenRequest.for_mode("question", long_source))
        assert len(out.tokens) <= 30

    def test_answer_cap_respected(self):
        long_source = tokenize(" ".join(f"thing{i}" for i in range(80)))
        out = StubGenerator().generate(GenRequest.for_mode("answer", long_source))
        assert len(out.tokens) <= 50


class TestOracleGenerator:
    def test_question_carries_topic(self):
        gen = OracleGenerator()
        out = gen.generate(
            GenRequest.for_mode("question", tokenize("topic07 is covered here word03"))
        )
        assert "topic07" in out.tokens

    def test_answer_carries_topic(self):
        gen = OracleGenerator()
        out = gen.generate(
            GenRequest.for_mode("answer", tokenize("tell me about topic12 word01"))
        )
        assert "topic12" in out.tokens

    def test_missing_topic_raises(self):
        with pytest.raises(GenerationError):
            OracleGenerator().generate(
                GenRequest.for_mode("question", tokenize("no latent token at all"))
            )


class TestSynthesize:
    def test_full_synthesis_alignment(self):
        group = make_group()
        aug = synthesize(group, StubGenerator())
        assert aug.synth_answer is not None
        assert len(aug.synth_questions) == len(group.negatives)
        assert [j for j, _ in aug.synth_questions] == list(range(len(group.negatives)))

    def test_qg_only(self):
        aug = synthesize(make_group(), StubGenerator(), enable_ag=False)
        assert aug.synth_answer is None
        assert len(aug.synth_questions) == 2

    def test_ag_only(self):
        aug = synthesize(make_group(), StubGenerator(), enable_qg=False)
        assert aug.synth_answer is not None
        assert aug.synth_questions == ()

    def test_caps_enforced(self):
        group = make_group(
            question=" ".join(f"q{i}" for i in range(70)),
            negatives=(" ".join(f"n{i}" for i in range(70)),),
        )
        aug = synthesize(group, StubGenerator())
        assert len(aug.synth_answer.tokens) <= 50
        assert all(len(t.tokens) <= 30 for _, t in aug.synth_questions)

    def test_no_negatives_precondition(self):
        group = make_group(negatives=())
        with pytest.raises(ValueError):
            synthesize(group, StubGenerator())
        aug = synthesize(group, StubGenerator(), enable_qg=False, enable_ag=False)
        assert not aug.has_synthesis


class FailingGenerator:
    def generate(self, request):
        raise GenerationError("backend down")


class TestAugmentGroups:
    def test_fallback_on_failure(self):
        groups = [make_group(qid="a"), make_group(qid="b")]
        augmented, summary = augment_groups(groups, FailingGenerator())
        assert [a.base.question_id for a in augmented] == ["a", "b"]
        assert all(not a.has_synthesis for a in augmented)
        assert summary.failed == ["a", "b"]

    def test_groups_without_negatives_skipped(self):
        groups = [make_group(qid="a", negatives=()), make_group(qid="b")]
        augmented, summary = augment_groups(groups, StubGenerator())
        assert summary.skipped == ["a"]
        assert summary.ok == ["b"]
        assert not augmented[0].has_synthesis

    def test_parallel_join_order_matches_sequential(self):
        groups = [make_group(qid=f"g{i}") for i in range(8)]
        seq, _ = augment_groups(groups, StubGenerator(), jobs=1)
        par, _ = augment_groups(groups, StubGenerator(), jobs=4)
        assert seq == par


class TestCache:
    def test_round_trip_identity(self, tmp_path):
        groups = [make_group(qid="a"), make_group(qid="b", positives=())]
        augmented, _ = augment_groups(groups, StubGenerator())
        path = str(tmp_path / "cache.txt")
        cache_write(augmented, path)
        assert cache_read(path, groups) == augmented

    def test_header_written(self, tmp_path):
        path = str(tmp_path / "cache.txt")
        cache_write([], path)
        assert open(path, encoding="utf-8").read() == CACHE_HEADER + "\n"

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "cache.txt"
        path.write_text("%BIGCACHE v9\n", encoding="utf-8")
        with pytest.raises(CacheFormatError, match="line 1"):
            cache_read(str(path), [make_group()])

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "cache.txt"
        path.write_text(CACHE_HEADER + "\nnot json at all\n", encoding="utf-8")
        with pytest.raises(CacheFormatError, match="line 2"):
            cache_read(str(path), [make_group()])

    def test_unknown_question_id_rejected(self, tmp_path):
        path = tmp_path / "cache.txt"
        record = {"question_id": "ghost", "synth_answer": None, "synth_questions": []}
        path.write_text(CACHE_HEADER + "\n" + json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(CacheFormatError, match="ghost"):
            cache_read(str(path), [make_group()])

    def test_out_of_range_negative_index_rejected(self, tmp_path):
        group = make_group(qid="a")
        path = tmp_path / "cache.txt"
        record = {"question_id": "a", "synth_answer": None, "synth_questions": [[9, "text"]]}
        path.write_text(CACHE_HEADER + "\n" + json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(CacheFormatError, match="out of range"):
            cache_read(str(path), [group])


class MockGenerateHandler(BaseHTTPRequestHandler):
    """Scripted /v1/generate contract: 200 with non-empty capped text, 422
    on empty source, 404 on unknown model. First N requests can be scripted
    to fail with 503 to exercise client retries."""

    failures_remaining = 0

    def do_POST(self):
        if self.path != "/v1/generate":
            self.send_error(404)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if MockGenerateHandler.failures_remaining > 0:
            MockGenerateHandler.failures_remaining -= 1
            self._reply(503, {"error": "model loading"})
            return
        if not body.get("source", "").strip():
            self._reply(422, {"error": "empty source"})
            return
        if body.get("model_id") not in ("qg-default", "ag-default"):
            self._reply(404, {"error": "unknown model"})
            return
        cap = int(body["max_tokens"])
        words = ["generated"] + body["source"].split()
        self._reply(200, {"text": " ".join(words[:cap])})

    def _reply(self, status, doc):
        payload = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_service():
    server = ThreadingHTTPServer(("127.0.0.1", 0), MockGenerateHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    MockGenerateHandler.failures_remaining = 0
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join(timeout=5)


class TestRemoteGenerator:
    def test_generates_against_mock(self, mock_service):
        gen = RemoteGenerator(mock_service)
        out = gen.generate(GenRequest.for_mode("question", tokenize("some source words")))
        assert not out.is_empty
        assert len(out.tokens) <= 30

    def test_answer_cap_against_mock(self, mock_service):
        gen = RemoteGenerator(mock_service)
        long_source = tokenize(" ".join(f"w{i}" for i in range(80)))
        out = gen.generate(GenRequest.for_mode("answer", long_source))
        assert len(out.tokens) <= 50

    def test_retries_through_transient_failures(self, mock_service):
        MockGenerateHandler.failures_remaining = 2
        gen = RemoteGenerator(mock_service, retries=3, backoff=0.0)
        out = gen.generate(GenRequest.for_mode("question", tokenize("retry source")))
        assert not out.is_empty

    def test_persistent_failure_raises(self, mock_service):
        MockGenerateHandler.failures_remaining = 99
        gen = RemoteGenerator(mock_service, retries=2, backoff=0.0)
        with pytest.raises(GenerationError):
            gen.generate(GenRequest.for_mode("question", tokenize("never works")))

    def test_dead_endpoint_raises(self):
        gen = RemoteGenerator("http://127.0.0.1:1", retries=2, timeout=0.5, backoff=0.0)
        with pytest.raises(GenerationError):
            gen.generate(GenRequest.for_mode("question", tokenize("unreachable")))

    def test_pipeline_falls_back_when_remote_dead(self):
        gen = RemoteGenerator("http://127.0.0.1:1", retries=1, timeout=0.5, backoff=0.0)
        groups = [make_group(qid="a")]
        augmented, summary = augment_groups(groups, gen)
        assert summary.failed == ["a"]
        assert not augmented[0].has_synthesis
