"""End-to-end integration: the ranking engine exports fine-tuning corpora,
the service fine-tunes on them, and the engine's remote generation client
consumes the service over a real socket."""

import socket
import threading
import time

import pytest
import uvicorn

contrarank = pytest.importorskip("contrarank")

from contrarank.augment import (  # noqa: E402
    GenRequest,
    RemoteGenerator,
    build_ag_corpus,
    build_qg_corpus,
    write_corpus,
)
from contrarank.types import Label, QAPair, group_pairs, tokenize  # noqa: E402

from genservice.app import create_app  # noqa: E402


def exported_corpora(tmp_path):
    pairs = [
        QAPair("q1", tokenize("what is the capital of france"),
               tokenize("paris is the capital and most populous city of france"),
               Label(binary=1)),
        QAPair("q1", tokenize("what is the capital of france"),
               tokenize("french is a romance language"), Label(binary=0)),
        QAPair("q2", tokenize("who invented the telephone"),
               tokenize("alexander graham bell patented the telephone"),
               Label(binary=1)),
    ]
    groups = group_pairs(pairs)
    qg_path = str(tmp_path / "qg.tsv")
    ag_path = str(tmp_path / "ag.tsv")
    write_corpus(build_qg_corpus(groups), qg_path)
    write_corpus(build_ag_corpus(groups), ag_path)
    return qg_path, ag_path


@pytest.fixture
def live_service():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    app = create_app(inline_jobs=True)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_remote_generator_round_trip(live_service, tmp_path):
    import requests

    qg_path, ag_path = exported_corpora(tmp_path)
    for mode, corpus, model_id in (
        ("question", qg_path, "qg-default"),
        ("answer", ag_path, "ag-default"),
    ):
        resp = requests.post(
            f"{live_service}/v1/finetune",
            json={"mode": mode, "corpus_path": corpus, "model_id": model_id},
            timeout=10,
        )
        assert resp.status_code == 202

    gen = RemoteGenerator(live_service)
    question = gen.generate(
        GenRequest.for_mode("question", tokenize("paris is a city in france"))
    )
    assert not question.is_empty
    assert len(question.tokens) <= 30
    assert question.raw == "what is the capital of france"

    answer = gen.generate(
        GenRequest.for_mode("answer", tokenize("who invented the telephone"))
    )
    assert not answer.is_empty
    assert len(answer.tokens) <= 50
