import pytest
from fastapi.testclient import TestClient

from genservice.app import create_app

QG_CORPUS = """\
she has won eleven awards for her music [SEP]\thow many awards has she won
the wall was finished in 1066 after the battle [SEP]\twhen was the battle of hastings
paris is the capital and most populous city of france [SEP]\twhat is the capital of france
the telephone was patented by alexander graham bell [SEP]\twho invented the telephone
"""

AG_CORPUS = """\
how many awards has she won [SEP]\tshe has won eleven awards for her music
when was the battle of hastings [SEP]\tthe battle of hastings was fought in 1066
what is the capital of france [SEP]\tparis is the capital and most populous city of france
who invented the telephone [SEP]\talexander graham bell patented the telephone in 1876
"""


@pytest.fixture
def qg_corpus_path(tmp_path):
    path = tmp_path / "qg_corpus.tsv"
    path.write_text(QG_CORPUS, encoding="utf-8")
    return str(path)


@pytest.fixture
def ag_corpus_path(tmp_path):
    path = tmp_path / "ag_corpus.tsv"
    path.write_text(AG_CORPUS, encoding="utf-8")
    return str(path)


@pytest.fixture
def client():
    """Service with jobs executed inline: a finished fine-tune is visible
    as soon as the submit call returns."""
    app = create_app(inline_jobs=True)
    with TestClient(app) as tc:
        yield tc


@pytest.fixture
def slow_client():
    """Service with a stretched fitting phase so tests can observe the
    queued/running states."""
    app = create_app(fit_delay_s=0.3)
    with TestClient(app) as tc:
        yield tc
    app.state.registry.shutdown()
