from __future__ import annotations

import numpy as np
import pytest

from mixsearch.core import Corpus, Document, Modality, Qrels, Query

# One line per release criterion, filled in by test_acceptance.report and
# echoed after the run (terminal summary is never capture-swallowed).
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_doc(doc_id: str, text=None, image=None) -> Document:
    parts = {}
    if text is not None:
        parts[Modality.TEXT] = np.asarray(text, dtype=np.float32)
    if image is not None:
        parts[Modality.IMAGE] = np.asarray(image, dtype=np.float32)
    return Document(id=doc_id, parts=parts)


def make_query(qid: str, vec) -> Query:
    return Query(id=qid, embedding=np.asarray(vec, dtype=np.float32), modality=Modality.TEXT)


@pytest.fixture
def tiny_corpus() -> Corpus:
    docs = (
        make_doc("d1", text=[1.0, 0.0, 0.0]),
        make_doc("d2", text=[0.0, 1.0, 0.0]),
        make_doc("d3", text=[0.0, 0.0, 1.0]),
    )
    return Corpus(documents=docs, dimension=3)


@pytest.fixture
def paired_corpus() -> tuple[Corpus, list[Query], Qrels]:
    rng = np.random.default_rng(7)
    docs = []
    queries = []
    judgments = {}
    for i in range(8):
        base = rng.standard_normal(4)
        docs.append(
            make_doc(
                f"d{i}",
                text=base + 0.01 * rng.standard_normal(4),
                image=base + 0.01 * rng.standard_normal(4),
            )
        )
        queries.append(make_query(f"q{i}", base + 0.01 * rng.standard_normal(4)))
        judgments[(f"q{i}", f"d{i}")] = 1
    return Corpus(documents=tuple(docs), dimension=4), queries, Qrels(judgments=judgments)
