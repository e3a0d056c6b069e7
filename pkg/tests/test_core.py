from __future__ import annotations

import numpy as np
import pytest

from mixsearch.core import (
    Corpus,
    Document,
    Modality,
    Role,
    UnknownModalityError,
    ValidationError,
    validate_corpus,
)

from conftest import make_doc


def test_modality_parse_roundtrip():
    for m in Modality:
        assert Modality.parse(m.value) is m


def test_modality_parse_unknown_tag():
    with pytest.raises(UnknownModalityError):
        Modality.parse("Hologram")


def test_role_parse():
    assert Role.parse("Query") is Role.QUERY
    assert Role.parse("DocumentPart") is Role.DOCUMENT_PART
    with pytest.raises(ValidationError):
        Role.parse("Judge")


def test_wellformed_corpus_has_empty_report(tiny_corpus):
    assert validate_corpus(tiny_corpus) == []


def test_duplicate_id_flagged():
    docs = (make_doc("d1", text=[1.0, 0.0]), make_doc("d1", text=[0.0, 1.0]))
    report = validate_corpus(Corpus(documents=docs, dimension=2))
    assert [v.rule for v in report] == ["duplicate-id"]
    assert report[0].doc_id == "d1"


def test_modality_set_mismatch_flagged():
    doc = Document(
        id="d1",
        parts={
            Modality.TEXT: np.zeros(2, dtype=np.float32),
            Modality.IMAGE: np.zeros(2, dtype=np.float32),
        },
        modality_set=frozenset({Modality.TEXT}),
    )
    report = validate_corpus(Corpus(documents=(doc,), dimension=2))
    assert [v.rule for v in report] == ["modality-set-mismatch"]


def test_dimension_mismatch_flagged():
    docs = (make_doc("d1", text=[1.0, 0.0, 0.0]),)
    report = validate_corpus(Corpus(documents=docs, dimension=2))
    assert [v.rule for v in report] == ["dimension-mismatch"]


def test_non_finite_flagged():
    docs = (make_doc("d1", text=[1.0, np.nan]),)
    report = validate_corpus(Corpus(documents=docs, dimension=2))
    assert [v.rule for v in report] == ["non-finite"]


def test_empty_corpus_flagged():
    report = validate_corpus(Corpus(documents=(), dimension=4))
    assert [v.rule for v in report] == ["empty-corpus"]


def test_validate_is_idempotent(tiny_corpus):
    first = validate_corpus(tiny_corpus)
    second = validate_corpus(tiny_corpus)
    assert first == second == []
