"""Shared domain types: modalities, documents, queries, corpora, judgments."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ValidationError(ValueError):
    """Base for semantic errors: bad config, missing data, broken invariants."""


class Modality(Enum):
    TEXT = "Text"
    IMAGE = "Image"
    SCREENSHOT = "Screenshot"
    AUDIO = "Audio"
    VIDEO = "Video"

    @classmethod
    def parse(cls, tag: str) -> "Modality":
        for m in cls:
            if m.value == tag:
                return m
        raise UnknownModalityError(tag)

    def __str__(self) -> str:
        return self.value


class Role(Enum):
    """Whether a stored record is a query embedding or a document part."""

    QUERY = "Query"
    DOCUMENT_PART = "DocumentPart"

    @classmethod
    def parse(cls, tag: str) -> "Role":
        for r in cls:
            if r.value == tag:
                return r
        raise ValidationError(f"unknown role tag {tag!r}")

    def __str__(self) -> str:
        return self.value


class UnknownModalityError(ValidationError):
    def __init__(self, tag: str):
        super().__init__(f"unknown modality tag {tag!r}")
        self.tag = tag


class DimensionMismatch(ValidationError):
    def __init__(self, expected: int, got: int, what: str = "embedding"):
        super().__init__(f"{what} has dimension {got}, expected {expected}")
        self.expected = expected
        self.got = got


class MissingPart(ValidationError):
    def __init__(self, doc_id: str, modality):
        super().__init__(f"document {doc_id!r} has no {modality} part")
        self.doc_id = doc_id
        self.modality = modality


def as_vector(values, dtype=np.float32) -> np.ndarray:
    """Coerce to a 1-D array of the requested float dtype."""
    v = np.asarray(values, dtype=dtype)
    if v.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Document:
    """One corpus entry: per-modality embeddings plus its modality set."""

    id: str
    parts: dict[Modality, np.ndarray]
    modality_set: frozenset[Modality] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.modality_set is None:
            object.__setattr__(self, "modality_set", frozenset(self.parts))
        else:
            object.__setattr__(self, "modality_set", frozenset(self.modality_set))

    def part(self, modality: Modality) -> np.ndarray:
        return self.parts[modality]


@dataclass(frozen=True)
class Query:
    id: str
    embedding: np.ndarray
    modality: Modality = Modality.TEXT


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))

    def __len__(self) -> int:
        return len(self.documents)

    def ids(self) -> list[str]:
        return [d.id for d in self.documents]


@dataclass
class Qrels:
    """Graded relevance judgments; absent pairs mean grade 0."""

    judgments: dict[tuple[str, str], int]
    max_grade: int = 1

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get((query_id, doc_id), 0)

    def judged_for(self, query_id: str) -> dict[str, int]:
        return {d: g for (q, d), g in self.judgments.items() if q == query_id}

    def query_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for q, _ in self.judgments:
            seen.setdefault(q)
        return list(seen)


@dataclass(frozen=True)
class Violation:
    doc_id: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.doc_id}: {self.message}"


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check corpus invariants; returns one violation per broken rule.

    Side-effect free and idempotent; an empty report means the corpus is
    well formed.
    """
    violations: list[Violation] = []
    if len(corpus.documents) == 0:
        violations.append(Violation("", "empty-corpus", "corpus has no documents"))
    if corpus.dimension < 1:
        violations.append(
            Violation("", "bad-dimension", f"dimension must be >= 1, got {corpus.dimension}")
        )

    seen: set[str] = set()
    for doc in corpus.documents:
        if doc.id in seen:
            violations.append(Violation(doc.id, "duplicate-id", "document id appears more than once"))
        seen.add(doc.id)

        part_keys = frozenset(doc.parts)
        if not part_keys:
            violations.append(Violation(doc.id, "empty-modality-set", "document has no parts"))
        if doc.modality_set != part_keys:
            violations.append(
                Violation(
                    doc.id,
                    "modality-set-mismatch",
                    f"modality_set {sorted(m.value for m in doc.modality_set)} != "
                    f"part keys {sorted(m.value for m in part_keys)}",
                )
            )
        for modality, vec in doc.parts.items():
            if vec.ndim != 1 or vec.shape[0] != corpus.dimension:
                violations.append(
                    Violation(
                        doc.id,
                        "dimension-mismatch",
                        f"{modality} part has shape {vec.shape}, corpus dimension is {corpus.dimension}",
                    )
                )
            if not np.all(np.isfinite(vec)):
                violations.append(
                    Violation(doc.id, "non-finite", f"{modality} part contains NaN or Inf")
                )
    return violations
