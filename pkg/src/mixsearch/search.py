"""Exact brute-force cosine top-k over an embedded corpus.

Documents are reduced to one vector each (identity for unimodal documents,
weighted fusion for multimodal ones), scored against the query in float64,
and selected with deterministic tie-breaking by ascending document id.
Score overrides replace the cosine of matching documents before ranking.

The scoring/selection kernels come from a compiled extension when present;
set MIXSEARCH_NO_EXT=1 to force the numpy fallback.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Corpus, DimensionMismatch, Modality, Query, ValidationError
from .calibration import CalibrationMeans, MeanKey, remove_gap
from .fusion import FusionSpec, fuse_calibrated, fuse_raw

if os.environ.get("MIXSEARCH_NO_EXT"):
    from . import _kernels as kernels
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels as kernels  # type: ignore[no-redef]

KERNEL_BACKEND = kernels.BACKEND

DEGENERATE_NORM = 1e-12

log = logging.getLogger("mixsearch.search")


class EmptyCorpus(ValidationError):
    pass


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class ScoreOverride:
    """Replace the score of matching documents with a fixed value."""

    value: float
    modality: Modality | None = None
    ids: frozenset[str] | None = None

    def matches(self, doc_id: str, modality_set: frozenset[Modality]) -> bool:
        if self.modality is not None and self.modality in modality_set:
            return True
        return self.ids is not None and doc_id in self.ids


@dataclass(frozen=True)
class EmbeddedCorpus:
    """One scoring-ready vector per document plus selection scaffolding."""

    ids: tuple[str, ...]
    matrix: np.ndarray  # (N, d) float64, C-contiguous
    norms: np.ndarray  # (N,) float64
    tie_rank: np.ndarray  # (N,) int64, position in ascending-id order
    modality_sets: tuple[frozenset[Modality], ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class RunResult:
    results: dict[str, list[ScoredDoc]]
    run_tag: str = "mixsearch"

    def query_ids(self) -> list[str]:
        return list(self.results)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(int(a.shape[0]), int(b.shape[0]))
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    na = float(np.sqrt(np.dot(x, x)))
    nb = float(np.sqrt(np.dot(y, y)))
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        return 0.0
    return float(np.dot(x, y) / (na * nb))


def _document_vector(doc, spec: FusionSpec, means: CalibrationMeans | None, calibrated: bool):
    if len(doc.parts) == 1:
        modality, vec = next(iter(doc.parts.items()))
        if calibrated:
            return remove_gap(vec, MeanKey.part(modality), means)
        return np.asarray(vec, dtype=np.float64)
    if calibrated:
        return fuse_calibrated(doc, spec, means)
    return fuse_raw(doc, spec)


def embed_corpus(
    corpus: Corpus,
    spec: FusionSpec | None = None,
    means: CalibrationMeans | None = None,
    calibrated: bool = False,
) -> EmbeddedCorpus:
    """Reduce every document to a single vector under the given pipeline."""
    if calibrated and means is None:
        raise ValidationError("calibrated embedding requires calibration means")
    spec = spec or FusionSpec()
    n = len(corpus.documents)
    matrix = np.empty((n, corpus.dimension), dtype=np.float64)
    modality_sets = []
    for i, doc in enumerate(corpus.documents):
        matrix[i] = _document_vector(doc, spec, means, calibrated)
        modality_sets.append(doc.modality_set)

    norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    degenerate = int(np.count_nonzero(norms < DEGENERATE_NORM))
    if degenerate:
        log.warning("%d of %d document vectors are degenerate (score pinned to 0)", degenerate, n)

    ids = tuple(doc.id for doc in corpus.documents)
    tie_rank = np.empty(n, dtype=np.int64)
    tie_rank[np.argsort(np.array(ids))] = np.arange(n, dtype=np.int64)
    return EmbeddedCorpus(
        ids=ids,
        matrix=np.ascontiguousarray(matrix),
        norms=norms,
        tie_rank=tie_rank,
        modality_sets=tuple(modality_sets),
    )


def override_mask(embedded: EmbeddedCorpus, override: ScoreOverride) -> np.ndarray:
    mask = np.zeros(len(embedded), dtype=bool)
    for i, doc_id in enumerate(embedded.ids):
        if override.matches(doc_id, embedded.modality_sets[i]):
            mask[i] = True
    return mask


def search_topk(
    query: Query,
    embedded: EmbeddedCorpus,
    k: int,
    overrides: tuple[ScoreOverride, ...] = (),
) -> list[ScoredDoc]:
    """Top min(k, N) documents, score descending, ties by ascending id."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if len(embedded) == 0:
        raise EmptyCorpus("cannot search an empty corpus")
    q = np.ascontiguousarray(np.asarray(query.embedding, dtype=np.float64))
    if q.shape[0] != embedded.matrix.shape[1]:
        raise DimensionMismatch(int(embedded.matrix.shape[1]), int(q.shape[0]), "query")

    scores = kernels.cosine_scores(embedded.matrix, embedded.norms, q)
    for override in overrides:
        mask = override_mask(embedded, override)
        scores[mask] = override.value

    idx = kernels.topk(scores, embedded.tie_rank, min(k, len(embedded)))
    return [
        ScoredDoc(doc_id=embedded.ids[i], score=float(scores[i]), rank=r + 1)
        for r, i in enumerate(idx)
    ]


def run_retrieval(
    queries: list[Query],
    corpus: Corpus,
    k: int,
    spec: FusionSpec | None = None,
    calibrated: bool = False,
    means: CalibrationMeans | None = None,
    overrides: tuple[ScoreOverride, ...] = (),
    run_tag: str = "mixsearch",
    threads: int = 1,
) -> RunResult:
    """Embed, optionally calibrate, and search every query; order preserved."""
    embedded = embed_corpus(corpus, spec=spec, means=means, calibrated=calibrated)
    if calibrated:
        queries = [
            Query(id=q.id, embedding=remove_gap(q.embedding, MeanKey.query(q.modality), means),
                  modality=q.modality)
            for q in queries
        ]

    def one(q: Query) -> list[ScoredDoc]:
        return search_topk(q, embedded, k, overrides)

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ranked = list(pool.map(one, queries))
    else:
        ranked = [one(q) for q in queries]
    return RunResult(results={q.id: r for q, r in zip(queries, ranked)}, run_tag=run_tag)


def save_run(run: RunResult, path: str) -> None:
    from .store import atomic_write_text

    lines = []
    for qid, docs in run.results.items():
        for sd in docs:
            lines.append(f"{qid} {sd.doc_id} {sd.rank} {sd.score:.6f} {run.run_tag}")
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_run(path: str) -> RunResult:
    results: dict[str, list[ScoredDoc]] = {}
    run_tag = "mixsearch"
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 5:
                raise ValidationError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            qid, doc_id, rank_s, score_s, run_tag = fields
            results.setdefault(qid, []).append(
                ScoredDoc(doc_id=doc_id, score=float(score_s), rank=int(rank_s))
            )
    return RunResult(results=results, run_tag=run_tag)
