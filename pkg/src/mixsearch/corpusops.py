"""Experiment construction: modality replacement, 1:1:1 mixing, push-down.

Replacement draws one uniform value per document and replaces a document
iff its draw falls below p, so masks are nested across a p sweep under a
shared seed. The push-down simulation demotes masked documents below every
unmasked one while preserving their true-similarity order, modeling a
ranking bias that pins cross-modal scores to a fixed value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Corpus, Document, MissingPart, Modality, Qrels, Query, ValidationError
from .calibration import CalibrationMeans
from .fusion import FusionSpec
from .metrics import MetricReport, evaluate_run
from .search import EmbeddedCorpus, RunResult, ScoredDoc, embed_corpus, run_retrieval, search_topk


class ReplacementMode(Enum):
    BERNOULLI = "Bernoulli"
    EXACT_COUNT = "ExactCount"

    @classmethod
    def parse(cls, tag: str) -> "ReplacementMode":
        for m in cls:
            if m.value.lower() == tag.lower():
                return m
        raise ValidationError(f"unknown replacement mode {tag!r}")


@dataclass(frozen=True)
class ReplacementPlan:
    p: float
    mode: ReplacementMode = ReplacementMode.EXACT_COUNT
    seed: int = 42
    source_modality: Modality = Modality.TEXT
    target_modality: Modality = Modality.IMAGE

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"replacement probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class MixPlan:
    """Weights for text-only / image-only / multimodal document shapes."""

    ratios: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 42
    text_modality: Modality = Modality.TEXT
    image_modality: Modality = Modality.IMAGE

    def __post_init__(self):
        if any(w < 0 for w in self.ratios) or sum(self.ratios) <= 0:
            raise ValidationError(f"mix ratios must be non-negative with positive sum, got {self.ratios}")


def _require_part(doc: Document, modality: Modality) -> np.ndarray:
    try:
        return doc.parts[modality]
    except KeyError:
        raise MissingPart(doc.id, modality) from None


def replacement_mask(n: int, plan: ReplacementPlan) -> np.ndarray:
    """Boolean selection per document index; nested in p for a fixed seed."""
    rng = np.random.default_rng(plan.seed)
    draws = rng.random(n)
    if plan.mode is ReplacementMode.BERNOULLI:
        return draws < plan.p
    count = math.floor(plan.p * n)
    selected = np.zeros(n, dtype=bool)
    selected[np.argsort(draws, kind="stable")[:count]] = True
    return selected


def apply_replacement(corpus: Corpus, plan: ReplacementPlan) -> tuple[Corpus, frozenset[str]]:
    """Reduce each paired document to one part: target if selected, else source."""
    selected = replacement_mask(len(corpus.documents), plan)
    docs = []
    masked: list[str] = []
    for i, doc in enumerate(corpus.documents):
        source = _require_part(doc, plan.source_modality)
        target = _require_part(doc, plan.target_modality)
        if selected[i]:
            docs.append(Document(id=doc.id, parts={plan.target_modality: target}))
            masked.append(doc.id)
        else:
            docs.append(Document(id=doc.id, parts={plan.source_modality: source}))
    return Corpus(documents=tuple(docs), dimension=corpus.dimension), frozenset(masked)


def _largest_remainder(weights: tuple[float, ...], n: int) -> list[int]:
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    by_fraction = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_fraction[:leftover]:
        counts[i] += 1
    return counts


def apply_mix(corpus: Corpus, plan: MixPlan) -> Corpus:
    """Assign each paired document one of the three shapes per plan weights."""
    n = len(corpus.documents)
    n_text, n_image, _ = _largest_remainder(plan.ratios, n)
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(n)
    shape = np.full(n, 2, dtype=np.int64)  # 0 text-only, 1 image-only, 2 multimodal
    shape[perm[:n_text]] = 0
    shape[perm[n_text:n_text + n_image]] = 1

    docs = []
    for i, doc in enumerate(corpus.documents):
        text = _require_part(doc, plan.text_modality)
        image = _require_part(doc, plan.image_modality)
        if shape[i] == 0:
            parts = {plan.text_modality: text}
        elif shape[i] == 1:
            parts = {plan.image_modality: image}
        else:
            parts = {plan.text_modality: text, plan.image_modality: image}
        docs.append(Document(id=doc.id, parts=parts))
    return Corpus(documents=tuple(docs), dimension=corpus.dimension)


def _subset(embedded: EmbeddedCorpus, idx: np.ndarray) -> EmbeddedCorpus:
    return EmbeddedCorpus(
        ids=tuple(embedded.ids[i] for i in idx),
        matrix=np.ascontiguousarray(embedded.matrix[idx]),
        norms=embedded.norms[idx],
        tie_rank=embedded.tie_rank[idx],
        modality_sets=tuple(embedded.modality_sets[i] for i in idx),
    )


def pushdown_run(
    queries: list[Query],
    corpus: Corpus,
    mask: frozenset[str],
    k: int,
    override_value: float = 0.0,
    spec: FusionSpec | None = None,
    run_tag: str = "pushdown",
) -> RunResult:
    """Rank with masked documents demoted below every unmasked document.

    Within each group the true cosine order is kept; masked documents are
    reported with the override value as their score. An empty mask
    reproduces plain retrieval exactly.
    """
    embedded = embed_corpus(corpus, spec=spec)
    masked_flags = np.array([doc_id in mask for doc_id in embedded.ids], dtype=bool)
    if not masked_flags.any():
        return run_retrieval(queries, corpus, k, spec=spec, run_tag=run_tag)

    unmasked_part = _subset(embedded, np.flatnonzero(~masked_flags))
    masked_part = _subset(embedded, np.flatnonzero(masked_flags))
    total = min(k, len(embedded))

    results: dict[str, list[ScoredDoc]] = {}
    for q in queries:
        ranked: list[ScoredDoc] = []
        take_unmasked = min(total, len(unmasked_part))
        if take_unmasked:
            ranked.extend(search_topk(q, unmasked_part, take_unmasked))
        take_masked = min(total - take_unmasked, len(masked_part))
        if take_masked:
            demoted = search_topk(q, masked_part, take_masked)
            base = len(ranked)
            ranked.extend(
                ScoredDoc(doc_id=sd.doc_id, score=override_value, rank=base + i + 1)
                for i, sd in enumerate(demoted)
            )
        results[q.id] = ranked
    return RunResult(results=results, run_tag=run_tag)


def pushdown_simulation(
    queries: list[Query],
    corpus: Corpus,
    mask: frozenset[str],
    k: int,
    qrels: Qrels,
    k_values: tuple[int, ...] = (10, 100),
) -> MetricReport:
    run = pushdown_run(queries, corpus, mask, k)
    return evaluate_run(run, qrels, k_values=k_values)


def p_sweep(
    corpus: Corpus,
    queries: list[Query],
    qrels: Qrels,
    p_grid: list[float],
    calibrated: bool = False,
    means: CalibrationMeans | None = None,
    mode: ReplacementMode = ReplacementMode.EXACT_COUNT,
    seed: int = 42,
    source_modality: Modality = Modality.TEXT,
    target_modality: Modality = Modality.IMAGE,
    k_values: tuple[int, ...] = (10, 100),
    threads: int = 1,
) -> list[tuple[float, MetricReport]]:
    """Replacement sweep over p; one retrieval + evaluation per grid point."""
    if calibrated and means is None:
        raise ValidationError("calibrated sweep requires calibration means")
    rows = []
    for p in p_grid:
        plan = ReplacementPlan(p=p, mode=mode, seed=seed,
                               source_modality=source_modality, target_modality=target_modality)
        corpus_p, _ = apply_replacement(corpus, plan)
        run = run_retrieval(
            queries, corpus_p, max(k_values), calibrated=calibrated, means=means, threads=threads
        )
        rows.append((p, evaluate_run(run, qrels, k_values=k_values)))
    return rows


def pushdown_sweep(
    corpus: Corpus,
    queries: list[Query],
    qrels: Qrels,
    p_grid: list[float],
    mode: ReplacementMode = ReplacementMode.EXACT_COUNT,
    seed: int = 42,
    source_modality: Modality = Modality.TEXT,
    target_modality: Modality = Modality.IMAGE,
    k_values: tuple[int, ...] = (10, 100),
) -> list[tuple[float, MetricReport]]:
    """Simulated sweep: same replacement masks, scores demoted instead of gapped."""
    rows = []
    for p in p_grid:
        plan = ReplacementPlan(p=p, mode=mode, seed=seed,
                               source_modality=source_modality, target_modality=target_modality)
        corpus_p, mask = apply_replacement(corpus, plan)
        rows.append((p, pushdown_simulation(queries, corpus_p, mask, max(k_values), qrels, k_values)))
    return rows
