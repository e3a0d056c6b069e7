"""Modality-gap calibration: estimate role/modality means and subtract them.

Text and image embeddings from contrastive encoders sit in displaced
clusters separated by a near-constant offset. Centering each role/modality
group on its own mean removes that offset while leaving within-group
geometry intact. Means are computed on (optionally held-out) calibration
sets; subtraction happens per embedding at search time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Corpus, DimensionMismatch, Document, Modality, Query, Role, ValidationError
from . import store

DEGENERATE_NORM = 1e-12


class EmptyCalibrationSet(ValidationError):
    pass


class MissingMean(ValidationError):
    def __init__(self, key: "MeanKey"):
        super().__init__(f"no calibration mean for ({key.role}, {key.modality})")
        self.key = key


@dataclass(frozen=True)
class MeanKey:
    role: Role
    modality: Modality

    @classmethod
    def query(cls, modality: Modality = Modality.TEXT) -> "MeanKey":
        return cls(Role.QUERY, modality)

    @classmethod
    def part(cls, modality: Modality) -> "MeanKey":
        return cls(Role.DOCUMENT_PART, modality)


@dataclass(frozen=True)
class CalibrationMeans:
    """Per-(role, modality) mean embeddings plus how many samples built each."""

    dimension: int
    means: dict[MeanKey, np.ndarray]
    sample_counts: dict[MeanKey, int] = field(default_factory=dict)

    def mean_for(self, key: MeanKey) -> np.ndarray:
        try:
            return self.means[key]
        except KeyError:
            raise MissingMean(key) from None


@dataclass(frozen=True)
class GapEstimate:
    """Difference of two group means; the planted-offset view of the gap.

    cosine_to_subspace is a diagnostic: alignment between the gap vector and
    the top principal direction of the pooled centered samples. None when no
    samples were supplied.
    """

    gap_vector: np.ndarray
    magnitude: float
    cosine_to_subspace: float | None = None


def normalize_checked(e: np.ndarray) -> tuple[np.ndarray, bool]:
    """Unit-normalize; zero-ish vectors pass through with a degenerate flag."""
    v = np.asarray(e, dtype=np.float64)
    norm = float(np.sqrt(np.dot(v, v)))
    if norm < DEGENERATE_NORM:
        return np.asarray(e), True
    return (v / norm).astype(e.dtype if isinstance(e, np.ndarray) else np.float64), False


def normalize(e: np.ndarray) -> np.ndarray:
    out, _ = normalize_checked(e)
    return out


def normalize_corpus(corpus: Corpus) -> Corpus:
    docs = tuple(
        Document(id=d.id, parts={m: normalize(v) for m, v in d.parts.items()})
        for d in corpus.documents
    )
    return Corpus(documents=docs, dimension=corpus.dimension)


def normalize_queries(queries: list[Query]) -> list[Query]:
    return [Query(id=q.id, embedding=normalize(q.embedding), modality=q.modality) for q in queries]


def compute_means(calibration_records: list[tuple[MeanKey, np.ndarray]]) -> CalibrationMeans:
    """Arithmetic mean per key, 64-bit, fixed left-to-right summation order."""
    if not calibration_records:
        raise EmptyCalibrationSet("no calibration records")
    acc: dict[MeanKey, np.ndarray] = {}
    counts: dict[MeanKey, int] = {}
    dimension = 0
    for key, vec in calibration_records:
        v = np.asarray(vec, dtype=np.float64)
        if dimension == 0:
            dimension = v.shape[0]
        elif v.shape[0] != dimension:
            raise DimensionMismatch(dimension, int(v.shape[0]), "calibration record")
        if key not in acc:
            acc[key] = np.zeros(dimension, dtype=np.float64)
            counts[key] = 0
        acc[key] += v
        counts[key] += 1
    means = {key: acc[key] / counts[key] for key in acc}
    return CalibrationMeans(dimension=dimension, means=means, sample_counts=counts)


def corpus_calibration_records(
    corpus: Corpus, queries: list[Query] = ()
) -> list[tuple[MeanKey, np.ndarray]]:
    """Flatten corpus parts and queries into (key, embedding) records."""
    records: list[tuple[MeanKey, np.ndarray]] = []
    for q in queries:
        records.append((MeanKey.query(q.modality), q.embedding))
    for doc in corpus.documents:
        for modality in sorted(doc.parts, key=lambda m: m.value):
            records.append((MeanKey.part(modality), doc.parts[modality]))
    return records


def remove_gap(e: np.ndarray, key: MeanKey, means: CalibrationMeans) -> np.ndarray:
    """e minus its group mean. No re-normalization; cosine handles scale."""
    mean = means.mean_for(key)
    if e.shape[0] != mean.shape[0]:
        raise DimensionMismatch(int(mean.shape[0]), int(e.shape[0]))
    return np.asarray(e, dtype=np.float64) - mean


def calibrate_corpus(
    corpus: Corpus, queries: list[Query], means: CalibrationMeans
) -> tuple[Corpus, list[Query]]:
    """Center every query on the query mean, every part on its modality mean.

    Multimodal documents keep separate parts; fusing the centered parts is
    identical to centering the fused vector, so downstream fusion needs no
    special casing.
    """
    out_queries = [
        Query(id=q.id, embedding=remove_gap(q.embedding, MeanKey.query(q.modality), means),
              modality=q.modality)
        for q in queries
    ]
    out_docs = tuple(
        Document(
            id=d.id,
            parts={m: remove_gap(v, MeanKey.part(m), means) for m, v in d.parts.items()},
        )
        for d in corpus.documents
    )
    return Corpus(documents=out_docs, dimension=corpus.dimension), out_queries


def top_principal_direction(rows: np.ndarray, iterations: int = 100, tol: float = 1e-9) -> np.ndarray:
    """Power iteration on the sample second-moment matrix; deterministic start."""
    x = np.asarray(rows, dtype=np.float64)
    d = x.shape[1]
    v = np.ones(d, dtype=np.float64) / np.sqrt(d)
    for _ in range(iterations):
        w = x.T @ (x @ v)
        norm = float(np.sqrt(np.dot(w, w)))
        if norm < 1e-30:
            return v
        w /= norm
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol:
            return w
        v = w
    return v


def estimate_gap(
    means: CalibrationMeans,
    a: MeanKey,
    b: MeanKey,
    samples: list[tuple[MeanKey, np.ndarray]] | None = None,
) -> GapEstimate:
    """Gap between two group means, with an optional subspace diagnostic.

    When samples are given, pooled rows for both keys are centered on their
    own means and the absolute cosine between the gap vector and their top
    principal direction is reported.
    """
    gap = means.mean_for(a) - means.mean_for(b)
    magnitude = float(np.sqrt(np.dot(gap, gap)))

    cosine = None
    if samples is not None:
        pooled = [
            np.asarray(vec, dtype=np.float64) - means.mean_for(key)
            for key, vec in samples
            if key in (a, b)
        ]
        if pooled and magnitude >= DEGENERATE_NORM:
            direction = top_principal_direction(np.stack(pooled))
            cosine = float(abs(np.dot(gap, direction)) / magnitude)
        else:
            cosine = 0.0
    return GapEstimate(gap_vector=gap, magnitude=magnitude, cosine_to_subspace=cosine)


def save_means(means: CalibrationMeans, path: str) -> None:
    """Persist as a store file; sample counts ride in the sidecar."""
    records = []
    for key in sorted(means.means, key=lambda k: (k.role.value, k.modality.value)):
        meta = store.StoreRecordMeta(
            id=f"{key.role.value}:{key.modality.value}",
            role=key.role,
            modality=key.modality,
            extra={"sample_count": means.sample_counts.get(key, 1)},
        )
        records.append((meta, means.means[key].astype(np.float32)))
    store.write_store(records, path, dimension=means.dimension)


def load_means(path: str) -> CalibrationMeans:
    records = store.read_store(path)
    if not records:
        raise EmptyCalibrationSet(f"{path}: no mean records")
    mean_map: dict[MeanKey, np.ndarray] = {}
    counts: dict[MeanKey, int] = {}
    dimension = int(records[0][1].shape[0])
    for meta, vec in records:
        key = MeanKey(meta.role, meta.modality)
        mean_map[key] = vec.astype(np.float64)
        counts[key] = int(meta.extra.get("sample_count", 1))
    return CalibrationMeans(dimension=dimension, means=mean_map, sample_counts=counts)
