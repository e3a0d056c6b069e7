"""Synthetic embeddings with a planted modality gap.

Each document gets a shared semantic vector on the unit sphere of the
first semantic_dim coordinates. Image parts are the semantic vector plus
noise; text parts and queries additionally carry a constant offset g * u
along a direction orthogonal to the semantic subspace. That offset is the
planted gap: it inflates text-text similarity relative to text-image and
reproduces the mixed-corpus U-shape at desk scale.

signal_mode "split" gives text and image parts complementary halves of the
semantic coordinates (queries keep the full signal), making fusion of both
parts genuinely better than either alone. gap_jitter scales the offset
per record by (1 + jitter * normal), so the gap direction carries
document-dependent noise that centering largely cancels.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import Corpus, Document, Modality, Qrels, Query, ValidationError
from .calibration import compute_means, corpus_calibration_records
from .corpusops import ReplacementMode, p_sweep
from .metrics import MetricReport


class ConfigInvalid(ValidationError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    dimension: int = 64
    n_docs: int = 1000
    n_queries: int = 1000
    gap_magnitude: float = 1.0
    noise_sigma: float = 0.05
    semantic_dim: int = 32
    seed: int = 42
    gap_jitter: float = 0.0
    signal_mode: str = "shared"  # shared | split
    random_gap_direction: bool = False
    normalize_outputs: bool = True

    def validate(self) -> None:
        if self.dimension < 1:
            raise ConfigInvalid(f"dimension must be >= 1, got {self.dimension}")
        if not 1 <= self.semantic_dim <= self.dimension - 1:
            raise ConfigInvalid(
                f"semantic_dim must be in [1, dimension-1], got {self.semantic_dim} (d={self.dimension})"
            )
        if self.n_docs < 1 or self.n_queries < 1:
            raise ConfigInvalid("n_docs and n_queries must be >= 1")
        if self.n_queries > self.n_docs:
            raise ConfigInvalid(
                f"n_queries ({self.n_queries}) cannot exceed n_docs ({self.n_docs}); "
                "query i is judged against document i"
            )
        if self.gap_magnitude < 0 or self.noise_sigma < 0 or self.gap_jitter < 0:
            raise ConfigInvalid("gap_magnitude, noise_sigma and gap_jitter must be >= 0")
        if self.signal_mode not in ("shared", "split"):
            raise ConfigInvalid(f"signal_mode must be 'shared' or 'split', got {self.signal_mode!r}")
        if self.signal_mode == "split" and self.semantic_dim < 2:
            raise ConfigInvalid("split signal mode needs semantic_dim >= 2")


def _row_normalize(mat: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    return mat / np.where(norms < 1e-12, 1.0, norms)[:, None]


def generate(config: SynthConfig) -> tuple[Corpus, list[Query], Qrels]:
    """Paired text+image corpus, text queries, one relevant doc per query."""
    config.validate()
    d, sdim = config.dimension, config.semantic_dim
    n, nq = config.n_docs, config.n_queries
    g, sigma = config.gap_magnitude, config.noise_sigma

    rng = np.random.default_rng(config.seed)
    semantic = _row_normalize(rng.standard_normal((n, sdim)))
    eps_image = rng.standard_normal((n, d)) * sigma
    eps_text = rng.standard_normal((n, d)) * sigma
    eps_query = rng.standard_normal((nq, d)) * sigma
    # jitter draws happen unconditionally so the stream layout is stable
    eta_text = rng.standard_normal(n) * config.gap_jitter
    eta_query = rng.standard_normal(nq) * config.gap_jitter

    gap_dir = np.zeros(d, dtype=np.float64)
    if config.random_gap_direction:
        raw = rng.standard_normal(d - sdim)
        gap_dir[sdim:] = raw / np.sqrt(np.dot(raw, raw))
    else:
        gap_dir[d - 1] = 1.0

    text_sem = np.zeros((n, d), dtype=np.float64)
    image_sem = np.zeros((n, d), dtype=np.float64)
    query_sem = np.zeros((nq, d), dtype=np.float64)
    query_sem[:, :sdim] = semantic[:nq]
    if config.signal_mode == "split":
        half = sdim // 2
        text_sem[:, :half] = semantic[:, :half]
        image_sem[:, half:sdim] = semantic[:, half:]
    else:
        text_sem[:, :sdim] = semantic
        image_sem[:, :sdim] = semantic

    text = text_sem + eps_text + (g * (1.0 + eta_text))[:, None] * gap_dir
    image = image_sem + eps_image
    queries_mat = query_sem + eps_query + (g * (1.0 + eta_query))[:, None] * gap_dir

    if config.normalize_outputs:
        text = _row_normalize(text)
        image = _row_normalize(image)
        queries_mat = _row_normalize(queries_mat)

    width = max(5, len(str(max(n, nq) - 1)))
    doc_ids = [f"d{i:0{width}d}" for i in range(n)]
    query_ids = [f"q{i:0{width}d}" for i in range(nq)]

    docs = tuple(
        Document(
            id=doc_ids[i],
            parts={
                Modality.TEXT: text[i].astype(np.float32),
                Modality.IMAGE: image[i].astype(np.float32),
            },
        )
        for i in range(n)
    )
    queries = [
        Query(id=query_ids[i], embedding=queries_mat[i].astype(np.float32), modality=Modality.TEXT)
        for i in range(nq)
    ]
    qrels = Qrels(judgments={(query_ids[i], doc_ids[i]): 1 for i in range(nq)}, max_grade=1)
    return Corpus(documents=docs, dimension=d), queries, qrels


def ushape_experiment(
    config: SynthConfig,
    p_grid: list[float],
    k_values: tuple[int, ...] = (10, 100),
    mode: ReplacementMode = ReplacementMode.EXACT_COUNT,
    self_calibrate: bool = False,
) -> tuple[list[tuple[float, MetricReport]], list[tuple[float, MetricReport]]]:
    """Raw and calibrated replacement sweeps over one generated corpus.

    Calibration means come from an independently seeded corpus drawn from
    the same configuration (seed + 1) unless self_calibrate is set.
    """
    corpus, queries, qrels = generate(config)
    if self_calibrate:
        cal_corpus, cal_queries = corpus, queries
    else:
        cal_corpus, cal_queries, _ = generate(dataclasses.replace(config, seed=config.seed + 1))
    means = compute_means(corpus_calibration_records(cal_corpus, cal_queries))

    raw = p_sweep(corpus, queries, qrels, p_grid, calibrated=False,
                  mode=mode, seed=config.seed, k_values=k_values)
    calibrated = p_sweep(corpus, queries, qrels, p_grid, calibrated=True, means=means,
                         mode=mode, seed=config.seed, k_values=k_values)
    return raw, calibrated
