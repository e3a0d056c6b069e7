"""Weighted interpolation of multimodal document parts.

A document with text and image parts is embedded as alpha * text +
(1 - alpha) * image. The calibrated variant subtracts the identically
interpolated means, which equals fusing individually centered parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Corpus, Document, MissingPart, Modality, Qrels, Query, ValidationError
from .calibration import CalibrationMeans, MeanKey


@dataclass(frozen=True)
class FusionSpec:
    alpha: float = 0.5
    text_modality: Modality = Modality.TEXT
    other_modality: Modality = Modality.IMAGE

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")


def _parts(doc: Document, spec: FusionSpec) -> tuple[np.ndarray, np.ndarray]:
    try:
        text = doc.parts[spec.text_modality]
    except KeyError:
        raise MissingPart(doc.id, spec.text_modality) from None
    try:
        other = doc.parts[spec.other_modality]
    except KeyError:
        raise MissingPart(doc.id, spec.other_modality) from None
    return text, other


def fuse_raw(doc: Document, spec: FusionSpec) -> np.ndarray:
    text, other = _parts(doc, spec)
    a = spec.alpha
    return a * np.asarray(text, dtype=np.float64) + (1.0 - a) * np.asarray(other, dtype=np.float64)


def fuse_calibrated(doc: Document, spec: FusionSpec, means: CalibrationMeans) -> np.ndarray:
    """fuse_raw minus the alpha-interpolated part means."""
    fused = fuse_raw(doc, spec)
    a = spec.alpha
    mean_text = means.mean_for(MeanKey.part(spec.text_modality))
    mean_other = means.mean_for(MeanKey.part(spec.other_modality))
    return fused - (a * mean_text + (1.0 - a) * mean_other)


def alpha_sweep(
    corpus: Corpus,
    queries: list[Query],
    qrels: Qrels,
    alpha_grid: list[float],
    calibrated: bool = False,
    means: CalibrationMeans | None = None,
    k_values: tuple[int, ...] = (10, 100),
    threads: int = 1,
):
    """Retrieve and score once per alpha; one (alpha, MetricReport) per row."""
    from .search import run_retrieval
    from .metrics import evaluate_run

    if calibrated and means is None:
        raise ValidationError("calibrated sweep requires calibration means")
    k = max(k_values)
    rows = []
    for alpha in alpha_grid:
        spec = FusionSpec(alpha=alpha)
        run = run_retrieval(
            queries, corpus, k, spec=spec, calibrated=calibrated, means=means, threads=threads
        )
        rows.append((alpha, evaluate_run(run, qrels, k_values=k_values)))
    return rows
