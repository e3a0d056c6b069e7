"""Pure numpy scoring/selection kernels, the fallback when the compiled
extension is unavailable. Same contract as _ckernels."""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

DEGENERATE_NORM = 1e-12


def cosine_scores(matrix: np.ndarray, norms: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Cosine of query against every row; degenerate rows/queries score 0."""
    qnorm = float(np.sqrt(np.dot(query, query)))
    n = matrix.shape[0]
    if qnorm < DEGENERATE_NORM:
        return np.zeros(n, dtype=np.float64)
    dots = matrix @ query
    out = np.zeros(n, dtype=np.float64)
    ok = norms >= DEGENERATE_NORM
    np.divide(dots, norms * qnorm, out=out, where=ok)
    return out


def topk(scores: np.ndarray, tie_rank: np.ndarray, k: int) -> np.ndarray:
    """Indices of the top k scores, ties broken by ascending tie_rank."""
    order = np.lexsort((tie_rank, -scores))
    return order[: min(k, len(scores))].astype(np.int64)
