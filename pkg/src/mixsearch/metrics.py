"""Ranking metrics: NDCG@K with exponential gain, Recall@1.

DCG uses gain (2^rel - 1) with a log2(i + 1) discount. IDCG sorts the
judged relevances for the query in descending order and truncates at K;
a query with nothing relevant (IDCG 0) scores 0 rather than being skipped,
so aggregates stay defined. Unjudged documents count as relevance 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Qrels, ValidationError
from .search import RunResult, ScoredDoc


class QueryMissingFromRun(ValidationError):
    def __init__(self, query_id: str):
        super().__init__(f"query {query_id!r} has judgments but no run entries")
        self.query_id = query_id


@dataclass(frozen=True)
class MetricReport:
    per_query: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    k_values: tuple[int, ...]


def dcg_at_k(relevances: list[int], k: int) -> float:
    total = 0.0
    for i, rel in enumerate(relevances[:k], start=1):
        total += (2.0 ** rel - 1.0) / math.log2(i + 1)
    return total


def ndcg_at_k(result: list[ScoredDoc], judged: dict[str, int], k: int) -> float:
    rels = [judged.get(sd.doc_id, 0) for sd in result[:k]]
    ideal = sorted(judged.values(), reverse=True)
    idcg = dcg_at_k(ideal, k)
    if idcg == 0.0:
        return 0.0
    return dcg_at_k(rels, k) / idcg


def recall_at_1(result: list[ScoredDoc], judged: dict[str, int]) -> float:
    if not result:
        return 0.0
    return 1.0 if judged.get(result[0].doc_id, 0) >= 1 else 0.0


def evaluate_run(
    run: RunResult,
    qrels: Qrels,
    k_values: tuple[int, ...] = (10, 100),
    recall1: bool = True,
) -> MetricReport:
    """Per-query metrics plus their unweighted mean over the run's queries.

    Every judged query must appear in the run; run queries without
    judgments score 0 and still count toward the mean.
    """
    for qid in qrels.query_ids():
        if qid not in run.results:
            raise QueryMissingFromRun(qid)

    judged_by_query: dict[str, dict[str, int]] = {}
    for (qid, doc_id), grade in qrels.judgments.items():
        judged_by_query.setdefault(qid, {})[doc_id] = grade

    names = [f"ndcg@{k}" for k in k_values] + (["recall@1"] if recall1 else [])
    per_query: dict[str, dict[str, float]] = {}
    for qid, result in run.results.items():
        judged = judged_by_query.get(qid, {})
        row = {f"ndcg@{k}": ndcg_at_k(result, judged, k) for k in k_values}
        if recall1:
            row["recall@1"] = recall_at_1(result, judged)
        per_query[qid] = row

    n = len(per_query)
    aggregate = {
        name: (sum(row[name] for row in per_query.values()) / n if n else 0.0)
        for name in names
    }
    return MetricReport(per_query=per_query, aggregate=aggregate, k_values=tuple(k_values))


def report_csv(report: MetricReport) -> str:
    """Long-form CSV: metric,k,query_id,value; aggregate rows use _mean."""
    lines = ["metric,k,query_id,value"]

    def k_of(name: str) -> str:
        return name.split("@", 1)[1]

    for name in sorted(report.aggregate):
        lines.append(f"{name.split('@')[0]},{k_of(name)},_mean,{report.aggregate[name]:.6f}")
    for qid, row in report.per_query.items():
        for name in sorted(row):
            lines.append(f"{name.split('@')[0]},{k_of(name)},{qid},{row[name]:.6f}")
    return "".join(line + "\n" for line in lines)
