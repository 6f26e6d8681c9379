"""Evaluation protocol: deterministic unique-query test split, top-1
accuracy, pair-level precision/recall/F1, and the task runner.

The split is fully specified so it reproduces across platforms: unique
queries are sorted lexicographically by normalized text, shuffled with
Fisher-Yates driven by a splitmix64 stream, and the first floor(n *
fraction) entries form the test set.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Record, RecordSet, normalize_text
from .errors import EvaluationError, TruthError
from .pipeline import LinkagePipeline, PipelineConfig
from .rerank import LinkageResult, PairPrediction, predict_pairs

_MASK64 = (1 << 64) - 1


def splitmix64_stream(seed: int):
    """The splitmix64 generator; yields 64-bit values."""
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def split_queries(queries: list[str], fraction: float,
                  seed: int) -> tuple[list[str], list[str]]:
    """Deterministic (train, test) split over unique normalized queries."""
    if not 0.0 < fraction < 1.0:
        raise EvaluationError(f"split fraction must be in (0, 1), got {fraction}")
    unique = sorted(set(queries))
    if len(unique) < 2:
        raise EvaluationError("need at least 2 unique queries to split")
    stream = splitmix64_stream(seed)
    for i in range(len(unique) - 1, 0, -1):
        j = next(stream) % (i + 1)
        unique[i], unique[j] = unique[j], unique[i]
    n_test = int(len(unique) * fraction)
    return unique[n_test:], unique[:n_test]


@dataclass
class GroundTruth:
    """query norm -> set of reference record ids."""
    by_query: dict[str, set[int]]

    @property
    def pairs(self) -> set[tuple[str, int]]:
        return {(q, rid) for q, rids in self.by_query.items() for rid in rids}

    @classmethod
    def identity(cls, queries: RecordSet, corpus: RecordSet) -> "GroundTruth":
        """Self-match truth: each query matches every corpus record with
        an equal normalized string (synthetic tasks)."""
        by_norm: dict[str, set[int]] = {}
        for rec in corpus:
            by_norm.setdefault(rec.norm, set()).add(rec.id)
        by_query = {q.norm: set(by_norm.get(q.norm, set())) for q in queries
                    if q.norm in by_norm}
        return cls(by_query=by_query)


def load_ground_truth(path: str | Path, corpus: RecordSet) -> GroundTruth:
    """CSV with columns query plus reference_id or reference (text resolved
    by exact norm match; ambiguous resolution is an error)."""
    path = Path(path)
    if not path.exists():
        raise TruthError(f"ground truth file not found: {path}")
    by_norm: dict[str, list[int]] = {}
    for rec in corpus:
        by_norm.setdefault(rec.norm, []).append(rec.id)
    by_query: dict[str, set[int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "query" not in cols or not ({"reference_id", "reference"} & set(cols)):
            raise TruthError(
                f"{path}: expected columns query plus reference_id or reference")
        for rownum, row in enumerate(reader, start=2):
            qnorm = normalize_text(row["query"])
            if row.get("reference_id"):
                try:
                    rid = int(row["reference_id"])
                except ValueError as exc:
                    raise TruthError(
                        f"{path}: row {rownum}: bad reference_id") from exc
                if not 0 <= rid < len(corpus):
                    raise TruthError(
                        f"{path}: row {rownum}: reference_id {rid} not in corpus")
            else:
                ref_norm = normalize_text(row.get("reference", ""))
                matches = by_norm.get(ref_norm, [])
                if not matches:
                    raise TruthError(
                        f"{path}: row {rownum}: reference {row.get('reference')!r} "
                        f"not found in corpus")
                if len(matches) > 1:
                    raise TruthError(
                        f"{path}: row {rownum}: reference {row.get('reference')!r} "
                        f"is ambiguous ({len(matches)} corpus records)")
                rid = matches[0]
            by_query.setdefault(qnorm, set()).add(rid)
    return GroundTruth(by_query=by_query)


def top1_accuracy(results: list[LinkageResult], truth: GroundTruth) -> float:
    """Fraction of queries whose single prediction is a true match;
    no-prediction counts as incorrect."""
    if not results:
        return 0.0
    correct = 0
    for res in results:
        truth_set = truth.by_query.get(res.query_norm)
        if truth_set is None:
            raise EvaluationError(
                f"query {res.query_norm!r} has no ground truth entry")
        if res.prediction is not None and res.prediction in truth_set:
            correct += 1
    return correct / len(results)


def pair_level_prf(predicted: list[PairPrediction], truth_pairs: set[tuple[int, int]]
                   ) -> tuple[float, float, float]:
    """Precision/recall/F1 over (query_id, record_id) pairs.

    Empty prediction set gives precision 1.0; empty truth gives recall 0.0
    unless predictions are also empty; F1 is 0 when P and R are both 0.
    """
    pred_pairs = {(p.query_id, p.record_id) for p in predicted}
    tp = len(pred_pairs & truth_pairs)
    precision = tp / len(pred_pairs) if pred_pairs else 1.0
    recall = tp / len(truth_pairs) if truth_pairs else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def exact_match_accuracy(queries: list[Record], truth: GroundTruth,
                         corpus: RecordSet) -> float:
    """Baseline: predict the lowest-id record whose norm equals the query."""
    if not queries:
        return 0.0
    by_norm: dict[str, int] = {}
    for rec in corpus:
        by_norm.setdefault(rec.norm, rec.id)
    correct = 0
    for q in queries:
        truth_set = truth.by_query.get(q.norm, set())
        pred = by_norm.get(q.norm)
        if pred is not None and pred in truth_set:
            correct += 1
    return correct / len(queries)


@dataclass
class TaskConfig:
    name: str
    queries: RecordSet
    corpus: RecordSet
    truth: GroundTruth
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    test_fraction: float = 0.4
    seed: int = 42
    tau: float | None = None


@dataclass
class EvalReport:
    task: str
    n_test: int
    top1: float
    exact_match: float
    precision: float | None
    recall: float | None
    f1: float | None
    tau: float | None
    per_query: list[dict]
    config_echo: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    def to_table(self) -> str:
        lines = [f"task: {self.task}",
                 f"test queries: {self.n_test}",
                 f"top-1 accuracy:       {self.top1:.3f}",
                 f"exact-match baseline: {self.exact_match:.3f}"]
        if self.tau is not None:
            lines.append(
                f"pair-level (tau={self.tau}): "
                f"P={self.precision:.3f} R={self.recall:.3f} F1={self.f1:.3f}")
        lines.append(f"config: {json.dumps(self.config_echo, sort_keys=True)}")
        return "\n".join(lines)


def run_task(task: TaskConfig, pipeline: LinkagePipeline | None = None) -> EvalReport:
    """Split, link the test queries against the full corpus, score."""
    labeled = [q.norm for q in task.queries
               if q.norm in task.truth.by_query and not q.is_empty]
    _, test_norms = split_queries(labeled, task.test_fraction, task.seed)
    test_set = set(test_norms)
    seen: set[str] = set()
    test_queries: list[Record] = []
    for q in task.queries:
        if q.norm in test_set and q.norm not in seen:
            seen.add(q.norm)
            test_queries.append(q)

    if pipeline is None:
        pipeline = LinkagePipeline(task.corpus, task.pipeline)
    results = pipeline.link_many(test_queries)

    top1 = top1_accuracy(results, task.truth)
    exact = exact_match_accuracy(test_queries, task.truth, pipeline.corpus)

    precision = recall = f1 = None
    if task.tau is not None:
        pairs = predict_pairs(results, task.tau)
        truth_pairs = _truth_id_pairs(test_queries, task.truth)
        precision, recall, f1 = pair_level_prf(pairs, truth_pairs)

    per_query = []
    for q, res in zip(test_queries, results):
        truth_set = task.truth.by_query[q.norm]
        per_query.append({
            "query_id": q.id,
            "query": q.raw,
            "prediction": res.prediction,
            "correct": res.prediction in truth_set,
            "selector": res.selector,
            "n_candidates": res.candidate_counts[2],
        })

    cfg = task.pipeline
    return EvalReport(
        task=task.name, n_test=len(test_queries), top1=top1, exact_match=exact,
        precision=precision, recall=recall, f1=f1, tau=task.tau,
        per_query=per_query,
        config_echo={"k": cfg.k, "seed": task.seed,
                     "test_fraction": task.test_fraction,
                     "backend": cfg.gateway.mode,
                     "embed_model": cfg.gateway.embed_model,
                     "rerank_model": cfg.gateway.rerank_model,
                     "blocking": cfg.use_blocking,
                     "llm_select": cfg.use_llm_select,
                     "jobs": cfg.jobs})


def _truth_id_pairs(queries: list[Record], truth: GroundTruth) -> set[tuple[int, int]]:
    pairs = set()
    for q in queries:
        for rid in truth.by_query.get(q.norm, set()):
            pairs.add((q.id, rid))
    return pairs
