"""Scalability harness: per-stage wall-clock timing across corpus sizes.

Subsampling keeps every record that is a true match for some test query
and fills the remainder with a seeded random sample, so accuracy stays
interpretable as corpus size varies. Output CSV header:
corpus_size,embed_s,index_s,retrieve_s,rerank_s,total_s,accuracy,queries_per_s
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

from .corpus import Record, RecordSet
from .dense import EmbeddingCache
from .errors import ConfigError
from .evaluation import (GroundTruth, TaskConfig, split_queries,
                         splitmix64_stream, top1_accuracy)
from .pipeline import LinkagePipeline

CSV_HEADER = ["corpus_size", "embed_s", "index_s", "retrieve_s", "rerank_s",
              "total_s", "accuracy", "queries_per_s"]


@dataclass
class BenchRow:
    corpus_size: int
    embed_s: float
    index_s: float
    retrieve_s: float
    rerank_s: float
    total_s: float
    accuracy: float
    queries_per_s: float


def subsample_corpus(corpus: RecordSet, size: int, keep_ids: set[int],
                     seed: int) -> tuple[RecordSet, dict[int, int]]:
    """Deterministic subsample that retains keep_ids; returns the new set
    plus the old-id -> new-id mapping."""
    if size > len(corpus):
        raise ConfigError(
            f"subsample size {size} exceeds corpus size {len(corpus)}")
    if len(keep_ids) > size:
        raise ConfigError(
            f"subsample size {size} cannot hold {len(keep_ids)} gold records")
    rest = [r.id for r in corpus if r.id not in keep_ids]
    stream = splitmix64_stream(seed)
    for i in range(len(rest) - 1, 0, -1):
        j = next(stream) % (i + 1)
        rest[i], rest[j] = rest[j], rest[i]
    chosen = sorted(set(rest[:size - len(keep_ids)]) | keep_ids)
    id_map: dict[int, int] = {}
    records = []
    for new_id, old_id in enumerate(chosen):
        old = corpus[old_id]
        records.append(Record(id=new_id, raw=old.raw, norm=old.norm,
                              block_key=old.block_key, extras=old.extras))
        id_map[old_id] = new_id
    return RecordSet(records=records, source_path=corpus.source_path,
                     role=corpus.role), id_map


def run_scaling(task: TaskConfig, sizes: list[int], seed: int) -> list[BenchRow]:
    for size in sizes:
        if size > len(task.corpus):
            raise ConfigError(
                f"requested corpus size {size} exceeds available "
                f"{len(task.corpus)} records")

    labeled = [q.norm for q in task.queries
               if q.norm in task.truth.by_query and not q.is_empty]
    _, test_norms = split_queries(labeled, task.test_fraction, task.seed)
    test_set = set(test_norms)
    seen: set[str] = set()
    test_queries = []
    for q in task.queries:
        if q.norm in test_set and q.norm not in seen:
            seen.add(q.norm)
            test_queries.append(q)
    gold_ids = {rid for q in test_queries
                for rid in task.truth.by_query.get(q.norm, set())}

    _warmup(task)

    rows: list[BenchRow] = []
    for size in sizes:
        sub_corpus, id_map = subsample_corpus(task.corpus, size, gold_ids, seed)
        sub_truth = GroundTruth(by_query={
            q: {id_map[rid] for rid in rids if rid in id_map}
            for q, rids in task.truth.by_query.items()})
        cfg = task.pipeline
        t0 = time.monotonic()
        pipeline = LinkagePipeline(sub_corpus, cfg,
                                   cache=EmbeddingCache())  # fresh, in-memory
        t_link0 = time.monotonic()
        results = pipeline.link_many(test_queries)
        t_end = time.monotonic()

        rerank_s = sum(r.stage_timings["rerank"] for r in results)
        link_s = t_end - t_link0
        retrieve_s = max(0.0, link_s - rerank_s)
        total_s = t_end - t0
        accuracy = top1_accuracy(results, sub_truth)
        rows.append(BenchRow(
            corpus_size=size,
            embed_s=pipeline.build_timings["embed"],
            index_s=pipeline.build_timings["index"],
            retrieve_s=retrieve_s,
            rerank_s=rerank_s,
            total_s=total_s,
            accuracy=accuracy,
            queries_per_s=len(test_queries) / total_s if total_s > 0 else 0.0))
    return rows


def _warmup(task: TaskConfig) -> None:
    """One small discarded run so first-touch costs don't skew stage times."""
    n = min(50, len(task.corpus))
    small = RecordSet(records=list(task.corpus.records[:n]),
                      source_path=task.corpus.source_path, role="reference")
    pipeline = LinkagePipeline(small, task.pipeline, cache=EmbeddingCache())
    if len(task.queries):
        pipeline.link_one(task.queries[0])


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.corpus_size, f"{r.embed_s:.4f}", f"{r.index_s:.4f}",
                         f"{r.retrieve_s:.4f}", f"{r.rerank_s:.4f}",
                         f"{r.total_s:.4f}", f"{r.accuracy:.4f}",
                         f"{r.queries_per_s:.1f}"])
    return buf.getvalue()


def rows_to_table(rows: list[BenchRow]) -> str:
    lines = [f"{'corpus':>8} {'embed':>8} {'index':>8} {'retrieve':>9} "
             f"{'rerank':>8} {'total':>8} {'acc':>6} {'q/s':>6}"]
    for r in rows:
        lines.append(f"{r.corpus_size:>8} {r.embed_s:>7.1f}s {r.index_s:>7.1f}s "
                     f"{r.retrieve_s:>8.1f}s {r.rerank_s:>7.1f}s "
                     f"{r.total_s:>7.1f}s {r.accuracy:>6.3f} "
                     f"{r.queries_per_s:>6.1f}")
    return "\n".join(lines)
