"""Candidate merging with provenance, plus optional key-based blocking."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .corpus import Record, RecordSet


@dataclass(frozen=True)
class RetrievalHit:
    """One retrieved record with its similarity and provenance."""
    record_id: int
    score: float
    source: str  # "dense" | "sparse" | "both"


@dataclass(frozen=True)
class CandidateHit:
    """A deduplicated union member; keeps both retrieval scores when present."""
    record_id: int
    dense_score: float | None
    sparse_score: float | None
    source: str  # "dense" | "sparse" | "both"

    @property
    def primary_score(self) -> float:
        return self.dense_score if self.dense_score is not None else self.sparse_score  # type: ignore[return-value]


@dataclass(frozen=True)
class CandidateSet:
    query_id: int
    hits: list[CandidateHit]
    dense_count: int
    sparse_count: int
    union_count: int


def merge_candidates(dense: list[RetrievalHit], sparse: list[RetrievalHit],
                     query_id: int = -1) -> CandidateSet:
    """Union of dense and sparse hit lists, deduplicated by record id.

    Ordering is cosmetic (the reranker scores every member): dense cosine
    where available, else sparse score, descending, ties by record id.
    """
    by_id: dict[int, CandidateHit] = {}
    for hit in dense:
        by_id[hit.record_id] = CandidateHit(
            record_id=hit.record_id, dense_score=hit.score,
            sparse_score=None, source="dense")
    for hit in sparse:
        prev = by_id.get(hit.record_id)
        if prev is None:
            by_id[hit.record_id] = CandidateHit(
                record_id=hit.record_id, dense_score=None,
                sparse_score=hit.score, source="sparse")
        else:
            by_id[hit.record_id] = replace(
                prev, sparse_score=hit.score, source="both")

    hits = sorted(by_id.values(), key=lambda h: (-h.primary_score, h.record_id))
    union = len(hits)
    # structural version of the union-size bound: max side <= union <= |D|+|S|
    assert max(len({h.record_id for h in dense}),
               len({h.record_id for h in sparse})) <= union <= len(dense) + len(sparse)
    return CandidateSet(query_id=query_id, hits=hits,
                        dense_count=len(dense), sparse_count=len(sparse),
                        union_count=union)


def apply_blocking(cands: CandidateSet, query: Record,
                   corpus: RecordSet) -> CandidateSet:
    """Drop candidates whose block key conflicts with the query's.

    Permissive: candidates without a corpus block key are kept, and a query
    without a block key leaves the set unchanged.
    """
    if query.block_key is None:
        return cands
    kept = [h for h in cands.hits
            if corpus[h.record_id].block_key is None
            or corpus[h.record_id].block_key == query.block_key]
    if len(kept) == len(cands.hits):
        return cands
    return CandidateSet(query_id=cands.query_id, hits=kept,
                        dense_count=cands.dense_count,
                        sparse_count=cands.sparse_count,
                        union_count=len(kept))
