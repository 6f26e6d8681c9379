"""Cross-encoder reranking, top-1 selection, the optional LLM selection
stage, and threshold-based pair predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .candidates import CandidateHit, CandidateSet
from .corpus import Record, RecordSet
from .errors import BackendError, SelectParseError

DEFAULT_BATCH_SIZE = 32
DEFAULT_LLM_TOP_M = 10

_SCORE_TOL = 1e-6

# Shipped verbatim so client and server agree on what /select means; the
# server formats the final text from the same template.
LLM_SELECT_PROMPT_TEMPLATE = (
    "You are matching records that refer to the same real-world entity.\n"
    "Query: {query}\n"
    "Candidates:\n"
    "{numbered_candidates}\n"
    "Answer with the number (1-{m}) of the candidate that refers to the "
    "same entity as the query. Answer with a single integer and nothing else."
)


@dataclass(frozen=True)
class ScoredCandidate:
    record_id: int
    rerank_score: float
    retrieval: CandidateHit


@dataclass
class LinkageResult:
    query_id: int
    query_norm: str
    prediction: int | None
    scored: list[ScoredCandidate]
    stage_timings: dict[str, float] = field(default_factory=dict)
    selector: str = "cross_encoder"  # "cross_encoder" | "llm"
    llm_fallback: bool = False
    candidate_counts: tuple[int, int, int] = (0, 0, 0)  # dense, sparse, union


@dataclass(frozen=True)
class PairPrediction:
    query_id: int
    record_id: int
    rerank_score: float
    threshold: float


def _validate_score(score: float, query_id: int) -> float:
    if not (-_SCORE_TOL <= score <= 1.0 + _SCORE_TOL):
        raise BackendError(
            f"rerank score {score} outside [0, 1] for query {query_id}")
    return min(1.0, max(0.0, score))


def rerank(query: Record, candidates: CandidateSet, corpus: RecordSet,
           gateway, model_id: str = "mock-rerank",
           batch_size: int = DEFAULT_BATCH_SIZE) -> list[ScoredCandidate]:
    """Score each candidate in gateway batches; sort (score desc, id asc)."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    scored: list[ScoredCandidate] = []
    hits = candidates.hits
    for start in range(0, len(hits), batch_size):
        batch = hits[start:start + batch_size]
        texts = [corpus[h.record_id].norm for h in batch]
        try:
            scores = gateway.rerank(query.norm, texts, model_id)
        except BackendError as exc:
            raise BackendError(
                f"rerank backend failed for query {candidates.query_id}: {exc}"
            ) from exc
        for hit, score in zip(batch, scores):
            scored.append(ScoredCandidate(
                record_id=hit.record_id,
                rerank_score=_validate_score(float(score), candidates.query_id),
                retrieval=hit))
    scored.sort(key=lambda s: (-s.rerank_score, s.record_id))
    return scored


def select_top1(scored: list[ScoredCandidate]) -> int | None:
    """Argmax by (score desc, record id asc); None on empty input."""
    if not scored:
        return None
    best = min(scored, key=lambda s: (-s.rerank_score, s.record_id))
    return best.record_id


def llm_select(query: Record, top_m: list[ScoredCandidate], corpus: RecordSet,
               gateway, model_id: str = "mock-select") -> tuple[int, bool]:
    """Ask the LLM stage to pick among the top-m cross-encoder candidates.

    Returns (record_id, fell_back). Any gateway failure or unparsable
    reply falls back to the cross-encoder top-1 (the stage is optional).
    """
    if not top_m:
        raise ValueError("llm_select requires a nonempty candidate list")
    texts = [corpus[s.record_id].norm for s in top_m]
    try:
        idx = gateway.select(query.norm, texts, model_id)
    except (SelectParseError, BackendError):
        return select_top1(top_m), True  # type: ignore[return-value]
    if not 1 <= idx <= len(top_m):
        return select_top1(top_m), True  # type: ignore[return-value]
    return top_m[idx - 1].record_id, False


def format_select_prompt(query: str, candidates: list[str]) -> str:
    numbered = "\n".join(f"{i}. {c}" for i, c in enumerate(candidates, start=1))
    return LLM_SELECT_PROMPT_TEMPLATE.format(
        query=query, numbered_candidates=numbered, m=len(candidates))


def predict_pairs(results: list[LinkageResult], tau: float) -> list[PairPrediction]:
    """All (query, candidate) pairs with rerank score strictly above tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    pairs: list[PairPrediction] = []
    for res in results:
        for sc in res.scored:
            if sc.rerank_score > tau:
                pairs.append(PairPrediction(
                    query_id=res.query_id, record_id=sc.record_id,
                    rerank_score=sc.rerank_score, threshold=tau))
    return pairs
