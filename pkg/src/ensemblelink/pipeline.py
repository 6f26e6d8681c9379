"""End-to-end linkage pipeline: build indexes once, then link queries.

Per-query work is independent, so queries can be fanned out over a thread
pool; results are reassembled in input order, which keeps outputs
identical regardless of the parallelism degree.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import dense, rerank as rr, sparse
from .candidates import apply_blocking, merge_candidates
from .corpus import Record, RecordSet
from .dense import EmbeddingCache
from .gateway import GatewayConfig, make_gateway


@dataclass
class PipelineConfig:
    k: int = 30
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    rerank_batch_size: int = rr.DEFAULT_BATCH_SIZE
    embed_batch_size: int = dense.DEFAULT_BATCH_SIZE
    use_blocking: bool = False
    use_llm_select: bool = False
    llm_top_m: int = rr.DEFAULT_LLM_TOP_M
    index_mode: str = "exact"  # "exact" | "approximate"
    cache_path: str | None = None
    jobs: int = 1


class LinkagePipeline:
    """Holds the built indexes for one reference corpus."""

    def __init__(self, corpus: RecordSet, config: PipelineConfig,
                 gateway=None, cache: EmbeddingCache | None = None):
        self.corpus = corpus
        self.config = config
        self.gateway = gateway if gateway is not None else make_gateway(config.gateway)
        self.cache = cache if cache is not None else EmbeddingCache(
            config.cache_path, model_id=config.gateway.embed_model)
        self.build_timings: dict[str, float] = {}
        self._embed_lock = threading.Lock()  # cache writes go through one writer
        self._build()

    def _build(self) -> None:
        t0 = time.monotonic()
        self.embeddings = dense.embed_with_cache(
            self.corpus.norms, self.config.gateway.embed_model,
            self.cache, self.gateway, batch_size=self.config.embed_batch_size)
        t1 = time.monotonic()
        self.sparse_index = sparse.build_sparse_index(self.corpus)
        self.vector_index = dense.build_vector_index(
            self.embeddings, mode=self.config.index_mode)
        t2 = time.monotonic()
        self.build_timings = {"embed": t1 - t0, "index": t2 - t1}

    def link_one(self, query: Record) -> rr.LinkageResult:
        cfg = self.config
        t0 = time.monotonic()
        if query.is_empty:
            dense_hits: list = []
            sparse_hits: list = []
        else:
            with self._embed_lock:
                qvec = dense.embed_with_cache(
                    [query.norm], cfg.gateway.embed_model, self.cache,
                    self.gateway, batch_size=cfg.embed_batch_size).vectors[0]
            dense_hits = dense.dense_topk(self.vector_index, qvec, cfg.k)
            sparse_hits = sparse.sparse_topk(self.sparse_index, query, cfg.k)
        cands = merge_candidates(dense_hits, sparse_hits, query_id=query.id)
        if cfg.use_blocking:
            cands = apply_blocking(cands, query, self.corpus)
        t1 = time.monotonic()

        scored = rr.rerank(query, cands, self.corpus, self.gateway,
                           model_id=cfg.gateway.rerank_model,
                           batch_size=cfg.rerank_batch_size)
        prediction = rr.select_top1(scored)
        selector = "cross_encoder"
        llm_fallback = False
        if cfg.use_llm_select and scored:
            prediction, llm_fallback = rr.llm_select(
                query, scored[:cfg.llm_top_m], self.corpus, self.gateway,
                model_id=cfg.gateway.select_model)
            selector = "llm"
        t2 = time.monotonic()

        return rr.LinkageResult(
            query_id=query.id, query_norm=query.norm, prediction=prediction,
            scored=scored,
            stage_timings={"retrieve": t1 - t0, "rerank": t2 - t1},
            selector=selector, llm_fallback=llm_fallback,
            candidate_counts=(cands.dense_count, cands.sparse_count,
                              cands.union_count))

    def link_many(self, queries: list[Record]) -> list[rr.LinkageResult]:
        """Link queries in input order; identical output for any job count."""
        jobs = max(1, self.config.jobs)
        texts = [q.norm for q in queries if not q.is_empty]
        if texts:
            # warm the cache in one batch so workers only read
            dense.embed_with_cache(texts, self.config.gateway.embed_model,
                                   self.cache, self.gateway,
                                   batch_size=self.config.embed_batch_size)
        if jobs == 1 or len(queries) <= 1:
            return [self.link_one(q) for q in queries]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(self.link_one, queries))
