"""EnsembleLink: zero-shot record linkage via ensemble retrieval and
cross-encoder reranking."""

__version__ = "0.1.0"

from .candidates import CandidateSet, RetrievalHit, apply_blocking, merge_candidates
from .corpus import Record, RecordSet, load_records, normalize_text
from .dense import EmbeddingCache, build_vector_index, dense_topk, embed_with_cache
from .evaluation import (GroundTruth, pair_level_prf, run_task, split_queries,
                         top1_accuracy)
from .gateway import GatewayConfig, MockBackend, RemoteGateway, make_gateway
from .pipeline import LinkagePipeline, PipelineConfig
from .rerank import llm_select, predict_pairs, rerank, select_top1
from .sparse import build_sparse_index, extract_ngrams, sparse_topk

__all__ = [
    "CandidateSet", "RetrievalHit", "apply_blocking", "merge_candidates",
    "Record", "RecordSet", "load_records", "normalize_text",
    "EmbeddingCache", "build_vector_index", "dense_topk", "embed_with_cache",
    "GroundTruth", "pair_level_prf", "run_task", "split_queries",
    "top1_accuracy", "GatewayConfig", "MockBackend", "RemoteGateway",
    "make_gateway", "LinkagePipeline", "PipelineConfig", "llm_select",
    "predict_pairs", "rerank", "select_top1", "build_sparse_index",
    "extract_ngrams", "sparse_topk",
]
