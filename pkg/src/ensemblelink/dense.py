"""Dense retrieval: embedding cache, vector index, cosine top-k.

Vectors are stored as float32 and renormalized unconditionally, so cosine
similarity reduces to a dot product. The cache is a versioned binary file
(magic "ENLK") keyed by (model id, FNV-1a 64 hash of the normalized text),
with the text length stored as a collision check.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .candidates import RetrievalHit
from .errors import (BackendUnavailableError, CacheInvalidError, ConfigError,
                     InputError)
from .gateway import fnv1a64
from .sparse import rank_scores

_MAGIC = b"ENLK"
_VERSION = 1

DEFAULT_BATCH_SIZE = 64


@dataclass
class EmbeddingMatrix:
    dim: int
    vectors: np.ndarray              # (n, dim) float32, rows unit or zero
    model_id: str
    text_hashes: list[int]
    empty_mask: np.ndarray           # True where the source text was empty

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, model_id: str = "raw") -> "EmbeddingMatrix":
        vectors = np.asarray(vectors, dtype=np.float32)
        return cls(dim=vectors.shape[1], vectors=vectors, model_id=model_id,
                   text_hashes=[0] * len(vectors),
                   empty_mask=np.zeros(len(vectors), dtype=bool))

    def __len__(self) -> int:
        return len(self.vectors)


class EmbeddingCache:
    """(model_id, text hash, text length) -> float32 vector, optionally
    backed by a file. Updates rewrite the file atomically (temp + rename)."""

    def __init__(self, path: str | Path | None = None,
                 model_id: str | None = None):
        self.path = Path(path) if path is not None else None
        self.model_id = model_id
        self.dim: int | None = None
        self._store: dict[tuple[int, int], np.ndarray] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def __len__(self) -> int:
        return len(self._store)

    def get(self, text: str) -> np.ndarray | None:
        return self._store.get(self._key(text))

    def put_many(self, pairs: list[tuple[str, np.ndarray]]) -> None:
        for text, vec in pairs:
            vec = np.asarray(vec, dtype=np.float32)
            if self.dim is None:
                self.dim = len(vec)
            elif len(vec) != self.dim:
                raise CacheInvalidError(
                    f"cache dim {self.dim} != backend dim {len(vec)}")
            self._store[self._key(text)] = vec
        if self.path is not None:
            self.save()

    @staticmethod
    def _key(text: str) -> tuple[int, int]:
        return (fnv1a64(text.encode("utf-8")), len(text))

    def save(self) -> None:
        assert self.path is not None
        model = (self.model_id or "").encode("utf-8")
        fd, tmp = tempfile.mkstemp(dir=str(self.path.parent), suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(_MAGIC)
                fh.write(struct.pack("<II", _VERSION, len(model)))
                fh.write(model)
                fh.write(struct.pack("<IQ", self.dim or 0, len(self._store)))
                for (h, tlen), vec in sorted(self._store.items()):
                    fh.write(struct.pack("<QI", h, tlen))
                    fh.write(vec.astype("<f4").tobytes())
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _load(self) -> None:
        assert self.path is not None
        data = self.path.read_bytes()
        try:
            if data[:4] != _MAGIC:
                raise CacheInvalidError(f"{self.path}: not an embedding cache (bad magic)")
            off = 4
            version, mlen = struct.unpack_from("<II", data, off)
            off += 8
            if version != _VERSION:
                raise CacheInvalidError(
                    f"{self.path}: unsupported cache version {version}")
            model_id = data[off:off + mlen].decode("utf-8")
            off += mlen
            if self.model_id is not None and model_id != self.model_id:
                raise CacheInvalidError(
                    f"{self.path}: cache is for model {model_id!r}, "
                    f"not {self.model_id!r}")
            self.model_id = model_id
            dim, count = struct.unpack_from("<IQ", data, off)
            off += 12
            self.dim = dim or None
            for _ in range(count):
                h, tlen = struct.unpack_from("<QI", data, off)
                off += 12
                vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off)
                if len(vec) != dim:
                    raise CacheInvalidError(f"{self.path}: truncated cache entry")
                off += dim * 4
                self._store[(h, tlen)] = vec.copy()
            if off != len(data):
                raise CacheInvalidError(f"{self.path}: trailing bytes")
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise CacheInvalidError(f"{self.path}: corrupt cache file: {exc}") from exc


def embed_with_cache(texts: list[str], model_id: str, cache: EmbeddingCache,
                     gateway, batch_size: int = DEFAULT_BATCH_SIZE) -> EmbeddingMatrix:
    """Embed texts, reusing the cache; only misses go to the gateway.

    Gateway vectors are renormalized unconditionally; empty texts map to
    zero vectors and are flagged so they never surface as candidates.
    """
    miss_texts: list[str] = []
    seen: set[str] = set()
    for t in texts:
        if t and cache.get(t) is None and t not in seen:
            seen.add(t)
            miss_texts.append(t)

    if miss_texts:
        new_pairs: list[tuple[str, np.ndarray]] = []
        for start in range(0, len(miss_texts), batch_size):
            batch = miss_texts[start:start + batch_size]
            try:
                vectors = gateway.embed(batch, model_id)
            except BackendUnavailableError as exc:
                raise BackendUnavailableError(
                    f"embedding backend unreachable with "
                    f"{len(miss_texts) - start} uncached texts: {exc}") from exc
            for text, vec in zip(batch, vectors):
                vec = np.asarray(vec, dtype=np.float64)
                norm = float(np.sqrt(np.dot(vec, vec)))
                if norm > 0.0:
                    vec = vec / norm
                new_pairs.append((text, vec.astype(np.float32)))
        cache.put_many(new_pairs)

    dim = cache.dim
    if dim is None:
        raise CacheInvalidError("cache holds no vectors and nothing to embed")
    out = np.zeros((len(texts), dim), dtype=np.float32)
    hashes: list[int] = []
    empty = np.zeros(len(texts), dtype=bool)
    for i, t in enumerate(texts):
        hashes.append(fnv1a64(t.encode("utf-8")))
        if not t:
            empty[i] = True
            continue
        vec = cache.get(t)
        if vec is None:
            raise CacheInvalidError(f"embedding for text missing after fill: {t!r}")
        if len(vec) != dim:
            raise CacheInvalidError(f"cache dim mismatch for text {t!r}")
        out[i] = vec
    return EmbeddingMatrix(dim=dim, vectors=out, model_id=model_id,
                           text_hashes=hashes, empty_mask=empty)


# ---------------------------------------------------------------------------
# Vector index
# ---------------------------------------------------------------------------

@dataclass
class VectorIndex:
    embeddings: EmbeddingMatrix
    exact: bool
    # approximate-mode state (inverted file over k-means cells)
    centroids: np.ndarray | None = None
    cells: list[np.ndarray] | None = None
    nprobe: int = 1

    @property
    def dim(self) -> int:
        return self.embeddings.dim


def build_vector_index(embeddings: EmbeddingMatrix, mode: str = "exact",
                       recall_target: float = 0.99, seed: int = 0) -> VectorIndex:
    """Exact mode is a full scan. Approximate mode builds an IVF structure
    and widens its probe count until recall@30 against the exact ranking
    reaches the target on held-out probes, else the build fails."""
    if len(embeddings) == 0:
        raise InputError("cannot build a vector index over zero embeddings")
    if mode == "exact":
        return VectorIndex(embeddings=embeddings, exact=True)
    if mode != "approximate":
        raise ConfigError(f"unknown index mode {mode!r}")

    vecs = embeddings.vectors.astype(np.float64)
    n = len(vecs)
    n_cells = max(1, int(np.sqrt(n)))
    centroids = _kmeans(vecs, n_cells, seed=seed)
    assign = np.argmax(vecs @ centroids.T, axis=1)
    cells = [np.nonzero(assign == c)[0] for c in range(len(centroids))]

    rng = np.random.default_rng(seed)
    probes = rng.choice(n, size=min(64, n), replace=False)
    exact_index = VectorIndex(embeddings=embeddings, exact=True)
    for nprobe in range(1, len(centroids) + 1):
        index = VectorIndex(embeddings=embeddings, exact=False,
                            centroids=centroids, cells=cells, nprobe=nprobe)
        recalls = []
        for p in probes:
            q = embeddings.vectors[p]
            truth = {h.record_id for h in dense_topk(exact_index, q, 30)}
            got = {h.record_id for h in dense_topk(index, q, 30)}
            recalls.append(len(truth & got) / max(1, len(truth)))
        if float(np.mean(recalls)) >= recall_target:
            return index
    raise ConfigError(
        f"approximate index failed to reach recall@30 >= {recall_target}")


def _kmeans(vecs: np.ndarray, k: int, seed: int, iters: int = 15) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centroids = vecs[rng.choice(len(vecs), size=min(k, len(vecs)), replace=False)].copy()
    for _ in range(iters):
        assign = np.argmax(vecs @ centroids.T, axis=1)
        for c in range(len(centroids)):
            members = vecs[assign == c]
            if len(members):
                m = members.mean(axis=0)
                norm = np.linalg.norm(m)
                if norm > 0:
                    centroids[c] = m / norm
    return centroids


def dense_topk(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[RetrievalHit]:
    """Top-k by cosine, sorted (score desc, record_id asc)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query_vec = np.asarray(query_vec)
    if query_vec.shape != (index.dim,):
        raise InputError(
            f"query dim {query_vec.shape} does not match index dim {index.dim}")
    emb = index.embeddings
    eligible = ~emb.empty_mask
    q = query_vec.astype(np.float64)
    if index.exact:
        scores = emb.vectors.astype(np.float64) @ q
        return rank_scores(scores, eligible, k, source="dense")
    assert index.centroids is not None and index.cells is not None
    cell_order = np.argsort(-(index.centroids @ q))[:index.nprobe]
    ids = np.concatenate([index.cells[c] for c in cell_order]) \
        if len(cell_order) else np.empty(0, dtype=np.int64)
    ids = ids[eligible[ids]]
    if len(ids) == 0:
        return []
    sub = emb.vectors[ids].astype(np.float64) @ q
    order = np.lexsort((ids, -sub))[:k]
    return [RetrievalHit(record_id=int(ids[i]), score=float(sub[i]), source="dense")
            for i in order]
