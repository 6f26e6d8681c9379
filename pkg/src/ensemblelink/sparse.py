"""Character n-gram TF-IDF index with exact cosine top-k retrieval.

Design choices pinned for bit-for-bit reproducibility:
  * tf = raw n-gram count, idf(t) = ln((1+N)/(1+df(t))) + 1, doc vectors
    L2-normalized
  * term ids assigned in lexicographic n-gram order
  * score accumulation iterates query terms in ascending term id, so doc
    scores for identical n-gram profiles are bitwise equal
  * tie rule everywhere: (score desc, record_id asc)

Retrieval uses inverted-list accumulation but ranks over all retrievable
records, so results match a brute-force full scan exactly (zero-score
records pad the tail when k exceeds the number of overlapping records).
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .candidates import RetrievalHit
from .corpus import Record, RecordSet
from .errors import IndexFormatError, InputError

DEFAULT_N_MIN = 2
DEFAULT_N_MAX = 4

_MAGIC = b"ENLS"
_VERSION = 1


def extract_ngrams(text: str, n_min: int = DEFAULT_N_MIN,
                   n_max: int = DEFAULT_N_MAX) -> Counter:
    """All contiguous n-grams for n in [n_min, n_max], with multiplicity.

    Strings shorter than n_min contribute themselves as a single term so
    very short records remain indexable; the empty string yields nothing.
    """
    if not 1 <= n_min <= n_max:
        raise ValueError(f"invalid n-gram range [{n_min}, {n_max}]")
    grams: Counter = Counter()
    length = len(text)
    if length == 0:
        return grams
    if length < n_min:
        grams[text] += 1
        return grams
    for n in range(n_min, n_max + 1):
        for i in range(length - n + 1):
            grams[text[i:i + n]] += 1
    return grams


@dataclass
class SparseIndex:
    vocab: dict[str, int]            # n-gram -> term id (lexicographic order)
    idf: np.ndarray                  # float64, len == len(vocab)
    doc_vectors: list[dict[int, float]]  # term id -> normalized weight
    postings_ids: list[np.ndarray]   # per term: int64 record ids
    postings_wts: list[np.ndarray]   # per term: float64 normalized weights
    eligible: np.ndarray             # bool per record; False for empty norms
    n_min: int
    n_max: int
    corpus_size: int


def build_sparse_index(corpus: RecordSet, n_min: int = DEFAULT_N_MIN,
                       n_max: int = DEFAULT_N_MAX) -> SparseIndex:
    if len(corpus) == 0:
        raise InputError("cannot build a sparse index over an empty corpus")

    doc_grams = [extract_ngrams(r.norm, n_min, n_max) for r in corpus]
    df: Counter = Counter()
    for grams in doc_grams:
        df.update(grams.keys())
    vocab = {g: i for i, g in enumerate(sorted(df))}

    n_docs = len(corpus)
    idf = np.empty(len(vocab), dtype=np.float64)
    for gram, tid in vocab.items():
        idf[tid] = np.log((1.0 + n_docs) / (1.0 + df[gram])) + 1.0

    doc_vectors: list[dict[int, float]] = []
    eligible = np.zeros(n_docs, dtype=bool)
    for rec, grams in zip(corpus, doc_grams):
        vec = _weigh_and_normalize(grams, vocab, idf)
        doc_vectors.append(vec)
        eligible[rec.id] = not rec.is_empty

    postings_ids: list[np.ndarray] = [None] * len(vocab)  # type: ignore[list-item]
    postings_wts: list[np.ndarray] = [None] * len(vocab)  # type: ignore[list-item]
    acc_ids: list[list[int]] = [[] for _ in range(len(vocab))]
    acc_wts: list[list[float]] = [[] for _ in range(len(vocab))]
    for rid, vec in enumerate(doc_vectors):
        for tid in sorted(vec):
            acc_ids[tid].append(rid)
            acc_wts[tid].append(vec[tid])
    for tid in range(len(vocab)):
        postings_ids[tid] = np.asarray(acc_ids[tid], dtype=np.int64)
        postings_wts[tid] = np.asarray(acc_wts[tid], dtype=np.float64)

    return SparseIndex(vocab=vocab, idf=idf, doc_vectors=doc_vectors,
                       postings_ids=postings_ids, postings_wts=postings_wts,
                       eligible=eligible, n_min=n_min, n_max=n_max,
                       corpus_size=n_docs)


def _weigh_and_normalize(grams: Counter, vocab: dict[str, int],
                         idf: np.ndarray) -> dict[int, float]:
    """tf*idf weights over known terms, L2-normalized in ascending term order."""
    items: list[tuple[int, float]] = []
    for gram in grams:
        tid = vocab.get(gram)
        if tid is not None:
            items.append((tid, grams[gram] * idf[tid]))
    items.sort()
    sq = 0.0
    for _, w in items:
        sq += w * w
    if sq == 0.0:
        return {}
    norm = np.sqrt(sq)
    return {tid: w / norm for tid, w in items}


def query_vector(index: SparseIndex, query: Record) -> dict[int, float]:
    """Normalized TF-IDF vector for a query, using corpus-side idf.

    N-grams absent from the corpus vocabulary are dropped.
    """
    grams = extract_ngrams(query.norm, index.n_min, index.n_max)
    return _weigh_and_normalize(grams, index.vocab, index.idf)


def sparse_topk(index: SparseIndex, query: Record, k: int) -> list[RetrievalHit]:
    """Top-k records by cosine similarity; equals a full scan exactly."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qvec = query_vector(index, query)
    if not qvec:
        return []
    scores = np.zeros(index.corpus_size, dtype=np.float64)
    for tid in sorted(qvec):
        wq = qvec[tid]
        ids = index.postings_ids[tid]
        if len(ids):
            scores[ids] += wq * index.postings_wts[tid]
    return rank_scores(scores, index.eligible, k, source="sparse")


def rank_scores(scores: np.ndarray, eligible: np.ndarray, k: int,
                source: str) -> list[RetrievalHit]:
    """Rank eligible records by (score desc, record_id asc), keep top k."""
    ids = np.nonzero(eligible)[0]
    sub = scores[ids]
    order = np.lexsort((ids, -sub))[:k]
    return [RetrievalHit(record_id=int(ids[i]), score=float(sub[i]), source=source)
            for i in order]


# ---------------------------------------------------------------------------
# Persistence: versioned binary format, magic "ENLS"
# ---------------------------------------------------------------------------

def save_sparse_index(index: SparseIndex, path: str | Path) -> None:
    terms = sorted(index.vocab, key=index.vocab.get)  # type: ignore[arg-type]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIII", _VERSION, index.n_min, index.n_max,
                             index.corpus_size, len(terms)))
        for t in terms:
            b = t.encode("utf-8")
            fh.write(struct.pack("<I", len(b)))
            fh.write(b)
        fh.write(index.idf.astype("<f8").tobytes())
        fh.write(np.packbits(index.eligible).tobytes())
        for tid in range(len(terms)):
            ids = index.postings_ids[tid]
            fh.write(struct.pack("<I", len(ids)))
            fh.write(ids.astype("<i8").tobytes())
            fh.write(index.postings_wts[tid].astype("<f8").tobytes())


def load_sparse_index(path: str | Path) -> SparseIndex:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read sparse index {path}: {exc}") from exc
    try:
        return _parse_index(data)
    except (struct.error, ValueError, IndexError, UnicodeDecodeError) as exc:
        raise IndexFormatError(f"corrupt sparse index file {path}: {exc}") from exc


def _parse_index(data: bytes) -> SparseIndex:
    if data[:4] != _MAGIC:
        raise IndexFormatError("not a sparse index file (bad magic)")
    off = 4
    version, n_min, n_max, corpus_size, vocab_size = struct.unpack_from("<IIIII", data, off)
    off += 20
    if version != _VERSION:
        raise IndexFormatError(
            f"unsupported sparse index version {version} (expected {_VERSION})")
    vocab: dict[str, int] = {}
    for tid in range(vocab_size):
        (tlen,) = struct.unpack_from("<I", data, off)
        off += 4
        vocab[data[off:off + tlen].decode("utf-8")] = tid
        off += tlen
    idf = np.frombuffer(data, dtype="<f8", count=vocab_size, offset=off).copy()
    off += vocab_size * 8
    packed_len = (corpus_size + 7) // 8
    eligible = np.unpackbits(
        np.frombuffer(data, dtype=np.uint8, count=packed_len, offset=off)
    )[:corpus_size].astype(bool)
    off += packed_len
    postings_ids: list[np.ndarray] = []
    postings_wts: list[np.ndarray] = []
    for _ in range(vocab_size):
        (cnt,) = struct.unpack_from("<I", data, off)
        off += 4
        postings_ids.append(np.frombuffer(data, dtype="<i8", count=cnt, offset=off).copy())
        off += cnt * 8
        postings_wts.append(np.frombuffer(data, dtype="<f8", count=cnt, offset=off).copy())
        off += cnt * 8
    if off != len(data):
        raise IndexFormatError("trailing bytes in sparse index file")
    doc_vectors: list[dict[int, float]] = [dict() for _ in range(corpus_size)]
    for tid in range(vocab_size):
        for rid, w in zip(postings_ids[tid], postings_wts[tid]):
            doc_vectors[int(rid)][tid] = float(w)
    return SparseIndex(vocab=vocab, idf=idf, doc_vectors=doc_vectors,
                       postings_ids=postings_ids, postings_wts=postings_wts,
                       eligible=eligible, n_min=n_min, n_max=n_max,
                       corpus_size=corpus_size)
