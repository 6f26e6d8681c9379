"""Shared test helpers: independent brute-force oracles and data makers.

The oracles deliberately avoid the library's index structures: they
recompute weights from scratch and rank via full scans, so agreement with
the inverted-list / matrix paths is a real cross-check.
"""

from __future__ import annotations

import math
import random

import pytest

from ensemblelink.corpus import record_set_from_strings


# ---------------------------------------------------------------------------
# independent n-gram / TF-IDF oracle
# ---------------------------------------------------------------------------

def oracle_ngrams(text: str, n_min: int = 2, n_max: int = 4) -> dict[str, int]:
    """Nested-loop n-gram enumeration, short-string fallback included."""
    out: dict[str, int] = {}
    if not text:
        return out
    if len(text) < n_min:
        return {text: 1}
    n = n_min
    while n <= n_max:
        i = 0
        while i + n <= len(text):
            g = text[i:i + n]
            out[g] = out.get(g, 0) + 1
            i += 1
        n += 1
    return out


def oracle_sparse_rank(corpus_norms: list[str], query_norm: str, k: int,
                       n_min: int = 2, n_max: int = 4):
    """Full-scan cosine ranking over recomputed TF-IDF vectors.

    Returns [(record_id, score)] sorted by (score desc, id asc), length
    min(k, #non-empty records); empty query vector gives [].
    """
    n_docs = len(corpus_norms)
    doc_grams = [oracle_ngrams(t, n_min, n_max) for t in corpus_norms]
    df: dict[str, int] = {}
    for grams in doc_grams:
        for g in grams:
            df[g] = df.get(g, 0) + 1
    idf = {g: math.log((1.0 + n_docs) / (1.0 + c)) + 1.0 for g, c in df.items()}

    def normalize(grams: dict[str, int]) -> dict[str, float]:
        items = sorted((g, grams[g] * idf[g]) for g in grams if g in idf)
        sq = 0.0
        for _, w in items:
            sq += w * w
        if sq == 0.0:
            return {}
        norm = math.sqrt(sq)
        return {g: w / norm for g, w in items}

    doc_vecs = [normalize(g) for g in doc_grams]
    qvec = normalize(oracle_ngrams(query_norm, n_min, n_max))
    if not qvec:
        return []
    scored = []
    for rid, (text, dvec) in enumerate(zip(corpus_norms, doc_vecs)):
        if text == "":
            continue
        score = 0.0
        for g in sorted(qvec):
            if g in dvec:
                score += qvec[g] * dvec[g]
        scored.append((rid, score))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


def oracle_dense_rank(vectors, query, k):
    """Per-row python dot products, full scan, (score desc, id asc)."""
    scored = []
    for rid, vec in enumerate(vectors):
        s = 0.0
        for a, b in zip(vec, query):
            s += float(a) * float(b)
        scored.append((rid, s))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


# ---------------------------------------------------------------------------
# independent mock-backend oracles
# ---------------------------------------------------------------------------

def oracle_fnv1a64(data: bytes, seed: int = 0) -> int:
    h = (0xCBF29CE484222325 ^ seed) & 0xFFFFFFFFFFFFFFFF
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def oracle_mock_embedding(text: str, dim: int = 256, seed: int = 0):
    buckets = [0.0] * dim
    for g, count in oracle_ngrams(text).items():
        buckets[oracle_fnv1a64(g.encode("utf-8"), seed) % dim] += count
    norm = math.sqrt(sum(b * b for b in buckets))
    if norm > 0:
        buckets = [b / norm for b in buckets]
    return buckets


def oracle_lcs(a: str, b: str) -> int:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def oracle_mock_score(q: str, c: str) -> float:
    if not q or not c:
        return 0.0
    ga, gb = set(oracle_ngrams(q)), set(oracle_ngrams(c))
    jac = len(ga & gb) / len(ga | gb) if (ga or gb) else 0.0
    lcs = oracle_lcs(q, c) / max(len(q), len(c))
    return min(1.0, max(0.0, 0.5 * jac + 0.5 * lcs))


# ---------------------------------------------------------------------------
# data makers
# ---------------------------------------------------------------------------

ALPHABET = "abcdefghijklmnopqrstuvwxyz "


def random_strings(rng: random.Random, count: int, min_len: int = 3,
                   max_len: int = 14, distinct: bool = False) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < count:
        s = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(min_len, max_len)))
        s = " ".join(s.split())
        if not s:
            continue
        if distinct:
            if s in seen:
                continue
            seen.add(s)
        out.append(s)
    return out


@pytest.fixture
def small_corpus():
    return record_set_from_strings(
        ["montgomery", "seattle", "oklahoma city", "new york city", "queens"])
