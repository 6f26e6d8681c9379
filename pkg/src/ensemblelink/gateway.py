"""Model gateway: HTTP client for the serving protocol plus deterministic
mock backends so the whole pipeline runs with no external models.

Wire protocol (JSON over HTTP/1.1, UTF-8):
    POST /v1/embed  {"id", "model", "texts"}              -> {"id", "dim", "embeddings"}
    POST /v1/rerank {"id", "model", "query", "candidates"} -> {"id", "scores"}
    POST /v1/select {"id", "model", "query", "candidates"} -> {"id", "index"}
    GET  /v1/health                                        -> {"status", "models"}
Every request carries a client-generated id that the server must echo.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (BackendUnavailableError, ConfigError, ProtocolError,
                     SelectParseError)
from .sparse import extract_ngrams

MOCK_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """FNV-1a 64-bit hash; the seed perturbs the offset basis."""
    h = (_FNV_OFFSET ^ seed) & _MASK64
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass
class GatewayConfig:
    mode: str = "mock"  # "mock" | "remote"
    base_url: str | None = None
    embed_model: str = "mock-embed"
    rerank_model: str = "mock-rerank"
    select_model: str = "mock-select"
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.mode not in ("mock", "remote"):
            raise ConfigError(f"unknown gateway mode {self.mode!r}")
        if self.mode == "remote" and not self.base_url:
            raise ConfigError("remote gateway mode requires a base_url")


def lcs_length(a: str, b: str) -> int:
    """Classic longest-common-subsequence length, O(len(a)*len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def ngram_jaccard(a: str, b: str) -> float:
    ga = set(extract_ngrams(a))
    gb = set(extract_ngrams(b))
    if not ga or not gb:
        return 0.0
    return len(ga & gb) / len(ga | gb)


def mock_pair_score(query: str, candidate: str) -> float:
    """Deterministic stand-in for a cross-encoder: half n-gram Jaccard,
    half normalized LCS ratio, clamped to [0, 1]."""
    if not query or not candidate:
        return 0.0
    lcs = lcs_length(query, candidate) / max(len(query), len(candidate))
    score = 0.5 * ngram_jaccard(query, candidate) + 0.5 * lcs
    return min(1.0, max(0.0, score))


@dataclass
class MockBackend:
    """Pure, bit-deterministic backends (no network, no model weights)."""
    dim: int = MOCK_DIM
    hash_seed: int = 0

    def embed(self, texts: list[str], model_id: str) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]

    def embed_one(self, text: str) -> np.ndarray:
        """Hashed-character-n-gram vector: each 2-4-gram hashed into a
        bucket, counts accumulated, then L2-normalized."""
        vec = np.zeros(self.dim, dtype=np.float64)
        grams = extract_ngrams(text)
        for gram in sorted(grams):
            bucket = fnv1a64(gram.encode("utf-8"), self.hash_seed) % self.dim
            vec[bucket] += grams[gram]
        norm = float(np.sqrt(np.dot(vec, vec)))
        if norm > 0.0:
            vec /= norm
        return vec.astype(np.float32)

    def rerank(self, query: str, candidates: list[str], model_id: str) -> list[float]:
        return [mock_pair_score(query, c) for c in candidates]

    def select(self, query: str, candidates: list[str], model_id: str) -> int:
        scores = self.rerank(query, candidates, model_id)
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        return best + 1

    def health(self) -> dict:
        return {"status": "ok", "models": ["mock-embed", "mock-rerank", "mock-select"]}


class RemoteGateway:
    """HTTP client with retries (exponential backoff) and id correlation."""

    _BACKOFFS = (0.25, 1.0)

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.base_url = (config.base_url or "").rstrip("/")
        self.session = requests.Session()

    def _post(self, endpoint: str, payload: dict) -> dict:
        req_id = str(uuid.uuid4())
        payload = dict(payload, id=req_id)
        url = f"{self.base_url}{endpoint}"
        last_exc: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.session.post(url, json=payload,
                                         timeout=self.config.timeout)
                if resp.status_code >= 500:
                    last_exc = ProtocolError(
                        f"{endpoint} returned HTTP {resp.status_code}")
                elif resp.status_code >= 400:
                    body = _safe_json(resp)
                    err = body.get("error", {}) if isinstance(body, dict) else {}
                    raise ProtocolError(
                        f"{endpoint} rejected request: "
                        f"{err.get('code', resp.status_code)}: {err.get('message', '')}")
                else:
                    body = _safe_json(resp)
                    if not isinstance(body, dict):
                        raise ProtocolError(f"{endpoint}: non-object JSON reply")
                    if body.get("id") != req_id:
                        raise ProtocolError(
                            f"{endpoint}: response id {body.get('id')!r} does not "
                            f"match request id {req_id!r}")
                    return body
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
            if attempt < self.config.retries:
                time.sleep(self._BACKOFFS[min(attempt, len(self._BACKOFFS) - 1)])
        raise BackendUnavailableError(
            f"gateway unreachable at {url}: {last_exc}")

    def embed(self, texts: list[str], model_id: str) -> list[np.ndarray]:
        body = self._post("/v1/embed", {"model": model_id, "texts": texts})
        embs = body.get("embeddings")
        dim = body.get("dim")
        if not isinstance(embs, list) or len(embs) != len(texts):
            raise ProtocolError("embed: embedding count mismatch")
        out = []
        for row in embs:
            if len(row) != dim:
                raise ProtocolError("embed: inconsistent dimension in batch")
            out.append(np.asarray(row, dtype=np.float32))
        return out

    def rerank(self, query: str, candidates: list[str], model_id: str) -> list[float]:
        body = self._post("/v1/rerank", {"model": model_id, "query": query,
                                         "candidates": candidates})
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise ProtocolError("rerank: score count mismatch")
        return [float(s) for s in scores]

    def select(self, query: str, candidates: list[str], model_id: str) -> int:
        body = self._post("/v1/select", {"model": model_id, "query": query,
                                         "candidates": candidates})
        idx = body.get("index")
        if not isinstance(idx, int) or isinstance(idx, bool) \
                or not 1 <= idx <= len(candidates):
            raise SelectParseError(
                f"select: reply {idx!r} is not an index in [1, {len(candidates)}]")
        return idx

    def health(self) -> dict:
        url = f"{self.base_url}/v1/health"
        try:
            resp = self.session.get(url, timeout=self.config.timeout)
            resp.raise_for_status()
            return _safe_json(resp)
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"health check failed: {exc}") from exc


def _safe_json(resp: requests.Response) -> dict:
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"non-JSON response body: {exc}") from exc


def make_gateway(config: GatewayConfig):
    if config.mode == "mock":
        return MockBackend()
    return RemoteGateway(config)
