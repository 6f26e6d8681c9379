"""Model backends: builtin deterministic ones plus loaders for real
pre-trained weights (sentence-transformers / transformers, lazy imports).

Builtin backends are pure functions of their inputs: hashed character
n-gram embeddings, a lexical pair scorer, and argmax selection. They exist
so the protocol can be served and conformance-tested on machines without
any model weights.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .config import ModelSpec

BUILTIN_DIM = 256

# Versioned so clients can detect template drift via /v1/health extensions.
SELECT_PROMPT_VERSION = "1"
SELECT_PROMPT_TEMPLATE = (
    "You are matching records that refer to the same real-world entity.\n"
    "Query: {query}\n"
    "Candidates:\n"
    "{numbered_candidates}\n"
    "Answer with the number (1-{m}) of the candidate that refers to the "
    "same entity as the query. Answer with a single integer and nothing else."
)


def _ngrams(text: str, n_min: int = 2, n_max: int = 4) -> Counter:
    grams: Counter = Counter()
    if not text:
        return grams
    if len(text) < n_min:
        grams[text] += 1
        return grams
    for n in range(n_min, n_max + 1):
        for i in range(len(text) - n + 1):
            grams[text[i:i + n]] += 1
    return grams


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _lcs(a: str, b: str) -> int:
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if ca == cb else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


class BuiltinEmbedBackend:
    dim = BUILTIN_DIM

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim, dtype=np.float64)
            for gram, count in sorted(_ngrams(text).items()):
                vec[_fnv1a64(gram.encode("utf-8")) % self.dim] += count
            norm = float(np.linalg.norm(vec))
            if norm > 0:
                vec /= norm
            out.append([float(x) for x in vec])
        return out


class BuiltinRerankBackend:
    def score(self, query: str, candidates: list[str]) -> list[float]:
        return [self._pair(query, c) for c in candidates]

    @staticmethod
    def _pair(q: str, c: str) -> float:
        if not q or not c:
            return 0.0
        ga, gb = set(_ngrams(q)), set(_ngrams(c))
        jac = len(ga & gb) / len(ga | gb) if (ga or gb) else 0.0
        lcs = _lcs(q, c) / max(len(q), len(c))
        return min(1.0, max(0.0, 0.5 * jac + 0.5 * lcs))


class BuiltinSelectBackend:
    def __init__(self):
        self._scorer = BuiltinRerankBackend()

    def select(self, query: str, candidates: list[str]) -> int:
        scores = self._scorer.score(query, candidates)
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        return best + 1


class SentenceTransformerEmbedBackend:
    """Bi-encoder weights loaded from a local path."""

    def __init__(self, spec: ModelSpec):
        from sentence_transformers import SentenceTransformer
        self.model = SentenceTransformer(spec.weights, device=spec.device)
        self.batch_size = spec.batch_size
        self.dim = self.model.get_sentence_embedding_dimension()

    def embed(self, texts: list[str]) -> list[list[float]]:
        vecs = self.model.encode(texts, batch_size=self.batch_size,
                                 normalize_embeddings=True,
                                 convert_to_numpy=True)
        return [[float(x) for x in row] for row in vecs]


class CrossEncoderRerankBackend:
    """Cross-encoder weights from a local path; raw logits squashed to
    [0, 1] with the model's sigmoid head."""

    def __init__(self, spec: ModelSpec):
        from sentence_transformers import CrossEncoder
        self.model = CrossEncoder(spec.weights, device=spec.device)
        self.batch_size = spec.batch_size

    def score(self, query: str, candidates: list[str]) -> list[float]:
        raw = self.model.predict([(query, c) for c in candidates],
                                 batch_size=self.batch_size)
        return [self._squash(float(s)) for s in raw]

    @staticmethod
    def _squash(score: float) -> float:
        if 0.0 <= score <= 1.0:
            return score
        return 1.0 / (1.0 + math.exp(-score))


class CausalLMSelectBackend:
    """Instruction-following LLM; greedy decoding, integer-only parse."""

    def __init__(self, spec: ModelSpec):
        import torch  # noqa: F401  (device handling)
        from transformers import AutoModelForCausalLM, AutoTokenizer
        self.tokenizer = AutoTokenizer.from_pretrained(spec.weights)
        self.model = AutoModelForCausalLM.from_pretrained(spec.weights)
        self.model.to(spec.device)
        self.model.eval()
        self.device = spec.device

    def select(self, query: str, candidates: list[str]) -> int:
        numbered = "\n".join(f"{i}. {c}" for i, c in enumerate(candidates, 1))
        prompt = SELECT_PROMPT_TEMPLATE.format(
            query=query, numbered_candidates=numbered, m=len(candidates))
        inputs = self.tokenizer(prompt, return_tensors="pt").to(self.device)
        output = self.model.generate(**inputs, max_new_tokens=8,
                                     do_sample=False, temperature=None,
                                     top_p=None)
        text = self.tokenizer.decode(output[0][inputs["input_ids"].shape[1]:],
                                     skip_special_tokens=True).strip()
        digits = "".join(ch for ch in text if ch.isdigit())
        if not digits:
            raise ValueError(f"LLM reply {text!r} contains no candidate index")
        idx = int(digits)
        if not 1 <= idx <= len(candidates):
            raise ValueError(f"LLM reply index {idx} out of range")
        return idx


def load_backend(spec: ModelSpec):
    if spec.weights == "builtin":
        return {"embed": BuiltinEmbedBackend,
                "rerank": BuiltinRerankBackend,
                "select": BuiltinSelectBackend}[spec.kind]()
    if spec.kind == "embed":
        return SentenceTransformerEmbedBackend(spec)
    if spec.kind == "rerank":
        return CrossEncoderRerankBackend(spec)
    return CausalLMSelectBackend(spec)
