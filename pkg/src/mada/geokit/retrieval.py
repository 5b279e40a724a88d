"""Hybrid documentation retrieval: tf-idf cosine fused with BM25.

Both components are min-max normalized over the corpus and combined with
equal weight; ties break by chunk id ascending.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field as dc_field
from pathlib import Path

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmptyCorpus(Exception):
    """Retrieval was attempted over a corpus with no chunks."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class DocChunk:
    id: int
    function_names: list[str]
    text: str

    def tokens(self) -> list[str]:
        # Function names are part of the searchable surface of a chunk.
        return tokenize(" ".join(self.function_names) + " " + self.text)


@dataclass
class ScoredChunk:
    chunk: DocChunk
    score: float
    cosine: float
    bm25: float


@dataclass
class Retriever:
    chunks: list[DocChunk]
    _idf: dict[str, float] = dc_field(init=False, repr=False)
    _bags: list[Counter] = dc_field(init=False, repr=False)
    _avg_len: float = dc_field(init=False, repr=False)

    def __post_init__(self):
        self._bags = [Counter(c.tokens()) for c in self.chunks]
        n = len(self.chunks)
        df: Counter = Counter()
        for bag in self._bags:
            df.update(bag.keys())
        self._idf = {
            term: math.log((n - count + 0.5) / (count + 0.5) + 1.0)
            for term, count in df.items()
        }
        lengths = [sum(bag.values()) for bag in self._bags]
        self._avg_len = (sum(lengths) / n) if n else 0.0

    def idf(self, term: str) -> float:
        return self._idf.get(term, 0.0)

    def _tfidf(self, bag: Counter) -> dict[str, float]:
        return {t: tf * self.idf(t) for t, tf in bag.items()}

    def cosine_scores(self, query: str) -> list[float]:
        qvec = self._tfidf(Counter(tokenize(query)))
        qnorm = math.sqrt(sum(w * w for w in qvec.values()))
        out = []
        for bag in self._bags:
            dvec = self._tfidf(bag)
            dnorm = math.sqrt(sum(w * w for w in dvec.values()))
            if qnorm == 0.0 or dnorm == 0.0:
                out.append(0.0)
                continue
            dot = sum(w * dvec.get(t, 0.0) for t, w in qvec.items())
            out.append(dot / (qnorm * dnorm))
        return out

    def bm25_scores(self, query: str) -> list[float]:
        terms = tokenize(query)
        out = []
        for bag in self._bags:
            length = sum(bag.values())
            norm = BM25_K1 * (1.0 - BM25_B + BM25_B * length / self._avg_len) if self._avg_len else 0.0
            score = 0.0
            for term in terms:
                tf = bag.get(term, 0)
                if tf == 0:
                    continue
                score += self.idf(term) * tf * (BM25_K1 + 1.0) / (tf + norm)
            out.append(score)
        return out

    def retrieve(self, query: str, k: int) -> list[ScoredChunk]:
        if not self.chunks:
            raise EmptyCorpus("retrieval over an empty corpus")
        if k < 1:
            raise ValueError("k must be at least 1")
        raw_cos = self.cosine_scores(query)
        raw_bm = self.bm25_scores(query)
        cos = _min_max(raw_cos)
        bm = _min_max(raw_bm)
        scored = [
            ScoredChunk(chunk=c, score=0.5 * cos[i] + 0.5 * bm[i],
                        cosine=raw_cos[i], bm25=raw_bm[i])
            for i, c in enumerate(self.chunks)
        ]
        scored.sort(key=lambda s: (-s.score, s.chunk.id))
        return scored[:k]


def _min_max(values: list[float]) -> list[float]:
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.0 for _ in values]
    return [(v - lo) / (hi - lo) for v in values]


def hybrid_retrieve(query: str, corpus: list[DocChunk], k: int) -> list[ScoredChunk]:
    """One-shot convenience over Retriever for small corpora."""
    return Retriever(corpus).retrieve(query, k)


def load_corpus(path: str | Path) -> list[DocChunk]:
    """Read a JSONL corpus: one {id, function_names, text} record per line."""
    chunks = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        obj = json.loads(line)
        chunks.append(DocChunk(
            id=int(obj["id"]),
            function_names=[str(s) for s in obj["function_names"]],
            text=str(obj["text"]),
        ))
    return chunks


def dump_corpus(chunks: list[DocChunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps(
                {"id": c.id, "function_names": c.function_names, "text": c.text},
                sort_keys=True,
            ) + "\n")
