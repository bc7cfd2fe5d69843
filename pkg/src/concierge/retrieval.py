"""Candidate generation: tf-idf weighted n-gram matching over the catalog."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .catalog import Catalog, CatalogRecord, RecordKind

_NORMALIZE = re.compile(r"[^0-9a-z]+")

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class IndexConfig:
    use_word_unigrams: bool = True
    char_ngram_n: int = 3
    k_candidates: int = 10

    def __post_init__(self) -> None:
        if self.char_ngram_n < 2:
            raise ValueError("char_ngram_n must be >= 2")
        if self.k_candidates < 1:
            raise ValueError("k_candidates must be >= 1")


@dataclass(frozen=True)
class Candidate:
    record_id: int
    retrieval_score: float


def indexed_text(record: CatalogRecord) -> str:
    """The text a record is indexed (and reranked) under.

    Hotels carry their city so city-qualified queries can reach them.
    """
    if record.kind is RecordKind.HOTEL and record.city:
        return f"{record.name} {record.city}"
    return record.name


def normalize(text: str) -> str:
    """Lowercase and collapse runs of whitespace/punctuation to single spaces."""
    return _NORMALIZE.sub(" ", text.lower()).strip()


def analyze(text: str, config: IndexConfig) -> Counter[str]:
    """Multiset of grams: word unigrams plus character n-grams.

    Character n-grams run over the normalized string with spaces included
    and no padding. Word and character grams live in separate namespaces so
    a word never collides with an identical character n-gram.
    """
    norm = normalize(text)
    grams: Counter[str] = Counter()
    if not norm:
        return grams
    if config.use_word_unigrams:
        for tok in norm.split(" "):
            grams[f"w:{tok}"] += 1
    n = config.char_ngram_n
    for i in range(len(norm) - n + 1):
        grams[f"c:{norm[i : i + n]}"] += 1
    return grams


def _tf(count: int) -> float:
    return 1.0 + math.log(count)


class SearchIndex:
    """Inverted index with precomputed idf weights and document norms."""

    def __init__(
        self,
        config: IndexConfig,
        postings: dict[str, list[tuple[int, int]]],
        doc_count: int,
    ):
        self.config = config
        self.postings = postings
        self.doc_count = doc_count
        self.df: dict[str, int] = {g: len(p) for g, p in postings.items()}
        self.idf: dict[str, float] = {
            g: self._idf_for_df(df) for g, df in self.df.items()
        }
        norms: dict[int, float] = {}
        for gram, plist in postings.items():
            idf = self.idf[gram]
            for doc_id, count in plist:
                w = _tf(count) * idf
                norms[doc_id] = norms.get(doc_id, 0.0) + w * w
        self.doc_norms: dict[int, float] = {d: math.sqrt(s) for d, s in norms.items()}

    def _idf_for_df(self, df: int) -> float:
        return math.log((self.doc_count + 1) / (df + 1)) + 1.0

    def idf_of(self, gram: str) -> float:
        """idf for any gram; unseen grams get the df=0 smoothed value."""
        known = self.idf.get(gram)
        return known if known is not None else self._idf_for_df(0)


def build_index(catalog: Catalog, config: IndexConfig | None = None) -> SearchIndex:
    if len(catalog) == 0:
        raise ValueError("cannot index an empty catalog")
    config = config or IndexConfig()
    postings: dict[str, list[tuple[int, int]]] = {}
    for record in catalog:
        grams = analyze(indexed_text(record), config)
        for gram, count in grams.items():
            postings.setdefault(gram, []).append((record.id, count))
    return SearchIndex(config, postings, len(catalog))


def query_candidates(index: SearchIndex, query: str) -> list[Candidate]:
    """Top-k records by cosine similarity between tf-idf vectors.

    Records sharing no grams with the query are excluded; ties break by
    ascending record id.
    """
    grams = analyze(query, index.config)
    if not grams:
        return []
    query_norm_sq = 0.0
    dots: dict[int, float] = {}
    for gram, count in grams.items():
        idf = index.idf_of(gram)
        qw = _tf(count) * idf
        query_norm_sq += qw * qw
        for doc_id, doc_count in index.postings.get(gram, ()):
            dots[doc_id] = dots.get(doc_id, 0.0) + qw * _tf(doc_count) * idf
    if not dots:
        return []
    query_norm = math.sqrt(query_norm_sq)
    scored = [
        Candidate(doc_id, dot / (query_norm * index.doc_norms[doc_id]))
        for doc_id, dot in dots.items()
    ]
    scored.sort(key=lambda c: (-c.retrieval_score, c.record_id))
    return scored[: index.config.k_candidates]


def score_pair(index: SearchIndex, query: str, record: CatalogRecord) -> float:
    """Cosine score for one (query, record) pair, identical to the score
    query_candidates would assign; usable even off the top-k list."""
    q_grams = analyze(query, index.config)
    if not q_grams:
        return 0.0
    d_grams = analyze(indexed_text(record), index.config)
    query_norm_sq = 0.0
    dot = 0.0
    for gram, count in q_grams.items():
        idf = index.idf_of(gram)
        qw = _tf(count) * idf
        query_norm_sq += qw * qw
        if gram in d_grams:
            dot += qw * _tf(d_grams[gram]) * idf
    if dot == 0.0:
        return 0.0
    doc_norm = index.doc_norms[record.id]
    return dot / (math.sqrt(query_norm_sq) * doc_norm)


def save_index(index: SearchIndex, path: str | Path) -> None:
    payload = {
        "version": INDEX_FORMAT_VERSION,
        "doc_count": index.doc_count,
        "config": {
            "use_word_unigrams": index.config.use_word_unigrams,
            "char_ngram_n": index.config.char_ngram_n,
            "k_candidates": index.config.k_candidates,
        },
        "postings": {g: [[d, c] for d, c in p] for g, p in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path) -> SearchIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index format version {payload.get('version')!r}")
    config = IndexConfig(**payload["config"])
    postings = {
        gram: [(int(d), int(c)) for d, c in plist]
        for gram, plist in payload["postings"].items()
    }
    return SearchIndex(config, postings, int(payload["doc_count"]))
