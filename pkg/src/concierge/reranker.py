"""Pointwise reranking of retrieval candidates, plus the presentation policy.

Each query/candidate pair is scored independently as relevant-or-not by a
logistic model over hand-built similarity features; the score ordering decides
whether the bot answers directly or asks the user to disambiguate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .catalog import Catalog, CatalogRecord, RecordKind
from .retrieval import Candidate, IndexConfig, analyze, indexed_text, normalize

N_FEATURES = 8

_TRIGRAM_CONFIG = IndexConfig(use_word_unigrams=False, char_ngram_n=3)


class RankerDataError(Exception):
    pass


@dataclass(frozen=True)
class PairFeatures:
    unigram_overlap: float
    jaccard_tokens: float
    char_trigram_jaccard: float
    tfidf_cosine: float
    prefix_match: float
    query_coverage: float
    normalized_edit_similarity: float
    kind_is_hotel: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.unigram_overlap,
                self.jaccard_tokens,
                self.char_trigram_jaccard,
                self.tfidf_cosine,
                self.prefix_match,
                self.query_coverage,
                self.normalized_edit_similarity,
                self.kind_is_hotel,
            ]
        )


@dataclass(frozen=True)
class RankedMatch:
    record_id: int
    relevance: float
    rank: int


class Presentation(str, Enum):
    DIRECT = "DIRECT"
    DISAMBIGUATE = "DISAMBIGUATE"
    NO_MATCH = "NO_MATCH"


@dataclass(frozen=True)
class PresentationDecision:
    variant: Presentation
    items: tuple[RankedMatch, ...]


def unigram_baseline_score(query: str, name: str) -> float:
    """Token-set overlap relative to the query; the rule-based baseline."""
    q = set(normalize(query).split()) - {""}
    d = set(normalize(name).split()) - {""}
    if not q:
        return 0.0
    return len(q & d) / len(q)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def extract_pair_features(
    query: str, record: CatalogRecord, retrieval_score: float
) -> PairFeatures:
    """Deterministic similarity features, all within [0, 1].

    The candidate side is the record's indexed text (name plus city for
    hotels), matching what retrieval scored.
    """
    doc = indexed_text(record)
    q_norm, d_norm = normalize(query), normalize(doc)
    q_tokens = set(q_norm.split()) - {""}
    d_tokens = set(d_norm.split()) - {""}
    inter = len(q_tokens & d_tokens)
    union = len(q_tokens | d_tokens)

    q_tri = set(analyze(query, _TRIGRAM_CONFIG))
    d_tri = set(analyze(doc, _TRIGRAM_CONFIG))
    tri_union = len(q_tri | d_tri)

    first = d_norm.split()[0] if d_tokens else ""
    max_len = max(len(q_norm), len(d_norm))
    edit_sim = 1.0 - levenshtein(q_norm, d_norm) / max_len if max_len else 1.0

    return PairFeatures(
        unigram_overlap=inter / len(q_tokens) if q_tokens else 0.0,
        jaccard_tokens=inter / union if union else 0.0,
        char_trigram_jaccard=len(q_tri & d_tri) / tri_union if tri_union else 0.0,
        tfidf_cosine=min(max(retrieval_score, 0.0), 1.0),
        prefix_match=1.0 if first and first in q_tokens else 0.0,
        query_coverage=inter / len(d_tokens) if d_tokens else 0.0,
        normalized_edit_similarity=edit_sim,
        kind_is_hotel=1.0 if record.kind is RecordKind.HOTEL else 0.0,
    )


@dataclass(frozen=True)
class RankerTrainConfig:
    epochs: int = 150
    learning_rate: float = 0.3
    l2: float = 1e-4
    seed: int = 0
    batch_size: int = 64


@dataclass
class RankerModel:
    weights: np.ndarray  # [N_FEATURES]
    bias: float
    config_hash: str = ""
    loss_history: list[float] | None = None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean binary cross-entropy plus L2 on weights, with gradients."""
    z = features @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, z) - labels * z)) + 0.5 * l2 * float(
        weights @ weights
    )
    residual = (_sigmoid(z) - labels) / len(labels)
    d_weights = features.T @ residual + l2 * weights
    d_bias = float(residual.sum())
    return loss, d_weights, d_bias


def train_ranker(
    data: list[tuple[str, CatalogRecord, float, int]],
    config: RankerTrainConfig | None = None,
) -> RankerModel:
    """Logistic regression over pair features by mini-batch gradient descent.

    `data` rows are (query, candidate record, retrieval score, label 0/1);
    both labels must be present.
    """
    config = config or RankerTrainConfig()
    labels = np.array([label for *_, label in data], dtype=float)
    if not ((labels == 0).any() and (labels == 1).any()):
        raise RankerDataError("training data must contain both labels")
    features = np.stack(
        [extract_pair_features(q, rec, score).as_array() for q, rec, score, _ in data]
    )

    weights = np.zeros(N_FEATURES)
    bias = 0.0
    rng = np.random.default_rng(config.seed)
    loss_history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        for start in range(0, len(data), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, d_weights, d_bias = logistic_loss_and_grad(
                weights, bias, features[idx], labels[idx], config.l2
            )
            weights -= config.learning_rate * d_weights
            bias -= config.learning_rate * d_bias
            epoch_loss += loss * len(idx)
        loss_history.append(epoch_loss / len(data))

    return RankerModel(weights=weights, bias=bias, loss_history=loss_history)


def relevance(model: RankerModel, query: str, record: CatalogRecord, retrieval_score: float) -> float:
    feats = extract_pair_features(query, record, retrieval_score).as_array()
    return float(_sigmoid(np.array([feats @ model.weights + model.bias]))[0])


def rerank(
    model: RankerModel,
    query: str,
    candidates: list[Candidate],
    catalog: Catalog,
) -> list[RankedMatch]:
    """Relevance-sorted candidates with contiguous ranks from 1."""
    scored = [
        (relevance(model, query, catalog.by_id(c.record_id), c.retrieval_score), c.record_id)
        for c in candidates
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        RankedMatch(record_id=rid, relevance=rel, rank=i)
        for i, (rel, rid) in enumerate(scored, start=1)
    ]


def decide_presentation(
    ranking: list[RankedMatch], theta_high: float = 0.9
) -> PresentationDecision:
    """Direct answer above the confidence bar, otherwise up to 3 choices."""
    if not ranking:
        return PresentationDecision(Presentation.NO_MATCH, ())
    if ranking[0].relevance >= theta_high:
        return PresentationDecision(Presentation.DIRECT, (ranking[0],))
    return PresentationDecision(Presentation.DISAMBIGUATE, tuple(ranking[:3]))


# --------------------------------------------------------------------------
# Data files and artifacts.


def load_ir_data(path: str | Path) -> list[tuple[str, list[tuple[int, int]]]]:
    """JSONL rows `{"query": ..., "candidates": [{"record_id", "label"}]}`."""
    rows: list[tuple[str, list[tuple[int, int]]]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                cands = [(int(c["record_id"]), int(c["label"])) for c in obj["candidates"]]
                rows.append((str(obj["query"]), cands))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RankerDataError(f"line {line_no}: {exc}") from exc
    return rows


def save_ir_data(rows: list[tuple[str, list[tuple[int, int]]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for query, cands in rows:
            obj = {
                "query": query,
                "candidates": [{"record_id": rid, "label": label} for rid, label in cands],
            }
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def save_ranker(model: RankerModel, path: str | Path) -> None:
    payload = {
        "version": 1,
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "config_hash": model.config_hash,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_ranker(path: str | Path) -> RankerModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != 1:
        raise RankerDataError(f"unsupported ranker version {payload.get('version')!r}")
    return RankerModel(
        weights=np.array(payload["weights"], dtype=float),
        bias=float(payload["bias"]),
        config_hash=str(payload.get("config_hash", "")),
    )
