"""Two-stage intent classification.

Stage one is exact keyword-rule matching; stage two is a softmax classifier
over hashed text features whose below-threshold predictions fall back to the
*unknown* intent (which routes the conversation to a human agent).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

THANKS = "thanks"
CANCEL = "cancel"
STOP = "stop"
SEARCH = "search"
GREETING = "greeting"
UNKNOWN = "unknown"

HASH_NAME = "fnv1a-32"
MODEL_FORMAT_VERSION = 1

_WORD = re.compile(r"[a-z0-9']+")


class Stage(str, Enum):
    RULE = "RULE"
    MODEL = "MODEL"
    FALLBACK = "FALLBACK"


class IntentDataError(Exception):
    """Bad training data or an unusable configuration."""


@dataclass(frozen=True)
class IntentPrediction:
    label: str
    confidence: float
    stage: Stage

    def __post_init__(self) -> None:
        if self.stage is Stage.RULE and self.confidence != 1.0:
            raise ValueError("rule-stage predictions must have confidence 1.0")
        if self.stage is Stage.FALLBACK and self.label != UNKNOWN:
            raise ValueError("fallback predictions must be labelled unknown")


def _normalize(message: str) -> str:
    return re.sub(r"\s+", " ", message.lower()).strip()


def _tokens(message: str) -> list[str]:
    return _WORD.findall(message.lower())


class RuleTable:
    """Keyword/phrase rules for unambiguous intents."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries: dict[str, str] = {}
        for phrase, label in (entries or {}).items():
            self.add(phrase, label)

    def add(self, phrase: str, label: str) -> None:
        key = _normalize(phrase)
        if not key:
            raise ValueError("rule phrase must be non-empty")
        if label == UNKNOWN:
            raise ValueError("rules may not map to the unknown intent")
        self.entries[key] = label

    def __len__(self) -> int:
        return len(self.entries)


DEFAULT_RULES = {"stop": STOP, "unsubscribe": STOP}


def match_rules(rules: RuleTable, message: str) -> IntentPrediction | None:
    """Rule hit iff the message equals a key or contains it as a standalone
    token sequence; returns a confidence-1.0 RULE prediction, else None."""
    norm = _normalize(message)
    toks = _tokens(message)
    for phrase, label in rules.entries.items():
        if norm == phrase:
            return IntentPrediction(label, 1.0, Stage.RULE)
        ptoks = _tokens(phrase)
        n = len(ptoks)
        if n and any(toks[i : i + n] == ptoks for i in range(len(toks) - n + 1)):
            return IntentPrediction(label, 1.0, Stage.RULE)
    return None


def fnv1a_32(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def featurize(message: str, feature_dim: int) -> dict[int, int]:
    """Hashed bag of word unigrams and character 2/3/4-grams.

    Character n-grams run over the whitespace-collapsed lowercase message,
    spaces included. feature_dim must be a power of two.
    """
    if feature_dim <= 0 or feature_dim & (feature_dim - 1):
        raise ValueError("feature_dim must be a power of two")
    mask = feature_dim - 1
    collapsed = _normalize(message)
    counts: dict[int, int] = {}
    if not collapsed:
        return counts
    for word in collapsed.split(" "):
        idx = fnv1a_32(b"w:" + word.encode("utf-8")) & mask
        counts[idx] = counts.get(idx, 0) + 1
    encoded = collapsed.encode("utf-8")
    for n in (2, 3, 4):
        prefix = b"c%d:" % n
        for i in range(len(encoded) - n + 1):
            idx = fnv1a_32(prefix + encoded[i : i + n]) & mask
            counts[idx] = counts.get(idx, 0) + 1
    return counts


@dataclass(frozen=True)
class IntentTrainConfig:
    feature_dim: int = 2**18
    epochs: int = 10
    learning_rate: float = 0.5
    l2: float = 1e-4
    seed: int = 0
    threshold: float = 0.70
    batch_size: int = 32


@dataclass
class IntentModel:
    weights: np.ndarray  # [n_classes, feature_dim]
    bias: np.ndarray  # [n_classes]
    feature_dim: int
    class_order: tuple[str, ...]
    threshold: float
    loss_history: list[float] = field(default_factory=list)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    batch: list[tuple[dict[int, int], int]],
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over a batch plus L2 on weights, with gradients."""
    n_classes = weights.shape[0]
    d_weights = np.zeros_like(weights)
    d_bias = np.zeros_like(bias)
    total = 0.0
    scale = 1.0 / len(batch)
    for feats, target in batch:
        logits = bias.copy()
        for idx, count in feats.items():
            logits += weights[:, idx] * count
        probs = _softmax(logits)
        total += -np.log(max(probs[target], 1e-300))
        residual = probs.copy()
        residual[target] -= 1.0
        residual *= scale
        for idx, count in feats.items():
            d_weights[:, idx] += residual * count
        d_bias += residual
    loss = total * scale + 0.5 * l2 * float((weights * weights).sum())
    d_weights += l2 * weights
    return loss, d_weights, d_bias


def train_intent_model(
    data: list[tuple[str, str]], config: IntentTrainConfig | None = None
) -> IntentModel:
    """Multinomial logistic regression by mini-batch gradient descent."""
    config = config or IntentTrainConfig()
    labels = sorted({label for _, label in data})
    if UNKNOWN in labels:
        raise IntentDataError("unknown is a fallback, never a training target")
    if len(labels) < 2:
        raise IntentDataError("training data must contain at least 2 distinct labels")
    class_index = {label: i for i, label in enumerate(labels)}
    examples = [
        (featurize(text, config.feature_dim), class_index[label]) for text, label in data
    ]

    weights = np.zeros((len(labels), config.feature_dim))
    bias = np.zeros(len(labels))
    rng = np.random.default_rng(config.seed)
    loss_history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(examples), config.batch_size):
            chunk = [examples[i] for i in order[start : start + config.batch_size]]
            loss, d_weights, d_bias = loss_and_grad(weights, bias, chunk, config.l2)
            weights -= config.learning_rate * d_weights
            bias -= config.learning_rate * d_bias
            epoch_loss += loss * len(chunk)
        loss_history.append(epoch_loss / len(examples))

    return IntentModel(
        weights=weights,
        bias=bias,
        feature_dim=config.feature_dim,
        class_order=tuple(labels),
        threshold=config.threshold,
        loss_history=loss_history,
    )


def model_confidences(model: IntentModel, message: str) -> np.ndarray:
    """Softmax distribution over model.class_order for a message."""
    feats = featurize(message, model.feature_dim)
    logits = model.bias.copy()
    for idx, count in feats.items():
        logits += model.weights[:, idx] * count
    return _softmax(logits)


def classify(model: IntentModel, rules: RuleTable, message: str) -> IntentPrediction:
    """Rules first, then the model; below-threshold confidence falls back to
    unknown. Ties break toward the earlier class_order position."""
    hit = match_rules(rules, message)
    if hit is not None:
        return hit
    probs = model_confidences(model, message)
    best = int(np.argmax(probs))
    confidence = float(probs[best])
    if confidence < model.threshold:
        return IntentPrediction(UNKNOWN, confidence, Stage.FALLBACK)
    return IntentPrediction(model.class_order[best], confidence, Stage.MODEL)


# --------------------------------------------------------------------------
# Artifacts and data files.


def save_model(model: IntentModel, path: str | Path) -> None:
    meta = {
        "version": MODEL_FORMAT_VERSION,
        "class_order": list(model.class_order),
        "threshold": model.threshold,
        "feature_dim": model.feature_dim,
        "hash": HASH_NAME,
    }
    np.savez(path, weights=model.weights, bias=model.bias, meta=json.dumps(meta))


def load_model(path: str | Path) -> IntentModel:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    if meta.get("version") != MODEL_FORMAT_VERSION:
        raise IntentDataError(f"unsupported model version {meta.get('version')!r}")
    if meta.get("hash") != HASH_NAME:
        raise IntentDataError(f"model hashed with {meta.get('hash')!r}, need {HASH_NAME}")
    return IntentModel(
        weights=data["weights"],
        bias=data["bias"],
        feature_dim=int(meta["feature_dim"]),
        class_order=tuple(meta["class_order"]),
        threshold=float(meta["threshold"]),
    )


def load_intent_data(path: str | Path) -> list[tuple[str, str]]:
    """JSONL with objects carrying `text` and `intent`; extra keys ignored."""
    rows: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rows.append((str(obj["text"]), str(obj["intent"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise IntentDataError(f"line {line_no}: {exc}") from exc
    return rows


def save_intent_data(rows: list[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for text, label in rows:
            handle.write(json.dumps({"text": text, "intent": label}, ensure_ascii=False) + "\n")


def load_rules(path: str | Path) -> RuleTable:
    """Tab-separated `phrase<TAB>label` lines; `#` starts a comment."""
    table = RuleTable()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IntentDataError(f"line {line_no}: expected 'phrase<TAB>label'")
            table.add(parts[0], parts[1])
    return table


def save_rules(rules: RuleTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for phrase, label in rules.entries.items():
            handle.write(f"{phrase}\t{label}\n")
