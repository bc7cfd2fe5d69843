"""Hotel/location mention tagging with an averaged perceptron over BIO tags."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .catalog import Catalog, RecordKind

_TOKEN = re.compile(r"\w+|[^\w\s]")

MONTH_WORDS = frozenset(
    "jan january feb february mar march apr april may jun june jul july aug august "
    "sep sept september oct october nov november dec december".split()
)


class EntityType(str, Enum):
    HOTEL = "HOTEL"
    LOCATION = "LOCATION"
    PLACE = "PLACE"


class TaggerMode(str, Enum):
    SEPARATE = "SEPARATE"
    COMBINED = "COMBINED"


_MODE_TYPES = {
    TaggerMode.SEPARATE: (EntityType.HOTEL, EntityType.LOCATION),
    TaggerMode.COMBINED: (EntityType.PLACE,),
}


class NerDataError(Exception):
    """Training data inconsistent with tokenization or otherwise unusable."""


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    etype: EntityType
    text: str


def tokenize(message: str) -> list[Token]:
    """Whitespace/punctuation tokenization; punctuation marks stand alone.

    Offsets index the original string.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN.finditer(message)]


def gazetteer_flags(tokens: list[Token], catalog: Catalog) -> list[tuple[bool, bool]]:
    """(in_city_gazetteer, in_hotel_gazetteer) per token, case-insensitive."""
    city = catalog.gazetteer_tokens(RecordKind.CITY)
    hotel = catalog.gazetteer_tokens(RecordKind.HOTEL)
    flags = []
    for tok in tokens:
        low = tok.text.lower()
        flags.append((low in city, low in hotel))
    return flags


def _shape(text: str) -> str:
    out = []
    last = ""
    for ch in text:
        if ch.isdigit():
            mapped = "d"
        elif ch.isalpha():
            mapped = "X" if ch.isupper() else "x"
        else:
            mapped = ch
        if mapped != last:
            out.append(mapped)
            last = mapped
    return "".join(out)


def _features(
    tokens: list[Token],
    i: int,
    prev_tag: str,
    gaz: list[tuple[bool, bool]],
) -> list[str]:
    text = tokens[i].text
    low = text.lower()
    feats = [
        "bias",
        f"w={low}",
        f"shape={_shape(text)}",
        f"pre3={low[:3]}",
        f"suf3={low[-3:]}",
        f"prev={prev_tag}",
    ]
    # Gazetteer flags over a one-token window: greedy decoding has no other
    # lookahead, and span-initial articles need the next token's flag.
    for offset, tag in ((-1, "p"), (0, "c"), (1, "n")):
        j = i + offset
        if 0 <= j < len(gaz):
            in_city, in_hotel = gaz[j]
            if in_city:
                feats.append(f"{tag}gaz=city")
            if in_hotel:
                feats.append(f"{tag}gaz=hotel")
    if low.isdigit():
        feats.append("digit")
    if low in MONTH_WORDS:
        feats.append("month")
    return feats


def tags_for_mode(mode: TaggerMode) -> tuple[str, ...]:
    tags = ["O"]
    for etype in _MODE_TYPES[mode]:
        tags.extend((f"B-{etype.value}", f"I-{etype.value}"))
    return tuple(tags)


@dataclass
class TaggerModel:
    mode: TaggerMode
    weights: dict[str, dict[str, float]]
    tag_set: tuple[str, ...]
    averaged: bool = True


def _score(weights: dict[str, dict[str, float]], feats: list[str], tag: str) -> float:
    total = 0.0
    for f in feats:
        per_tag = weights.get(f)
        if per_tag:
            total += per_tag.get(tag, 0.0)
    return total


def _legal(tag: str, prev_tag: str) -> bool:
    if not tag.startswith("I-"):
        return True
    etype = tag[2:]
    return prev_tag in (f"B-{etype}", f"I-{etype}")


def _decode(
    weights: dict[str, dict[str, float]],
    tag_set: tuple[str, ...],
    tokens: list[Token],
    gaz: list[tuple[bool, bool]],
) -> list[str]:
    """Greedy left-to-right decode; an illegal I-X is repaired to B-X."""
    tags: list[str] = []
    prev = "O"
    for i in range(len(tokens)):
        feats = _features(tokens, i, prev, gaz)
        best_tag = tag_set[0]
        best_score = _score(weights, feats, best_tag)
        for tag in tag_set[1:]:
            s = _score(weights, feats, tag)
            if s > best_score:
                best_tag, best_score = tag, s
        if not _legal(best_tag, prev):
            best_tag = "B-" + best_tag[2:]
        tags.append(best_tag)
        prev = best_tag
    return tags


def spans_to_bio(
    message: str,
    tokens: list[Token],
    spans: list[EntitySpan],
    mode: TaggerMode,
    where: str = "",
) -> list[str]:
    """Project character spans onto BIO token tags.

    Raises NerDataError when a span does not align with token boundaries.
    """
    prefix = f"{where}: " if where else ""
    tags = ["O"] * len(tokens)
    starts = {t.start: i for i, t in enumerate(tokens)}
    ends = {t.end: i for i, t in enumerate(tokens)}
    ordered = sorted(spans, key=lambda s: s.start)
    for left, right in zip(ordered, ordered[1:]):
        if right.start < left.end:
            raise NerDataError(f"{prefix}overlapping spans at {left.start} and {right.start}")
    for span in ordered:
        etype = EntityType.PLACE if mode is TaggerMode.COMBINED else span.etype
        if etype not in _MODE_TYPES[mode]:
            raise NerDataError(f"{prefix}span type {span.etype.value} invalid for {mode.value}")
        if span.start not in starts or span.end not in ends:
            raise NerDataError(
                f"{prefix}span ({span.start}, {span.end}) {message[span.start:span.end]!r} "
                "crosses a token boundary"
            )
        first, last = starts[span.start], ends[span.end]
        tags[first] = f"B-{etype.value}"
        for i in range(first + 1, last + 1):
            tags[i] = f"I-{etype.value}"
    return tags


def spans_from_bio(message: str, tokens: list[Token], tags: list[str]) -> list[EntitySpan]:
    """Merge contiguous B/I runs back into character spans."""
    spans: list[EntitySpan] = []
    i = 0
    while i < len(tags):
        if tags[i].startswith("B-"):
            etype = EntityType(tags[i][2:])
            j = i + 1
            while j < len(tags) and tags[j] == f"I-{etype.value}":
                j += 1
            start, end = tokens[i].start, tokens[j - 1].end
            spans.append(EntitySpan(start, end, etype, message[start:end]))
            i = j
        else:
            i += 1
    return spans


def train_tagger(
    data: list[tuple[str, list[EntitySpan]]],
    mode: TaggerMode,
    catalog: Catalog,
    epochs: int = 5,
    seed: int = 0,
) -> TaggerModel:
    """Averaged-perceptron training with greedy decoding, deterministic per seed."""
    if not data:
        raise NerDataError("training data is empty")
    tag_set = tags_for_mode(mode)

    prepared = []
    for idx, (message, spans) in enumerate(data):
        tokens = tokenize(message)
        gold = spans_to_bio(message, tokens, spans, mode, where=f"example {idx}")
        prepared.append((tokens, gold))

    weights: dict[str, dict[str, float]] = {}
    totals: dict[str, dict[str, float]] = {}
    stamps: dict[str, dict[str, int]] = {}
    step = 0

    def bump(feat: str, tag: str, delta: float) -> None:
        per_w = weights.setdefault(feat, {})
        per_t = totals.setdefault(feat, {})
        per_s = stamps.setdefault(feat, {})
        per_t[tag] = per_t.get(tag, 0.0) + (step - per_s.get(tag, 0)) * per_w.get(tag, 0.0)
        per_s[tag] = step
        per_w[tag] = per_w.get(tag, 0.0) + delta

    rng = random.Random(seed)
    order = list(range(len(prepared)))
    gaz_cache = [gazetteer_flags(tokens, catalog) for tokens, _ in prepared]
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            tokens, gold = prepared[i]
            gaz = gaz_cache[i]
            prev = "O"
            for pos in range(len(tokens)):
                feats = _features(tokens, pos, prev, gaz)
                best_tag = tag_set[0]
                best_score = _score(weights, feats, best_tag)
                for tag in tag_set[1:]:
                    s = _score(weights, feats, tag)
                    if s > best_score:
                        best_tag, best_score = tag, s
                if not _legal(best_tag, prev):
                    best_tag = "B-" + best_tag[2:]
                step += 1
                if best_tag != gold[pos]:
                    for f in feats:
                        bump(f, gold[pos], 1.0)
                        bump(f, best_tag, -1.0)
                prev = best_tag

    averaged: dict[str, dict[str, float]] = {}
    for feat, per_tag in weights.items():
        out: dict[str, float] = {}
        for tag, w in per_tag.items():
            total = totals[feat].get(tag, 0.0) + (step - stamps[feat].get(tag, 0)) * w
            if total:
                out[tag] = total / step
        if out:
            averaged[feat] = out
    return TaggerModel(mode=mode, weights=averaged, tag_set=tag_set)


def tag(model: TaggerModel, message: str, catalog: Catalog) -> list[EntitySpan]:
    """Decode a message into non-overlapping, ordered entity spans."""
    tokens = tokenize(message)
    if not tokens:
        return []
    gaz = gazetteer_flags(tokens, catalog)
    tags = _decode(model.weights, model.tag_set, tokens, gaz)
    return spans_from_bio(message, tokens, tags)


def combine_spans(spans: list[EntitySpan]) -> list[EntitySpan]:
    """Relabel HOTEL/LOCATION gold spans as the single combined type."""
    return [EntitySpan(s.start, s.end, EntityType.PLACE, s.text) for s in spans]


# --------------------------------------------------------------------------
# Data files and artifacts.


def load_ner_data(path: str | Path) -> list[tuple[str, list[EntitySpan]]]:
    """JSONL rows `{"text": ..., "spans": [{"start","end","type"}]}`."""
    rows: list[tuple[str, list[EntitySpan]]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                text = str(obj["text"])
                spans = [
                    EntitySpan(
                        start=int(s["start"]),
                        end=int(s["end"]),
                        etype=EntityType(s["type"]),
                        text=text[int(s["start"]) : int(s["end"])],
                    )
                    for s in obj["spans"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise NerDataError(f"line {line_no}: {exc}") from exc
            rows.append((text, spans))
    return rows


def save_ner_data(rows: list[tuple[str, list[EntitySpan]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for text, spans in rows:
            obj = {
                "text": text,
                "spans": [
                    {"start": s.start, "end": s.end, "type": s.etype.value} for s in spans
                ],
            }
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def save_tagger(model: TaggerModel, path: str | Path) -> None:
    payload = {
        "version": 1,
        "mode": model.mode.value,
        "tag_set": list(model.tag_set),
        "averaged": model.averaged,
        "weights": model.weights,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_tagger(path: str | Path) -> TaggerModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != 1:
        raise NerDataError(f"unsupported tagger version {payload.get('version')!r}")
    return TaggerModel(
        mode=TaggerMode(payload["mode"]),
        weights={f: dict(t) for f, t in payload["weights"].items()},
        tag_set=tuple(payload["tag_set"]),
        averaged=bool(payload["averaged"]),
    )
