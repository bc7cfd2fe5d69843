"""Every metric the system reports: per-class PRF, span PRF, top-k recall,
and the external agent-handoff / booking-completion rates."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .ner import EntitySpan


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _prf(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1)


@dataclass(frozen=True)
class ClassReport:
    per_class: dict[str, PRF]
    macro: PRF


def per_class_prf(gold: Sequence[str], pred: Sequence[str]) -> ClassReport:
    """One-vs-rest precision/recall/F1 per label, plus the macro average.

    Labels absent from both gold and pred are omitted.
    """
    if len(gold) != len(pred):
        raise MetricsError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    labels = sorted(set(gold) | set(pred))
    per_class: dict[str, PRF] = {}
    for label in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        per_class[label] = _prf(tp, fp, fn)
    n = len(per_class)
    macro = PRF(
        precision=sum(v.precision for v in per_class.values()) / n if n else 0.0,
        recall=sum(v.recall for v in per_class.values()) / n if n else 0.0,
        f1=sum(v.f1 for v in per_class.values()) / n if n else 0.0,
    )
    return ClassReport(per_class=per_class, macro=macro)


def span_prf(
    gold: Sequence[Sequence[EntitySpan]],
    pred: Sequence[Sequence[EntitySpan]],
) -> dict[str, PRF]:
    """Per-type span PRF under exact (start, end, type) matching."""
    if len(gold) != len(pred):
        raise MetricsError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    tp: Counter[str] = Counter()
    fp: Counter[str] = Counter()
    fn: Counter[str] = Counter()
    for gold_spans, pred_spans in zip(gold, pred):
        gold_keys = {(s.start, s.end, s.etype.value) for s in gold_spans}
        pred_keys = {(s.start, s.end, s.etype.value) for s in pred_spans}
        for key in pred_keys:
            if key in gold_keys:
                tp[key[2]] += 1
            else:
                fp[key[2]] += 1
        for key in gold_keys - pred_keys:
            fn[key[2]] += 1
    types = sorted(set(tp) | set(fp) | set(fn))
    return {t: _prf(tp[t], fp[t], fn[t]) for t in types}


def topk_recall(rankings: Sequence[tuple[Sequence[int], set[int]]], k: int) -> float:
    """Fraction of queries whose top-k ranked ids intersect the gold set."""
    if k < 1:
        raise MetricsError("k must be >= 1")
    if not rankings:
        raise MetricsError("no rankings to evaluate")
    hits = 0
    for ranked_ids, gold in rankings:
        if not gold:
            raise MetricsError("gold sets must be non-empty")
        if set(ranked_ids[:k]) & gold:
            hits += 1
    return hits / len(rankings)


# --------------------------------------------------------------------------
# External metrics from the conversation event log.


class EventType(str, Enum):
    MESSAGE_IN = "MESSAGE_IN"
    MESSAGE_OUT = "MESSAGE_OUT"
    SEARCH = "SEARCH"
    HANDOFF = "HANDOFF"
    BOOKING_COMPLETED = "BOOKING_COMPLETED"
    SESSION_END = "SESSION_END"


@dataclass(frozen=True)
class ConversationEvent:
    session_id: str
    timestamp: datetime
    type: EventType
    payload: dict | None = None


@dataclass(frozen=True)
class ExternalMetrics:
    sessions: int
    handoff_rate: float
    completion_rate: float


def external_metrics(events: Iterable[ConversationEvent]) -> ExternalMetrics:
    """Session-level rates: the denominator is conversations, not messages."""
    handed: set[str] = set()
    completed: set[str] = set()
    sessions: set[str] = set()
    for event in events:
        sessions.add(event.session_id)
        if event.type is EventType.HANDOFF:
            handed.add(event.session_id)
        elif event.type is EventType.BOOKING_COMPLETED:
            completed.add(event.session_id)
    if not sessions:
        raise MetricsError("no sessions in event log; rates undefined")
    n = len(sessions)
    return ExternalMetrics(
        sessions=n,
        handoff_rate=len(handed) / n,
        completion_rate=len(completed) / n,
    )


def external_metrics_by_day(
    events: Iterable[ConversationEvent],
) -> dict[date, ExternalMetrics]:
    """Daily breakdown; a session belongs to the day of its first event."""
    by_session: dict[str, list[ConversationEvent]] = defaultdict(list)
    for event in events:
        by_session[event.session_id].append(event)
    by_day: dict[date, list[ConversationEvent]] = defaultdict(list)
    for session_events in by_session.values():
        day = min(e.timestamp for e in session_events).date()
        by_day[day].extend(session_events)
    return {day: external_metrics(evts) for day, evts in sorted(by_day.items())}


def append_event(event: ConversationEvent, path: str | Path) -> None:
    line = json.dumps(
        {
            "session_id": event.session_id,
            "timestamp": event.timestamp.isoformat(),
            "type": event.type.value,
            **({"payload": event.payload} if event.payload is not None else {}),
        },
        ensure_ascii=False,
    )
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line + "\n")


def read_events(path: str | Path) -> list[ConversationEvent]:
    events: list[ConversationEvent] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                events.append(
                    ConversationEvent(
                        session_id=str(obj["session_id"]),
                        timestamp=datetime.fromisoformat(obj["timestamp"]),
                        type=EventType(obj["type"]),
                        payload=obj.get("payload"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MetricsError(f"line {line_no}: {exc}") from exc
    return events
