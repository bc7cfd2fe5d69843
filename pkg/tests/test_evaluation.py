import random
from datetime import date, datetime, timedelta, timezone

import pytest

from concierge.evaluation import (
    ConversationEvent,
    EventType,
    MetricsError,
    append_event,
    external_metrics,
    external_metrics_by_day,
    per_class_prf,
    read_events,
    span_prf,
    topk_recall,
)
from concierge.ner import EntitySpan, EntityType

T0 = datetime(2026, 8, 9, 12, 0, tzinfo=timezone.utc)


def event(session: str, etype: EventType, minutes: int = 0) -> ConversationEvent:
    return ConversationEvent(session, T0 + timedelta(minutes=minutes), etype)


class TestPerClassPrf:
    def test_perfect_prediction(self):
        labels = ["a", "b", "a", "c"]
        report = per_class_prf(labels, labels)
        for prf in report.per_class.values():
            assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)
        assert report.macro.f1 == 1.0

    def test_hand_computed_confusion(self):
        gold = ["A", "A", "B", "B"]
        pred = ["A", "B", "B", "B"]
        report = per_class_prf(gold, pred)
        a, b = report.per_class["A"], report.per_class["B"]
        assert (a.precision, a.recall) == (1.0, 0.5)
        assert a.f1 == pytest.approx(2 / 3)
        assert b.precision == pytest.approx(2 / 3)
        assert b.recall == 1.0
        assert b.f1 == pytest.approx(0.8)

    def test_all_wrong_single_class(self):
        report = per_class_prf(["x", "x"], ["y", "y"])
        assert report.per_class["x"].recall == 0.0
        assert report.per_class["x"].precision == 0.0
        assert report.per_class["y"].precision == 0.0

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            per_class_prf(["a"], ["a", "b"])

    def test_f1_formula_invariant(self):
        rng = random.Random(0)
        labels = "abcd"
        gold = [rng.choice(labels) for _ in range(300)]
        pred = [rng.choice(labels) for _ in range(300)]
        report = per_class_prf(gold, pred)
        for prf in report.per_class.values():
            p, r = prf.precision, prf.recall
            expected = 2 * p * r / (p + r) if p + r else 0.0
            assert prf.f1 == pytest.approx(expected, abs=1e-12)

    def test_order_invariant(self):
        gold = ["a", "b", "a", "c", "b"]
        pred = ["a", "a", "a", "c", "b"]
        paired = list(zip(gold, pred))
        random.Random(1).shuffle(paired)
        shuffled_gold, shuffled_pred = zip(*paired)
        assert per_class_prf(gold, pred) == per_class_prf(list(shuffled_gold), list(shuffled_pred))


def spans(*triples) -> list[EntitySpan]:
    return [EntitySpan(s, e, EntityType(t), "x" * (e - s)) for s, e, t in triples]


class TestSpanPrf:
    def test_identity(self):
        gold = [spans((0, 3, "HOTEL")), spans((2, 7, "LOCATION"))]
        result = span_prf(gold, gold)
        for prf in result.values():
            assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)

    def test_empty_prediction_convention(self):
        gold = [spans((0, 3, "HOTEL"))]
        result = span_prf(gold, [[]])
        assert result["HOTEL"].recall == 0.0
        assert result["HOTEL"].precision == 0.0

    def test_hand_computed(self):
        """3 gold, 2 predicted, 1 correct -> P=0.5, R=1/3, F1=0.4."""
        gold = [spans((0, 3, "HOTEL"), (5, 9, "HOTEL"), (11, 14, "HOTEL"))]
        pred = [spans((0, 3, "HOTEL"), (20, 25, "HOTEL"))]
        result = span_prf(gold, pred)
        assert result["HOTEL"].precision == pytest.approx(0.5)
        assert result["HOTEL"].recall == pytest.approx(1 / 3)
        assert result["HOTEL"].f1 == pytest.approx(0.4)

    def test_type_must_match(self):
        gold = [spans((0, 3, "HOTEL"))]
        pred = [spans((0, 3, "LOCATION"))]
        result = span_prf(gold, pred)
        assert result["HOTEL"].recall == 0.0
        assert result["LOCATION"].precision == 0.0


class TestTopkRecall:
    def test_perfect_at_one(self):
        rankings = [([1, 2, 3], {1}), ([9, 5], {9})]
        assert topk_recall(rankings, 1) == 1.0

    def test_hand_count_at_three(self):
        rankings = [
            ([1, 2, 3, 4], {3}),
            ([1, 2, 3], {9}),
            ([5, 6, 7], {6}),
            ([8, 9], {4}),
        ]
        assert topk_recall(rankings, 3) == 0.5

    def test_prefix_monotonicity(self):
        rng = random.Random(2)
        rankings = []
        for _ in range(100):
            ids = rng.sample(range(50), 10)
            rankings.append((ids, {rng.randrange(50)}))
        assert topk_recall(rankings, 1) <= topk_recall(rankings, 3)

    def test_guards(self):
        with pytest.raises(MetricsError):
            topk_recall([([1], {1})], 0)
        with pytest.raises(MetricsError):
            topk_recall([([1], set())], 1)
        with pytest.raises(MetricsError):
            topk_recall([], 1)


class TestExternalMetrics:
    def test_hand_count(self):
        events = []
        for i in range(10):
            events.append(event(f"s{i}", EventType.MESSAGE_IN))
        for i in range(3):
            events.append(event(f"s{i}", EventType.HANDOFF, minutes=1))
        metrics = external_metrics(events)
        assert metrics.sessions == 10
        assert metrics.handoff_rate == pytest.approx(0.3)
        assert metrics.completion_rate == 0.0

    def test_no_sessions_error(self):
        with pytest.raises(MetricsError):
            external_metrics([])

    def test_session_counts_in_both_rates(self):
        events = [
            event("s", EventType.MESSAGE_IN),
            event("s", EventType.HANDOFF, 1),
            event("s", EventType.BOOKING_COMPLETED, 2),
        ]
        metrics = external_metrics(events)
        assert metrics.handoff_rate == 1.0 and metrics.completion_rate == 1.0

    def test_daily_breakdown(self):
        day2 = T0 + timedelta(days=1)
        events = [
            event("a", EventType.MESSAGE_IN),
            event("a", EventType.HANDOFF, 5),
            ConversationEvent("b", day2, EventType.MESSAGE_IN),
            ConversationEvent("b", day2 + timedelta(minutes=2), EventType.BOOKING_COMPLETED),
        ]
        daily = external_metrics_by_day(events)
        assert daily[date(2026, 8, 9)].handoff_rate == 1.0
        assert daily[date(2026, 8, 10)].completion_rate == 1.0

    def test_order_invariant(self):
        events = [
            event("a", EventType.MESSAGE_IN),
            event("b", EventType.MESSAGE_IN, 1),
            event("a", EventType.HANDOFF, 2),
        ]
        shuffled = events[::-1]
        assert external_metrics(events) == external_metrics(shuffled)


class TestEventLog:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "events.jsonl"
        events = [
            ConversationEvent("s1", T0, EventType.MESSAGE_IN, {"text": "hi"}),
            ConversationEvent("s1", T0, EventType.MESSAGE_OUT, {"texts": ["hello"]}),
            ConversationEvent("s1", T0 + timedelta(minutes=1), EventType.SESSION_END, None),
        ]
        for e in events:
            append_event(e, path)
        assert read_events(path) == events

    def test_bad_line_names_line(self, tmp_path):
        path = tmp_path / "events.jsonl"
        path.write_text('{"session_id": "s", "timestamp": "2026-08-09T00:00:00", "type": "MESSAGE_IN"}\nnot json\n')
        with pytest.raises(MetricsError, match="line 2"):
            read_events(path)
