import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concierge.evaluation import span_prf
from concierge.ner import (
    EntitySpan,
    EntityType,
    NerDataError,
    TaggerMode,
    _decode,
    combine_spans,
    gazetteer_flags,
    load_ner_data,
    load_tagger,
    save_ner_data,
    save_tagger,
    spans_to_bio,
    tag,
    tags_for_mode,
    tokenize,
    train_tagger,
)


class TestTokenize:
    def test_simple(self):
        tokens = tokenize("las vegas")
        assert [(t.text, t.start, t.end) for t in tokens] == [("las", 0, 3), ("vegas", 4, 9)]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_stands_alone(self):
        tokens = tokenize("the cosmopolitan, las vegas")
        assert [t.text for t in tokens] == ["the", "cosmopolitan", ",", "las", "vegas"]
        comma = tokens[2]
        assert (comma.start, comma.end) == (16, 17)

    @given(st.text(max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_offsets_index_original_string(self, message):
        tokens = tokenize(message)
        last_end = 0
        for token in tokens:
            assert token.start < token.end
            assert token.start >= last_end
            assert message[token.start : token.end] == token.text
            last_end = token.end


class TestGazetteer:
    def test_membership(self, fixture_catalog):
        tokens = tokenize("vegas zzz Vegas")
        flags = gazetteer_flags(tokens, fixture_catalog)
        assert flags[0][0] is True  # "vegas" occurs in CITY "Las Vegas"
        assert flags[1] == (False, False)
        assert flags[2] == flags[0]  # case-insensitive


class TestBioProjection:
    def test_misaligned_span_rejected(self):
        message = "grand plaza"
        tokens = tokenize(message)
        bad = [EntitySpan(0, 3, EntityType.HOTEL, "gra")]
        with pytest.raises(NerDataError, match="token boundary"):
            spans_to_bio(message, tokens, bad, TaggerMode.SEPARATE, where="example 4")

    def test_overlap_rejected(self):
        message = "grand plaza hotel"
        tokens = tokenize(message)
        spans = [
            EntitySpan(0, 11, EntityType.HOTEL, "grand plaza"),
            EntitySpan(6, 17, EntityType.HOTEL, "plaza hotel"),
        ]
        with pytest.raises(NerDataError, match="overlap"):
            spans_to_bio(message, tokens, spans, TaggerMode.SEPARATE)

    def test_round_trip_tags(self):
        message = "stay at grand plaza in atlanta"
        tokens = tokenize(message)
        spans = [
            EntitySpan(8, 19, EntityType.HOTEL, "grand plaza"),
            EntitySpan(23, 30, EntityType.LOCATION, "atlanta"),
        ]
        tags = spans_to_bio(message, tokens, spans, TaggerMode.SEPARATE)
        assert tags == ["O", "O", "B-HOTEL", "I-HOTEL", "O", "B-LOCATION"]


class TestTraining:
    def test_deterministic(self, ner_split, fixture_catalog):
        train, _ = ner_split
        a = train_tagger(train[:100], TaggerMode.SEPARATE, fixture_catalog, epochs=2, seed=1)
        b = train_tagger(train[:100], TaggerMode.SEPARATE, fixture_catalog, epochs=2, seed=1)
        assert a.weights == b.weights

    def test_empty_data_rejected(self, fixture_catalog):
        with pytest.raises(NerDataError):
            train_tagger([], TaggerMode.COMBINED, fixture_catalog)

    def test_training_accuracy_combined(self, ner_split, fixture_catalog):
        """Token-level accuracy >= 0.95 after 5 epochs on 500 messages."""
        train, _ = ner_split
        subset = [(t, combine_spans(s)) for t, s in train[:500]]
        model = train_tagger(subset, TaggerMode.COMBINED, fixture_catalog, epochs=5, seed=0)
        total = correct = 0
        for text, spans in subset:
            tokens = tokenize(text)
            gold = spans_to_bio(text, tokens, spans, TaggerMode.COMBINED)
            gaz = gazetteer_flags(tokens, fixture_catalog)
            pred = _decode(model.weights, model.tag_set, tokens, gaz)
            total += len(gold)
            correct += sum(g == p for g, p in zip(gold, pred))
        assert correct / total >= 0.95

    def test_data_error_names_example(self, fixture_catalog):
        rows = [("fine message", []), ("bad", [EntitySpan(0, 2, EntityType.HOTEL, "ba")])]
        with pytest.raises(NerDataError, match="example 1"):
            train_tagger(rows, TaggerMode.SEPARATE, fixture_catalog, epochs=1)


class TestTagging:
    def test_paper_example_spans(self, combined_tagger, fixture_catalog):
        message = "double room in the cosmopolitan, las vegas for Aug 11-16"
        spans = tag(combined_tagger, message, fixture_catalog)
        assert [(s.text, s.etype) for s in spans] == [
            ("the cosmopolitan", EntityType.PLACE),
            ("las vegas", EntityType.PLACE),
        ]

    def test_no_entities(self, combined_tagger, fixture_catalog):
        assert tag(combined_tagger, "thanks bye", fixture_catalog) == []
        assert tag(combined_tagger, "", fixture_catalog) == []

    def test_decode_never_emits_orphan_inside_tag(self, combined_tagger, separate_tagger, fixture_catalog, ner_split):
        _, eval_rows = ner_split
        for model in (combined_tagger, separate_tagger):
            for text, _ in eval_rows[:150]:
                tokens = tokenize(text)
                gaz = gazetteer_flags(tokens, fixture_catalog)
                tags = _decode(model.weights, model.tag_set, tokens, gaz)
                prev = "O"
                for t in tags:
                    if t.startswith("I-"):
                        assert prev in (f"B-{t[2:]}", f"I-{t[2:]}")
                    prev = t

    def test_span_output_invariants(self, combined_tagger, fixture_catalog, ner_split):
        _, eval_rows = ner_split
        for text, _ in eval_rows[:150]:
            spans = tag(combined_tagger, text, fixture_catalog)
            last_end = 0
            for span in spans:
                assert 0 <= span.start < span.end <= len(text)
                assert span.start >= last_end
                assert text[span.start : span.end] == span.text
                last_end = span.end

    def test_pure_function(self, combined_tagger, fixture_catalog):
        message = "need a room at grand plaza hotel atlanta"
        assert tag(combined_tagger, message, fixture_catalog) == tag(
            combined_tagger, message, fixture_catalog
        )

    def test_combined_mode_beats_separate_per_type(
        self, combined_tagger, separate_tagger, fixture_catalog, ner_split
    ):
        _, eval_rows = ner_split
        gold_combined = [combine_spans(s) for _, s in eval_rows]
        pred_combined = [tag(combined_tagger, t, fixture_catalog) for t, _ in eval_rows]
        combined = span_prf(gold_combined, pred_combined)[EntityType.PLACE.value]

        gold_sep = [s for _, s in eval_rows]
        pred_sep = [tag(separate_tagger, t, fixture_catalog) for t, _ in eval_rows]
        separate = span_prf(gold_sep, pred_sep)
        best_separate = max(prf.f1 for prf in separate.values())
        assert combined.f1 >= best_separate


class TestModes:
    def test_tag_sets(self):
        assert tags_for_mode(TaggerMode.COMBINED) == ("O", "B-PLACE", "I-PLACE")
        assert tags_for_mode(TaggerMode.SEPARATE) == (
            "O", "B-HOTEL", "I-HOTEL", "B-LOCATION", "I-LOCATION",
        )

    def test_combine_spans(self):
        spans = [EntitySpan(0, 5, EntityType.HOTEL, "grand")]
        assert combine_spans(spans) == [EntitySpan(0, 5, EntityType.PLACE, "grand")]


class TestArtifacts:
    def test_tagger_round_trip(self, combined_tagger, fixture_catalog, tmp_path):
        path = tmp_path / "tagger.json"
        save_tagger(combined_tagger, path)
        loaded = load_tagger(path)
        assert loaded.mode == combined_tagger.mode
        assert loaded.tag_set == combined_tagger.tag_set
        message = "double room in the cosmopolitan, las vegas"
        assert tag(loaded, message, fixture_catalog) == tag(
            combined_tagger, message, fixture_catalog
        )

    def test_data_round_trip(self, ner_split, tmp_path):
        train, _ = ner_split
        path = tmp_path / "ner.jsonl"
        save_ner_data(train[:50], path)
        assert load_ner_data(path) == train[:50]
