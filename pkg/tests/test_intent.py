import dataclasses

import numpy as np
import pytest

from concierge import datagen
from concierge.intent import (
    CANCEL,
    SEARCH,
    STOP,
    THANKS,
    UNKNOWN,
    IntentDataError,
    IntentPrediction,
    IntentTrainConfig,
    RuleTable,
    Stage,
    classify,
    featurize,
    fnv1a_32,
    load_intent_data,
    load_model,
    loss_and_grad,
    match_rules,
    model_confidences,
    save_intent_data,
    save_model,
    train_intent_model,
)

TINY = IntentTrainConfig(feature_dim=2**10, epochs=6, seed=3)


def tiny_dataset(n=200):
    base = [
        ("thanks a lot", THANKS),
        ("thank you", THANKS),
        ("cancel my booking", CANCEL),
        ("please cancel", CANCEL),
        ("stop messaging", STOP),
        ("unsubscribe now", STOP),
        ("hotel in atlanta", SEARCH),
        ("looking for a room", SEARCH),
    ]
    return [base[i % len(base)] for i in range(n)]


class TestRules:
    def test_exact_and_case_insensitive(self):
        rules = RuleTable({"stop": STOP})
        result = match_rules(rules, "STOP")
        assert result == IntentPrediction(STOP, 1.0, Stage.RULE)

    def test_standalone_token_containment_matches(self):
        rules = RuleTable({"stop": STOP})
        result = match_rules(rules, "please don't stop sending deals")
        assert result is not None and result.label == STOP

    def test_no_substring_match_inside_words(self):
        rules = RuleTable({"stop": STOP})
        assert match_rules(rules, "our stopover in rome") is None

    def test_phrase_containment(self):
        rules = RuleTable({"end chat": STOP})
        assert match_rules(rules, "can we end chat now?") is not None
        assert match_rules(rules, "the end of chat") is None

    def test_empty_rules(self):
        assert match_rules(RuleTable(), "anything") is None

    def test_rule_table_invariants(self):
        with pytest.raises(ValueError):
            RuleTable({"": STOP})
        with pytest.raises(ValueError):
            RuleTable({"whatever": UNKNOWN})
        table = RuleTable({"  End   Chat ": STOP})
        assert "end chat" in table.entries


class TestFnv:
    def test_published_vectors(self):
        assert fnv1a_32(b"") == 0x811C9DC5
        assert fnv1a_32(b"a") == 0xE40C292C
        assert fnv1a_32(b"foobar") == 0xBF9CF968


class TestFeaturize:
    def test_empty_message(self):
        assert featurize("", 2**10) == {}

    def test_repeated_word_counts(self):
        feats = featurize("hi hi", 2**10)
        idx = fnv1a_32(b"w:hi") & (2**10 - 1)
        assert feats[idx] == 2

    def test_word_features_order_insensitive(self):
        dim = 2**14
        a, b = featurize("ab cd", dim), featurize("cd ab", dim)
        word_idx = {fnv1a_32(b"w:ab") & (dim - 1), fnv1a_32(b"w:cd") & (dim - 1)}
        assert word_idx <= set(a) and word_idx <= set(b)

    def test_power_of_two_required(self):
        with pytest.raises(ValueError):
            featurize("x", 1000)


class TestTraining:
    def test_deterministic(self):
        a = train_intent_model(tiny_dataset(), TINY)
        b = train_intent_model(tiny_dataset(), TINY)
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)

    def test_single_class_rejected(self):
        with pytest.raises(IntentDataError):
            train_intent_model([("hi", THANKS)] * 10, TINY)

    def test_unknown_label_rejected(self):
        with pytest.raises(IntentDataError):
            train_intent_model([("hi", THANKS), ("what", UNKNOWN)] * 5, TINY)

    def test_loss_strictly_decreases_first_epochs(self):
        model = train_intent_model(tiny_dataset(200), TINY)
        losses = model.loss_history[:5]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_gradient_check(self):
        """Analytic gradient vs central differences on a 5-example, 3-class batch."""
        dim = 64
        batch = [
            (featurize("thanks so much", dim), 0),
            (featurize("cancel it", dim), 1),
            (featurize("hotel tonight", dim), 2),
            (featurize("thank you", dim), 0),
            (featurize("room in vegas", dim), 2),
        ]
        rng = np.random.default_rng(0)
        weights = rng.normal(scale=0.3, size=(3, dim))
        bias = rng.normal(scale=0.1, size=3)
        l2 = 0.01
        _, d_weights, d_bias = loss_and_grad(weights, bias, batch, l2)

        eps = 1e-6
        numeric_w = np.zeros_like(weights)
        for i in range(weights.shape[0]):
            for j in range(weights.shape[1]):
                up, down = weights.copy(), weights.copy()
                up[i, j] += eps
                down[i, j] -= eps
                lu, *_ = loss_and_grad(up, bias, batch, l2)
                ld, *_ = loss_and_grad(down, bias, batch, l2)
                numeric_w[i, j] = (lu - ld) / (2 * eps)
        numeric_b = np.zeros_like(bias)
        for i in range(len(bias)):
            up, down = bias.copy(), bias.copy()
            up[i] += eps
            down[i] -= eps
            lu, *_ = loss_and_grad(weights, up, batch, l2)
            ld, *_ = loss_and_grad(weights, down, batch, l2)
            numeric_b[i] = (lu - ld) / (2 * eps)

        rel_w = np.linalg.norm(d_weights - numeric_w) / max(
            np.linalg.norm(d_weights), np.linalg.norm(numeric_w)
        )
        rel_b = np.linalg.norm(d_bias - numeric_b) / max(
            np.linalg.norm(d_bias), np.linalg.norm(numeric_b)
        )
        assert rel_w < 1e-5 and rel_b < 1e-5


class TestClassify:
    def test_rule_beats_model(self, intent_model, rule_table):
        result = classify(intent_model, rule_table, "stop")
        assert result.stage is Stage.RULE and result.confidence == 1.0

    def test_thanks_example(self, intent_model, rule_table):
        result = classify(intent_model, rule_table, "thanks so much!!")
        assert result.label == THANKS
        assert result.stage is Stage.MODEL
        assert result.confidence >= intent_model.threshold

    def test_gibberish_falls_back(self, intent_model, rule_table):
        result = classify(intent_model, rule_table, "qwerty zxcvb")
        assert result == IntentPrediction(UNKNOWN, result.confidence, Stage.FALLBACK)
        assert result.confidence < intent_model.threshold

    def test_softmax_sums_to_one(self, intent_model):
        for message in ("hi", "thanks", "hotel in vegas", "qwerty"):
            probs = model_confidences(intent_model, message)
            assert abs(probs.sum() - 1.0) < 1e-9

    def test_never_model_stage_unknown(self, intent_model, rule_table):
        for message in datagen.gen_gibberish(5, 50) + ["thanks", "hotel", "stop it"]:
            result = classify(intent_model, rule_table, message)
            if result.label == UNKNOWN:
                assert result.stage is Stage.FALLBACK

    def test_monotone_threshold(self, intent_model, rule_table, intent_split):
        _, eval_rows = intent_split
        messages = [text for text, _ in eval_rows[:150]] + datagen.gen_gibberish(6, 50)
        thresholds = (0.5, 0.7, 0.9)
        for message in messages:
            unknown_at = []
            for tau in thresholds:
                model = dataclasses.replace(intent_model, threshold=tau)
                unknown_at.append(classify(model, rule_table, message).label == UNKNOWN)
            for lower, higher in zip(unknown_at, unknown_at[1:]):
                assert not (lower and not higher)

    def test_prediction_invariants(self):
        with pytest.raises(ValueError):
            IntentPrediction(THANKS, 0.9, Stage.RULE)
        with pytest.raises(ValueError):
            IntentPrediction(THANKS, 0.5, Stage.FALLBACK)


class TestArtifacts:
    def test_model_round_trip(self, intent_model, tmp_path):
        path = tmp_path / "intent.npz"
        save_model(intent_model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.weights, intent_model.weights)
        assert loaded.class_order == intent_model.class_order
        assert loaded.threshold == intent_model.threshold

    def test_data_round_trip(self, tmp_path):
        rows = [("hello there", THANKS), ("find a hotel", SEARCH)]
        path = tmp_path / "intent.jsonl"
        save_intent_data(rows, path)
        assert load_intent_data(path) == rows

    def test_data_error_names_line(self, tmp_path):
        path = tmp_path / "intent.jsonl"
        path.write_text('{"text": "ok", "intent": "thanks"}\n{"nope": 1}\n')
        with pytest.raises(IntentDataError, match="line 2"):
            load_intent_data(path)
