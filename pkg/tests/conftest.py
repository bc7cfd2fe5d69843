"""Session-scoped fixture pipeline: one deterministic catalog, datasets, and
trained models shared by the unit and acceptance suites."""

from __future__ import annotations

import pytest

from concierge import datagen
from concierge.catalog import generate_fixture
from concierge.dialogue import Services
from concierge.intent import DEFAULT_RULES, IntentTrainConfig, RuleTable, train_intent_model
from concierge.ner import TaggerMode, combine_spans, train_tagger
from concierge.reranker import train_ranker
from concierge.retrieval import build_index, score_pair

FIXTURE_SEED = 7
N_CITIES = 50
N_HOTELS = 500
N_INTENT = 3000
N_NER = 1500
N_QUERIES = 2000
EVAL_FRACTION = 0.2
FEATURE_DIM = 2**16


@pytest.fixture(scope="session")
def fixture_catalog():
    return generate_fixture(FIXTURE_SEED, N_CITIES, N_HOTELS)


@pytest.fixture(scope="session")
def search_index(fixture_catalog):
    return build_index(fixture_catalog)


@pytest.fixture(scope="session")
def intent_split(fixture_catalog):
    rows = datagen.gen_intent_dataset(fixture_catalog, FIXTURE_SEED, N_INTENT)
    return datagen.split_rows(rows, EVAL_FRACTION, FIXTURE_SEED)


@pytest.fixture(scope="session")
def intent_model(intent_split):
    train, _ = intent_split
    return train_intent_model(train, IntentTrainConfig(feature_dim=FEATURE_DIM, epochs=8))


@pytest.fixture(scope="session")
def rule_table():
    return RuleTable(dict(DEFAULT_RULES))


@pytest.fixture(scope="session")
def ner_split(fixture_catalog):
    rows = datagen.gen_ner_dataset(fixture_catalog, FIXTURE_SEED + 1, N_NER)
    return datagen.split_rows(rows, EVAL_FRACTION, FIXTURE_SEED)


@pytest.fixture(scope="session")
def combined_tagger(ner_split, fixture_catalog):
    train, _ = ner_split
    relabeled = [(text, combine_spans(spans)) for text, spans in train]
    return train_tagger(relabeled, TaggerMode.COMBINED, fixture_catalog, epochs=5, seed=0)


@pytest.fixture(scope="session")
def separate_tagger(ner_split, fixture_catalog):
    train, _ = ner_split
    return train_tagger(train, TaggerMode.SEPARATE, fixture_catalog, epochs=5, seed=0)


@pytest.fixture(scope="session")
def ir_split(fixture_catalog, search_index):
    rows = datagen.gen_ir_dataset(fixture_catalog, search_index, FIXTURE_SEED + 2, N_QUERIES)
    return datagen.split_rows(rows, EVAL_FRACTION, FIXTURE_SEED)


@pytest.fixture(scope="session")
def ranker_pairs(ir_split, fixture_catalog, search_index):
    train, _ = ir_split
    pairs = []
    for query, cands in train:
        for rid, label in cands:
            record = fixture_catalog.by_id(rid)
            pairs.append((query, record, score_pair(search_index, query, record), label))
    return pairs


@pytest.fixture(scope="session")
def ranker_model(ranker_pairs):
    return train_ranker(ranker_pairs)


@pytest.fixture(scope="session")
def services(fixture_catalog, intent_model, rule_table, combined_tagger, search_index, ranker_model):
    return Services(
        catalog=fixture_catalog,
        intent_model=intent_model,
        rules=rule_table,
        tagger=combined_tagger,
        index=search_index,
        ranker=ranker_model,
    )
