"""Synthetic labelled datasets derived from a catalog fixture.

Stands in for the production labelling pipeline: every dataset is a pure
function of (catalog, seed), so training runs and evaluations reproduce
exactly.
"""

from __future__ import annotations

import random
import string

from .catalog import Catalog, CatalogRecord, RecordKind, make_noisy_query
from .intent import CANCEL, GREETING, SEARCH, STOP, THANKS
from .ner import EntitySpan, EntityType
from .retrieval import SearchIndex, query_candidates

_THANKS = (
    "thanks", "thank you", "thanks so much!!", "thx", "thank you very much",
    "great, thanks", "awesome, thank you", "perfect thanks a lot",
    "thanks for the help", "ty!", "thanks, that was quick", "much appreciated",
)
_CANCEL = (
    "cancel", "cancel my booking", "please cancel the reservation",
    "i want to cancel", "can you cancel my search", "cancel this request",
    "never mind, cancel it", "i need to cancel my reservation",
    "cancel everything please", "drop the booking", "cancel that room",
)
_STOP = (
    "stop", "stop messaging me", "please stop sending deals", "unsubscribe",
    "stop texting", "don't message me again", "no more messages", "opt out",
    "stop it with the offers", "remove me from this list",
)
_GREETING = (
    "hi", "hello", "hey", "hey there", "good morning", "hello!", "hi there",
    "yo", "good evening", "howdy", "hiya", "hey bot",
)
_SEARCH_TEMPLATES = (
    "looking for a hotel in {city}",
    "need a room in {city} aug {d1}-{d2}",
    "find me a place in {city} under ${b}",
    "hotel in {city} for {mon} {d1}-{d2}",
    "do you have anything in {city}",
    "i want to stay at {hotel}",
    "is {hotel} available",
    "book {hotel} for {mon} {d1}-{d2}",
    "{city} hotels under ${b}",
    "searching for {hotel} in {city}",
    "{mon} {d1}-{d2}",
    "{mon} {d1} to {mon} {d2}",
    "under ${b}",
    "around ${b}",
    "${b1}-${b2}",
    "{city}",
    "tomorrow",
    "tonight",
    "tomorrow night",
    "checking in tomorrow",
    "two nights in {city} tomorrow",
    "somewhere cheap in {city}",
    "a resort in {city} near the beach",
)

_MONTH_NAMES = ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")


def _mention(record: CatalogRecord, rng: random.Random) -> str:
    """A user-style surface form of a record name (casing and truncation vary)."""
    name = record.name
    toks = name.split()
    if len(toks) > 2 and rng.random() < 0.25:
        toks = toks[: rng.randint(2, len(toks) - 1)]
    text = " ".join(toks)
    style = rng.random()
    if style < 0.5:
        return text.lower()
    if style < 0.6:
        return text.upper() if len(text) < 12 and rng.random() < 0.3 else text
    return text


def gen_intent_dataset(catalog: Catalog, seed: int, n: int) -> list[tuple[str, str]]:
    """Balanced messages over {thanks, cancel, stop, search, greeting}."""
    rng = random.Random(seed)
    cities = catalog.of_kind(RecordKind.CITY)
    hotels = catalog.of_kind(RecordKind.HOTEL)
    pools = {THANKS: _THANKS, CANCEL: _CANCEL, STOP: _STOP, GREETING: _GREETING}
    rows: list[tuple[str, str]] = []
    labels = (THANKS, CANCEL, STOP, SEARCH, GREETING)
    for i in range(n):
        label = labels[i % len(labels)]
        if label == SEARCH:
            template = rng.choice(_SEARCH_TEMPLATES)
            d1 = rng.randint(1, 20)
            b = rng.choice((80, 100, 120, 150, 200, 250, 300))
            text = template.format(
                city=_mention(rng.choice(cities), rng),
                hotel=_mention(rng.choice(hotels), rng) if hotels else "the grand hotel",
                mon=rng.choice(_MONTH_NAMES),
                d1=d1,
                d2=d1 + rng.randint(1, 9),
                b=b,
                b1=b,
                b2=b + 50,
            )
        else:
            text = rng.choice(pools[label])
            if rng.random() < 0.3:
                text = text.upper() if rng.random() < 0.3 else text.capitalize()
        rows.append((text, label))
    return rows


def gen_gibberish(seed: int, n: int) -> list[str]:
    """Out-of-domain strings the intent model should refuse to classify."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        words = [
            "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(4, 9)))
            for _ in range(rng.randint(1, 3))
        ]
        out.append(" ".join(words))
    return out


# --------------------------------------------------------------------------
# NER data.

_NER_TEMPLATES = (
    # (prefix, slots, suffix); slots are ("hotel"|"city", separator-after)
    ("double room in ", (("hotel", ", "), ("city", "")), " for Aug 11-16"),
    ("looking for a resort in ", (("city", ""),), " near the beach"),
    ("need a room at ", (("hotel", ""),), " next week"),
    ("hotels in ", (("city", ""),), " under $150"),
    ("is ", (("hotel", ""),), " available tonight"),
    ("i want to stay at ", (("hotel", ""), ), ""),
    ("staying at ", (("hotel", " in "), ("city", "")), ""),
    ("anything near ", (("city", ""),), " airport?"),
    ("", (("city", ""),), " trip in june"),
    ("find ", (("hotel", ""),), " for me"),
    ("how about ", (("city", ""),), ""),
)

_NER_NEGATIVES = (
    "thanks for your help",
    "what's the cancellation policy",
    "do you have any deals this weekend",
    "my dates changed to aug 4-9",
    "need parking and wifi",
    "can i pay with paypal",
    "two adults and one kid",
    "does it include breakfast",
    "checking out on friday",
    "under $120 per night",
)


def gen_ner_dataset(
    catalog: Catalog, seed: int, n: int
) -> list[tuple[str, list[EntitySpan]]]:
    """Messages with HOTEL/LOCATION gold spans (plus span-free negatives)."""
    rng = random.Random(seed)
    cities = catalog.of_kind(RecordKind.CITY)
    hotels = catalog.of_kind(RecordKind.HOTEL)
    rows: list[tuple[str, list[EntitySpan]]] = []
    for i in range(n):
        if i % 5 == 4:
            rows.append((rng.choice(_NER_NEGATIVES), []))
            continue
        prefix, slots, suffix = rng.choice(_NER_TEMPLATES)
        text = prefix
        spans: list[EntitySpan] = []
        for slot, sep in slots:
            if slot == "hotel" and not hotels:
                slot = "city"
            record = rng.choice(hotels if slot == "hotel" else cities)
            mention = _mention(record, rng)
            start = len(text)
            text += mention
            etype = EntityType.HOTEL if slot == "hotel" else EntityType.LOCATION
            spans.append(EntitySpan(start, len(text), etype, mention))
            text += sep
        text += suffix
        rows.append((text, spans))
    return rows


# --------------------------------------------------------------------------
# IR data.


def gen_ir_dataset(
    catalog: Catalog,
    index: SearchIndex,
    seed: int,
    n_queries: int,
) -> list[tuple[str, list[tuple[int, int]]]]:
    """Noisy queries with their retrieval candidates labelled against gold.

    Rows where retrieval misses the gold record entirely are dropped: they
    carry no relevant/irrelevant contrast for pointwise training, and recall
    over them measures candidate generation rather than ranking.
    """
    rng = random.Random(seed)
    records = list(catalog.records)
    rows: list[tuple[str, list[tuple[int, int]]]] = []
    attempts = 0
    while len(rows) < n_queries and attempts < n_queries * 3:
        attempts += 1
        record = rng.choice(records)
        query = make_noisy_query(record, rng.randrange(1 << 30))
        candidates = query_candidates(index, query)
        labels = [(c.record_id, 1 if c.record_id == record.id else 0) for c in candidates]
        if any(flag for _, flag in labels):
            rows.append((query, labels))
    return rows


def split_rows(rows: list, eval_fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic shuffle-and-split into (train, eval)."""
    shuffled = list(rows)
    random.Random(seed).shuffle(shuffled)
    cut = int(len(shuffled) * (1.0 - eval_fraction))
    return shuffled[:cut], shuffled[cut:]
