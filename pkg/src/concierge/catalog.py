"""City/hotel catalog: loading, validation, and synthetic fixture generation."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

_NAME_TOKEN = re.compile(r"[a-z0-9]+")

# Tokens make_noisy_query may inject that are not part of an official name
# (the hotel's city tokens may also be injected via the "in <city>" form).
GENERIC_QUERY_TOKENS = ("hotel", "in")


class RecordKind(str, Enum):
    CITY = "CITY"
    HOTEL = "HOTEL"


class CatalogError(Exception):
    """Malformed record data or a violated catalog invariant."""


@dataclass(frozen=True)
class CatalogRecord:
    id: int
    kind: RecordKind
    name: str
    city: str
    region: str
    country: str
    review_score: float
    bookings_count: int


def _validate_record(record: CatalogRecord, where: str = "") -> None:
    prefix = f"{where}: " if where else ""
    if record.id <= 0:
        raise CatalogError(f"{prefix}record id must be a positive integer, got {record.id}")
    if not record.name.strip():
        raise CatalogError(f"{prefix}record {record.id} has an empty name")
    if record.kind is RecordKind.HOTEL and not record.city.strip():
        raise CatalogError(f"{prefix}hotel record {record.id} is missing its city")
    if not 0.0 <= record.review_score <= 10.0:
        raise CatalogError(
            f"{prefix}record {record.id} review_score {record.review_score} outside [0, 10]"
        )
    if record.bookings_count < 0:
        raise CatalogError(f"{prefix}record {record.id} has negative bookings_count")


def name_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric tokens of a record name or query."""
    return _NAME_TOKEN.findall(text.lower())


class Catalog:
    """Immutable collection of records, iterated in ascending-id order."""

    def __init__(self, records: Iterable[CatalogRecord]):
        ordered = sorted(records, key=lambda r: r.id)
        by_id: dict[int, CatalogRecord] = {}
        for record in ordered:
            _validate_record(record)
            if record.id in by_id:
                raise CatalogError(f"duplicate record id {record.id}")
            by_id[record.id] = record
        self._records: tuple[CatalogRecord, ...] = tuple(ordered)
        self._by_id = by_id
        self._city_tokens: frozenset[str] | None = None
        self._hotel_tokens: frozenset[str] | None = None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[CatalogRecord]:
        return iter(self._records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return self._records == other._records

    @property
    def records(self) -> tuple[CatalogRecord, ...]:
        return self._records

    def by_id(self, record_id: int) -> CatalogRecord:
        try:
            return self._by_id[record_id]
        except KeyError:
            raise CatalogError(f"unknown record id {record_id}") from None

    def get(self, record_id: int) -> CatalogRecord | None:
        return self._by_id.get(record_id)

    def of_kind(self, kind: RecordKind) -> list[CatalogRecord]:
        return [r for r in self._records if r.kind is kind]

    def hotels_in_city(self, city_name: str) -> list[CatalogRecord]:
        wanted = city_name.strip().lower()
        return [
            r
            for r in self._records
            if r.kind is RecordKind.HOTEL and r.city.lower() == wanted
        ]

    def gazetteer_tokens(self, kind: RecordKind) -> frozenset[str]:
        """All lowercased tokens appearing in any name of the given kind."""
        cached = self._city_tokens if kind is RecordKind.CITY else self._hotel_tokens
        if cached is None:
            cached = frozenset(
                tok for r in self._records if r.kind is kind for tok in name_tokens(r.name)
            )
            if kind is RecordKind.CITY:
                self._city_tokens = cached
            else:
                self._hotel_tokens = cached
        return cached


def record_to_json(record: CatalogRecord) -> str:
    return json.dumps(
        {
            "id": record.id,
            "kind": record.kind.value,
            "name": record.name,
            "city": record.city,
            "region": record.region,
            "country": record.country,
            "review_score": record.review_score,
            "bookings_count": record.bookings_count,
        },
        ensure_ascii=False,
    )


def _record_from_obj(obj: dict, where: str) -> CatalogRecord:
    try:
        record = CatalogRecord(
            id=int(obj["id"]),
            kind=RecordKind(obj["kind"]),
            name=str(obj["name"]).strip(),
            city=str(obj.get("city", "")).strip(),
            region=str(obj.get("region", "")),
            country=str(obj.get("country", "")),
            review_score=float(obj["review_score"]),
            bookings_count=int(obj["bookings_count"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"{where}: bad record field: {exc}") from exc
    _validate_record(record, where)
    return record


def load_catalog(path: str | Path) -> Catalog:
    """Load a catalog from a UTF-8 file with one JSON record per line.

    Raises CatalogError naming the offending line on a parse failure, and
    naming both lines on a duplicate id.
    """
    records: list[CatalogRecord] = []
    seen_lines: dict[int, int] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"line {line_no}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{where}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise CatalogError(f"{where}: expected a JSON object")
            record = _record_from_obj(obj, where)
            if record.id in seen_lines:
                raise CatalogError(
                    f"duplicate record id {record.id} on lines "
                    f"{seen_lines[record.id]} and {line_no}"
                )
            seen_lines[record.id] = line_no
            records.append(record)
    return Catalog(records)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in catalog:
            handle.write(record_to_json(record) + "\n")


# ---------------------------------------------------------------------------
# Synthetic fixtures.
#
# Stands in for the proprietary partner feed. A few real-world anchor entries
# come first so demo conversations have familiar targets; the rest is composed
# from word lists that deliberately share tokens across cities and hotels, so
# retrieval and reranking face genuinely ambiguous names.

_ANCHOR_CITIES = (
    ("Las Vegas", "Nevada", "United States"),
    ("Atlanta", "Georgia", "United States"),
    ("Playa del Carmen", "Quintana Roo", "Mexico"),
    ("North Haven", "Connecticut", "United States"),
    ("East Haven", "Connecticut", "United States"),
    ("West Haven", "Connecticut", "United States"),
)

# (name, city) — city must be an anchor city.
_ANCHOR_HOTELS = (
    ("The Cosmopolitan", "Las Vegas"),
    ("Hyatt Regency Atlanta Downtown", "Atlanta"),
    ("Grand Plaza Hotel Atlanta", "Atlanta"),
)

_CITY_FIRST = (
    "Port", "Fort", "Lake", "Mount", "New", "North", "South", "East",
    "West", "Santa", "San", "Saint", "Cape", "Glen", "Old",
)
_CITY_SECOND = (
    "Vista", "Springs", "Haven", "Ridge", "Falls", "Harbor", "Grove",
    "Valley", "Creek", "Shores", "Bluff", "Meadows", "Pines", "Bend",
)
# "Harbor" and "Vista" appear in both lists on purpose: some mentions stay
# genuinely type-ambiguous without world knowledge.
_BRANDS = (
    "Grand", "Royal", "Crown", "Golden", "Emerald", "Sunset", "Harbor",
    "Beacon", "Vista", "Plaza", "Regency", "Imperial", "Majestic",
    "Coastal", "Summit", "Cascade", "Silver", "Amber",
)
_MIDS = ("Plaza", "Park", "Garden", "Bay", "Court", "Place")
_GENERICS = ("Hotel", "Inn", "Suites", "Resort", "Lodge")
_REGIONS = (
    "Nevada", "Georgia", "Florida", "Texas", "Ohio", "Oregon", "Maine",
    "Utah", "Colorado", "Arizona", "Montana", "Vermont",
)


def generate_fixture(seed: int, n_cities: int, n_hotels: int) -> Catalog:
    """Deterministic synthetic catalog: anchor entries plus composed names."""
    if n_cities < 1:
        raise ValueError("n_cities must be >= 1")
    if n_hotels < 0:
        raise ValueError("n_hotels must be >= 0")
    rng = random.Random(seed)

    cities: list[CatalogRecord] = []
    next_id = 1
    for name, region, country in _ANCHOR_CITIES[:n_cities]:
        cities.append(
            CatalogRecord(
                id=next_id,
                kind=RecordKind.CITY,
                name=name,
                city="",
                region=region,
                country=country,
                review_score=0.0,
                bookings_count=rng.randrange(1000, 100000),
            )
        )
        next_id += 1

    combos = [(a, b) for a in _CITY_FIRST for b in _CITY_SECOND]
    rng.shuffle(combos)
    taken = {c.name for c in cities}
    while len(cities) < n_cities:
        if not combos:
            raise ValueError(f"cannot generate {n_cities} distinct city names")
        first, second = combos.pop()
        name = f"{first} {second}"
        if name in taken:
            continue
        taken.add(name)
        cities.append(
            CatalogRecord(
                id=next_id,
                kind=RecordKind.CITY,
                name=name,
                city="",
                region=rng.choice(_REGIONS),
                country="United States",
                review_score=0.0,
                bookings_count=rng.randrange(1000, 100000),
            )
        )
        next_id += 1

    city_names = [c.name for c in cities]
    hotels: list[CatalogRecord] = []
    for name, city in _ANCHOR_HOTELS:
        if len(hotels) >= n_hotels:
            break
        if city not in taken:
            continue
        hotels.append(
            CatalogRecord(
                id=next_id,
                kind=RecordKind.HOTEL,
                name=name,
                city=city,
                region="",
                country="",
                review_score=round(rng.uniform(6.0, 9.8), 1),
                bookings_count=rng.randrange(0, 50000),
            )
        )
        next_id += 1

    while len(hotels) < n_hotels:
        city = rng.choice(city_names)
        parts = [rng.choice(_BRANDS)]
        if rng.random() < 0.5:
            mid = rng.choice(_MIDS)
            if mid != parts[0]:
                parts.append(mid)
        parts.append(rng.choice(_GENERICS))
        # Half the hotels carry their city in the official name; the other
        # half do not, which is what makes city-qualified queries ambiguous.
        if rng.random() < 0.5:
            parts.append(city)
        hotels.append(
            CatalogRecord(
                id=next_id,
                kind=RecordKind.HOTEL,
                name=" ".join(parts),
                city=city,
                region="",
                country="",
                review_score=round(rng.uniform(5.0, 9.8), 1),
                bookings_count=rng.randrange(0, 50000),
            )
        )
        next_id += 1

    return Catalog(cities + hotels)


def _typo(token: str, rng: random.Random) -> str:
    """One random character edit (insert/delete/substitute) at distance 1."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    op = rng.choice(("delete", "substitute", "insert"))
    pos = rng.randrange(len(token))
    if op == "delete" and len(token) > 1:
        return token[:pos] + token[pos + 1 :]
    if op == "substitute":
        replacement = rng.choice(letters)
        return token[:pos] + replacement + token[pos + 1 :]
    return token[:pos] + token[pos] + token[pos:]


def make_noisy_query(record: CatalogRecord, seed: int) -> str:
    """A user-style surface form of an official name.

    Lowercases, drops up to two non-head tokens, may inject a generic
    "hotel" token or an "in <city>" suffix, and may apply a single-character
    typo to one original token. Deterministic per (record, seed); never empty.
    """
    rng = random.Random(seed * 2_147_483_647 + record.id)
    tokens = record.name.lower().split()
    head, rest = tokens[0], tokens[1:]

    n_drop = rng.randint(0, min(2, len(rest)))
    dropped = set(rng.sample(range(len(rest)), n_drop))
    kept = [head] + [tok for i, tok in enumerate(rest) if i not in dropped]

    if rng.random() < 0.30:
        idx = rng.randrange(len(kept))
        kept[idx] = _typo(kept[idx], rng)

    if rng.random() < 0.30 and "hotel" not in kept:
        kept.insert(rng.randint(1, len(kept)), "hotel")
    if record.kind is RecordKind.HOTEL and rng.random() < 0.35:
        kept.extend(["in", record.city.lower()])

    return " ".join(kept)
