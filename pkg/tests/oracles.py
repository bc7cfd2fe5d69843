"""Independent brute-force scorers used to cross-check the fast paths.

Everything here is written from the documented algorithm definitions, not
from the library code: plain dict/loop arithmetic, no postings traversal.
"""

from __future__ import annotations

import math
import re
from collections import Counter

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def oracle_grams(text: str, n: int = 3) -> Counter[str]:
    norm = _NON_ALNUM.sub(" ", text.lower()).strip()
    grams: Counter[str] = Counter()
    if not norm:
        return grams
    for word in norm.split(" "):
        grams["w:" + word] += 1
    for i in range(len(norm) - n + 1):
        grams["c:" + norm[i : i + n]] += 1
    return grams


def oracle_indexed_text(record) -> str:
    if record.kind.value == "HOTEL" and record.city:
        return f"{record.name} {record.city}"
    return record.name


def oracle_topk(catalog, query: str, k: int = 10) -> list[tuple[int, float]]:
    """Full cosine pass over every record: tf = 1+ln(count),
    idf = ln((N+1)/(df+1))+1, ties by ascending id, zero overlap excluded."""
    docs = {r.id: oracle_grams(oracle_indexed_text(r)) for r in catalog}
    n_docs = len(docs)
    df: Counter[str] = Counter()
    for grams in docs.values():
        for gram in grams:
            df[gram] += 1

    def idf(gram: str) -> float:
        return math.log((n_docs + 1) / (df.get(gram, 0) + 1)) + 1.0

    def weight(count: int, gram: str) -> float:
        return (1.0 + math.log(count)) * idf(gram)

    q_grams = oracle_grams(query)
    q_norm = math.sqrt(sum(weight(c, g) ** 2 for g, c in q_grams.items()))
    scored: list[tuple[int, float]] = []
    for doc_id, d_grams in docs.items():
        dot = sum(
            weight(q_grams[g], g) * weight(d_grams[g], g) for g in q_grams if g in d_grams
        )
        if dot == 0.0:
            continue
        d_norm = math.sqrt(sum(weight(c, g) ** 2 for g, c in d_grams.items()))
        scored.append((doc_id, dot / (q_norm * d_norm)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
