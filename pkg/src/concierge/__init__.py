"""Conversational hotel search engine.

A frame-based dialogue manager drives a cascade of intent classification,
entity extraction, and two-stage retrieval (candidate generation plus
pointwise reranking) over a city/hotel catalog, fronted by an HTTP chat
gateway and an operator CLI.
"""

__version__ = "0.1.0"
