"""Frame-based dialogue management over a finite state machine.

Each turn runs the model cascade (universal commands, intent, NER, retrieval,
reranking), merges any newly parsed slots into the search frame, and either
prompts for the next missing slot or executes the hotel search.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from enum import Enum

from .catalog import Catalog, CatalogRecord, RecordKind
from .intent import (
    CANCEL,
    GREETING,
    SEARCH,
    STOP,
    THANKS,
    UNKNOWN,
    IntentModel,
    RuleTable,
    classify,
)
from .ner import TaggerModel, tag
from .reranker import Presentation, RankerModel, decide_presentation, rerank
from .retrieval import SearchIndex, query_candidates


class State(str, Enum):
    START = "START"
    ELICIT_DESTINATION = "ELICIT_DESTINATION"
    ELICIT_DATES = "ELICIT_DATES"
    ELICIT_BUDGET = "ELICIT_BUDGET"
    DISAMBIGUATING = "DISAMBIGUATING"
    SHOWING_RESULTS = "SHOWING_RESULTS"
    AWAITING_BOOKING = "AWAITING_BOOKING"
    HANDED_OFF = "HANDED_OFF"
    ENDED = "ENDED"


ABSORBING_STATES = (State.HANDED_OFF, State.ENDED)


class UniversalCommand(str, Enum):
    AGENT = "AGENT"
    END = "END"


class ActionType(str, Enum):
    SEND_TEXT = "SEND_TEXT"
    SEND_CHOICES = "SEND_CHOICES"
    SEND_RESULTS = "SEND_RESULTS"
    HANDOFF = "HANDOFF"
    COMPLETE_BOOKING = "COMPLETE_BOOKING"


class DialogueUsageError(Exception):
    """advance() called on a session that has already ended."""


class DateRangeError(ValueError):
    """Dates parsed but unusable (reversed or in the past)."""


@dataclass(frozen=True)
class ResponseAction:
    type: ActionType
    template_id: str | None = None
    args: dict = field(default_factory=dict)
    choices: tuple[int, ...] = ()
    results: tuple[int, ...] = ()
    record_id: int | None = None
    reason: str | None = None

    def __post_init__(self) -> None:
        if self.type is ActionType.SEND_CHOICES and not 2 <= len(self.choices) <= 3:
            raise ValueError("SEND_CHOICES carries 2 to 3 choices")
        if self.type is ActionType.SEND_RESULTS and not self.results:
            raise ValueError("SEND_RESULTS must be non-empty")


def send_text(template_id: str, **args) -> ResponseAction:
    return ResponseAction(ActionType.SEND_TEXT, template_id=template_id, args=args)


@dataclass(frozen=True)
class SearchFrame:
    destination: int | str | None = None
    check_in: date | None = None
    check_out: date | None = None
    budget_min: float | None = None
    budget_max: float | None = None


def frame_complete(frame: SearchFrame) -> bool:
    """Destination and both dates; budget stays optional (defaults to any)."""
    return (
        frame.destination is not None
        and frame.check_in is not None
        and frame.check_out is not None
    )


@dataclass(frozen=True)
class DialogueState:
    state: State
    frame: SearchFrame
    today: date
    pending_choices: tuple[int, ...] = ()
    pending_booking: int | None = None
    last_results: tuple[int, ...] = ()
    budget_prompted: bool = False


def new_session(today: date) -> DialogueState:
    return DialogueState(state=State.START, frame=SearchFrame(), today=today)


def state_to_dict(state: DialogueState) -> dict:
    """JSON-safe export for session persistence."""
    frame = state.frame
    return {
        "state": state.state.value,
        "today": state.today.isoformat(),
        "frame": {
            "destination": frame.destination,
            "check_in": frame.check_in.isoformat() if frame.check_in else None,
            "check_out": frame.check_out.isoformat() if frame.check_out else None,
            "budget_min": frame.budget_min,
            "budget_max": frame.budget_max,
        },
        "pending_choices": list(state.pending_choices),
        "pending_booking": state.pending_booking,
        "last_results": list(state.last_results),
        "budget_prompted": state.budget_prompted,
    }


def state_from_dict(payload: dict) -> DialogueState:
    frame = payload["frame"]
    parse = lambda s: date.fromisoformat(s) if s else None  # noqa: E731
    return DialogueState(
        state=State(payload["state"]),
        today=date.fromisoformat(payload["today"]),
        frame=SearchFrame(
            destination=frame["destination"],
            check_in=parse(frame["check_in"]),
            check_out=parse(frame["check_out"]),
            budget_min=frame["budget_min"],
            budget_max=frame["budget_max"],
        ),
        pending_choices=tuple(payload["pending_choices"]),
        pending_booking=payload["pending_booking"],
        last_results=tuple(payload["last_results"]),
        budget_prompted=bool(payload["budget_prompted"]),
    )


def check_state_invariants(state: DialogueState) -> None:
    """Raises on any violated DialogueState/SearchFrame invariant (test hook)."""
    if (state.state is State.DISAMBIGUATING) != bool(state.pending_choices):
        raise AssertionError("pending_choices must be non-empty iff DISAMBIGUATING")
    if len(state.pending_choices) > 3:
        raise AssertionError("pending_choices longer than 3")
    frame = state.frame
    if frame.check_in is not None and frame.check_out is not None:
        if not frame.check_in < frame.check_out:
            raise AssertionError("check_in must precede check_out")
    for d in (frame.check_in, frame.check_out):
        if d is not None and d < state.today:
            raise AssertionError("dates must not be before session today")
    if frame.budget_min is not None and frame.budget_max is not None:
        if frame.budget_min > frame.budget_max:
            raise AssertionError("budget_min must not exceed budget_max")


@dataclass
class Services:
    """Immutable model/index/catalog snapshot shared across sessions."""

    catalog: Catalog
    intent_model: IntentModel
    rules: RuleTable
    tagger: TaggerModel
    index: SearchIndex
    ranker: RankerModel
    theta_high: float = 0.9
    max_results: int = 5


# --------------------------------------------------------------------------
# Universal commands and slot grammars.

_WORDS = re.compile(r"[a-z0-9']+")

_AGENT_PHRASES = frozenset({"agent", "help", "human", "support"})
_END_PHRASES = frozenset({"stop", "end chat", "quit", "goodbye", "bye"})

_AFFIRMATIVES = frozenset(
    {"yes", "yes please", "yeah", "yep", "sure", "ok", "okay", "book it", "confirm", "go ahead", "y"}
)
_NEGATIVES = frozenset({"no", "nope", "not that one", "no thanks", "go back"})
_NO_PREFERENCE = frozenset(
    {"no preference", "any", "anything", "no budget", "none", "whatever", "no", "skip", "doesn't matter"}
)

MONTHS = {
    "jan": 1, "january": 1, "feb": 2, "february": 2, "mar": 3, "march": 3,
    "apr": 4, "april": 4, "may": 5, "jun": 6, "june": 6, "jul": 7, "july": 7,
    "aug": 8, "august": 8, "sep": 9, "sept": 9, "september": 9, "oct": 10,
    "october": 10, "nov": 11, "november": 11, "dec": 12, "december": 12,
}
_MONTH_RE = "|".join(sorted(MONTHS, key=len, reverse=True))

_ISO_RANGE = re.compile(
    r"(\d{4}-\d{2}-\d{2})\s*(?:-|–|to|through|until)\s*(\d{4}-\d{2}-\d{2})", re.I
)
_MONTH_PAIR = re.compile(
    rf"\b({_MONTH_RE})\s+(\d{{1,2}})\s*(?:-|–|to|through|until)\s*({_MONTH_RE})\s+(\d{{1,2}})\b",
    re.I,
)
_MONTH_SPAN = re.compile(rf"\b({_MONTH_RE})\s+(\d{{1,2}})\s*(?:-|–|to)\s*(\d{{1,2}})\b", re.I)

_BUDGET_UNDER = re.compile(r"\b(?:under|below|less than|max(?:imum)?(?: of)?)\s*\$?(\d+)", re.I)
_BUDGET_RANGE = re.compile(r"\$(\d+)\s*(?:-|–|to)\s*\$(\d+)")
_BUDGET_BETWEEN = re.compile(r"\bbetween\s*\$?(\d+)\s*and\s*\$?(\d+)", re.I)
_BUDGET_AROUND = re.compile(r"\b(?:around|about|roughly)\s*\$?(\d+)", re.I)

_ORDINAL_WORDS = {"one": 1, "first": 1, "two": 2, "second": 2, "three": 3, "third": 3}


def _norm_phrase(message: str) -> str:
    return " ".join(_WORDS.findall(message.lower()))


def check_universal(message: str) -> UniversalCommand | None:
    """Standalone agent/help and stop/end-chat commands; anything longer
    (e.g. "please help me find a hotel") is not a command."""
    phrase = _norm_phrase(message)
    if phrase in _AGENT_PHRASES:
        return UniversalCommand.AGENT
    if phrase in _END_PHRASES:
        return UniversalCommand.END
    return None


def _next_occurrence(month: int, day: int, today: date) -> date | None:
    for year in (today.year, today.year + 1):
        try:
            candidate = date(year, month, day)
        except ValueError:
            return None
        if candidate >= today:
            return candidate
    return None


def parse_date_range(text: str, today: date) -> tuple[date, date] | None:
    """Extract a (check_in, check_out) pair from free text.

    Month/day forms resolve to their next occurrence on or after `today`.
    Returns None when nothing date-like appears; raises DateRangeError for a
    recognized but unusable range (reversed, zero nights, or in the past).
    """
    match = _ISO_RANGE.search(text)
    if match:
        try:
            check_in = date.fromisoformat(match.group(1))
            check_out = date.fromisoformat(match.group(2))
        except ValueError:
            return None
        if check_in < today:
            raise DateRangeError(f"check-in {check_in} is in the past")
        if check_in >= check_out:
            raise DateRangeError(f"check-in {check_in} not before check-out {check_out}")
        return check_in, check_out

    match = _MONTH_PAIR.search(text)
    if match:
        m1, d1, m2, d2 = match.groups()
        check_in = _next_occurrence(MONTHS[m1.lower()], int(d1), today)
        check_out = _next_occurrence(MONTHS[m2.lower()], int(d2), today)
        if check_in is None or check_out is None:
            return None
        if check_in >= check_out:
            raise DateRangeError(f"check-in {check_in} not before check-out {check_out}")
        return check_in, check_out

    match = _MONTH_SPAN.search(text)
    if match:
        mon, d1, d2 = match.groups()
        month = MONTHS[mon.lower()]
        if int(d2) <= int(d1):
            raise DateRangeError(f"day {d2} not after day {d1}")
        check_in = _next_occurrence(month, int(d1), today)
        if check_in is None:
            return None
        try:
            check_out = date(check_in.year, month, int(d2))
        except ValueError:
            return None
        return check_in, check_out

    lowered = text.lower()
    if re.search(r"\btonight\b", lowered):
        return today, today + timedelta(days=1)
    if re.search(r"\btomorrow\b", lowered):
        return today + timedelta(days=1), today + timedelta(days=2)
    return None


def parse_budget(text: str) -> tuple[float, float] | None:
    """Budget grammar: "under $X", "$X-$Y", "between X and Y", "around $X"."""
    match = _BUDGET_UNDER.search(text)
    if match:
        return 0.0, float(match.group(1))
    match = _BUDGET_RANGE.search(text) or _BUDGET_BETWEEN.search(text)
    if match:
        low, high = sorted((float(match.group(1)), float(match.group(2))))
        return low, high
    match = _BUDGET_AROUND.search(text)
    if match:
        amount = float(match.group(1))
        return round(0.8 * amount, 2), round(1.2 * amount, 2)
    return None


def nightly_price(record: CatalogRecord) -> int:
    """Deterministic pseudo-price; the partner feed carries no rates."""
    return 50 + int(record.review_score * 10) + (record.id * 37) % 150


# --------------------------------------------------------------------------
# Structured replies (choice picks, confirmations).


def _ordinal(message: str, limit: int) -> int | None:
    tokens = _WORDS.findall(message.lower())
    for tok in tokens:
        value = int(tok) if tok.isdigit() else _ORDINAL_WORDS.get(tok)
        if value is not None and 1 <= value <= limit:
            return value
    return None


def _match_choice(
    message: str, ids: tuple[int, ...], catalog: Catalog, strict: bool = False
) -> int | None:
    """Resolve a reply against listed records by ordinal or name overlap.

    Strict mode (results/booking states, where a message could be anything)
    demands the overlap cover at least half of the record's name tokens;
    loose mode (a direct answer to "which one?") accepts any overlap.
    """
    if not ids:
        return None
    pick = _ordinal(message, len(ids))
    if pick is not None:
        return ids[pick - 1]
    tokens = set(_WORDS.findall(message.lower()))
    best_id, best_overlap = None, 0
    for rid in ids:
        record = catalog.by_id(rid)
        name_toks = set(_WORDS.findall(record.name.lower()))
        overlap = len(tokens & name_toks)
        if strict and (overlap < 2 or overlap * 2 < len(name_toks)):
            continue
        if overlap > best_overlap:
            best_id, best_overlap = rid, overlap
    return best_id


def _is_affirmative(message: str) -> bool:
    return _norm_phrase(message) in _AFFIRMATIVES


def _is_negative(message: str) -> bool:
    return _norm_phrase(message) in _NEGATIVES


def _is_no_preference(message: str) -> bool:
    return _norm_phrase(message) in _NO_PREFERENCE


# --------------------------------------------------------------------------
# The advance pipeline.


def advance(
    state: DialogueState, message: str, services: Services
) -> tuple[DialogueState, list[ResponseAction]]:
    """One dialogue turn; returns the successor state and >= 1 actions."""
    if state.state is State.ENDED:
        raise DialogueUsageError("cannot advance an ended session")
    if state.state is State.HANDED_OFF:
        return state, [send_text("agent_mode")]

    command = check_universal(message)
    if command is UniversalCommand.AGENT:
        return (
            replace(state, state=State.HANDED_OFF, pending_choices=()),
            [
                send_text("handoff_notice"),
                ResponseAction(ActionType.HANDOFF, reason="user_requested_agent"),
            ],
        )
    if command is UniversalCommand.END:
        return replace(state, state=State.ENDED, pending_choices=()), [send_text("goodbye")]

    structured = _structured_reply(state, message, services)
    if structured is not None:
        return structured

    prediction = classify(services.intent_model, services.rules, message)
    if prediction.label == UNKNOWN:
        return (
            replace(state, state=State.HANDED_OFF, pending_choices=()),
            [
                send_text("handoff_notice"),
                ResponseAction(ActionType.HANDOFF, reason="intent_unknown"),
            ],
        )
    if prediction.label == STOP:
        return replace(state, state=State.ENDED, pending_choices=()), [send_text("goodbye")]
    if prediction.label == CANCEL:
        fresh = replace(
            state,
            state=State.ELICIT_DESTINATION,
            frame=SearchFrame(),
            pending_choices=(),
            pending_booking=None,
            last_results=(),
            budget_prompted=False,
        )
        return fresh, [send_text("cancelled")]
    if prediction.label in (THANKS, GREETING):
        if state.state in (State.SHOWING_RESULTS, State.AWAITING_BOOKING):
            reply = "thanks_reply" if prediction.label == THANKS else "greeting_midflow"
            return state, [send_text(reply)]
        if state.state is State.DISAMBIGUATING:
            reply = "thanks_reply" if prediction.label == THANKS else "greeting_midflow"
            return state, [send_text(reply), send_text("ask_disambiguate")]
        if prediction.label == GREETING and state.frame.destination is None:
            # The greeting template itself asks for the destination.
            return replace(state, state=State.ELICIT_DESTINATION), [send_text("greeting")]
        reply = send_text("thanks_reply" if prediction.label == THANKS else "greeting_midflow")
        next_state, prompt = _reprompt(state)
        return next_state, [reply] + ([prompt] if prompt else [])
    if prediction.label == SEARCH:
        return _handle_search_turn(state, message, services)

    # Labels beyond the built-in registry have no dialogue policy yet;
    # acknowledge and keep driving toward the frame.
    next_state, prompt = _reprompt(state)
    return next_state, [send_text("noted")] + ([prompt] if prompt else [])


def _reprompt(state: DialogueState) -> tuple[DialogueState, ResponseAction | None]:
    """Re-ask for the first missing slot without executing a search."""
    if state.frame.destination is None:
        return replace(state, state=State.ELICIT_DESTINATION), send_text("ask_destination")
    if state.frame.check_in is None or state.frame.check_out is None:
        return replace(state, state=State.ELICIT_DATES), send_text("ask_dates")
    if state.state is State.ELICIT_BUDGET:
        return state, send_text("ask_budget")
    return state, None


def _structured_reply(
    state: DialogueState, message: str, services: Services
) -> tuple[DialogueState, list[ResponseAction]] | None:
    """State-specific replies that bypass the intent cascade (choice picks,
    booking confirmations, budget opt-outs)."""
    catalog = services.catalog

    if state.state is State.DISAMBIGUATING:
        choice = _match_choice(message, state.pending_choices, catalog)
        if choice is not None:
            record = catalog.by_id(choice)
            chosen = replace(
                state,
                frame=replace(state.frame, destination=choice),
                pending_choices=(),
            )
            ack = send_text("choice_ack", name=record.name)
            return _prompt_or_search(chosen, [ack], services)
        return None

    if state.state is State.SHOWING_RESULTS:
        pick = _match_choice(message, state.last_results, catalog, strict=True)
        if pick is not None:
            record = catalog.by_id(pick)
            confirm = send_text(
                "confirm_booking",
                name=record.name,
                check_in=str(state.frame.check_in),
                check_out=str(state.frame.check_out),
            )
            return replace(state, state=State.AWAITING_BOOKING, pending_booking=pick), [confirm]
        return None

    if state.state is State.AWAITING_BOOKING:
        pick = None
        if _is_affirmative(message):
            pick = state.pending_booking
        elif not _is_negative(message):
            pick = _match_choice(message, state.last_results, catalog, strict=True)
        if pick is not None:
            record = catalog.by_id(pick)
            done = replace(state, state=State.ENDED, pending_booking=pick, pending_choices=())
            return done, [
                send_text("booked", name=record.name),
                ResponseAction(ActionType.COMPLETE_BOOKING, record_id=pick),
            ]
        if _is_negative(message):
            back = replace(state, state=State.SHOWING_RESULTS, pending_booking=None)
            return back, [
                send_text("pick_another"),
                ResponseAction(ActionType.SEND_RESULTS, results=state.last_results),
            ]
        return None

    if state.state is State.ELICIT_BUDGET and _is_no_preference(message):
        return _prompt_or_search(state, [], services)

    return None


def _handle_search_turn(
    state: DialogueState, message: str, services: Services
) -> tuple[DialogueState, list[ResponseAction]]:
    """SEARCH intent: run NER and slot parsers, resolve places, merge slots."""
    actions: list[ResponseAction] = []
    frame = state.frame
    date_error = False

    try:
        dates = parse_date_range(message, state.today)
    except DateRangeError:
        dates = None
        date_error = True
    if dates is not None:
        frame = replace(frame, check_in=dates[0], check_out=dates[1])

    budget = parse_budget(message)
    if budget is not None:
        frame = replace(frame, budget_min=budget[0], budget_max=budget[1])

    if date_error:
        actions.append(send_text("date_range_error"))

    pending: tuple[int, ...] = ()
    spans = tag(services.tagger, message, services.catalog)
    if spans:
        place_query = " ".join(span.text for span in spans)
        candidates = query_candidates(services.index, place_query)
        ranking = rerank(services.ranker, place_query, candidates, services.catalog)
        decision = decide_presentation(ranking, services.theta_high)
        if decision.variant is Presentation.NO_MATCH:
            actions.append(send_text("nomatch_apology"))
        elif decision.variant is Presentation.DIRECT or len(decision.items) == 1:
            # A single below-threshold match is accepted outright rather than
            # presented as a one-button disambiguation.
            resolved = decision.items[0].record_id
            frame = replace(frame, destination=resolved)
            actions.append(
                send_text("destination_ack", name=services.catalog.by_id(resolved).name)
            )
        else:
            pending = tuple(item.record_id for item in decision.items)

    merged = replace(state, frame=frame)
    if pending:
        next_state = replace(merged, state=State.DISAMBIGUATING, pending_choices=pending)
        actions.append(send_text("ask_disambiguate"))
        actions.append(ResponseAction(ActionType.SEND_CHOICES, choices=pending))
        return next_state, actions

    merged = replace(merged, pending_choices=())
    return _prompt_or_search(merged, actions, services)


# Templates whose text already re-asks for the slot they concern, making a
# second generic prompt redundant.
_SELF_PROMPTING = {
    "nomatch_apology": "destination",
    "no_hotels_city": "destination",
    "date_range_error": "dates",
}


def _already_prompted(actions: list[ResponseAction], slot: str) -> bool:
    return any(_SELF_PROMPTING.get(a.template_id or "") == slot for a in actions)


def _prompt_or_search(
    state: DialogueState,
    actions: list[ResponseAction],
    services: Services,
) -> tuple[DialogueState, list[ResponseAction]]:
    """Prompt for the first missing slot (destination, dates, budget) or run
    the search when the frame is complete."""
    frame = state.frame
    if frame.destination is None:
        if not _already_prompted(actions, "destination"):
            actions = actions + [send_text("ask_destination")]
        return replace(state, state=State.ELICIT_DESTINATION), actions
    if frame.check_in is None or frame.check_out is None:
        if not _already_prompted(actions, "dates"):
            actions = actions + [send_text("ask_dates")]
        return replace(state, state=State.ELICIT_DATES), actions
    has_budget = frame.budget_min is not None or frame.budget_max is not None
    if not has_budget and not state.budget_prompted:
        return (
            replace(state, state=State.ELICIT_BUDGET, budget_prompted=True),
            actions + [send_text("ask_budget")],
        )
    return _run_search(state, actions, services)


def _run_search(
    state: DialogueState, actions: list[ResponseAction], services: Services
) -> tuple[DialogueState, list[ResponseAction]]:
    catalog = services.catalog
    destination = catalog.by_id(state.frame.destination)
    if destination.kind is RecordKind.CITY:
        city_name = destination.name
        anchor_hotel = None
    else:
        city_name = destination.city
        anchor_hotel = destination

    hotels = catalog.hotels_in_city(city_name)
    if anchor_hotel is not None and all(h.id != anchor_hotel.id for h in hotels):
        hotels.append(anchor_hotel)
    if not hotels:
        cleared = replace(
            state,
            state=State.ELICIT_DESTINATION,
            frame=replace(state.frame, destination=None),
        )
        return cleared, actions + [send_text("no_hotels_city", destination=destination.name)]

    low = state.frame.budget_min if state.frame.budget_min is not None else 0.0
    high = state.frame.budget_max if state.frame.budget_max is not None else float("inf")
    in_budget = [h for h in hotels if low <= nightly_price(h) <= high]
    if not in_budget:
        actions = actions + [send_text("no_results_in_budget")]
        in_budget = hotels

    ordered = sorted(in_budget, key=lambda h: (-h.review_score, -h.bookings_count, h.id))
    top = ordered[: services.max_results]
    if anchor_hotel is not None:
        top = [anchor_hotel] + [h for h in top if h.id != anchor_hotel.id]
        top = top[: services.max_results]
    result_ids = tuple(h.id for h in top)

    shown = replace(state, state=State.SHOWING_RESULTS, last_results=result_ids)
    return shown, actions + [
        send_text("results_header", destination=city_name),
        ResponseAction(ActionType.SEND_RESULTS, results=result_ids),
        send_text("results_footer"),
    ]
