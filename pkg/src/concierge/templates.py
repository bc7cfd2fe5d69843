"""Response templates, keyed by id so tests and clients can match on ids."""

from __future__ import annotations

import json
from pathlib import Path

DEFAULT_TEMPLATES: dict[str, str] = {
    "greeting": "Hi! I can help you find a hotel. Where would you like to go?",
    "greeting_midflow": "Hello again!",
    "choice_ack": "Got it - {name}.",
    "destination_ack": "{name} - great choice!",
    "ask_destination": "Where would you like to go?",
    "ask_dates": "What dates will you be staying?",
    "ask_budget": "Do you have a nightly budget in mind? You can also say 'no preference'.",
    "ask_disambiguate": "I found a few possible matches. Which one did you mean?",
    "results_header": "Here are the top hotels I found for {destination}:",
    "results_footer": "Reply with a number to book one, or refine your search.",
    "confirm_booking": "Great choice! Book {name} for {check_in} to {check_out}?",
    "booked": "You're all set! Your booking at {name} is confirmed.",
    "pick_another": "No problem - here are the options again.",
    "no_hotels_city": "I couldn't find any hotels in {destination}. Where else could you stay?",
    "no_results_in_budget": "Nothing fits that budget exactly, so here are the closest options.",
    "nomatch_apology": "Sorry, I couldn't find that place. Could you tell me the destination again?",
    "date_range_error": "Those dates look off - check-out must be after check-in (and not in the past). What dates work?",
    "thanks_reply": "You're welcome!",
    "noted": "Noted!",
    "cancelled": "Okay, I've cancelled this search. Where would you like to go next?",
    "goodbye": "Thanks for chatting - goodbye!",
    "handoff_notice": "Let me connect you with a support agent who can help with that.",
    "agent_mode": "You're with our support team now - an agent will reply here shortly.",
    "session_expired": "It's been a while, so I've started a fresh conversation.",
    "session_reset": "Starting a new conversation.",
}


def render(template_id: str, args: dict | None = None, templates: dict[str, str] | None = None) -> str:
    table = templates or DEFAULT_TEMPLATES
    text = table[template_id]
    return text.format(**args) if args else text


def load_templates(path: str | Path) -> dict[str, str]:
    table = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(table, dict):
        raise ValueError("template file must be a JSON object of id -> text")
    return {str(k): str(v) for k, v in table.items()}


def save_templates(templates: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(json.dumps(templates, indent=2, ensure_ascii=False), encoding="utf-8")
