"""The front door: chat handling with session persistence, the append-only
event log, handoff training-data capture, and the HTTP/JSON API."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path

from pydantic import BaseModel

from .catalog import load_catalog
from .dialogue import (
    ActionType,
    DialogueState,
    ResponseAction,
    Services,
    State,
    advance,
    new_session,
    nightly_price,
    state_from_dict,
    state_to_dict,
)
from .evaluation import ConversationEvent, EventType, append_event, read_events
from .intent import classify, load_model, load_rules
from .ner import load_tagger
from .reranker import load_ranker
from .retrieval import load_index
from . import templates as template_mod

SESSION_TTL = timedelta(hours=24)


class ChatValidationError(Exception):
    """Unusable chat request (e.g. empty message)."""


class AgentAction(str, Enum):
    ACCEPTED_SUGGESTION = "ACCEPTED_SUGGESTION"
    COMPOSED_REPLY = "COMPOSED_REPLY"


@dataclass(frozen=True)
class TrainingCapture:
    text: str
    predicted_intent: str
    confidence: float
    stage: str
    timestamp: datetime
    agent_action: AgentAction


@dataclass
class SessionRecord:
    session_id: str
    state: DialogueState
    created: datetime
    updated: datetime
    handed_off: bool


class SessionStore:
    """Embedded key-value store persisted as a single JSON file.

    Per-session locks serialize concurrent requests on the same session;
    whole-file writes are atomic (write-then-rename).
    """

    def __init__(self, path: str | Path, ttl: timedelta = SESSION_TTL):
        self._path = Path(path)
        self._ttl = ttl
        self._global = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, dict] = {}
        if self._path.exists():
            self._sessions = json.loads(self._path.read_text(encoding="utf-8"))

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str, now: datetime) -> tuple[SessionRecord | None, bool]:
        """(record, expired): expired=True when a session existed but aged out."""
        with self._global:
            raw = self._sessions.get(session_id)
        if raw is None:
            return None, False
        updated = datetime.fromisoformat(raw["updated"])
        if now - updated > self._ttl:
            return None, True
        return (
            SessionRecord(
                session_id=session_id,
                state=state_from_dict(raw["state"]),
                created=datetime.fromisoformat(raw["created"]),
                updated=updated,
                handed_off=bool(raw["handed_off"]),
            ),
            False,
        )

    def put(self, record: SessionRecord) -> None:
        raw = {
            "state": state_to_dict(record.state),
            "created": record.created.isoformat(),
            "updated": record.updated.isoformat(),
            "handed_off": record.handed_off,
        }
        with self._global:
            self._sessions[record.session_id] = raw
            tmp = self._path.with_suffix(".tmp")
            tmp.write_text(json.dumps(self._sessions), encoding="utf-8")
            os.replace(tmp, self._path)

    def session_ids(self) -> list[str]:
        with self._global:
            return list(self._sessions)


class ChatGateway:
    """Wraps dialogue.advance with persistence, logging, and wire formats."""

    def __init__(
        self,
        services: Services,
        store: SessionStore,
        events_path: str | Path,
        captures_path: str | Path,
        templates: dict[str, str] | None = None,
    ):
        self.services = services
        self.store = store
        self.events_path = Path(events_path)
        self.captures_path = Path(captures_path)
        self.templates = templates or template_mod.DEFAULT_TEMPLATES
        self._capture_lock = threading.Lock()

    # -- wire rendering ----------------------------------------------------

    def _record_summary(self, record_id: int) -> dict:
        record = self.services.catalog.by_id(record_id)
        return {
            "record_id": record.id,
            "kind": record.kind.value,
            "name": record.name,
            "city": record.city or record.name,
            "region": record.region,
            "review_score": record.review_score,
            "nightly_price": nightly_price(record),
        }

    def action_to_wire(self, action: ResponseAction) -> dict:
        if action.type is ActionType.SEND_TEXT:
            text = template_mod.render(action.template_id, action.args, self.templates)
            return {
                "type": "SEND_TEXT",
                "payload": {"template_id": action.template_id, "args": action.args, "text": text},
            }
        if action.type is ActionType.SEND_CHOICES:
            return {
                "type": "SEND_CHOICES",
                "payload": {"choices": [self._record_summary(rid) for rid in action.choices]},
            }
        if action.type is ActionType.SEND_RESULTS:
            return {
                "type": "SEND_RESULTS",
                "payload": {"results": [self._record_summary(rid) for rid in action.results]},
            }
        if action.type is ActionType.HANDOFF:
            return {"type": "HANDOFF", "payload": {"reason": action.reason}}
        return {
            "type": "COMPLETE_BOOKING",
            "payload": self._record_summary(action.record_id),
        }

    # -- the chat entry point ----------------------------------------------

    def handle_chat(self, session_id: str, text: str, now: datetime | None = None) -> dict:
        if not text or not text.strip():
            raise ChatValidationError("message must be non-empty")
        if not session_id or not session_id.strip():
            raise ChatValidationError("session_id must be non-empty")
        now = now or datetime.now(timezone.utc)

        with self.store.lock_for(session_id):
            record, expired = self.store.get(session_id, now)
            notices: list[dict] = []
            if record is None:
                state = new_session(now.date())
                created = now
                if expired:
                    notices.append(self._notice("session_expired"))
            elif record.state.state is State.ENDED:
                state = new_session(now.date())
                created = record.created
                notices.append(self._notice("session_reset"))
            else:
                state = record.state
                created = record.created

            new_state, actions = advance(state, text, self.services)

            self._log(session_id, now, EventType.MESSAGE_IN, {"text": text})
            for action in actions:
                if action.type is ActionType.HANDOFF:
                    self._log(session_id, now, EventType.HANDOFF, {"reason": action.reason})
                    if action.reason == "intent_unknown":
                        self._capture_failed_message(text, now)
                elif action.type is ActionType.SEND_RESULTS:
                    self._log(session_id, now, EventType.SEARCH, {"results": list(action.results)})
                elif action.type is ActionType.COMPLETE_BOOKING:
                    self._log(
                        session_id, now, EventType.BOOKING_COMPLETED, {"record_id": action.record_id}
                    )
            wire_actions = notices + [self.action_to_wire(a) for a in actions]
            out_texts = [
                a["payload"]["text"] for a in wire_actions if a["type"] == "SEND_TEXT"
            ]
            self._log(session_id, now, EventType.MESSAGE_OUT, {"texts": out_texts})
            if new_state.state is State.ENDED:
                self._log(session_id, now, EventType.SESSION_END, None)

            handed_off = new_state.state is State.HANDED_OFF
            self.store.put(
                SessionRecord(
                    session_id=session_id,
                    state=new_state,
                    created=created,
                    updated=now,
                    handed_off=handed_off,
                )
            )
        return {
            "session_id": session_id,
            "actions": wire_actions,
            "state": new_state.state.value,
            "handed_off": handed_off,
        }

    def _notice(self, template_id: str) -> dict:
        return {
            "type": "SEND_TEXT",
            "payload": {
                "template_id": template_id,
                "args": {},
                "text": template_mod.render(template_id, None, self.templates),
            },
        }

    def _log(self, session_id: str, now: datetime, etype: EventType, payload: dict | None) -> None:
        append_event(
            ConversationEvent(session_id=session_id, timestamp=now, type=etype, payload=payload),
            self.events_path,
        )

    def _capture_failed_message(self, text: str, now: datetime) -> None:
        prediction = classify(self.services.intent_model, self.services.rules, text)
        capture = TrainingCapture(
            text=text,
            predicted_intent=prediction.label,
            confidence=prediction.confidence,
            stage=prediction.stage.value,
            timestamp=now,
            agent_action=AgentAction.ACCEPTED_SUGGESTION,
        )
        try:
            capture_training_example(capture, self.captures_path, self._capture_lock)
        except OSError:
            # Capture is best-effort; the chat flow must not break on it.
            pass

    def list_handoffs(self) -> list[dict]:
        """Operator view: handed-off sessions with their transcripts."""
        transcripts: dict[str, list[dict]] = {}
        if self.events_path.exists():
            for event in read_events(self.events_path):
                if event.type in (EventType.MESSAGE_IN, EventType.MESSAGE_OUT):
                    transcripts.setdefault(event.session_id, []).append(
                        {
                            "direction": "in" if event.type is EventType.MESSAGE_IN else "out",
                            "timestamp": event.timestamp.isoformat(),
                            "payload": event.payload,
                        }
                    )
        out = []
        for session_id in self.store.session_ids():
            record, _ = self.store.get(session_id, datetime.now(timezone.utc))
            if record is not None and record.handed_off:
                out.append(
                    {
                        "session_id": session_id,
                        "updated": record.updated.isoformat(),
                        "transcript": transcripts.get(session_id, []),
                    }
                )
        return out


def capture_training_example(
    capture: TrainingCapture,
    path: str | Path,
    lock: threading.Lock | None = None,
) -> None:
    """Append one pending-annotation JSON line; never touches the live training set."""
    line = json.dumps(
        {
            "text": capture.text,
            "predicted_intent": capture.predicted_intent,
            "confidence": capture.confidence,
            "stage": capture.stage,
            "timestamp": capture.timestamp.isoformat(),
            "agent_action": capture.agent_action.value,
        },
        ensure_ascii=False,
    )
    if lock is None:
        lock = threading.Lock()
    with lock:
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")


# --------------------------------------------------------------------------
# Artifact loading and the FastAPI app.


def load_services(
    catalog_path: str | Path,
    models_dir: str | Path,
    theta_high: float = 0.9,
) -> Services:
    models = Path(models_dir)
    return Services(
        catalog=load_catalog(catalog_path),
        intent_model=load_model(models / "intent.npz"),
        rules=load_rules(models / "rules.tsv"),
        tagger=load_tagger(models / "tagger.json"),
        index=load_index(models / "index.json"),
        ranker=load_ranker(models / "ranker.json"),
        theta_high=theta_high,
    )


class ChatRequest(BaseModel):
    session_id: str
    text: str


def create_app(gateway: ChatGateway, static_dir: str | Path | None = None):
    from fastapi import FastAPI, HTTPException
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="concierge", version="0.1.0")

    @app.post("/chat")
    def chat(request: ChatRequest) -> dict:
        try:
            return gateway.handle_chat(request.session_id, request.text)
        except ChatValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/handoffs")
    def handoffs() -> list[dict]:
        return gateway.list_handoffs()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="webchat")
    return app
