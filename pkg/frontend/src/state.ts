/** Pure view-state transitions: the rendered UI is a function of this state,
 * and replaying the same responses always reproduces the same view. */

import type { RecordSummary, WireAction } from "./types.js";

export interface TranscriptEntry {
  sender: "USER" | "BOT";
  body: string;
  cards?: RecordSummary[];
}

export interface ChatViewState {
  sessionId: string;
  transcript: TranscriptEntry[];
  pendingChoices: RecordSummary[] | null;
  handedOff: boolean;
  inFlight: boolean;
  failedText: string | null;
}

export function initialState(sessionId: string): ChatViewState {
  return {
    sessionId,
    transcript: [],
    pendingChoices: null,
    handedOff: false,
    inFlight: false,
    failedText: null,
  };
}

export function priceBand(nightlyPrice: number): string {
  if (nightlyPrice < 120) return "$";
  if (nightlyPrice < 180) return "$$";
  return "$$$";
}

export function cardLine(record: RecordSummary): string {
  return `${record.name} (${record.city}) ${priceBand(record.nightly_price)} rated ${record.review_score}/10`;
}

/** The user pressed send: append exactly one USER bubble and mark in-flight.
 * Sending also clears any outstanding choice buttons. */
export function beginSend(state: ChatViewState, text: string): ChatViewState {
  return {
    ...state,
    transcript: [...state.transcript, { sender: "USER", body: text }],
    pendingChoices: null,
    inFlight: true,
    failedText: null,
  };
}

/** A retry re-posts the failed text without adding another USER bubble. */
export function beginRetry(state: ChatViewState): ChatViewState {
  return { ...state, inFlight: true, failedText: null };
}

export function applyActions(state: ChatViewState, actions: WireAction[]): ChatViewState {
  let next: ChatViewState = { ...state, inFlight: false, failedText: null };
  for (const action of actions) {
    switch (action.type) {
      case "SEND_TEXT":
        next = {
          ...next,
          transcript: [...next.transcript, { sender: "BOT", body: action.payload.text }],
        };
        break;
      case "SEND_CHOICES":
        next = { ...next, pendingChoices: action.payload.choices.slice(0, 3) };
        break;
      case "SEND_RESULTS":
        next = {
          ...next,
          transcript: [
            ...next.transcript,
            { sender: "BOT", body: "Here is what I found:", cards: action.payload.results },
          ],
        };
        break;
      case "HANDOFF":
        next = { ...next, handedOff: true };
        break;
      case "COMPLETE_BOOKING":
        next = {
          ...next,
          transcript: [
            ...next.transcript,
            { sender: "BOT", body: `Booking confirmed: ${action.payload.name}` },
          ],
        };
        break;
    }
  }
  return next;
}

/** Network failure: the transcript is left untouched; the failed text is
 * remembered so a retry button can re-post it. */
export function applyFailure(state: ChatViewState, text: string): ChatViewState {
  return { ...state, inFlight: false, failedText: text };
}
