/** Wires state, rendering, and the chat API into a single-page client.
 * One request in flight at a time; the input stays usable after handoff. */

import {
  applyActions,
  applyFailure,
  beginRetry,
  beginSend,
  initialState,
  type ChatViewState,
} from "./state.js";
import { render, type Handlers } from "./render.js";
import type { PostChat } from "./types.js";

export interface ChatApp {
  send: (text: string) => Promise<void>;
  getState: () => ChatViewState;
}

export function createChatApp(root: HTMLElement, postChat: PostChat, sessionId: string): ChatApp {
  let state = initialState(sessionId);
  let lastSent = "";

  const handlers: Handlers = {
    onSend: (text) => void send(text),
    onChoice: (label) => void send(label),
    onRetry: () => void retry(),
  };

  function update(next: ChatViewState): void {
    state = next;
    render(root, state, handlers);
  }

  async function dispatch(text: string): Promise<void> {
    try {
      const response = await postChat(state.sessionId, text);
      update(applyActions(state, response.actions));
    } catch {
      update(applyFailure(state, text));
    }
  }

  async function send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || state.inFlight) return;
    lastSent = trimmed;
    update(beginSend(state, trimmed));
    await dispatch(trimmed);
  }

  async function retry(): Promise<void> {
    if (state.inFlight || state.failedText === null) return;
    update(beginRetry(state));
    await dispatch(lastSent);
  }

  update(state);
  return { send, getState: () => state };
}
