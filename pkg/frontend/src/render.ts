/** DOM rendering: the whole view is rebuilt from ChatViewState on each
 * change. Content is set via textContent only. */

import { cardLine, type ChatViewState } from "./state.js";

export interface Handlers {
  onSend: (text: string) => void;
  onChoice: (label: string) => void;
  onRetry: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(root: HTMLElement, state: ChatViewState, handlers: Handlers): void {
  root.textContent = "";
  const wrap = el("div", "chat");

  if (state.handedOff) {
    const banner = el("div", "handoff-banner", "You're connected with a support agent.");
    banner.setAttribute("data-testid", "handoff-banner");
    wrap.appendChild(banner);
  }

  const log = el("div", "transcript");
  log.setAttribute("data-testid", "transcript");
  for (const entry of state.transcript) {
    const bubble = el(
      "div",
      entry.sender === "USER" ? "bubble bubble-user" : "bubble bubble-bot",
      entry.body,
    );
    bubble.setAttribute("data-sender", entry.sender);
    log.appendChild(bubble);
    if (entry.cards) {
      const cards = el("div", "cards");
      for (const record of entry.cards) {
        cards.appendChild(el("div", "card", cardLine(record)));
      }
      log.appendChild(cards);
    }
  }
  wrap.appendChild(log);

  if (state.pendingChoices && state.pendingChoices.length > 0) {
    const choices = el("div", "choices");
    choices.setAttribute("data-testid", "choices");
    for (const choice of state.pendingChoices) {
      const button = el("button", "choice", choice.name);
      button.type = "button";
      button.addEventListener("click", () => handlers.onChoice(choice.name));
      choices.appendChild(button);
    }
    wrap.appendChild(choices);
  }

  if (state.failedText !== null) {
    const failed = el("div", "send-error");
    failed.appendChild(el("span", undefined, "Message failed to send."));
    const retry = el("button", "retry", "Retry");
    retry.type = "button";
    retry.setAttribute("data-testid", "retry");
    retry.addEventListener("click", () => handlers.onRetry());
    failed.appendChild(retry);
    wrap.appendChild(failed);
  }

  const form = el("form", "composer");
  const input = el("input", "composer-input");
  input.type = "text";
  input.placeholder = "Message the concierge";
  input.disabled = state.inFlight;
  input.setAttribute("data-testid", "input");
  const send = el("button", "composer-send", "Send");
  send.type = "submit";
  send.disabled = state.inFlight;
  form.appendChild(input);
  form.appendChild(send);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSend(input.value);
  });
  wrap.appendChild(form);

  root.appendChild(wrap);
}
