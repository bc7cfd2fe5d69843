/** Thin client for the gateway chat endpoint. */

import type { ChatResponse, PostChat } from "./types.js";

export function makeChatApi(baseUrl: string, fetchFn: typeof fetch = fetch): PostChat {
  return async (sessionId: string, text: string): Promise<ChatResponse> => {
    const response = await fetchFn(`${baseUrl}/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, text }),
    });
    if (!response.ok) {
      throw new Error(`chat request failed: HTTP ${response.status}`);
    }
    return (await response.json()) as ChatResponse;
  };
}

/** Random 128-bit session token, hex-encoded. */
export function newSessionId(): string {
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}
