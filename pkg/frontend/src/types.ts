/** Wire types for the gateway POST /chat contract. */

export interface RecordSummary {
  record_id: number;
  kind: "CITY" | "HOTEL";
  name: string;
  city: string;
  region: string;
  review_score: number;
  nightly_price: number;
}

export interface SendTextPayload {
  template_id: string;
  args: Record<string, unknown>;
  text: string;
}

export type WireAction =
  | { type: "SEND_TEXT"; payload: SendTextPayload }
  | { type: "SEND_CHOICES"; payload: { choices: RecordSummary[] } }
  | { type: "SEND_RESULTS"; payload: { results: RecordSummary[] } }
  | { type: "HANDOFF"; payload: { reason: string } }
  | { type: "COMPLETE_BOOKING"; payload: RecordSummary };

export interface ChatResponse {
  session_id: string;
  actions: WireAction[];
  state: string;
  handed_off: boolean;
}

export type PostChat = (sessionId: string, text: string) => Promise<ChatResponse>;
