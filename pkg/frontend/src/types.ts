// Wire types for the chat service JSON API.

export type Role = "system" | "user" | "assistant";

export interface StressSummary {
  period_start_s: number;
  period_end_s: number;
  windows_total: number;
  windows_stressed: number;
  stressed_fraction: number;
  episodes: { start_s: number; end_s: number }[];
  peak_probability: number;
}

export interface ServerMessage {
  role: Role;
  text: string;
  ts: number;
}

export interface ServerSession {
  session_id: string;
  created_at: number;
  user_name: string;
  locale: string;
  summary: StressSummary;
  messages: ServerMessage[];
  rating: { quality: number; empathy: number; comment: string } | null;
  last_send_failed: boolean;
  truncated: boolean;
}

export interface SessionCreated {
  session_id: string;
  greeting: string;
}

export interface Rating {
  quality: number;
  empathy: number;
  comment: string;
}
