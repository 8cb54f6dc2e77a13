// Batch/card state machine. Pure data + transitions; no DOM, no network.

import type { Verdict } from "./api.js";

export type CardStatus = "pending" | "submitting" | "done";

export interface ClipCard {
  segmentId: string;
  audioUrl: string;
  played: boolean;
  selected: Verdict | null;
  status: CardStatus;
  // set when the server already had a label for this (segment, annotator);
  // the card is then locked with the server's state, never re-submitted
  conflicted: boolean;
}

export interface BatchState {
  cards: ClipCard[];
  exhausted: boolean;
  active: number; // index of the keyboard-focused card
}

export function newBatch(clips: { segment_id: string; audio_url: string }[], exhausted: boolean): BatchState {
  return {
    cards: clips.map((c) => ({
      segmentId: c.segment_id,
      audioUrl: c.audio_url,
      played: false,
      selected: null,
      status: "pending",
      conflicted: false,
    })),
    exhausted,
    active: 0,
  };
}

export function card(state: BatchState, segmentId: string): ClipCard {
  const found = state.cards.find((c) => c.segmentId === segmentId);
  if (!found) throw new Error(`unknown card ${segmentId}`);
  return found;
}

export function markPlayed(state: BatchState, segmentId: string): void {
  card(state, segmentId).played = true;
}

export function selectVerdict(state: BatchState, segmentId: string, verdict: Verdict): boolean {
  const c = card(state, segmentId);
  if (c.status !== "pending") return false;
  c.selected = verdict;
  return true;
}

// submit is allowed only after the clip has been played at least once and a
// verdict is selected
export function canSubmit(c: ClipCard): boolean {
  return c.status === "pending" && c.played && c.selected !== null;
}

export function submittedCount(state: BatchState): number {
  return state.cards.filter((c) => c.status === "done").length;
}

export function isComplete(state: BatchState): boolean {
  return state.cards.length > 0 && state.cards.every((c) => c.status === "done");
}

export function moveActive(state: BatchState, delta: number): void {
  if (state.cards.length === 0) return;
  const next = state.active + delta;
  state.active = Math.min(Math.max(next, 0), state.cards.length - 1);
}

export const VERDICT_KEYS: Record<string, Verdict> = {
  "1": "target_speech",
  "2": "other_language",
  "3": "non_speech",
  "4": "unsure",
};

export const VERDICT_LABELS: Record<Verdict, string> = {
  target_speech: "speech in this language",
  other_language: "speech in another language",
  non_speech: "no speech",
  unsure: "can't say",
};
