import { describe, expect, it } from "vitest";

import {
  canSubmit,
  isComplete,
  markPlayed,
  moveActive,
  newBatch,
  selectVerdict,
  submittedCount,
} from "../src/state.js";

function batch(n = 3) {
  return newBatch(
    Array.from({ length: n }, (_, i) => ({
      segment_id: `s${i}`,
      audio_url: `/clips/s${i}/audio`,
    })),
    false,
  );
}

describe("card gating", () => {
  it("cannot submit before playing, even with a verdict", () => {
    const state = batch();
    selectVerdict(state, "s0", "target_speech");
    expect(canSubmit(state.cards[0])).toBe(false);
  });

  it("cannot submit after playing without a verdict", () => {
    const state = batch();
    markPlayed(state, "s0");
    expect(canSubmit(state.cards[0])).toBe(false);
  });

  it("played + verdict enables submit", () => {
    const state = batch();
    markPlayed(state, "s0");
    selectVerdict(state, "s0", "non_speech");
    expect(canSubmit(state.cards[0])).toBe(true);
  });

  it("done cards reject verdict changes", () => {
    const state = batch();
    markPlayed(state, "s0");
    selectVerdict(state, "s0", "unsure");
    state.cards[0].status = "done";
    expect(selectVerdict(state, "s0", "target_speech")).toBe(false);
    expect(state.cards[0].selected).toBe("unsure");
  });
});

describe("batch accounting", () => {
  it("counts submitted cards and completion", () => {
    const state = batch(2);
    expect(submittedCount(state)).toBe(0);
    expect(isComplete(state)).toBe(false);
    state.cards[0].status = "done";
    expect(submittedCount(state)).toBe(1);
    state.cards[1].status = "done";
    expect(isComplete(state)).toBe(true);
  });

  it("active index clamps at both ends", () => {
    const state = batch(3);
    moveActive(state, -5);
    expect(state.active).toBe(0);
    moveActive(state, 2);
    expect(state.active).toBe(2);
    moveActive(state, 7);
    expect(state.active).toBe(2);
  });

  it("empty batch flags exhaustion", () => {
    const state = newBatch([], true);
    expect(state.exhausted).toBe(true);
    expect(isComplete(state)).toBe(false);
  });
});
