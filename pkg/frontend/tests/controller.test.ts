import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { BatchController } from "../src/controller.js";
import { markPlayed, selectVerdict } from "../src/state.js";
import { MockServer } from "./mock_server.js";

function setup(nClips = 10) {
  const server = new MockServer(
    ["et"],
    { et: Array.from({ length: nClips }, (_, i) => `et-${i}`) },
  );
  const api = new ApiClient("test-token", "", server.fetch);
  return { server, controller: new BatchController(api) };
}

describe("submit paths", () => {
  it("never calls the API for an unplayed card", async () => {
    const { server, controller } = setup();
    await controller.start("et", 4);
    selectVerdict(controller.state, "et-0", "target_speech");
    const outcome = await controller.submit("et-0");
    expect(outcome).toEqual({ kind: "rejected", reason: "unplayed" });
    expect(server.labelRequests()).toHaveLength(0);
  });

  it("never calls the API without a verdict", async () => {
    const { server, controller } = setup();
    await controller.start("et", 4);
    markPlayed(controller.state, "et-0");
    const outcome = await controller.submit("et-0");
    expect(outcome).toEqual({ kind: "rejected", reason: "no-verdict" });
    expect(server.labelRequests()).toHaveLength(0);
  });

  it("stores a played and judged card", async () => {
    const { server, controller } = setup();
    await controller.start("et", 4);
    markPlayed(controller.state, "et-0");
    selectVerdict(controller.state, "et-0", "other_language");
    const outcome = await controller.submit("et-0");
    expect(outcome).toEqual({ kind: "stored" });
    expect(server.labels).toEqual([
      { segmentId: "et-0", annotatorId: "annotator-1", verdict: "other_language" },
    ]);
    expect(controller.state.cards[0].status).toBe("done");
  });

  it("rolls back on network failure, card stays editable", async () => {
    const { server, controller } = setup();
    await controller.start("et", 4);
    markPlayed(controller.state, "et-0");
    selectVerdict(controller.state, "et-0", "unsure");
    server.failNext = 1;
    const outcome = await controller.submit("et-0");
    expect(outcome.kind).toBe("failed");
    const card = controller.state.cards[0];
    expect(card.status).toBe("pending");
    expect(card.selected).toBe("unsure"); // selection preserved for retry
    expect(server.labels).toHaveLength(0);
    // retry succeeds without re-judging
    const retry = await controller.submit("et-0");
    expect(retry).toEqual({ kind: "stored" });
  });

  it("reconciles a server conflict without duplicating", async () => {
    const { server, controller } = setup();
    await controller.start("et", 4);
    // the server already holds a label from this annotator
    server.labels.push({ segmentId: "et-1", annotatorId: "annotator-1", verdict: "non_speech" });
    markPlayed(controller.state, "et-1");
    selectVerdict(controller.state, "et-1", "target_speech");
    const outcome = await controller.submit("et-1");
    expect(outcome).toEqual({ kind: "conflict" });
    const card = controller.state.cards[1];
    expect(card.status).toBe("done");
    expect(card.conflicted).toBe(true);
    expect(server.labels.filter((l) => l.segmentId === "et-1")).toHaveLength(1);
    // a second submit attempt is rejected client-side, no API call
    const before = server.labelRequests().length;
    const again = await controller.submit("et-1");
    expect(again).toEqual({ kind: "rejected", reason: "not-pending" });
    expect(server.labelRequests().length).toBe(before);
  });
});

describe("mid-batch failure", () => {
  it("previously submitted labels persist; the rest remain editable", async () => {
    const { server, controller } = setup(6);
    await controller.start("et", 3);
    for (const id of ["et-0", "et-1", "et-2"]) {
      markPlayed(controller.state, id);
      selectVerdict(controller.state, id, "target_speech");
    }
    await controller.submit("et-0");
    await controller.submit("et-1");
    server.failNext = 1; // the network drops here
    const failed = await controller.submit("et-2");
    expect(failed.kind).toBe("failed");
    expect(server.labels.map((l) => l.segmentId)).toEqual(["et-0", "et-1"]);
    expect(controller.state.cards[2].status).toBe("pending");
    expect(controller.completedCount()).toBe(2);
  });
});

describe("server reconciliation", () => {
  it("batch completion equals the server-side label count", async () => {
    const { server, controller } = setup(10);
    await controller.start("et", 5);
    for (const card of controller.state.cards) {
      markPlayed(controller.state, card.segmentId);
      selectVerdict(controller.state, card.segmentId, "target_speech");
      await controller.submit(card.segmentId);
    }
    expect(controller.completedCount()).toBe(10);
    expect(server.labels).toHaveLength(10);
    expect(controller.labelsStored).toBe(server.labels.length);
  });
});
