// Scripted browser session: the full 10-clip labeling flow driven through
// the rendered DOM and keyboard shortcuts against the mock server.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ValidationApp } from "../src/app.js";
import type { ClipPlayer, PlayerFactory } from "../src/audio.js";

import { MockServer } from "./mock_server.js";

class FakePlayer implements ClipPlayer {
  playing = false;
  private started = false;
  private callbacks: (() => void)[] = [];

  toggle(): void {
    this.playing = !this.playing;
    if (this.playing && !this.started) {
      this.started = true;
      for (const cb of this.callbacks) cb();
    }
  }

  stop(): void {
    this.playing = false;
  }

  onFirstPlay(cb: () => void): void {
    this.callbacks.push(cb);
  }
}

const fakeFactory: PlayerFactory = () => new FakePlayer();

function key(k: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key: k, bubbles: true }));
}

async function settle(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

function setup(nClips = 10) {
  document.body.innerHTML = '<div id="app"></div>';
  const server = new MockServer(["et", "fi"], {
    et: Array.from({ length: nClips }, (_, i) => `et-${i}`),
    fi: ["fi-0"],
  });
  const api = new ApiClient("test-token", "", server.fetch);
  const app = new ValidationApp({
    api,
    root: document.getElementById("app") as HTMLElement,
    playerFactory: fakeFactory,
  });
  return { server, app };
}

describe("scripted browser session", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("labels a full 10-clip batch end to end via the keyboard", async () => {
    const { server, app } = setup(10);
    await app.showLanguagePicker();
    const select = document.getElementById("language") as HTMLSelectElement;
    expect(Array.from(select.options).map((o) => o.value)).toEqual(["et", "fi"]);
    select.value = "et";
    (document.getElementById("proficiency") as HTMLSelectElement).value = "4";
    (document.getElementById("start") as HTMLButtonElement).click();
    await settle();

    expect(document.querySelectorAll(".card")).toHaveLength(10);

    for (let i = 0; i < 10; i++) {
      key(" "); // play the active card
      key(String((i % 4) + 1)); // pick a verdict
      key("Enter"); // submit
      await settle();
      key("ArrowDown");
    }

    expect(server.labels).toHaveLength(10);
    expect(app.controller.completedCount()).toBe(10);
    expect(document.getElementById("progress")?.textContent).toBe("10 / 10 labeled");
    expect(document.getElementById("next-batch")).not.toBeNull();
    // completion equals the server-side label count for the session
    expect(app.controller.labelsStored).toBe(server.labels.length);
  });

  it("makes unplayed-card submission impossible", async () => {
    const { server, app } = setup(3);
    await app.startFlow("et", 4);
    key("1"); // verdict without ever playing
    key("Enter");
    await settle();
    expect(server.labelRequests()).toHaveLength(0);
    expect(server.labels).toHaveLength(0);
    expect(app.controller.state.cards[0].status).toBe("pending");
    // the submit button is rendered disabled too
    const submit = document.querySelector(".card .submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
  });

  it("reconciles a forced conflict without duplicates", async () => {
    const { server, app } = setup(3);
    await app.startFlow("et", 4);
    // a concurrent session of the same annotator labels the issued clip first
    server.labels.push({ segmentId: "et-0", annotatorId: "annotator-1", verdict: "non_speech" });
    key(" ");
    key("2");
    key("Enter");
    await settle();
    const card = app.controller.state.cards[0];
    expect(card.status).toBe("done");
    expect(card.conflicted).toBe(true);
    expect(server.labels.filter((l) => l.segmentId === "et-0")).toHaveLength(1);
    const item = document.querySelector('[data-segment="et-0"] .submit') as HTMLButtonElement;
    expect(item.textContent).toBe("Already labeled");
  });

  it("shows a retry banner on API failure without losing data", async () => {
    const { server, app } = setup(4);
    await app.startFlow("et", 4);
    key(" ");
    key("1");
    key("Enter");
    await settle();
    expect(server.labels).toHaveLength(1);

    key("ArrowDown");
    key(" ");
    key("3");
    server.failNext = 1;
    key("Enter");
    await settle();
    expect(document.getElementById("error-banner")).not.toBeNull();
    expect(server.labels).toHaveLength(1); // nothing lost, nothing duplicated
    const card = app.controller.state.cards[1];
    expect(card.status).toBe("pending");
    expect(card.selected).toBe("non_speech");

    (document.getElementById("retry") as HTMLButtonElement).click();
    await settle();
    expect(server.labels).toHaveLength(2);
    expect(document.getElementById("error-banner")).toBeNull();
  });

  it("shows the exhausted state when no clips remain", async () => {
    const { app } = setup(10);
    await app.startFlow("fi", 2);
    key(" ");
    key("1");
    key("Enter");
    await settle();
    (document.getElementById("next-batch") as HTMLButtonElement).click();
    await settle();
    expect(document.getElementById("empty")?.textContent).toContain("No clips remaining");
  });
});
