// DOM wiring: language/proficiency picker, the clip-card batch view, a
// progress counter, an error banner with retry, and keyboard-first controls
// (space = play/pause, 1-4 = verdict, enter = submit, arrows = move).

import { ApiClient } from "./api.js";
import { ClipPlayer, PlayerFactory, htmlAudioFactory } from "./audio.js";
import { BatchController } from "./controller.js";
import { VERDICT_KEYS, VERDICT_LABELS, canSubmit, markPlayed, moveActive, selectVerdict } from "./state.js";
import type { Verdict } from "./api.js";

export interface AppOptions {
  api: ApiClient;
  root: HTMLElement;
  playerFactory?: PlayerFactory;
  document?: Document;
}

export class ValidationApp {
  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly playerFactory: PlayerFactory;
  readonly controller: BatchController;
  private players = new Map<string, ClipPlayer>();
  private banner: { message: string; retry: () => Promise<void> } | null = null;

  constructor(options: AppOptions) {
    this.api = options.api;
    this.root = options.root;
    this.doc = options.document ?? document;
    this.playerFactory = options.playerFactory ?? htmlAudioFactory;
    this.controller = new BatchController(this.api);
    this.doc.addEventListener("keydown", (event) => this.onKey(event as KeyboardEvent));
  }

  async showLanguagePicker(): Promise<void> {
    let languages: string[];
    try {
      languages = await this.api.languages();
    } catch (err) {
      this.showBanner(`could not load languages: ${String(err)}`, () => this.showLanguagePicker());
      return;
    }
    this.banner = null;
    this.root.innerHTML = "";
    const form = this.el("form", "picker");
    const langLabel = this.el("label");
    langLabel.textContent = "Language to validate";
    const langSelect = this.el("select") as HTMLSelectElement;
    langSelect.id = "language";
    for (const code of languages) {
      const opt = this.el("option") as HTMLOptionElement;
      opt.value = code;
      opt.textContent = code;
      langSelect.append(opt);
    }
    const profLabel = this.el("label");
    profLabel.textContent = "Your proficiency (1-5)";
    const profSelect = this.el("select") as HTMLSelectElement;
    profSelect.id = "proficiency";
    for (let level = 1; level <= 5; level++) {
      const opt = this.el("option") as HTMLOptionElement;
      opt.value = String(level);
      opt.textContent = String(level);
      profSelect.append(opt);
    }
    const start = this.el("button") as HTMLButtonElement;
    start.id = "start";
    start.type = "submit";
    start.textContent = "Start validating";
    form.append(langLabel, langSelect, profLabel, profSelect, start);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.startFlow(langSelect.value, Number(profSelect.value));
    });
    this.root.append(form);
  }

  async startFlow(language: string, proficiency: number): Promise<void> {
    try {
      await this.controller.start(language, proficiency);
    } catch (err) {
      this.showBanner(`could not start a session: ${String(err)}`, () =>
        this.startFlow(language, proficiency),
      );
      return;
    }
    this.banner = null;
    this.players.clear();
    this.renderBatch();
  }

  private async nextBatch(): Promise<void> {
    try {
      await this.controller.loadBatch();
    } catch (err) {
      this.showBanner(`could not load clips: ${String(err)}`, () => this.nextBatch());
      return;
    }
    this.banner = null;
    this.players.clear();
    this.renderBatch();
  }

  renderBatch(): void {
    const state = this.controller.state;
    this.root.innerHTML = "";
    if (this.banner) {
      const div = this.el("div", "banner");
      div.id = "error-banner";
      div.textContent = this.banner.message;
      const retry = this.el("button") as HTMLButtonElement;
      retry.id = "retry";
      retry.textContent = "Retry";
      const action = this.banner.retry;
      retry.addEventListener("click", () => void action());
      div.append(retry);
      this.root.append(div);
    }
    if (state.cards.length === 0) {
      const empty = this.el("p", "empty");
      empty.id = "empty";
      empty.textContent = state.exhausted
        ? "No clips remaining in this language. Thank you!"
        : "No batch loaded.";
      this.root.append(empty);
      return;
    }
    const counter = this.el("p", "progress");
    counter.id = "progress";
    counter.textContent = `${this.controller.completedCount()} / ${state.cards.length} labeled`;
    this.root.append(counter);

    const list = this.el("ol", "cards");
    state.cards.forEach((card, index) => {
      const item = this.el("li", "card");
      item.dataset.segment = card.segmentId;
      if (index === state.active) item.classList.add("active");
      if (card.status === "done") item.classList.add("done");

      const title = this.el("span", "segment-id");
      title.textContent = card.segmentId;

      const play = this.el("button", "play") as HTMLButtonElement;
      play.textContent = card.played ? "Replay" : "Play";
      play.addEventListener("click", () => this.togglePlay(card.segmentId));

      const verdicts = this.el("span", "verdicts");
      (Object.entries(VERDICT_KEYS) as [string, Verdict][]).forEach(([key, verdict]) => {
        const btn = this.el("button", "verdict") as HTMLButtonElement;
        btn.dataset.verdict = verdict;
        btn.textContent = `${key}: ${VERDICT_LABELS[verdict]}`;
        btn.disabled = card.status !== "pending";
        if (card.selected === verdict) btn.classList.add("selected");
        btn.addEventListener("click", () => {
          selectVerdict(this.controller.state, card.segmentId, verdict);
          this.renderBatch();
        });
        verdicts.append(btn);
      });

      const submit = this.el("button", "submit") as HTMLButtonElement;
      submit.textContent = card.status === "done" ? (card.conflicted ? "Already labeled" : "Saved") : "Submit";
      submit.disabled = !canSubmit(card);
      submit.addEventListener("click", () => void this.submitCard(card.segmentId));

      item.append(title, play, verdicts, submit);
      list.append(item);
    });
    this.root.append(list);

    if (this.controller.state.cards.every((c) => c.status === "done")) {
      const next = this.el("button", "next-batch") as HTMLButtonElement;
      next.id = "next-batch";
      next.textContent = "Next batch";
      next.addEventListener("click", () => void this.nextBatch());
      this.root.append(next);
    }
  }

  togglePlay(segmentId: string): void {
    const state = this.controller.state;
    for (const [other, player] of this.players) {
      if (other !== segmentId) player.stop();
    }
    let player = this.players.get(segmentId);
    if (!player) {
      const card = state.cards.find((c) => c.segmentId === segmentId);
      if (!card) return;
      player = this.playerFactory(this.api.audioUrl(card.audioUrl));
      player.onFirstPlay(() => {
        markPlayed(state, segmentId);
        this.renderBatch();
      });
      this.players.set(segmentId, player);
    }
    player.toggle();
  }

  async submitCard(segmentId: string): Promise<void> {
    const outcome = await this.controller.submit(segmentId);
    if (outcome.kind === "failed") {
      this.showBanner(`submit failed: ${outcome.message}`, async () => {
        await this.submitCard(segmentId);
      });
    } else if (outcome.kind !== "rejected") {
      this.banner = null;
    }
    this.renderBatch();
  }

  private onKey(event: KeyboardEvent): void {
    const state = this.controller.state;
    if (state.cards.length === 0) return;
    const active = state.cards[state.active];
    if (event.key === " ") {
      event.preventDefault();
      this.togglePlay(active.segmentId);
    } else if (event.key in VERDICT_KEYS) {
      selectVerdict(state, active.segmentId, VERDICT_KEYS[event.key]);
      this.renderBatch();
    } else if (event.key === "Enter") {
      event.preventDefault();
      void this.submitCard(active.segmentId);
    } else if (event.key === "ArrowDown" || event.key === "j") {
      moveActive(state, 1);
      this.renderBatch();
    } else if (event.key === "ArrowUp" || event.key === "k") {
      moveActive(state, -1);
      this.renderBatch();
    }
  }

  private showBanner(message: string, retry: () => Promise<void>): void {
    this.banner = { message, retry };
    this.renderBatch();
  }

  private el(tag: string, className?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    return node;
  }
}
