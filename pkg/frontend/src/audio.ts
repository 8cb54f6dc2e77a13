// Clip playback wrapper. The factory indirection lets tests substitute a
// fake element; the app only cares about play/pause and played-once state.

export interface ClipPlayer {
  toggle(): void;
  stop(): void;
  readonly playing: boolean;
  onFirstPlay(cb: () => void): void;
}

export type PlayerFactory = (url: string) => ClipPlayer;

class HtmlAudioPlayer implements ClipPlayer {
  private audio: HTMLAudioElement;
  private started = false;
  private callbacks: (() => void)[] = [];
  playing = false;

  constructor(url: string) {
    this.audio = new Audio(url);
    this.audio.addEventListener("ended", () => {
      this.playing = false;
    });
  }

  toggle(): void {
    if (this.playing) {
      this.audio.pause();
      this.playing = false;
      return;
    }
    void this.audio.play();
    this.playing = true;
    if (!this.started) {
      this.started = true;
      for (const cb of this.callbacks) cb();
    }
  }

  stop(): void {
    if (this.playing) {
      this.audio.pause();
      this.playing = false;
    }
  }

  onFirstPlay(cb: () => void): void {
    this.callbacks.push(cb);
  }
}

export const htmlAudioFactory: PlayerFactory = (url) => new HtmlAudioPlayer(url);
