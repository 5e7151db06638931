export type Scheduler = (fn: () => void, ms: number) => unknown;
export type Canceller = (handle: unknown) => void;

/**
 * Steps through denoising frames once, newest last, then stops.  The
 * timer pair is injectable; the browser passes setTimeout/clearTimeout.
 */
export class FramePlayer {
  private index = 0;
  private handle: unknown = null;

  constructor(
    private frames: number[][][],
    private onFrame: (frame: number[][], index: number) => void,
    private schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    private cancel: Canceller = (h) => clearTimeout(h as number),
  ) {}

  get length(): number {
    return this.frames.length;
  }

  get playing(): boolean {
    return this.handle !== null;
  }

  play(intervalMs: number): void {
    if (this.frames.length === 0 || this.playing) return;
    this.index = 0;
    const tick = (): void => {
      this.onFrame(this.frames[this.index], this.index);
      this.index += 1;
      if (this.index < this.frames.length) {
        this.handle = this.schedule(tick, intervalMs);
      } else {
        this.handle = null;
      }
    };
    this.handle = this.schedule(tick, 0);
  }

  stop(): void {
    if (this.handle !== null) {
      this.cancel(this.handle);
      this.handle = null;
    }
  }
}
