import type { Api, AnalyzeResponse, ModelKind, TileInfo } from "./api.js";
import type { HistoryStore } from "./history.js";

/** Public API surface, so tests can pass a plain-object double. */
export type ApiClient = Pick<Api, "tiles" | "generate" | "analyze" | "score">;

export type AppState = {
  prompt: string;
  model: ModelKind;
  seed: number;
  steps: number;
  dumpSteps: boolean;
  busy: boolean;
  grid: number[][] | null;
  frames: number[][][] | null;
  durationMs: number | null;
  analysis: AnalyzeResponse | null;
  overlayOn: boolean;
  error: string | null;
};

export type AppDeps = {
  api: ApiClient;
  history: HistoryStore;
  random?: () => number;
  now?: () => number;
};

const DEFAULT_STEPS = 50;

/**
 * The designer loop, free of DOM concerns: prompt in, map out, inspect,
 * tweak, repeat.  One generation in flight at a time; the analysis
 * cache is invalidated whenever the grid changes.
 */
export class AppController {
  state: AppState = {
    prompt: "",
    model: "fdm",
    seed: 0,
    steps: DEFAULT_STEPS,
    dumpSteps: false,
    busy: false,
    grid: null,
    frames: null,
    durationMs: null,
    analysis: null,
    overlayOn: false,
    error: null,
  };
  palette: TileInfo[] = [];
  onChange: (() => void) | null = null;

  private api: ApiClient;
  private history: HistoryStore;
  private random: () => number;
  private now: () => number;

  constructor(deps: AppDeps) {
    this.api = deps.api;
    this.history = deps.history;
    this.random = deps.random ?? Math.random;
    this.now = deps.now ?? Date.now;
  }

  async init(): Promise<void> {
    this.palette = await this.api.tiles();
    this.notify();
  }

  setPrompt(prompt: string): void {
    this.state.prompt = prompt;
    this.notify();
  }

  setModel(model: ModelKind): void {
    this.state.model = model;
    this.notify();
  }

  setSeed(seed: number): void {
    this.state.seed = seed;
    this.notify();
  }

  setSteps(steps: number): void {
    this.state.steps = steps;
    this.notify();
  }

  setDumpSteps(on: boolean): void {
    this.state.dumpSteps = on;
    this.notify();
  }

  randomizeSeed(): number {
    this.state.seed = Math.floor(this.random() * 2 ** 31);
    this.notify();
    return this.state.seed;
  }

  /** One generation at a time; a second call while busy is a no-op. */
  async generate(): Promise<boolean> {
    if (this.state.busy || !this.state.prompt.trim()) return false;
    this.state.busy = true;
    this.state.error = null;
    this.notify();
    try {
      const ddm = this.state.model === "ddm";
      const res = await this.api.generate({
        prompt: this.state.prompt,
        model: this.state.model,
        seed: this.state.seed,
        ...(ddm ? { steps: this.state.steps } : {}),
        ...(ddm && this.state.dumpSteps ? { dump_steps: true } : {}),
      });
      this.state.grid = res.grid;
      this.state.frames = res.frames ?? null;
      this.state.durationMs = res.duration_ms;
      this.state.analysis = null;
      this.state.overlayOn = false;
      this.history.add({
        prompt: this.state.prompt,
        model: this.state.model,
        seed: this.state.seed,
        steps: ddm ? this.state.steps : null,
        grid: res.grid,
        timestamp: this.now(),
      });
      return true;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
      return false;
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  /** Fetch metadata lazily, then flip the overlay without refetching. */
  async toggleOverlay(): Promise<void> {
    if (!this.state.grid) return;
    if (this.state.overlayOn) {
      this.state.overlayOn = false;
      this.notify();
      return;
    }
    if (!this.state.analysis) {
      try {
        this.state.analysis = await this.api.analyze(this.state.grid);
      } catch (err) {
        this.state.error = err instanceof Error ? err.message : String(err);
        this.notify();
        return;
      }
    }
    this.state.overlayOn = true;
    this.notify();
  }

  /** Put a past generation back into the controls for iteration. */
  restore(index: number): boolean {
    const entry = this.history.get(index);
    if (!entry) return false;
    this.state.prompt = entry.prompt;
    this.state.model = entry.model;
    this.state.seed = entry.seed;
    if (entry.steps !== null) this.state.steps = entry.steps;
    this.state.grid = entry.grid;
    this.state.frames = null;
    this.state.analysis = null;
    this.state.overlayOn = false;
    this.notify();
    return true;
  }

  async scoreEntry(index: number): Promise<number | null> {
    const entry = this.history.get(index);
    if (!entry) return null;
    try {
      const score = await this.api.score(entry.prompt, entry.grid);
      this.history.setScore(index, score);
      this.notify();
      return score;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
      this.notify();
      return null;
    }
  }

  clearHistory(): void {
    this.history.clear();
    this.notify();
  }

  listHistory() {
    return this.history.list();
  }

  private notify(): void {
    if (this.onChange) this.onChange();
  }
}
