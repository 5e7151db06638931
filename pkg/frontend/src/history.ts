import type { ModelKind } from "./api.js";

export type HistoryEntry = {
  prompt: string;
  model: ModelKind;
  seed: number;
  steps: number | null;
  grid: number[][];
  timestamp: number;
  alignerScore?: number;
};

const STORAGE_KEY = "mapsmith-history-v1";
const MAX_ENTRIES = 100;

export type StorageLike = {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
};

const load = (storage: StorageLike): HistoryEntry[] => {
  try {
    const raw = storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    const parsed = JSON.parse(raw);
    return Array.isArray(parsed) ? (parsed as HistoryEntry[]) : [];
  } catch {
    return [];
  }
};

/**
 * Session history: append-only while the tab lives, persisted so a
 * reload gets the gallery back.  Oldest entries fall off past the cap.
 */
export class HistoryStore {
  private entries: HistoryEntry[];

  constructor(private storage: StorageLike) {
    this.entries = load(storage);
  }

  list(): HistoryEntry[] {
    return this.entries.slice();
  }

  add(entry: HistoryEntry): void {
    this.entries = [...this.entries, entry].slice(-MAX_ENTRIES);
    this.save();
  }

  get(index: number): HistoryEntry | undefined {
    return this.entries[index];
  }

  setScore(index: number, score: number): void {
    const entry = this.entries[index];
    if (!entry) return;
    entry.alignerScore = score;
    this.save();
  }

  clear(): void {
    this.entries = [];
    try {
      this.storage.removeItem(STORAGE_KEY);
    } catch {
      // storage may be unavailable; in-memory state is already empty
    }
  }

  private save(): void {
    try {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(this.entries));
    } catch {
      // quota or private mode: the session keeps working unpersisted
    }
  }
}
