/** Typed client for the generation server's JSON API. */

export type ModelKind = "fdm" | "ddm";

export type TileInfo = {
  id: number;
  name: string;
  color: [number, number, number];
  char: string;
  class: "walkable" | "hazard" | "solid";
};

export type GenerateRequest = {
  prompt: string;
  model: ModelKind;
  seed: number;
  steps?: number;
  dump_steps?: boolean;
};

export type GenerateResponse = {
  grid: number[][];
  ascii: string;
  duration_ms: number;
  frames?: number[][][];
};

export type RoomMeta = {
  cells: [number, number][];
  direction: string;
  census: [string, number][];
};

export type AnalyzeResponse = {
  meta: {
    rooms: RoomMeta[];
    corridors: { cells: [number, number][] }[];
    connected_pairs: { rooms: [number, number]; path: [number, number][] }[];
    census: [string, number][];
  };
  connectivity: { components: number; largest: number; fragmentation: number };
};

export type HealthResponse = { status: string; models: string[] };

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * All methods resolve to parsed JSON or reject with ApiError.  The
 * fetch implementation is injectable so tests can run without a
 * browser or a server.
 */
export class Api {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, body?: unknown): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.baseUrl + path, body === undefined
        ? undefined
        : {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
          });
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, 0);
    }
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const parsed = (await res.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(detail, res.status);
    }
    return (await res.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("/api/health");
  }

  tiles(): Promise<TileInfo[]> {
    return this.request("/api/tiles");
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.request("/api/generate", req);
  }

  analyze(grid: number[][]): Promise<AnalyzeResponse> {
    return this.request("/api/analyze", { grid });
  }

  async score(prompt: string, grid: number[][]): Promise<number> {
    const res = await this.request<{ aligner_score: number }>("/api/score", {
      prompt,
      grid,
    });
    return res.aligner_score;
  }
}
