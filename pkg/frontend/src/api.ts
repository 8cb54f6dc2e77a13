// Typed client for the validation service HTTP+JSON API.

export type Verdict = "target_speech" | "other_language" | "non_speech" | "unsure";

export interface SessionInfo {
  session_id: string;
  annotator_id: string;
  language: string;
  proficiency: number;
}

export interface ClipRef {
  segment_id: string;
  audio_url: string;
}

export interface ClipBatch {
  clips: ClipRef[];
  exhausted: boolean;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(message, 409);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly token: string,
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init: RequestInit = {}): Promise<unknown> {
    const headers: Record<string, string> = {
      ...(init.headers as Record<string, string> | undefined),
      Authorization: `Bearer ${this.token}`,
    };
    if (init.body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, { ...init, headers });
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, 0);
    }
    if (resp.status === 409) {
      throw new ConflictError(await errorText(resp));
    }
    if (!resp.ok) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    return resp.json();
  }

  async languages(): Promise<string[]> {
    const data = (await this.request("/languages")) as { languages: string[] };
    return data.languages;
  }

  async createSession(language: string, proficiency: number): Promise<SessionInfo> {
    return (await this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ language, proficiency }),
    })) as SessionInfo;
  }

  async nextClips(sessionId: string): Promise<ClipBatch> {
    return (await this.request(`/sessions/${sessionId}/clips`)) as ClipBatch;
  }

  async submitLabel(sessionId: string, segmentId: string, verdict: Verdict): Promise<void> {
    await this.request(`/sessions/${sessionId}/labels`, {
      method: "POST",
      body: JSON.stringify({ segment_id: segmentId, verdict }),
    });
  }

  audioUrl(path: string): string {
    return this.baseUrl + path;
  }
}

async function errorText(resp: Response): Promise<string> {
  try {
    const data = (await resp.json()) as { error?: string; detail?: unknown };
    return data.error ?? JSON.stringify(data.detail ?? data);
  } catch {
    return `HTTP ${resp.status}`;
  }
}
