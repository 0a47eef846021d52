// Typed client for the harvest service. All numbers shown anywhere in the
// console come out of these responses untouched; the client never computes
// metrics of its own.

import type { ServerMode } from "./modes.js";

export interface Detection {
  stage: string;
  confidence: number;
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface AnalyzeResponse {
  sample_id: string;
  captured_at: string;
  mode: ServerMode;
  detections: Detection[];
  counts: Record<string, number>;
  ripeness_percent: number | null;
  unripeness_percent: number | null;
}

export interface TimelineRow {
  captured_at: string;
  mode: string;
  counts: Record<string, number>;
  ripeness_percent: number | null;
  unripeness_percent: number | null;
}

export interface SessionInfo {
  session_id: string;
  name: string;
  created_at: string;
  n_samples: number;
}

/** Server-reported failure; carries the response's error JSON verbatim. */
export class ApiError extends Error {
  readonly status: number;
  readonly error: string;
  readonly detail: string;

  constructor(status: number, error: string, detail: string) {
    super(`${error}: ${detail}`);
    this.status = status;
    this.error = error;
    this.detail = detail;
  }
}

async function raiseFor(resp: Response): Promise<void> {
  if (resp.ok) return;
  let error = `http_${resp.status}`;
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body?.error === "string") error = body.error;
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, error, detail);
}

export interface AnalyzeRequest {
  image: Blob;
  imageName?: string;
  mode: ServerMode;
  capturedAt?: string;
  detector?: "classical" | "external";
  predictions?: Blob;
}

/** The exact multipart payload /analyze receives; exported for tests. */
export function buildAnalyzeForm(req: AnalyzeRequest): FormData {
  const form = new FormData();
  form.append("image", req.image, req.imageName ?? "capture.png");
  form.append("mode", req.mode);
  if (req.capturedAt) form.append("captured_at", req.capturedAt);
  if (req.detector) form.append("detector", req.detector);
  if (req.predictions) form.append("predictions", req.predictions, "predictions.txt");
  return form;
}

export class HarvestClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(this.url("/health"));
      return resp.ok;
    } catch {
      return false;
    }
  }

  async listSessions(): Promise<SessionInfo[]> {
    const resp = await fetch(this.url("/sessions"));
    await raiseFor(resp);
    return (await resp.json()).sessions;
  }

  async createSession(name: string): Promise<string> {
    const resp = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    });
    await raiseFor(resp);
    return (await resp.json()).session_id;
  }

  async analyze(sessionId: string, req: AnalyzeRequest): Promise<AnalyzeResponse> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/analyze`), {
      method: "POST",
      body: buildAnalyzeForm(req),
    });
    await raiseFor(resp);
    return resp.json();
  }

  async timeline(sessionId: string,
                 mode: "binary" | "multiclass"): Promise<TimelineRow[]> {
    const resp = await fetch(
      this.url(`/sessions/${sessionId}/timeline?mode=${mode}`));
    await raiseFor(resp);
    return resp.json();
  }
}
